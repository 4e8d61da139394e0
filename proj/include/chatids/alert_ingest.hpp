#pragma once

// Parsing and normalization of IDS alert records.
//
// Three wire formats are understood: Snort fast-alert text lines, Suricata EVE
// objects (one per line) and a generic key/value adapter used for Sigma and
// Yara match emitters. Parsers are pure; they either return a NormalizedAlert
// or throw IngestError.

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "chatids/common.hpp"

namespace chatids {

enum class SourceFormat { SnortFast, SuricataEve, Generic };

std::string_view to_string(SourceFormat f);
/// Accepts "snort-fast"/"snort", "suricata-eve"/"eve"/"suricata", "generic"/"sigma"/"yara".
std::optional<SourceFormat> parse_source_format(std::string_view tag);

struct SignatureId {
    std::uint32_t generator = 1;
    std::uint32_t signature = 0;
    std::uint32_t revision = 0;

    friend bool operator==(const SignatureId&, const SignatureId&) = default;
};

struct Endpoint {
    std::string address;
    std::optional<std::uint16_t> port;

    friend bool operator==(const Endpoint&, const Endpoint&) = default;
};

struct NormalizedAlert {
    std::string alert_id;
    SourceFormat source_format = SourceFormat::Generic;
    std::optional<SignatureId> signature_id;
    std::string message;
    Timestamp timestamp{};
    std::optional<Endpoint> src;
    std::optional<Endpoint> dst;
    std::string protocol;
    std::optional<std::string> device_ref;
    std::optional<int> priority;  // 1 = most severe
    std::string raw;
};

enum class UrgencyLevel { Informational = 0, Important = 1, Critical = 2 };

std::string_view to_string(UrgencyLevel level);
std::optional<UrgencyLevel> parse_urgency(std::string_view text);

enum class IngestErrorKind { MalformedRecord, InvalidTimestamp, NotAnAlert };

class IngestError : public Error {
public:
    IngestError(IngestErrorKind kind, std::size_t offset, const std::string& what)
        : Error(what), kind_(kind), offset_(offset) {}

    IngestErrorKind kind() const { return kind_; }
    /// Byte offset into the record where parsing stopped.
    std::size_t offset() const { return offset_; }

private:
    IngestErrorKind kind_;
    std::size_t offset_;
};

struct SnortParseOptions {
    /// Fast-alert lines carry no year.
    int base_year = 0;  // 0 = current UTC year

    int resolved_year() const;
};

NormalizedAlert parse_snort_fast(std::string_view line, const SnortParseOptions& opts = {});
NormalizedAlert parse_suricata_eve(std::string_view line);
NormalizedAlert parse_generic(const std::map<std::string, std::string>& record);
/// Generic records arrive on the wire as flat JSON objects.
NormalizedAlert parse_generic_line(std::string_view line);

/// Opaque, content-derived id: re-ingesting the same record yields the same id.
std::string make_alert_id(SourceFormat format, std::string_view raw);

struct SkippedRecord {
    std::string reason;
};

/// Exactly one of alert / skip / error per input line.
using ParseOutcome = std::variant<NormalizedAlert, SkippedRecord, IngestError>;

ParseOutcome try_parse(std::string_view line, SourceFormat format,
                       const SnortParseOptions& opts = {});

struct IngestStats {
    std::size_t lines = 0;
    std::size_t emitted = 0;
    std::size_t skipped = 0;
    std::size_t malformed = 0;
};

/// Pulls NormalizedAlerts out of a newline-delimited stream. Malformed records
/// are counted and logged; they never end the stream. next() returns nullopt
/// once the source is closed.
class AlertReader {
public:
    AlertReader(std::istream& source, SourceFormat format, SnortParseOptions opts = {});

    std::optional<NormalizedAlert> next();
    const IngestStats& stats() const { return stats_; }

private:
    std::istream& source_;
    SourceFormat format_;
    SnortParseOptions opts_;
    IngestStats stats_;
};

/// Drains a whole stream.
std::vector<NormalizedAlert> ingest_stream(std::istream& source, SourceFormat format,
                                           IngestStats* stats = nullptr,
                                           const SnortParseOptions& opts = {});

// Severity classification ----------------------------------------------------

struct PriorityRule {
    int min_priority = 1;
    std::optional<int> max_priority;  // inclusive; nullopt = unbounded
    UrgencyLevel level = UrgencyLevel::Informational;
};

struct PatternRule {
    std::string pattern;  // ECMAScript regex, matched case-insensitively
    UrgencyLevel level = UrgencyLevel::Informational;
    std::regex compiled;
};

class SeverityPolicy {
public:
    /// priority 1 -> Critical, 2-3 -> Important, >=4 -> Informational.
    static SeverityPolicy default_policy();

    /// Line format: `priority <min>[-[<max>]] <level>` or `pattern <level> <regex>`.
    /// `#` starts a comment line.
    static SeverityPolicy parse(std::istream& in);
    static SeverityPolicy load(const std::string& path);

    void add_priority_rule(int min, std::optional<int> max, UrgencyLevel level);
    void add_pattern_rule(const std::string& pattern, UrgencyLevel level);

    const std::vector<PriorityRule>& priority_rules() const { return priority_rules_; }
    const std::vector<PatternRule>& pattern_rules() const { return pattern_rules_; }

private:
    std::vector<PriorityRule> priority_rules_;
    std::vector<PatternRule> pattern_rules_;
};

/// The most severe level among all matching rules; Informational when nothing matches.
UrgencyLevel classify_severity(const NormalizedAlert& alert, const SeverityPolicy& policy);

}  // namespace chatids
