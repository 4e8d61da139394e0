#pragma once

// Durable cache of explanations plus the alert, session and audit records of
// a running gateway.
//
// On disk: `<dir>/YYYY-MM-DD.log` files of records, each framed as
// [u32 length][JSON payload][u32 crc32 of payload] (little endian), and an
// `<dir>/index` snapshot that lets startup skip already-indexed bytes.
// Records are append-only; the newest record for a key wins.

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "chatids/anonymizer.hpp"
#include "chatids/rubric.hpp"

namespace chatids {

struct CacheKey {
    std::string alert_fingerprint;
    int template_version = 0;
    int persona_version = 0;
    std::string device_class;

    std::string str() const;
    friend bool operator==(const CacheKey&, const CacheKey&) = default;
};

struct ExplanationSections {
    std::optional<TextSpan> description;
    std::optional<TextSpan> consequences;
    std::vector<std::string> instructions;
};

struct Explanation {
    std::string explanation_id;
    std::string alert_fingerprint;
    std::string text;  // anonymized form
    ExplanationSections sections;
    std::optional<RubricScore> rubric;
    int template_version = 0;
    int persona_version = 0;
    std::string device_class;
    Timestamp created_at{};
    std::string backend_id;
    bool is_decoy = false;
};

enum class AlertStatus { Queued, Explained, Failed };

std::string_view to_string(AlertStatus s);

/// Local bookkeeping for one ingested alert. Holds the redaction map, so it
/// never leaves the host.
struct AlertRecord {
    std::string alert_id;
    AnonymizedAlert alert;
    std::optional<std::string> device_ref;
    UrgencyLevel urgency = UrgencyLevel::Informational;
    AlertStatus status = AlertStatus::Queued;
    std::optional<CacheKey> cache_key;
    std::string error;
    Timestamp received_at{};
    Timestamp updated_at{};
};

enum class SessionState { Open, Resolved, Expired };
enum class SessionOutcome { ActionTaken, DismissedAsFalseAlert };

std::string_view to_string(SessionState s);
std::string_view to_string(SessionOutcome o);
std::optional<SessionOutcome> parse_session_outcome(std::string_view text);

struct SessionRecord {
    std::string session_id;
    std::string alert_id;
    std::string user_ref;
    std::vector<ConversationTurn> turns;
    SessionState state = SessionState::Open;
    std::optional<SessionOutcome> outcome;
    std::size_t window_limit = 10;
    Timestamp last_activity{};
};

struct AuditRecord {
    std::string event;  // "session_resolved", ...
    std::string subject_id;
    std::string detail;
    Timestamp at{};
};

class StorageFull : public Error {
public:
    using Error::Error;
};

class StorageCorrupt : public Error {
public:
    using Error::Error;
};

struct StoreOptions {
    bool fsync = true;
    /// 0 = unlimited.
    std::uintmax_t quota_bytes = 0;
    /// Rewrite the index snapshot after this many appended records, or after
    /// half the live record count once the store is larger.
    std::size_t snapshot_every = 64;
};

struct StoreStats {
    std::size_t records = 0;
    std::size_t corrupt_records = 0;
    std::size_t torn_tails = 0;
    std::uintmax_t bytes = 0;
};

class ExplanationStore {
public:
    explicit ExplanationStore(std::filesystem::path dir, StoreOptions opts = {});
    ~ExplanationStore();

    ExplanationStore(const ExplanationStore&) = delete;
    ExplanationStore& operator=(const ExplanationStore&) = delete;

    /// Decoy explanations are returned too; callers filter on is_decoy.
    std::optional<Explanation> get(const CacheKey& key) const;

    /// Durable before returning. First writer wins: a second put for the same
    /// key stores nothing and returns the existing id. Empty text is rejected.
    std::string put(const CacheKey& key, Explanation e);

    /// Clears the decoy flag of a cached explanation (a real alert hit it),
    /// attaching `rubric` when the record has none.
    std::optional<Explanation> promote(const CacheKey& key, std::optional<RubricScore> rubric = std::nullopt);

    void put_alert(const AlertRecord& r);
    std::optional<AlertRecord> find_alert(const std::string& alert_id) const;
    /// Newest first.
    std::vector<AlertRecord> alerts() const;

    void put_session(const SessionRecord& s);
    std::optional<SessionRecord> find_session(const std::string& session_id) const;

    void append_audit(const AuditRecord& a);
    std::vector<AuditRecord> audit_log() const;

    std::size_t explanation_count(bool include_decoys) const;

    /// Every readable record, in file order, as stored.
    std::vector<nlohmann::json> dump() const;

    /// Writes the index snapshot now.
    void checkpoint();

    StoreStats stats() const;
    const std::filesystem::path& dir() const { return dir_; }

private:
    void load();
    void scan_file(const std::filesystem::path& file, std::uintmax_t from);
    void apply(const nlohmann::json& record);
    void append(const nlohmann::json& record);
    void write_snapshot_locked();

    std::filesystem::path dir_;
    StoreOptions opts_;

    mutable std::shared_mutex index_mutex_;
    std::mutex write_mutex_;

    std::unordered_map<std::string, Explanation> explanations_;
    std::unordered_map<std::string, AlertRecord> alerts_;
    std::unordered_map<std::string, SessionRecord> sessions_;
    std::vector<AuditRecord> audit_;
    std::map<std::string, std::uintmax_t> indexed_bytes_;  // log file name -> bytes covered
    StoreStats stats_;
    std::size_t since_snapshot_ = 0;
};

// Serialization shared with the CLI and the HTTP layer.
nlohmann::json to_json(const RedactionMap& m);
RedactionMap redaction_map_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RubricScore& s);
RubricScore rubric_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Explanation& e);
Explanation explanation_from_json(const nlohmann::json& j);
nlohmann::json to_json(const AlertRecord& r);
AlertRecord alert_record_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SessionRecord& s);
SessionRecord session_from_json(const nlohmann::json& j);
nlohmann::json to_json(const AuditRecord& a);
AuditRecord audit_from_json(const nlohmann::json& j);

}  // namespace chatids
