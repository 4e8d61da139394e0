#pragma once

// Identifier removal before anything leaves the host, and the inverse
// (rehydration) used only at display time.
//
// Scrubbing replaces IPv4/IPv6/MAC addresses, port suffixes and catalog-known
// names with placeholders of the form `[[KIND-n]]`. The RedactionMap records
// every substitution so that rehydrate(scrub(t)) == t.

#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "chatids/alert_ingest.hpp"
#include "chatids/common.hpp"

namespace chatids {

inline constexpr std::string_view kPseudonym = "the user";
inline constexpr std::string_view kGenericDeviceClass = "a smart home device";

enum class RedactionKind { IPv4, IPv6, MAC, Hostname, DeviceName, UserName, Port };

std::string_view to_string(RedactionKind kind);
std::optional<RedactionKind> parse_redaction_kind(std::string_view text);

struct RedactionEntry {
    std::string placeholder;
    std::string original;
    RedactionKind kind = RedactionKind::IPv4;

    friend bool operator==(const RedactionEntry&, const RedactionEntry&) = default;
};

class RedactionMap {
public:
    /// Returns the placeholder already assigned to (kind, original) or assigns the next free one.
    const std::string& assign(RedactionKind kind, std::string_view original);

    /// Prevents assign() from handing out `[[KIND-n]]` for n <= index.
    void reserve_index(RedactionKind kind, int index);

    /// Re-inserts a previously serialized entry verbatim.
    void restore(RedactionEntry entry);

    const RedactionEntry* find_placeholder(std::string_view placeholder) const;
    const RedactionEntry* find_original(RedactionKind kind, std::string_view original) const;

    const std::vector<RedactionEntry>& entries() const { return entries_; }
    bool empty() const { return entries_.empty(); }
    std::size_t size() const { return entries_.size(); }

    friend bool operator==(const RedactionMap& a, const RedactionMap& b) {
        return a.entries_ == b.entries_;
    }

private:
    std::vector<RedactionEntry> entries_;
    std::unordered_map<std::string, std::size_t> by_placeholder_;
    std::unordered_map<std::string, std::size_t> by_original_;
    std::map<RedactionKind, int> next_index_;
};

struct KnownName {
    std::string name;
    RedactionKind kind = RedactionKind::Hostname;
};

/// Dictionary of names treated as identifiers. Lookup is case-insensitive.
class NameCatalog {
public:
    NameCatalog() = default;

    /// Lines `device: <name>`, `host: <name>` or `user: <name>`; `#` comments.
    static NameCatalog parse(std::istream& in);
    static NameCatalog load(const std::string& path);

    void add(RedactionKind kind, std::string_view name);

    /// Longest catalog name (from this catalog or `extra`) starting at `pos`.
    std::optional<KnownName> match_at(std::string_view text, std::size_t pos,
                                      std::span<const KnownName> extra = {}) const;

    const std::vector<KnownName>& names() const { return names_; }

private:
    std::vector<KnownName> names_;
    // first lowercase character -> indices sorted by descending length
    std::unordered_map<char, std::vector<std::size_t>> buckets_;
};

class UnknownPlaceholder : public Error {
public:
    explicit UnknownPlaceholder(const std::string& token)
        : Error("unknown placeholder " + token), token_(token) {}
    const std::string& token() const { return token_; }

private:
    std::string token_;
};

struct ScrubResult {
    std::string scrubbed;
    RedactionMap map;
};

ScrubResult scrub(std::string_view text, const NameCatalog& catalog);

/// Scrubs `text` reusing (and extending) an existing map, so one identifier
/// gets one placeholder across several fields or turns.
std::string scrub_into(std::string_view text, const NameCatalog& catalog, RedactionMap& map,
                       std::span<const KnownName> extra = {});

/// True if `text` contains no IPv4/IPv6/MAC token and no catalog name.
bool is_identifier_free(std::string_view text, const NameCatalog& catalog,
                        std::span<const KnownName> extra = {});

// Profiles ---------------------------------------------------------------------

enum class GeneralizationLevel { Model, Class, GenericDevice };

std::optional<GeneralizationLevel> parse_generalization(std::string_view text);

struct DeviceProfile {
    std::string device_ref;
    std::string display_name;                                 // "Philips Hue Bridge"
    std::string device_class;                                 // "a smart lighting bridge"
    GeneralizationLevel generalization_level = GeneralizationLevel::Class;
    std::vector<std::string> addresses;                       // local only; used to resolve alerts

    /// The descriptor that may leave the host.
    std::string outward_class() const;
};

struct UserProfile {
    std::string user_ref = "default";
    std::string display_name;
    std::string pseudonym{kPseudonym};
    std::vector<std::string> forbidden_terms;
    std::string locale = "en";
};

/// Model name -> generalized class phrase.
class DeviceClassTable {
public:
    /// Tab-separated `model<TAB>class phrase` lines.
    static DeviceClassTable parse(std::istream& in);
    static DeviceClassTable load(const std::string& path);

    void add(std::string_view model, std::string_view device_class);
    std::optional<std::string> lookup(std::string_view model) const;

private:
    std::unordered_map<std::string, std::string> classes_;  // lowercase model -> class
};

class DeviceInventory {
public:
    /// Tab-separated `device_ref<TAB>display_name<TAB>level<TAB>addresses[<TAB>class]`.
    /// Missing class falls back to the class table, then to the generic class.
    static DeviceInventory parse(std::istream& in, const DeviceClassTable& classes);
    static DeviceInventory load(const std::string& path, const DeviceClassTable& classes);

    void add(DeviceProfile profile);

    const DeviceProfile* find(std::string_view device_ref) const;
    const DeviceProfile* find_by_address(std::string_view address) const;
    /// device_ref if present, else first endpoint address owned by a known device.
    const DeviceProfile* resolve(const NormalizedAlert& alert) const;

    const std::vector<DeviceProfile>& devices() const { return devices_; }

private:
    std::vector<DeviceProfile> devices_;
};

// Alert anonymization --------------------------------------------------------

enum class DeviceResolution { Resolved, NoDevice, UnknownDevice };

struct AnonymizedAlert {
    NormalizedAlert inner;       // scrubbed text, endpoints and device cleared
    RedactionMap redaction;      // local only
    std::string device_class;
    bool is_decoy = false;
    DeviceResolution resolution = DeviceResolution::NoDevice;  // local only
};

/// `device` may be null. An alert with a device_ref that `device` does not
/// resolve is still anonymized, with the generic device class (UnknownDevice).
AnonymizedAlert anonymize_alert(const NormalizedAlert& alert, const DeviceProfile* device,
                                const UserProfile& user, const NameCatalog& catalog);

// Rehydration ----------------------------------------------------------------

/// Exact inverse of scrubbing. Throws UnknownPlaceholder.
std::string rehydrate(std::string_view text, const RedactionMap& map);

struct RehydrateOptions {
    bool personalize_user = true;
    /// Leave placeholders absent from the map untouched instead of throwing.
    bool keep_unknown = false;
};

/// Restores placeholders, then swaps the device class for the device's
/// display name and (optionally) the pseudonym for the user's name.
/// Substitutions never touch restored original values.
std::string rehydrate(std::string_view text, const RedactionMap& map, const DeviceProfile* device,
                      const UserProfile* user, const RehydrateOptions& opts = {});

}  // namespace chatids
