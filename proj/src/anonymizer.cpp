#include "chatids/anonymizer.hpp"

#include <arpa/inet.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>

#include <spdlog/spdlog.h>

namespace chatids {

std::string_view to_string(RedactionKind kind) {
    switch (kind) {
        case RedactionKind::IPv4: return "IPv4";
        case RedactionKind::IPv6: return "IPv6";
        case RedactionKind::MAC: return "MAC";
        case RedactionKind::Hostname: return "Hostname";
        case RedactionKind::DeviceName: return "DeviceName";
        case RedactionKind::UserName: return "UserName";
        case RedactionKind::Port: return "Port";
    }
    return "IPv4";
}

std::optional<RedactionKind> parse_redaction_kind(std::string_view text) {
    for (auto kind : {RedactionKind::IPv4, RedactionKind::IPv6, RedactionKind::MAC,
                      RedactionKind::Hostname, RedactionKind::DeviceName, RedactionKind::UserName,
                      RedactionKind::Port}) {
        if (text == to_string(kind)) return kind;
    }
    return std::nullopt;
}

namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_hex(char c) {
    return is_digit(c) || (c >= 'a' && c <= 'f') || (c >= 'A' && c <= 'F');
}

struct PlaceholderToken {
    RedactionKind kind;
    int index;
    std::size_t length;
};

/// Recognizes `[[KIND-n]]` at `pos`.
std::optional<PlaceholderToken> placeholder_at(std::string_view text, std::size_t pos) {
    if (text.substr(pos, 2) != "[[") return std::nullopt;
    std::size_t p = pos + 2;
    std::size_t kind_start = p;
    while (p < text.size() && is_alnum(text[p])) ++p;
    auto kind = parse_redaction_kind(text.substr(kind_start, p - kind_start));
    if (!kind || p >= text.size() || text[p] != '-') return std::nullopt;
    ++p;
    std::size_t digits_start = p;
    int index = 0;
    while (p < text.size() && is_digit(text[p]) && p - digits_start < 9) {
        index = index * 10 + (text[p] - '0');
        ++p;
    }
    if (p == digits_start || text.substr(p, 2) != "]]") return std::nullopt;
    return PlaceholderToken{*kind, index, p + 2 - pos};
}

std::size_t match_ipv4(std::string_view t, std::size_t i, std::size_t floor) {
    if (i > floor && is_digit(t[i - 1])) return 0;
    std::size_t p = i;
    for (int octet = 0; octet < 4; ++octet) {
        if (octet > 0) {
            if (p >= t.size() || t[p] != '.') return 0;
            ++p;
        }
        std::size_t start = p;
        int value = 0;
        while (p < t.size() && is_digit(t[p]) && p - start < 3) value = value * 10 + (t[p++] - '0');
        if (p == start || value > 255) return 0;
    }
    if (p < t.size() && is_digit(t[p])) return 0;
    return p - i;
}

std::size_t match_mac(std::string_view t, std::size_t i, std::size_t floor) {
    if (i + 17 > t.size()) return 0;
    if (i > floor && (is_hex(t[i - 1]) || t[i - 1] == ':' || t[i - 1] == '-')) return 0;
    char sep = t[i + 2];
    if (sep != ':' && sep != '-') return 0;
    for (std::size_t k = 0; k < 6; ++k) {
        std::size_t p = i + k * 3;
        if (!is_hex(t[p]) || !is_hex(t[p + 1])) return 0;
        if (k < 5 && t[p + 2] != sep) return 0;
    }
    std::size_t end = i + 17;
    if (end < t.size() && (is_hex(t[end]) || (t[end] == sep && end + 1 < t.size() && is_hex(t[end + 1])))) {
        return 0;
    }
    return 17;
}

bool valid_ipv6(std::string_view candidate) {
    if (candidate.size() > 45) return false;
    std::string s(candidate);
    unsigned char buf[16];
    if (inet_pton(AF_INET6, s.c_str(), buf) != 1) return false;
    // At least two non-empty groups (or an embedded IPv4 tail); rules out "::", "::1", "e::".
    int groups = 0;
    bool in_group = false;
    for (char c : candidate) {
        if (c == ':') {
            in_group = false;
        } else if (!in_group) {
            in_group = true;
            ++groups;
        }
    }
    return groups >= 2 || candidate.find('.') != std::string_view::npos;
}

std::size_t match_ipv6(std::string_view t, std::size_t i, std::size_t floor) {
    if (!is_hex(t[i]) && t[i] != ':') return 0;
    if (i > floor && (is_hex(t[i - 1]) || t[i - 1] == ':')) return 0;
    std::size_t end = i;
    int colons = 0;
    while (end < t.size() && (is_hex(t[end]) || t[end] == ':' || t[end] == '.') && end - i < 64) {
        colons += t[end] == ':';
        ++end;
    }
    if (colons < 2) return 0;
    for (std::size_t len = end - i; len >= 3; --len) {
        char last = t[i + len - 1];
        if (last == '.') continue;
        if (len < end - i && (is_hex(t[i + len]) && is_hex(last))) continue;  // mid-group cut
        if (valid_ipv6(t.substr(i, len))) return len;
    }
    return 0;
}

/// Digits of a port following a ':' at `colon`; 0 when absent.
std::size_t match_port(std::string_view t, std::size_t colon) {
    if (colon >= t.size() || t[colon] != ':') return 0;
    std::size_t p = colon + 1;
    long value = 0;
    while (p < t.size() && is_digit(t[p]) && p - colon <= 5) value = value * 10 + (t[p++] - '0');
    std::size_t len = p - colon - 1;
    if (len == 0 || value > 65535 || (p < t.size() && is_digit(t[p]))) return 0;
    // "1.2.3.4:2001:db8::1" is two addresses, not an address and a port.
    if (p + 1 < t.size() && t[p] == ':' && is_hex(t[p + 1])) return 0;
    return len;
}

struct Match {
    RedactionKind kind;
    std::size_t length;
};

/// `floor` is where the previous match ended; text before it does not count
/// as a neighbour when checking token boundaries.
std::optional<Match> identifier_at(std::string_view text, std::size_t i, std::size_t floor,
                                   const NameCatalog& catalog, std::span<const KnownName> extra) {
    std::optional<Match> best;
    auto consider = [&](RedactionKind kind, std::size_t len) {
        if (len > 0 && (!best || len > best->length)) best = Match{kind, len};
    };
    char c = text[i];
    if (is_hex(c)) consider(RedactionKind::MAC, match_mac(text, i, floor));
    if (is_hex(c) || c == ':') consider(RedactionKind::IPv6, match_ipv6(text, i, floor));
    if (is_digit(c)) consider(RedactionKind::IPv4, match_ipv4(text, i, floor));
    if (auto name = catalog.match_at(text, i, extra)) consider(name->kind, name->name.size());
    return best;
}

}  // namespace

// RedactionMap -----------------------------------------------------------------

const std::string& RedactionMap::assign(RedactionKind kind, std::string_view original) {
    std::string key(to_string(kind));
    key.push_back('\x1f');
    key.append(original);
    if (auto it = by_original_.find(key); it != by_original_.end()) {
        return entries_[it->second].placeholder;
    }
    int index = ++next_index_[kind];
    RedactionEntry entry{"[[" + std::string(to_string(kind)) + "-" + std::to_string(index) + "]]",
                         std::string(original), kind};
    by_placeholder_[entry.placeholder] = entries_.size();
    by_original_[key] = entries_.size();
    entries_.push_back(std::move(entry));
    return entries_.back().placeholder;
}

void RedactionMap::reserve_index(RedactionKind kind, int index) {
    int& next = next_index_[kind];
    next = std::max(next, index);
}

void RedactionMap::restore(RedactionEntry entry) {
    if (find_placeholder(entry.placeholder) != nullptr) {
        throw Error("duplicate redaction placeholder " + entry.placeholder);
    }
    std::string prefix = "[[" + std::string(to_string(entry.kind)) + "-";
    const auto& ph = entry.placeholder;
    int index = 0;
    if (ph.size() <= prefix.size() + 2 || ph.compare(0, prefix.size(), prefix) != 0 ||
        ph.compare(ph.size() - 2, 2, "]]") != 0 ||
        std::from_chars(ph.data() + prefix.size(), ph.data() + ph.size() - 2, index).ptr !=
            ph.data() + ph.size() - 2) {
        throw Error("malformed redaction placeholder " + ph);
    }
    reserve_index(entry.kind, index);
    std::string key(to_string(entry.kind));
    key.push_back('\x1f');
    key.append(entry.original);
    by_placeholder_[ph] = entries_.size();
    by_original_.emplace(std::move(key), entries_.size());
    entries_.push_back(std::move(entry));
}

const RedactionEntry* RedactionMap::find_placeholder(std::string_view placeholder) const {
    auto it = by_placeholder_.find(std::string(placeholder));
    return it == by_placeholder_.end() ? nullptr : &entries_[it->second];
}

const RedactionEntry* RedactionMap::find_original(RedactionKind kind,
                                                  std::string_view original) const {
    std::string key(to_string(kind));
    key.push_back('\x1f');
    key.append(original);
    auto it = by_original_.find(key);
    return it == by_original_.end() ? nullptr : &entries_[it->second];
}

// NameCatalog ------------------------------------------------------------------

void NameCatalog::add(RedactionKind kind, std::string_view name) {
    auto trimmed = trim(name);
    if (trimmed.empty()) return;
    for (const auto& known : names_) {
        if (iequals(known.name, trimmed)) return;
    }
    names_.push_back(KnownName{std::string(trimmed), kind});
    char first = static_cast<char>(std::tolower(static_cast<unsigned char>(trimmed.front())));
    auto& bucket = buckets_[first];
    bucket.push_back(names_.size() - 1);
    std::stable_sort(bucket.begin(), bucket.end(), [this](std::size_t a, std::size_t b) {
        return names_[a].name.size() > names_[b].name.size();
    });
}

std::optional<KnownName> NameCatalog::match_at(std::string_view text, std::size_t pos,
                                               std::span<const KnownName> extra) const {
    std::optional<KnownName> best;
    char first = static_cast<char>(std::tolower(static_cast<unsigned char>(text[pos])));
    if (auto it = buckets_.find(first); it != buckets_.end()) {
        for (std::size_t idx : it->second) {
            const auto& name = names_[idx].name;
            if (pos + name.size() <= text.size() && iequals(text.substr(pos, name.size()), name)) {
                best = names_[idx];
                break;
            }
        }
    }
    for (const auto& name : extra) {
        if (name.name.empty() || (best && best->name.size() >= name.name.size())) continue;
        if (pos + name.name.size() <= text.size() &&
            iequals(text.substr(pos, name.name.size()), name.name)) {
            best = name;
        }
    }
    return best;
}

NameCatalog NameCatalog::parse(std::istream& in) {
    NameCatalog catalog;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        auto colon = t.find(':');
        if (colon == std::string_view::npos) {
            throw Error("name catalog line " + std::to_string(lineno) + ": expected 'kind: name'");
        }
        std::string kind = to_lower(trim(t.substr(0, colon)));
        auto name = trim(t.substr(colon + 1));
        if (kind == "device") {
            catalog.add(RedactionKind::DeviceName, name);
        } else if (kind == "host" || kind == "hostname") {
            catalog.add(RedactionKind::Hostname, name);
        } else if (kind == "user") {
            catalog.add(RedactionKind::UserName, name);
        } else {
            throw Error("name catalog line " + std::to_string(lineno) + ": unknown kind '" + kind + "'");
        }
    }
    return catalog;
}

NameCatalog NameCatalog::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open name catalog '" + path + "'");
    return parse(in);
}

// Scrubbing --------------------------------------------------------------------

std::string scrub_into(std::string_view text, const NameCatalog& catalog, RedactionMap& map,
                       std::span<const KnownName> extra) {
    // Placeholders already present keep their meaning; new ones must not collide.
    for (std::size_t i = text.find("[["); i != std::string_view::npos; i = text.find("[[", i + 1)) {
        if (auto tok = placeholder_at(text, i)) map.reserve_index(tok->kind, tok->index);
    }

    std::string out;
    out.reserve(text.size());
    std::size_t i = 0;
    std::size_t floor = 0;
    while (i < text.size()) {
        if (text[i] == '[') {
            if (auto tok = placeholder_at(text, i)) {
                out.append(text.substr(i, tok->length));
                i += tok->length;
                floor = i;
                continue;
            }
        }
        auto match = identifier_at(text, i, floor, catalog, extra);
        if (!match) {
            // A separator right after a redacted token starts a fresh token.
            if (i == floor && i > 0 && (text[i] == ':' || text[i] == '-')) floor = i + 1;
            out.push_back(text[i++]);
            continue;
        }
        out += map.assign(match->kind, text.substr(i, match->length));
        i += match->length;
        if (match->kind == RedactionKind::IPv4) {
            if (auto plen = match_port(text, i)) {
                out.push_back(':');
                out += map.assign(RedactionKind::Port, text.substr(i + 1, plen));
                i += 1 + plen;
            }
        } else if (match->kind == RedactionKind::IPv6 && i < text.size() && text[i] == ']') {
            if (auto plen = match_port(text, i + 1)) {
                out.append("]:");
                out += map.assign(RedactionKind::Port, text.substr(i + 2, plen));
                i += 2 + plen;
            }
        }
        floor = i;
    }
    return out;
}

ScrubResult scrub(std::string_view text, const NameCatalog& catalog) {
    ScrubResult result;
    result.scrubbed = scrub_into(text, catalog, result.map);
    return result;
}

bool is_identifier_free(std::string_view text, const NameCatalog& catalog,
                        std::span<const KnownName> extra) {
    std::size_t i = 0;
    std::size_t floor = 0;
    while (i < text.size()) {
        if (text[i] == '[') {
            if (auto tok = placeholder_at(text, i)) {
                i += tok->length;
                floor = i;
                continue;
            }
        }
        if (identifier_at(text, i, floor, catalog, extra)) return false;
        if (i == floor && i > 0 && (text[i] == ':' || text[i] == '-')) floor = i + 1;
        ++i;
    }
    return true;
}

// Profiles ---------------------------------------------------------------------

std::optional<GeneralizationLevel> parse_generalization(std::string_view text) {
    std::string t = to_lower(trim(text));
    if (t == "model") return GeneralizationLevel::Model;
    if (t == "class") return GeneralizationLevel::Class;
    if (t == "generic" || t == "genericdevice") return GeneralizationLevel::GenericDevice;
    return std::nullopt;
}

std::string DeviceProfile::outward_class() const {
    switch (generalization_level) {
        case GeneralizationLevel::Model: return display_name;
        case GeneralizationLevel::Class: return device_class.empty() ? std::string(kGenericDeviceClass) : device_class;
        case GeneralizationLevel::GenericDevice: return std::string(kGenericDeviceClass);
    }
    return std::string(kGenericDeviceClass);
}

void DeviceClassTable::add(std::string_view model, std::string_view device_class) {
    classes_[to_lower(trim(model))] = std::string(trim(device_class));
}

std::optional<std::string> DeviceClassTable::lookup(std::string_view model) const {
    auto it = classes_.find(to_lower(trim(model)));
    if (it == classes_.end()) return std::nullopt;
    return it->second;
}

DeviceClassTable DeviceClassTable::parse(std::istream& in) {
    DeviceClassTable table;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        auto fields = split(t, '\t');
        if (fields.size() != 2 || trim(fields[0]).empty() || trim(fields[1]).empty()) {
            throw Error("device class table line " + std::to_string(lineno) + ": expected 2 tab-separated fields");
        }
        table.add(fields[0], fields[1]);
    }
    return table;
}

DeviceClassTable DeviceClassTable::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open device class table '" + path + "'");
    return parse(in);
}

void DeviceInventory::add(DeviceProfile profile) {
    if (profile.device_ref.empty()) throw Error("device profile without device_ref");
    if (profile.generalization_level != GeneralizationLevel::Model &&
        iequals(profile.display_name, profile.outward_class())) {
        throw Error("device '" + profile.device_ref +
                    "': display name must differ from its class at Class/GenericDevice level");
    }
    if (find(profile.device_ref)) throw Error("duplicate device_ref '" + profile.device_ref + "'");
    devices_.push_back(std::move(profile));
}

const DeviceProfile* DeviceInventory::find(std::string_view device_ref) const {
    for (const auto& d : devices_) {
        if (d.device_ref == device_ref) return &d;
    }
    return nullptr;
}

const DeviceProfile* DeviceInventory::find_by_address(std::string_view address) const {
    for (const auto& d : devices_) {
        for (const auto& a : d.addresses) {
            if (iequals(a, address)) return &d;
        }
    }
    return nullptr;
}

const DeviceProfile* DeviceInventory::resolve(const NormalizedAlert& alert) const {
    if (alert.device_ref) return find(*alert.device_ref);
    for (const auto* ep : {&alert.dst, &alert.src}) {
        if (*ep) {
            if (const auto* d = find_by_address((*ep)->address)) return d;
        }
    }
    return nullptr;
}

DeviceInventory DeviceInventory::parse(std::istream& in, const DeviceClassTable& classes) {
    DeviceInventory inv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        auto fields = split(t, '\t');
        auto fail = [&](const std::string& why) {
            throw Error("device inventory line " + std::to_string(lineno) + ": " + why);
        };
        if (fields.size() < 3 || fields.size() > 5) fail("expected 3 to 5 tab-separated fields");
        DeviceProfile p;
        p.device_ref = std::string(trim(fields[0]));
        p.display_name = std::string(trim(fields[1]));
        auto level = parse_generalization(fields[2]);
        if (!level) fail("unknown generalization level '" + fields[2] + "'");
        p.generalization_level = *level;
        if (fields.size() >= 4) {
            for (auto& a : split(fields[3], ',')) {
                if (!trim(a).empty()) p.addresses.emplace_back(trim(a));
            }
        }
        if (fields.size() == 5 && !trim(fields[4]).empty()) {
            p.device_class = std::string(trim(fields[4]));
        } else {
            p.device_class = classes.lookup(p.display_name).value_or(std::string(kGenericDeviceClass));
        }
        try {
            inv.add(std::move(p));
        } catch (const Error& e) {
            fail(e.what());
        }
    }
    return inv;
}

DeviceInventory DeviceInventory::load(const std::string& path, const DeviceClassTable& classes) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open device inventory '" + path + "'");
    return parse(in, classes);
}

// Alerts -----------------------------------------------------------------------

AnonymizedAlert anonymize_alert(const NormalizedAlert& alert, const DeviceProfile* device,
                                const UserProfile& user, const NameCatalog& catalog) {
    AnonymizedAlert out;
    out.inner = alert;
    out.device_class = std::string(kGenericDeviceClass);

    if (!alert.device_ref) {
        out.resolution = DeviceResolution::NoDevice;
    } else if (device && device->device_ref == *alert.device_ref) {
        out.resolution = DeviceResolution::Resolved;
        out.device_class = device->outward_class();
    } else {
        out.resolution = DeviceResolution::UnknownDevice;
        spdlog::warn("anonymizer: unknown device for alert {}", alert.alert_id);
    }

    std::vector<KnownName> extra;
    if (!user.display_name.empty()) extra.push_back({user.display_name, RedactionKind::UserName});
    if (out.resolution == DeviceResolution::Resolved &&
        device->generalization_level != GeneralizationLevel::Model) {
        extra.push_back({device->display_name, RedactionKind::DeviceName});
    }

    out.inner.message = scrub_into(alert.message, catalog, out.redaction, extra);
    out.inner.raw = scrub_into(alert.raw, catalog, out.redaction, extra);

    auto clear_endpoint = [&](std::optional<Endpoint>& ep) {
        if (!ep) return;
        unsigned char buf[16];
        auto kind = inet_pton(AF_INET, ep->address.c_str(), buf) == 1 ? RedactionKind::IPv4
                                                                       : RedactionKind::IPv6;
        out.redaction.assign(kind, ep->address);
        if (ep->port) out.redaction.assign(RedactionKind::Port, std::to_string(*ep->port));
        ep.reset();
    };
    clear_endpoint(out.inner.src);
    clear_endpoint(out.inner.dst);
    if (out.inner.device_ref) {
        out.redaction.assign(RedactionKind::DeviceName, *out.inner.device_ref);
        out.inner.device_ref.reset();
    }
    out.is_decoy = false;
    return out;
}

// Rehydration ------------------------------------------------------------------

namespace {

struct Substitution {
    std::string phrase;
    std::string replacement;
};

std::string personalize(std::string_view segment, const std::vector<Substitution>& subs) {
    std::string out;
    out.reserve(segment.size());
    std::size_t i = 0;
    while (i < segment.size()) {
        bool replaced = false;
        for (const auto& s : subs) {
            std::size_t n = s.phrase.size();
            if (n == 0 || i + n > segment.size() || !iequals(segment.substr(i, n), s.phrase)) continue;
            bool left_ok = i == 0 || !is_alnum(segment[i - 1]);
            bool right_ok = i + n == segment.size() || !is_alnum(segment[i + n]);
            if (!left_ok || !right_ok) continue;
            out += s.replacement;
            i += n;
            replaced = true;
            break;
        }
        if (!replaced) out.push_back(segment[i++]);
    }
    return out;
}

}  // namespace

std::string rehydrate(std::string_view text, const RedactionMap& map) {
    return rehydrate(text, map, nullptr, nullptr, RehydrateOptions{false, false});
}

std::string rehydrate(std::string_view text, const RedactionMap& map, const DeviceProfile* device,
                      const UserProfile* user, const RehydrateOptions& opts) {
    std::vector<Substitution> subs;
    if (device) {
        std::string cls = device->outward_class();
        if (!iequals(cls, device->display_name)) {
            subs.push_back({cls, device->display_name});
            for (std::string_view article : {"a ", "an "}) {
                if (starts_with_icase(cls, article) && cls.size() > article.size()) {
                    subs.push_back({cls.substr(article.size()), device->display_name});
                }
            }
        }
    }
    if (user && opts.personalize_user && !user->display_name.empty()) {
        subs.push_back({user->pseudonym, user->display_name});
    }
    std::stable_sort(subs.begin(), subs.end(), [](const Substitution& a, const Substitution& b) {
        return a.phrase.size() > b.phrase.size();
    });

    std::string out;
    out.reserve(text.size());
    std::size_t plain_start = 0;
    auto flush_plain = [&](std::size_t end) {
        auto seg = text.substr(plain_start, end - plain_start);
        out += subs.empty() ? std::string(seg) : personalize(seg, subs);
    };
    std::size_t i = 0;
    while (i < text.size()) {
        if (text[i] == '[') {
            if (auto tok = placeholder_at(text, i)) {
                auto token = text.substr(i, tok->length);
                const auto* entry = map.find_placeholder(token);
                if (!entry && !opts.keep_unknown) throw UnknownPlaceholder(std::string(token));
                flush_plain(i);
                out += entry ? entry->original : std::string(token);
                i += tok->length;
                plain_start = i;
                continue;
            }
        }
        ++i;
    }
    flush_plain(text.size());
    return out;
}

}  // namespace chatids
