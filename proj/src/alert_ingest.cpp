#include "chatids/alert_ingest.hpp"

#include <arpa/inet.h>

#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>
#include <spdlog/spdlog.h>

namespace chatids {

using nlohmann::json;

std::string_view to_string(SourceFormat f) {
    switch (f) {
        case SourceFormat::SnortFast: return "snort-fast";
        case SourceFormat::SuricataEve: return "suricata-eve";
        case SourceFormat::Generic: return "generic";
    }
    return "generic";
}

std::optional<SourceFormat> parse_source_format(std::string_view tag) {
    std::string t = to_lower(trim(tag));
    if (t == "snort-fast" || t == "snort" || t == "fast") return SourceFormat::SnortFast;
    if (t == "suricata-eve" || t == "suricata" || t == "eve") return SourceFormat::SuricataEve;
    if (t == "generic" || t == "sigma" || t == "yara") return SourceFormat::Generic;
    return std::nullopt;
}

std::string_view to_string(UrgencyLevel level) {
    switch (level) {
        case UrgencyLevel::Informational: return "Informational";
        case UrgencyLevel::Important: return "Important";
        case UrgencyLevel::Critical: return "Critical";
    }
    return "Informational";
}

std::optional<UrgencyLevel> parse_urgency(std::string_view text) {
    std::string t = to_lower(trim(text));
    if (t == "informational" || t == "info") return UrgencyLevel::Informational;
    if (t == "important") return UrgencyLevel::Important;
    if (t == "critical") return UrgencyLevel::Critical;
    return std::nullopt;
}

int SnortParseOptions::resolved_year() const {
    if (base_year != 0) return base_year;
    using namespace std::chrono;
    year_month_day ymd{floor<days>(system_clock::now())};
    return static_cast<int>(ymd.year());
}

std::string make_alert_id(SourceFormat format, std::string_view raw) {
    std::string material(to_string(format));
    material.push_back('\n');
    material.append(raw);
    return "al-" + fingerprint(material);
}

namespace {

[[noreturn]] void malformed(std::size_t offset, const std::string& what) {
    throw IngestError(IngestErrorKind::MalformedRecord, offset,
                      "malformed record at byte " + std::to_string(offset) + ": " + what);
}

bool valid_ip(const std::string& addr) {
    unsigned char buf[16];
    return inet_pton(AF_INET, addr.c_str(), buf) == 1 || inet_pton(AF_INET6, addr.c_str(), buf) == 1;
}

template <typename T>
std::optional<T> to_number(std::string_view s) {
    T value{};
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
    return value;
}

std::optional<std::uint16_t> to_port(std::string_view s) {
    auto v = to_number<unsigned>(s);
    if (!v || *v > 65535) return std::nullopt;
    return static_cast<std::uint16_t>(*v);
}

/// Cursor over one fast-alert line; every failure reports its byte offset.
class FastCursor {
public:
    explicit FastCursor(std::string_view line) : s_(line) {}

    std::size_t pos() const { return pos_; }
    bool at_end() const { return pos_ >= s_.size(); }
    char peek() const { return at_end() ? '\0' : s_[pos_]; }

    void skip_spaces() {
        while (!at_end() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
    }

    void require_spaces(const char* what) {
        if (at_end() || (s_[pos_] != ' ' && s_[pos_] != '\t')) malformed(pos_, std::string("expected whitespace before ") + what);
        skip_spaces();
    }

    void literal(std::string_view lit) {
        if (s_.substr(pos_, lit.size()) != lit) malformed(pos_, "expected '" + std::string(lit) + "'");
        pos_ += lit.size();
    }

    bool try_literal(std::string_view lit) {
        if (s_.substr(pos_, lit.size()) != lit) return false;
        pos_ += lit.size();
        return true;
    }

    unsigned digits(std::size_t min, std::size_t max, std::size_t* count = nullptr) {
        std::size_t start = pos_;
        unsigned value = 0;
        while (!at_end() && pos_ - start < max && s_[pos_] >= '0' && s_[pos_] <= '9') {
            value = value * 10 + static_cast<unsigned>(s_[pos_] - '0');
            ++pos_;
        }
        if (pos_ - start < min) malformed(start, "expected digits");
        if (count) *count = pos_ - start;
        return value;
    }

    std::string_view until(char stop) {
        std::size_t start = pos_;
        auto end = s_.find(stop, pos_);
        if (end == std::string_view::npos) malformed(s_.size(), std::string("missing '") + stop + "'");
        pos_ = end;
        return s_.substr(start, end - start);
    }

    std::string_view token() {
        std::size_t start = pos_;
        while (!at_end() && s_[pos_] != ' ' && s_[pos_] != '\t') ++pos_;
        return s_.substr(start, pos_ - start);
    }

    std::string_view rest() const { return s_.substr(pos_); }
    void advance(std::size_t n) { pos_ += n; }

private:
    std::string_view s_;
    std::size_t pos_ = 0;
};

Endpoint parse_fast_endpoint(std::string_view tok, std::size_t offset) {
    if (tok.empty()) malformed(offset, "missing address");
    Endpoint ep;
    if (tok.front() == '[') {
        auto close = tok.find(']');
        if (close == std::string_view::npos) malformed(offset, "unterminated IPv6 bracket");
        ep.address = std::string(tok.substr(1, close - 1));
        auto tail = tok.substr(close + 1);
        if (!tail.empty()) {
            if (tail.front() != ':') malformed(offset + close + 1, "expected ':' after ']'");
            ep.port = to_port(tail.substr(1));
            if (!ep.port) malformed(offset + close + 2, "invalid port");
        }
    } else if (std::count(tok.begin(), tok.end(), ':') == 1) {
        auto colon = tok.find(':');
        ep.address = std::string(tok.substr(0, colon));
        ep.port = to_port(tok.substr(colon + 1));
        if (!ep.port) malformed(offset + colon + 1, "invalid port");
    } else {
        ep.address = std::string(tok);
    }
    if (!valid_ip(ep.address)) malformed(offset, "invalid address '" + ep.address + "'");
    return ep;
}

std::string json_string(const json& j) {
    if (j.is_string()) return j.get<std::string>();
    return j.dump();
}

}  // namespace

NormalizedAlert parse_snort_fast(std::string_view line, const SnortParseOptions& opts) {
    std::string_view body = line;
    while (!body.empty() && (body.back() == '\r' || body.back() == '\n')) body.remove_suffix(1);
    if (trim(body).empty()) malformed(0, "empty record");

    FastCursor cur(body);
    NormalizedAlert alert;
    alert.source_format = SourceFormat::SnortFast;
    alert.raw = std::string(body);

    // MM/DD-HH:MM:SS.ffffff
    std::size_t ts_start = cur.pos();
    unsigned month = cur.digits(2, 2);
    cur.literal("/");
    unsigned day = cur.digits(2, 2);
    cur.literal("-");
    unsigned hour = cur.digits(2, 2);
    cur.literal(":");
    unsigned minute = cur.digits(2, 2);
    cur.literal(":");
    unsigned second = cur.digits(2, 2);
    std::uint32_t micros = 0;
    if (cur.try_literal(".")) {
        std::size_t n = 0;
        micros = cur.digits(1, 6, &n);
        for (std::size_t i = n; i < 6; ++i) micros *= 10;
    }
    auto ts = make_timestamp(opts.resolved_year(), month, day, hour, minute, second, micros);
    if (!ts) {
        throw IngestError(IngestErrorKind::InvalidTimestamp, ts_start,
                          "invalid timestamp at byte " + std::to_string(ts_start));
    }
    alert.timestamp = *ts;

    cur.require_spaces("'[**]'");
    cur.literal("[**]");
    cur.require_spaces("signature id");
    cur.literal("[");
    SignatureId sid;
    sid.generator = cur.digits(1, 10);
    cur.literal(":");
    sid.signature = cur.digits(1, 10);
    cur.literal(":");
    sid.revision = cur.digits(1, 10);
    cur.literal("]");
    alert.signature_id = sid;
    cur.require_spaces("message");

    std::size_t msg_start = cur.pos();
    auto rest = cur.rest();
    auto close = rest.find(" [**]");
    if (close == std::string_view::npos) malformed(body.size(), "missing closing '[**]'");
    alert.message = std::string(trim(rest.substr(0, close)));
    if (alert.message.empty()) malformed(msg_start, "empty message");
    cur.advance(close);
    cur.skip_spaces();
    cur.literal("[**]");
    cur.skip_spaces();

    if (cur.try_literal("[Classification:")) {
        cur.until(']');
        cur.literal("]");
        cur.skip_spaces();
    }
    if (cur.try_literal("[Priority:")) {
        cur.skip_spaces();
        std::size_t p_start = cur.pos();
        unsigned prio = cur.digits(1, 9);
        if (prio < 1) malformed(p_start, "priority must be >= 1");
        cur.skip_spaces();
        cur.literal("]");
        alert.priority = static_cast<int>(prio);
        cur.skip_spaces();
    }

    cur.literal("{");
    std::size_t proto_start = cur.pos();
    alert.protocol = std::string(trim(cur.until('}')));
    if (alert.protocol.empty()) malformed(proto_start, "empty protocol");
    cur.literal("}");
    cur.require_spaces("source address");

    std::size_t src_off = cur.pos();
    alert.src = parse_fast_endpoint(cur.token(), src_off);
    cur.require_spaces("'->'");
    cur.literal("->");
    cur.require_spaces("destination address");
    std::size_t dst_off = cur.pos();
    alert.dst = parse_fast_endpoint(cur.token(), dst_off);
    cur.skip_spaces();
    if (!cur.at_end()) malformed(cur.pos(), "trailing characters");

    alert.alert_id = make_alert_id(alert.source_format, alert.raw);
    return alert;
}

NormalizedAlert parse_suricata_eve(std::string_view line) {
    std::string_view body = trim(line);
    if (body.empty()) malformed(0, "empty record");
    json j;
    try {
        j = json::parse(body);
    } catch (const json::parse_error& e) {
        malformed(e.byte > 0 ? e.byte - 1 : 0, "invalid JSON");
    }
    if (!j.is_object()) malformed(0, "EVE record is not an object");

    auto et = j.find("event_type");
    if (et == j.end() || !et->is_string()) malformed(0, "missing event_type");
    if (et->get<std::string>() != "alert") {
        throw IngestError(IngestErrorKind::NotAnAlert, 0,
                          "event_type '" + et->get<std::string>() + "' is not an alert");
    }
    auto a = j.find("alert");
    if (a == j.end() || !a->is_object()) malformed(0, "missing alert object");
    auto sig = a->find("signature");
    if (sig == a->end() || !sig->is_string() || trim(sig->get<std::string>()).empty()) {
        malformed(0, "missing alert.signature");
    }

    NormalizedAlert alert;
    alert.source_format = SourceFormat::SuricataEve;
    alert.raw = std::string(body);
    alert.message = std::string(trim(sig->get<std::string>()));

    auto ts = j.find("timestamp");
    if (ts == j.end() || !ts->is_string()) malformed(0, "missing timestamp");
    auto parsed = parse_iso8601(ts->get<std::string>());
    if (!parsed) throw IngestError(IngestErrorKind::InvalidTimestamp, 0, "invalid timestamp");
    alert.timestamp = *parsed;

    auto uint_field = [&](const json& obj, const char* key) -> std::optional<std::uint32_t> {
        auto it = obj.find(key);
        if (it == obj.end() || it->is_null()) return std::nullopt;
        if (!it->is_number_integer() || it->get<std::int64_t>() < 0 ||
            it->get<std::int64_t>() > 0xffffffffLL) {
            malformed(0, std::string("field '") + key + "' is not a non-negative integer");
        }
        return static_cast<std::uint32_t>(it->get<std::int64_t>());
    };

    if (auto sid = uint_field(*a, "signature_id")) {
        alert.signature_id = SignatureId{uint_field(*a, "gid").value_or(1), *sid,
                                         uint_field(*a, "rev").value_or(0)};
    }
    if (auto sev = uint_field(*a, "severity")) {
        if (*sev < 1) malformed(0, "severity must be >= 1");
        alert.priority = static_cast<int>(*sev);
    }

    auto endpoint = [&](const char* ip_key, const char* port_key) -> std::optional<Endpoint> {
        auto ip = j.find(ip_key);
        if (ip == j.end() || !ip->is_string()) return std::nullopt;
        Endpoint ep{ip->get<std::string>(), std::nullopt};
        if (!valid_ip(ep.address)) malformed(0, std::string("invalid ") + ip_key);
        if (auto port = uint_field(j, port_key)) {
            if (*port > 65535) malformed(0, std::string("invalid ") + port_key);
            ep.port = static_cast<std::uint16_t>(*port);
        }
        return ep;
    };
    alert.src = endpoint("src_ip", "src_port");
    alert.dst = endpoint("dest_ip", "dest_port");
    if (auto proto = j.find("proto"); proto != j.end()) alert.protocol = json_string(*proto);

    alert.alert_id = make_alert_id(alert.source_format, alert.raw);
    return alert;
}

NormalizedAlert parse_generic(const std::map<std::string, std::string>& record) {
    auto get = [&](std::initializer_list<const char*> keys) -> std::optional<std::string> {
        for (const char* k : keys) {
            if (auto it = record.find(k); it != record.end()) return it->second;
        }
        return std::nullopt;
    };

    auto message = get({"message"});
    if (!message || trim(*message).empty()) malformed(0, "missing key 'message'");
    auto ts_text = get({"timestamp"});
    if (!ts_text) malformed(0, "missing key 'timestamp'");

    NormalizedAlert alert;
    alert.source_format = SourceFormat::Generic;
    alert.message = std::string(trim(*message));
    auto ts = parse_iso8601(*ts_text);
    if (!ts) throw IngestError(IngestErrorKind::InvalidTimestamp, 0, "invalid timestamp");
    alert.timestamp = *ts;

    auto endpoint = [&](std::initializer_list<const char*> ip_keys,
                        std::initializer_list<const char*> port_keys) -> std::optional<Endpoint> {
        auto ip = get(ip_keys);
        if (!ip) return std::nullopt;
        Endpoint ep{*ip, std::nullopt};
        if (!valid_ip(ep.address)) malformed(0, "invalid address '" + ep.address + "'");
        if (auto port = get(port_keys)) {
            ep.port = to_port(*port);
            if (!ep.port) malformed(0, "invalid port '" + *port + "'");
        }
        return ep;
    };
    alert.src = endpoint({"src_ip", "src"}, {"src_port"});
    alert.dst = endpoint({"dest_ip", "dst_ip", "dst"}, {"dest_port", "dst_port"});
    alert.protocol = get({"proto", "protocol"}).value_or("");
    alert.device_ref = get({"device_ref", "device"});
    if (auto prio = get({"priority", "severity"})) {
        auto p = to_number<int>(*prio);
        if (!p || *p < 1) malformed(0, "priority must be an integer >= 1");
        alert.priority = *p;
    }
    if (auto sid = get({"sid", "signature_id"})) {
        auto s = to_number<std::uint32_t>(*sid);
        if (!s) malformed(0, "invalid signature id");
        SignatureId id{1, *s, 0};
        if (auto g = get({"gid"})) id.generator = to_number<std::uint32_t>(*g).value_or(1);
        if (auto r = get({"rev"})) id.revision = to_number<std::uint32_t>(*r).value_or(0);
        alert.signature_id = id;
    }

    // std::map iteration is sorted, so raw is canonical for a given record.
    alert.raw = json(record).dump();
    alert.alert_id = make_alert_id(alert.source_format, alert.raw);
    return alert;
}

NormalizedAlert parse_generic_line(std::string_view line) {
    std::string_view body = trim(line);
    if (body.empty()) malformed(0, "empty record");
    json j;
    try {
        j = json::parse(body);
    } catch (const json::parse_error& e) {
        malformed(e.byte > 0 ? e.byte - 1 : 0, "invalid JSON");
    }
    if (!j.is_object()) malformed(0, "generic record is not an object");
    std::map<std::string, std::string> record;
    for (auto& [key, value] : j.items()) {
        if (value.is_null()) continue;
        record[key] = json_string(value);
    }
    NormalizedAlert alert = parse_generic(record);
    alert.raw = std::string(body);
    alert.alert_id = make_alert_id(alert.source_format, alert.raw);
    return alert;
}

ParseOutcome try_parse(std::string_view line, SourceFormat format, const SnortParseOptions& opts) {
    try {
        switch (format) {
            case SourceFormat::SnortFast: return parse_snort_fast(line, opts);
            case SourceFormat::SuricataEve: return parse_suricata_eve(line);
            case SourceFormat::Generic: return parse_generic_line(line);
        }
    } catch (const IngestError& e) {
        if (e.kind() == IngestErrorKind::NotAnAlert) return SkippedRecord{e.what()};
        return e;
    } catch (const std::exception& e) {
        return IngestError(IngestErrorKind::MalformedRecord, 0, e.what());
    }
    return IngestError(IngestErrorKind::MalformedRecord, 0, "unknown format");
}

AlertReader::AlertReader(std::istream& source, SourceFormat format, SnortParseOptions opts)
    : source_(source), format_(format), opts_(opts) {
    if (opts_.base_year == 0) opts_.base_year = opts_.resolved_year();
}

std::optional<NormalizedAlert> AlertReader::next() {
    std::string line;
    while (std::getline(source_, line)) {
        ++stats_.lines;
        if (trim(line).empty()) continue;
        auto outcome = try_parse(line, format_, opts_);
        if (auto* alert = std::get_if<NormalizedAlert>(&outcome)) {
            ++stats_.emitted;
            return std::move(*alert);
        }
        if (auto* skip = std::get_if<SkippedRecord>(&outcome)) {
            ++stats_.skipped;
            spdlog::debug("ingest: skipped line {}: {}", stats_.lines, skip->reason);
            continue;
        }
        ++stats_.malformed;
        spdlog::warn("ingest: line {}: {}", stats_.lines, std::get<IngestError>(outcome).what());
    }
    return std::nullopt;
}

std::vector<NormalizedAlert> ingest_stream(std::istream& source, SourceFormat format,
                                           IngestStats* stats, const SnortParseOptions& opts) {
    AlertReader reader(source, format, opts);
    std::vector<NormalizedAlert> out;
    while (auto alert = reader.next()) out.push_back(std::move(*alert));
    if (stats) *stats = reader.stats();
    return out;
}

// Severity -------------------------------------------------------------------

SeverityPolicy SeverityPolicy::default_policy() {
    SeverityPolicy p;
    p.add_priority_rule(1, 1, UrgencyLevel::Critical);
    p.add_priority_rule(2, 3, UrgencyLevel::Important);
    p.add_priority_rule(4, std::nullopt, UrgencyLevel::Informational);
    return p;
}

void SeverityPolicy::add_priority_rule(int min, std::optional<int> max, UrgencyLevel level) {
    priority_rules_.push_back(PriorityRule{min, max, level});
}

void SeverityPolicy::add_pattern_rule(const std::string& pattern, UrgencyLevel level) {
    pattern_rules_.push_back(PatternRule{
        pattern, level, std::regex(pattern, std::regex::ECMAScript | std::regex::icase)});
}

SeverityPolicy SeverityPolicy::parse(std::istream& in) {
    SeverityPolicy policy;
    std::string line;
    int lineno = 0;
    auto fail = [&](const std::string& why) {
        throw Error("severity policy line " + std::to_string(lineno) + ": " + why);
    };
    while (std::getline(in, line)) {
        ++lineno;
        auto t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        std::istringstream ls{std::string(t)};
        std::string kind;
        ls >> kind;
        if (kind == "priority") {
            std::string range, level_text;
            ls >> range >> level_text;
            auto level = parse_urgency(level_text);
            if (!level) fail("unknown level '" + level_text + "'");
            auto dash = range.find('-');
            auto min = to_number<int>(range.substr(0, dash));
            if (!min || *min < 1) fail("bad priority range '" + range + "'");
            std::optional<int> max = *min;
            if (dash != std::string::npos) {
                auto upper = range.substr(dash + 1);
                max = upper.empty() ? std::nullopt : to_number<int>(upper);
                if (!upper.empty() && (!max || *max < *min)) fail("bad priority range '" + range + "'");
            }
            policy.add_priority_rule(*min, max, *level);
        } else if (kind == "pattern") {
            std::string level_text;
            ls >> level_text;
            auto level = parse_urgency(level_text);
            if (!level) fail("unknown level '" + level_text + "'");
            std::string pattern;
            std::getline(ls, pattern);
            pattern = std::string(trim(pattern));
            if (pattern.empty()) fail("empty pattern");
            try {
                policy.add_pattern_rule(pattern, *level);
            } catch (const std::regex_error& e) {
                fail(std::string("invalid regex: ") + e.what());
            }
        } else {
            fail("unknown rule kind '" + kind + "'");
        }
    }
    return policy;
}

SeverityPolicy SeverityPolicy::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open severity policy '" + path + "'");
    return parse(in);
}

UrgencyLevel classify_severity(const NormalizedAlert& alert, const SeverityPolicy& policy) {
    auto level = UrgencyLevel::Informational;
    if (alert.priority) {
        int p = *alert.priority;
        for (const auto& rule : policy.priority_rules()) {
            if (p >= rule.min_priority && (!rule.max_priority || p <= *rule.max_priority)) {
                level = std::max(level, rule.level);
            }
        }
    }
    for (const auto& rule : policy.pattern_rules()) {
        if (std::regex_search(alert.message, rule.compiled)) level = std::max(level, rule.level);
    }
    return level;
}

}  // namespace chatids
