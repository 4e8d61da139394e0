#include "chatids/explanation_store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>

#include <spdlog/spdlog.h>
#include <zlib.h>

namespace chatids {

namespace fs = std::filesystem;
using nlohmann::json;

std::string CacheKey::str() const {
    return alert_fingerprint + "|t" + std::to_string(template_version) + "|p" +
           std::to_string(persona_version) + "|" + device_class;
}

std::string_view to_string(AlertStatus s) {
    switch (s) {
        case AlertStatus::Queued: return "queued";
        case AlertStatus::Explained: return "explained";
        case AlertStatus::Failed: return "failed";
    }
    return "queued";
}

std::string_view to_string(SessionState s) {
    switch (s) {
        case SessionState::Open: return "open";
        case SessionState::Resolved: return "resolved";
        case SessionState::Expired: return "expired";
    }
    return "open";
}

std::string_view to_string(SessionOutcome o) {
    return o == SessionOutcome::ActionTaken ? "action_taken" : "dismissed_as_false_alert";
}

std::optional<SessionOutcome> parse_session_outcome(std::string_view text) {
    auto t = to_lower(trim(text));
    if (t == "action_taken" || t == "actiontaken") return SessionOutcome::ActionTaken;
    if (t == "dismissed_as_false_alert" || t == "dismissedasfalsealert" || t == "dismissed") {
        return SessionOutcome::DismissedAsFalseAlert;
    }
    return std::nullopt;
}

// JSON -------------------------------------------------------------------------

namespace {

json ts(Timestamp t) { return format_iso8601(t); }

Timestamp ts_from(const json& j) {
    auto t = parse_iso8601(j.get<std::string>());
    if (!t) throw StorageCorrupt("bad timestamp in record: " + j.get<std::string>());
    return *t;
}

template <typename E, typename Parse>
E enum_from(const json& j, Parse parse, const char* what) {
    auto v = parse(j.get<std::string>());
    if (!v) throw StorageCorrupt(std::string("bad ") + what + " in record: " + j.get<std::string>());
    return *v;
}

json span_json(const std::optional<TextSpan>& s) {
    if (!s) return nullptr;
    return json::array({s->begin, s->end});
}

std::optional<TextSpan> span_from(const json& j) {
    if (j.is_null()) return std::nullopt;
    return TextSpan{j.at(0).get<std::size_t>(), j.at(1).get<std::size_t>()};
}

std::optional<AlertStatus> parse_status(std::string_view s) {
    if (s == "queued") return AlertStatus::Queued;
    if (s == "explained") return AlertStatus::Explained;
    if (s == "failed") return AlertStatus::Failed;
    return std::nullopt;
}

std::optional<SessionState> parse_state(std::string_view s) {
    if (s == "open") return SessionState::Open;
    if (s == "resolved") return SessionState::Resolved;
    if (s == "expired") return SessionState::Expired;
    return std::nullopt;
}

std::optional<DeviceResolution> parse_resolution(std::string_view s) {
    if (s == "resolved") return DeviceResolution::Resolved;
    if (s == "no_device") return DeviceResolution::NoDevice;
    if (s == "unknown_device") return DeviceResolution::UnknownDevice;
    return std::nullopt;
}

std::string_view resolution_str(DeviceResolution r) {
    switch (r) {
        case DeviceResolution::Resolved: return "resolved";
        case DeviceResolution::NoDevice: return "no_device";
        case DeviceResolution::UnknownDevice: return "unknown_device";
    }
    return "no_device";
}

json endpoint_json(const std::optional<Endpoint>& e) {
    if (!e) return nullptr;
    json j = {{"address", e->address}};
    if (e->port) j["port"] = *e->port;
    return j;
}

std::optional<Endpoint> endpoint_from(const json& j) {
    if (j.is_null()) return std::nullopt;
    Endpoint e;
    e.address = j.at("address").get<std::string>();
    if (j.contains("port")) e.port = j["port"].get<std::uint16_t>();
    return e;
}

json alert_json(const NormalizedAlert& a) {
    json j = {
        {"alert_id", a.alert_id},
        {"source_format", to_string(a.source_format)},
        {"message", a.message},
        {"timestamp", ts(a.timestamp)},
        {"src", endpoint_json(a.src)},
        {"dst", endpoint_json(a.dst)},
        {"protocol", a.protocol},
        {"device_ref", a.device_ref ? json(*a.device_ref) : json(nullptr)},
        {"priority", a.priority ? json(*a.priority) : json(nullptr)},
        {"raw", a.raw},
    };
    if (a.signature_id) {
        j["signature_id"] = {a.signature_id->generator, a.signature_id->signature, a.signature_id->revision};
    }
    return j;
}

NormalizedAlert alert_from(const json& j) {
    NormalizedAlert a;
    a.alert_id = j.at("alert_id").get<std::string>();
    a.source_format = enum_from<SourceFormat>(j.at("source_format"), parse_source_format, "source format");
    a.message = j.at("message").get<std::string>();
    a.timestamp = ts_from(j.at("timestamp"));
    a.src = endpoint_from(j.at("src"));
    a.dst = endpoint_from(j.at("dst"));
    a.protocol = j.at("protocol").get<std::string>();
    if (!j.at("device_ref").is_null()) a.device_ref = j["device_ref"].get<std::string>();
    if (!j.at("priority").is_null()) a.priority = j["priority"].get<int>();
    a.raw = j.at("raw").get<std::string>();
    if (j.contains("signature_id")) {
        const auto& s = j["signature_id"];
        a.signature_id = SignatureId{s.at(0).get<std::uint32_t>(), s.at(1).get<std::uint32_t>(),
                                     s.at(2).get<std::uint32_t>()};
    }
    return a;
}

json key_json(const CacheKey& k) {
    return {{"alert_fingerprint", k.alert_fingerprint},
            {"template_version", k.template_version},
            {"persona_version", k.persona_version},
            {"device_class", k.device_class}};
}

CacheKey key_from(const json& j) {
    return CacheKey{j.at("alert_fingerprint").get<std::string>(), j.at("template_version").get<int>(),
                    j.at("persona_version").get<int>(), j.at("device_class").get<std::string>()};
}

json turn_json(const ConversationTurn& t) {
    return {{"role", to_string(t.role)}, {"text", t.text}, {"at", ts(t.at)}};
}

}  // namespace

json to_json(const RedactionMap& m) {
    json arr = json::array();
    for (const auto& e : m.entries()) {
        arr.push_back({{"placeholder", e.placeholder}, {"original", e.original}, {"kind", to_string(e.kind)}});
    }
    return arr;
}

RedactionMap redaction_map_from_json(const json& j) {
    RedactionMap m;
    for (const auto& e : j) {
        m.restore(RedactionEntry{e.at("placeholder").get<std::string>(), e.at("original").get<std::string>(),
                                 enum_from<RedactionKind>(e.at("kind"), parse_redaction_kind, "redaction kind")});
    }
    return m;
}

json to_json(const RubricScore& s) {
    json hits = json::array();
    for (const auto& h : s.detail.forbidden_hits) hits.push_back({{"term", h.term}, {"offset", h.offset}});
    return {{"corr", to_string(s.corr)},
            {"desc", s.desc},
            {"cons", s.cons},
            {"meas", s.meas},
            {"urg", s.urg},
            {"int", s.intuitive},
            {"itemized_steps", s.detail.itemized_steps},
            {"forbidden_hits", hits},
            {"urgency_hits", s.detail.urgency_hits},
            {"readability_grade", s.detail.readability_grade}};
}

RubricScore rubric_from_json(const json& j) {
    RubricScore s;
    s.corr = enum_from<CorrectnessMark>(j.at("corr"), parse_correctness, "correctness mark");
    s.desc = j.at("desc").get<bool>();
    s.cons = j.at("cons").get<bool>();
    s.meas = j.at("meas").get<bool>();
    s.urg = j.at("urg").get<bool>();
    s.intuitive = j.at("int").get<bool>();
    s.detail.itemized_steps = j.at("itemized_steps").get<std::size_t>();
    for (const auto& h : j.at("forbidden_hits")) {
        s.detail.forbidden_hits.push_back({h.at("term").get<std::string>(), h.at("offset").get<std::size_t>()});
    }
    s.detail.urgency_hits = j.at("urgency_hits").get<std::size_t>();
    s.detail.readability_grade = j.at("readability_grade").get<double>();
    return s;
}

json to_json(const Explanation& e) {
    return {{"explanation_id", e.explanation_id},
            {"alert_fingerprint", e.alert_fingerprint},
            {"text", e.text},
            {"sections",
             {{"description", span_json(e.sections.description)},
              {"consequences", span_json(e.sections.consequences)},
              {"instructions", e.sections.instructions}}},
            {"rubric", e.rubric ? to_json(*e.rubric) : json(nullptr)},
            {"template_version", e.template_version},
            {"persona_version", e.persona_version},
            {"device_class", e.device_class},
            {"created_at", ts(e.created_at)},
            {"backend_id", e.backend_id},
            {"is_decoy", e.is_decoy}};
}

Explanation explanation_from_json(const json& j) {
    Explanation e;
    e.explanation_id = j.at("explanation_id").get<std::string>();
    e.alert_fingerprint = j.at("alert_fingerprint").get<std::string>();
    e.text = j.at("text").get<std::string>();
    const auto& s = j.at("sections");
    e.sections.description = span_from(s.at("description"));
    e.sections.consequences = span_from(s.at("consequences"));
    e.sections.instructions = s.at("instructions").get<std::vector<std::string>>();
    if (!j.at("rubric").is_null()) e.rubric = rubric_from_json(j["rubric"]);
    e.template_version = j.at("template_version").get<int>();
    e.persona_version = j.at("persona_version").get<int>();
    e.device_class = j.at("device_class").get<std::string>();
    e.created_at = ts_from(j.at("created_at"));
    e.backend_id = j.at("backend_id").get<std::string>();
    e.is_decoy = j.at("is_decoy").get<bool>();
    return e;
}

json to_json(const AlertRecord& r) {
    return {{"alert_id", r.alert_id},
            {"alert", alert_json(r.alert.inner)},
            {"redaction", to_json(r.alert.redaction)},
            {"device_class", r.alert.device_class},
            {"resolution", resolution_str(r.alert.resolution)},
            {"device_ref", r.device_ref ? json(*r.device_ref) : json(nullptr)},
            {"urgency", to_string(r.urgency)},
            {"status", to_string(r.status)},
            {"cache_key", r.cache_key ? key_json(*r.cache_key) : json(nullptr)},
            {"error", r.error},
            {"received_at", ts(r.received_at)},
            {"updated_at", ts(r.updated_at)}};
}

AlertRecord alert_record_from_json(const json& j) {
    AlertRecord r;
    r.alert_id = j.at("alert_id").get<std::string>();
    r.alert.inner = alert_from(j.at("alert"));
    r.alert.redaction = redaction_map_from_json(j.at("redaction"));
    r.alert.device_class = j.at("device_class").get<std::string>();
    r.alert.resolution = enum_from<DeviceResolution>(j.at("resolution"), parse_resolution, "resolution");
    if (!j.at("device_ref").is_null()) r.device_ref = j["device_ref"].get<std::string>();
    r.urgency = enum_from<UrgencyLevel>(j.at("urgency"), parse_urgency, "urgency");
    r.status = enum_from<AlertStatus>(j.at("status"), parse_status, "status");
    if (!j.at("cache_key").is_null()) r.cache_key = key_from(j["cache_key"]);
    r.error = j.at("error").get<std::string>();
    r.received_at = ts_from(j.at("received_at"));
    r.updated_at = ts_from(j.at("updated_at"));
    return r;
}

json to_json(const SessionRecord& s) {
    json turns = json::array();
    for (const auto& t : s.turns) turns.push_back(turn_json(t));
    return {{"session_id", s.session_id},
            {"alert_id", s.alert_id},
            {"user_ref", s.user_ref},
            {"turns", turns},
            {"state", to_string(s.state)},
            {"outcome", s.outcome ? json(to_string(*s.outcome)) : json(nullptr)},
            {"window_limit", s.window_limit},
            {"last_activity", ts(s.last_activity)}};
}

SessionRecord session_from_json(const json& j) {
    SessionRecord s;
    s.session_id = j.at("session_id").get<std::string>();
    s.alert_id = j.at("alert_id").get<std::string>();
    s.user_ref = j.at("user_ref").get<std::string>();
    for (const auto& t : j.at("turns")) {
        s.turns.push_back({enum_from<TurnRole>(t.at("role"), parse_turn_role, "turn role"),
                           t.at("text").get<std::string>(), ts_from(t.at("at"))});
    }
    s.state = enum_from<SessionState>(j.at("state"), parse_state, "session state");
    if (!j.at("outcome").is_null()) {
        s.outcome = enum_from<SessionOutcome>(j["outcome"], parse_session_outcome, "outcome");
    }
    s.window_limit = j.at("window_limit").get<std::size_t>();
    s.last_activity = ts_from(j.at("last_activity"));
    return s;
}

json to_json(const AuditRecord& a) {
    return {{"event", a.event}, {"subject_id", a.subject_id}, {"detail", a.detail}, {"at", ts(a.at)}};
}

AuditRecord audit_from_json(const json& j) {
    return {j.at("event").get<std::string>(), j.at("subject_id").get<std::string>(),
            j.at("detail").get<std::string>(), ts_from(j.at("at"))};
}

// Framing ----------------------------------------------------------------------

namespace {

constexpr std::uint32_t kMaxRecord = 64u << 20;
constexpr const char* kIndexFile = "index";

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const char* p) {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(p[i]);
    return v;
}

std::uint32_t crc(std::string_view payload) {
    return static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(payload.data()), static_cast<uInt>(payload.size())));
}

std::string frame(std::string_view payload) {
    std::string out;
    out.reserve(payload.size() + 8);
    put_u32(out, static_cast<std::uint32_t>(payload.size()));
    out.append(payload);
    put_u32(out, crc(payload));
    return out;
}

enum class FrameStatus { Ok, Corrupt, Torn };

struct FrameRead {
    FrameStatus status;
    std::string_view payload;
    std::size_t next;  // offset after the frame (Ok/Corrupt)
};

FrameRead read_frame(std::string_view buf, std::size_t pos) {
    if (buf.size() - pos < 4) return {FrameStatus::Torn, {}, pos};
    std::uint32_t len = get_u32(buf.data() + pos);
    if (len > kMaxRecord || buf.size() - pos - 4 < static_cast<std::size_t>(len) + 4) {
        return {FrameStatus::Torn, {}, pos};
    }
    std::string_view payload = buf.substr(pos + 4, len);
    std::uint32_t stored = get_u32(buf.data() + pos + 4 + len);
    std::size_t next = pos + 8 + len;
    return {stored == crc(payload) ? FrameStatus::Ok : FrameStatus::Corrupt, payload, next};
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error("cannot read " + p.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_all(int fd, std::string_view data, const fs::path& p) {
    while (!data.empty()) {
        ssize_t n = ::write(fd, data.data(), data.size());
        if (n < 0) {
            if (errno == EINTR) continue;
            int err = errno;
            if (err == ENOSPC || err == EDQUOT) throw StorageFull("no space left writing " + p.string());
            throw Error("write to " + p.string() + " failed: " + std::strerror(err));
        }
        data.remove_prefix(static_cast<std::size_t>(n));
    }
}

void fsync_dir(const fs::path& dir) {
    int fd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY);
    if (fd >= 0) {
        ::fsync(fd);
        ::close(fd);
    }
}

bool is_log_file(const fs::path& p) {
    auto name = p.filename().string();
    return name.size() == 14 && name.substr(10) == ".log";
}

std::string log_name_for(Timestamp t) {
    return format_iso8601(t).substr(0, 10) + ".log";
}

std::vector<fs::path> log_files(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && is_log_file(entry.path())) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

}  // namespace

// Store ------------------------------------------------------------------------

ExplanationStore::ExplanationStore(fs::path dir, StoreOptions opts) : dir_(std::move(dir)), opts_(opts) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec || !fs::is_directory(dir_)) {
        throw Error("cannot create store directory " + dir_.string() + ": " + ec.message());
    }
    load();
}

ExplanationStore::~ExplanationStore() {
    try {
        std::lock_guard wlock(write_mutex_);
        if (since_snapshot_ > 0) write_snapshot_locked();
    } catch (const std::exception& e) {
        spdlog::warn("store: final snapshot failed: {}", e.what());
    }
}

void ExplanationStore::load() {
    std::unique_lock lock(index_mutex_);
    bool snapshot_ok = false;
    fs::path index = dir_ / kIndexFile;
    if (fs::exists(index)) {
        try {
            std::string buf = read_file(index);
            auto fr = read_frame(buf, 0);
            if (fr.status != FrameStatus::Ok) throw StorageCorrupt("index snapshot checksum mismatch");
            auto j = json::parse(fr.payload);
            std::map<std::string, std::uintmax_t> covered;
            for (const auto& [name, bytes] : j.at("files").items()) {
                auto path = dir_ / name;
                if (!fs::exists(path) || fs::file_size(path) < bytes.get<std::uintmax_t>()) {
                    throw StorageCorrupt("index snapshot covers more of " + name + " than exists");
                }
                covered[name] = bytes.get<std::uintmax_t>();
            }
            for (const auto& r : j.at("records")) apply(r);
            indexed_bytes_ = std::move(covered);
            snapshot_ok = true;
        } catch (const std::exception& e) {
            spdlog::error("store: ignoring index snapshot, rebuilding from logs: {}", e.what());
        }
    }
    if (!snapshot_ok) {
        explanations_.clear();
        alerts_.clear();
        sessions_.clear();
        audit_.clear();
        indexed_bytes_.clear();
    }
    for (const auto& file : log_files(dir_)) {
        auto name = file.filename().string();
        scan_file(file, indexed_bytes_.count(name) ? indexed_bytes_[name] : 0);
    }
    stats_.bytes = 0;
    for (const auto& [name, bytes] : indexed_bytes_) stats_.bytes += bytes;
    stats_.records = explanations_.size() + alerts_.size() + sessions_.size() + audit_.size();
}

void ExplanationStore::scan_file(const fs::path& file, std::uintmax_t from) {
    std::string buf = read_file(file);
    std::size_t pos = static_cast<std::size_t>(from);
    while (pos < buf.size()) {
        auto fr = read_frame(buf, pos);
        if (fr.status == FrameStatus::Torn) {
            spdlog::warn("store: torn record at {}:{}; truncating {} trailing bytes", file.string(), pos,
                         buf.size() - pos);
            ++stats_.torn_tails;
            fs::resize_file(file, pos);
            break;
        }
        if (fr.status == FrameStatus::Corrupt) {
            spdlog::error("store: checksum mismatch at {}:{}; record skipped", file.string(), pos);
            ++stats_.corrupt_records;
        } else {
            try {
                apply(json::parse(fr.payload));
            } catch (const std::exception& e) {
                spdlog::error("store: unreadable record at {}:{}: {}", file.string(), pos, e.what());
                ++stats_.corrupt_records;
            }
        }
        pos = fr.next;
    }
    indexed_bytes_[file.filename().string()] = std::min<std::uintmax_t>(pos, buf.size());
}

void ExplanationStore::apply(const json& record) {
    const auto type = record.at("type").get<std::string>();
    if (type == "explanation") {
        explanations_[key_from(record.at("key")).str()] = explanation_from_json(record.at("explanation"));
    } else if (type == "alert") {
        auto r = alert_record_from_json(record.at("alert"));
        alerts_[r.alert_id] = std::move(r);
    } else if (type == "session") {
        auto s = session_from_json(record.at("session"));
        sessions_[s.session_id] = std::move(s);
    } else if (type == "audit") {
        audit_.push_back(audit_from_json(record.at("audit")));
    } else {
        throw StorageCorrupt("unknown record type '" + type + "'");
    }
}

void ExplanationStore::append(const json& record) {
    // Caller holds write_mutex_.
    std::string framed = frame(record.dump());
    if (opts_.quota_bytes > 0 && stats_.bytes + framed.size() > opts_.quota_bytes) {
        throw StorageFull("store quota of " + std::to_string(opts_.quota_bytes) + " bytes exhausted");
    }
    auto name = log_name_for(now());
    auto path = dir_ / name;
    bool created = !fs::exists(path);
    int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0600);
    if (fd < 0) throw Error("cannot open " + path.string() + ": " + std::strerror(errno));
    try {
        write_all(fd, framed, path);
        if (opts_.fsync && ::fsync(fd) != 0) throw Error("fsync " + path.string() + " failed");
    } catch (...) {
        ::close(fd);
        throw;
    }
    ::close(fd);
    if (created && opts_.fsync) fsync_dir(dir_);

    {
        std::unique_lock lock(index_mutex_);
        apply(record);
        indexed_bytes_[name] += framed.size();
        stats_.bytes += framed.size();
        ++stats_.records;
    }
    // A snapshot rewrites every live record, so the interval grows with the store.
    const std::size_t live = explanations_.size() + alerts_.size() + sessions_.size() + audit_.size();
    if (++since_snapshot_ >= std::max(opts_.snapshot_every, live / 2)) write_snapshot_locked();
}

void ExplanationStore::write_snapshot_locked() {
    json records = json::array();
    json files = json::object();
    {
        std::shared_lock lock(index_mutex_);
        for (const auto& [key, e] : explanations_) {
            // The key string is not reversible; rebuild it from the explanation.
            CacheKey k{e.alert_fingerprint, e.template_version, e.persona_version, e.device_class};
            records.push_back({{"type", "explanation"}, {"key", key_json(k)}, {"explanation", to_json(e)}});
        }
        for (const auto& [id, a] : alerts_) records.push_back({{"type", "alert"}, {"alert", to_json(a)}});
        for (const auto& [id, s] : sessions_) records.push_back({{"type", "session"}, {"session", to_json(s)}});
        for (const auto& a : audit_) records.push_back({{"type", "audit"}, {"audit", to_json(a)}});
        for (const auto& [name, bytes] : indexed_bytes_) files[name] = bytes;
    }
    json snapshot = {{"version", 1}, {"files", files}, {"records", records}};
    std::string framed = frame(snapshot.dump());
    auto tmp = dir_ / "index.tmp";
    int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0600);
    if (fd < 0) throw Error("cannot open " + tmp.string() + ": " + std::strerror(errno));
    try {
        write_all(fd, framed, tmp);
        if (opts_.fsync) ::fsync(fd);
    } catch (...) {
        ::close(fd);
        throw;
    }
    ::close(fd);
    fs::rename(tmp, dir_ / kIndexFile);
    if (opts_.fsync) fsync_dir(dir_);
    since_snapshot_ = 0;
}

void ExplanationStore::checkpoint() {
    std::lock_guard wlock(write_mutex_);
    write_snapshot_locked();
}

std::optional<Explanation> ExplanationStore::get(const CacheKey& key) const {
    std::shared_lock lock(index_mutex_);
    auto it = explanations_.find(key.str());
    if (it == explanations_.end()) return std::nullopt;
    return it->second;
}

std::string ExplanationStore::put(const CacheKey& key, Explanation e) {
    if (trim(e.text).empty()) throw Error("refusing to store an explanation with empty text");
    std::lock_guard wlock(write_mutex_);
    if (auto existing = get(key)) return existing->explanation_id;
    if (e.explanation_id.empty()) e.explanation_id = "ex-" + fingerprint(key.str());
    e.alert_fingerprint = key.alert_fingerprint;
    e.template_version = key.template_version;
    e.persona_version = key.persona_version;
    e.device_class = key.device_class;
    if (e.created_at == Timestamp{}) e.created_at = now();
    append({{"type", "explanation"}, {"key", key_json(key)}, {"explanation", to_json(e)}});
    return e.explanation_id;
}

std::optional<Explanation> ExplanationStore::promote(const CacheKey& key, std::optional<RubricScore> rubric) {
    std::lock_guard wlock(write_mutex_);
    auto e = get(key);
    if (!e) return std::nullopt;
    if (e->is_decoy) {
        e->is_decoy = false;
        if (!e->rubric) e->rubric = std::move(rubric);
        append({{"type", "explanation"}, {"key", key_json(key)}, {"explanation", to_json(*e)}});
    }
    return e;
}

void ExplanationStore::put_alert(const AlertRecord& r) {
    std::lock_guard wlock(write_mutex_);
    append({{"type", "alert"}, {"alert", to_json(r)}});
}

std::optional<AlertRecord> ExplanationStore::find_alert(const std::string& alert_id) const {
    std::shared_lock lock(index_mutex_);
    auto it = alerts_.find(alert_id);
    if (it == alerts_.end()) return std::nullopt;
    return it->second;
}

std::vector<AlertRecord> ExplanationStore::alerts() const {
    std::vector<AlertRecord> out;
    {
        std::shared_lock lock(index_mutex_);
        out.reserve(alerts_.size());
        for (const auto& [id, r] : alerts_) out.push_back(r);
    }
    std::sort(out.begin(), out.end(), [](const AlertRecord& a, const AlertRecord& b) {
        if (a.received_at != b.received_at) return a.received_at > b.received_at;
        return a.alert_id < b.alert_id;
    });
    return out;
}

void ExplanationStore::put_session(const SessionRecord& s) {
    std::lock_guard wlock(write_mutex_);
    append({{"type", "session"}, {"session", to_json(s)}});
}

std::optional<SessionRecord> ExplanationStore::find_session(const std::string& session_id) const {
    std::shared_lock lock(index_mutex_);
    auto it = sessions_.find(session_id);
    if (it == sessions_.end()) return std::nullopt;
    return it->second;
}

void ExplanationStore::append_audit(const AuditRecord& a) {
    std::lock_guard wlock(write_mutex_);
    append({{"type", "audit"}, {"audit", to_json(a)}});
}

std::vector<AuditRecord> ExplanationStore::audit_log() const {
    std::shared_lock lock(index_mutex_);
    return audit_;
}

std::size_t ExplanationStore::explanation_count(bool include_decoys) const {
    std::shared_lock lock(index_mutex_);
    if (include_decoys) return explanations_.size();
    return static_cast<std::size_t>(std::count_if(explanations_.begin(), explanations_.end(),
                                                  [](const auto& kv) { return !kv.second.is_decoy; }));
}

std::vector<json> ExplanationStore::dump() const {
    std::vector<json> out;
    for (const auto& file : log_files(dir_)) {
        std::string buf = read_file(file);
        std::size_t pos = 0;
        while (pos < buf.size()) {
            auto fr = read_frame(buf, pos);
            if (fr.status == FrameStatus::Torn) break;
            if (fr.status == FrameStatus::Corrupt) {
                out.push_back({{"type", "corrupt"}, {"file", file.filename().string()}, {"offset", pos}});
            } else {
                try {
                    out.push_back(json::parse(fr.payload));
                } catch (const json::exception&) {
                    out.push_back({{"type", "corrupt"}, {"file", file.filename().string()}, {"offset", pos}});
                }
            }
            pos = fr.next;
        }
    }
    return out;
}

StoreStats ExplanationStore::stats() const {
    std::shared_lock lock(index_mutex_);
    return stats_;
}

}  // namespace chatids
