#include "chatids/api_service.hpp"

#include <cstdlib>
#include <fstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <spdlog/spdlog.h>

namespace chatids {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;
using nlohmann::json;

// Configuration ----------------------------------------------------------------

ServiceConfig ServiceConfig::defaults(const fs::path& data_dir, const fs::path& store_dir) {
    ServiceConfig c;
    c.persona_path = data_dir / "persona.conf";
    c.template_path = data_dir / "prompt_template.txt";
    c.catalog_path = data_dir / "signatures.tsv";
    c.severity_path = data_dir / "severity.policy";
    c.lexicon_path = data_dir / "urgency_lexicon.txt";
    c.names_path = data_dir / "known_names.txt";
    c.device_classes_path = data_dir / "device_classes.tsv";
    c.inventory_path = data_dir / "inventory.tsv";
    c.mock_corpus = data_dir / "mock_corpus.json";
    c.store_path = store_dir;
    c.user.display_name = "Jon";
    return c;
}

namespace {

class IniReader {
public:
    IniReader(const fs::path& file) : file_(file) {
        try {
            pt::read_ini(file.string(), tree_);
        } catch (const pt::ini_parser_error& e) {
            throw ConfigError("config " + file.string() + ": " + e.message() + " (line " +
                              std::to_string(e.line()) + ")");
        }
    }

    std::optional<std::string> get(const std::string& section, const std::string& key) const {
        auto sec = tree_.get_child_optional(pt::ptree::path_type(section, '\0'));
        if (!sec) return std::nullopt;
        auto v = sec->get_optional<std::string>(pt::ptree::path_type(key, '\0'));
        if (!v) return std::nullopt;
        return std::string(trim(*v));
    }

    std::string require(const std::string& section, const std::string& key) const {
        auto v = get(section, key);
        if (!v || v->empty()) throw ConfigError(where(section, key) + ": missing required key");
        return *v;
    }

    std::string where(const std::string& section, const std::string& key) const {
        return "config " + file_.string() + ": [" + section + "] " + key;
    }

    template <typename T>
    T number(const std::string& section, const std::string& key, T fallback) const {
        auto v = get(section, key);
        if (!v) return fallback;
        try {
            std::size_t used = 0;
            double d = std::stod(*v, &used);
            if (used != v->size()) throw std::invalid_argument("trailing text");
            return static_cast<T>(d);
        } catch (const std::exception&) {
            throw ConfigError(where(section, key) + ": not a number: '" + *v + "'");
        }
    }

    bool flag(const std::string& section, const std::string& key, bool fallback) const {
        auto v = get(section, key);
        if (!v) return fallback;
        auto t = to_lower(*v);
        if (t == "true" || t == "yes" || t == "on" || t == "1") return true;
        if (t == "false" || t == "no" || t == "off" || t == "0") return false;
        throw ConfigError(where(section, key) + ": expected true or false, got '" + *v + "'");
    }

    std::vector<std::string> sections_with_prefix(std::string_view prefix) const {
        std::vector<std::string> out;
        for (const auto& [name, child] : tree_) {
            if (name.rfind(prefix, 0) == 0) out.push_back(name);
        }
        return out;
    }

private:
    fs::path file_;
    pt::ptree tree_;
};

fs::path resolve_path(const fs::path& base, const std::string& value) {
    fs::path p(value);
    return p.is_absolute() ? p : base / p;
}

void require_file(const IniReader& ini, const std::string& section, const std::string& key, const fs::path& p) {
    if (!fs::is_regular_file(p)) throw ConfigError(ini.where(section, key) + ": file not found: " + p.string());
}

}  // namespace

ServiceConfig load_service_config(const fs::path& path) {
    if (!fs::is_regular_file(path)) throw ConfigError("config file not found: " + path.string());
    IniReader ini(path);
    const fs::path base = path.parent_path();
    ServiceConfig c;

    auto listen = ini.require("server", "listen");
    auto colon = listen.rfind(':');
    if (colon == std::string::npos) throw ConfigError(ini.where("server", "listen") + ": expected host:port");
    c.listen_host = listen.substr(0, colon);
    try {
        c.listen_port = std::stoi(listen.substr(colon + 1));
    } catch (const std::exception&) {
        throw ConfigError(ini.where("server", "listen") + ": bad port in '" + listen + "'");
    }
    if (c.listen_port < 0 || c.listen_port > 65535) throw ConfigError(ini.where("server", "listen") + ": port out of range");

    for (const auto& section : ini.sections_with_prefix("source")) {
        SourceConfig s;
        s.name = section;
        s.path = resolve_path(base, ini.require(section, "path"));
        auto fmt = ini.require(section, "format");
        auto parsed = parse_source_format(fmt);
        if (!parsed) throw ConfigError(ini.where(section, "format") + ": unknown format '" + fmt + "'");
        s.format = *parsed;
        s.follow = ini.flag(section, "follow", false);
        if (!s.follow) require_file(ini, section, "path", s.path);
        c.sources.push_back(std::move(s));
    }

    auto kind = to_lower(ini.get("backend", "kind").value_or("auto"));
    if (kind == "auto") {
        c.backend_auto = true;
    } else if (kind == "mock") {
        c.backend_auto = false;
        c.backend.kind = BackendKind::Mock;
    } else if (kind == "remote" || kind == "remote-http") {
        c.backend_auto = false;
        c.backend.kind = BackendKind::RemoteHttp;
    } else {
        throw ConfigError(ini.where("backend", "kind") + ": expected auto, mock or remote, got '" + kind + "'");
    }
    c.backend.endpoint = ini.get("backend", "endpoint").value_or("");
    if (!c.backend_auto && c.backend.kind == BackendKind::RemoteHttp && c.backend.endpoint.empty()) {
        ini.require("backend", "endpoint");
    }
    if (auto v = ini.get("backend", "credential_env")) c.backend.credential_ref = *v;
    if (auto v = ini.get("backend", "model")) c.backend.model = *v;
    c.backend.temperature = ini.number("backend", "temperature", c.backend.temperature);
    c.backend.timeout = Millis{ini.number<long long>("backend", "timeout_ms", c.backend.timeout.count())};
    c.backend.max_retries = ini.number("backend", "max_retries", c.backend.max_retries);
    c.backend.backoff_base = Millis{ini.number<long long>("backend", "backoff_base_ms", c.backend.backoff_base.count())};
    c.backend.jitter_min = Millis{ini.number<long long>("backend", "jitter_min_ms", c.backend.jitter_min.count())};
    c.backend.jitter_max = Millis{ini.number<long long>("backend", "jitter_max_ms", c.backend.jitter_max.count())};
    if (c.backend.max_retries < 0) throw ConfigError(ini.where("backend", "max_retries") + ": must be >= 0");
    if (c.backend.jitter_max < c.backend.jitter_min) {
        throw ConfigError(ini.where("backend", "jitter_max_ms") + ": smaller than jitter_min_ms");
    }
    if (auto v = ini.get("backend", "mock_corpus")) {
        c.mock_corpus = resolve_path(base, *v);
        require_file(ini, "backend", "mock_corpus", c.mock_corpus);
    }

    auto k = ini.number<long long>("decoy", "k", 4);
    if (k < 1) throw ConfigError(ini.where("decoy", "k") + ": must be >= 1");
    c.k = static_cast<std::size_t>(k);

    auto file = [&](const std::string& section, const std::string& key, fs::path& out) {
        out = resolve_path(base, ini.require(section, key));
        require_file(ini, section, key, out);
    };
    auto optional_file = [&](const std::string& section, const std::string& key, fs::path& out) {
        if (auto v = ini.get(section, key)) {
            out = resolve_path(base, *v);
            require_file(ini, section, key, out);
        }
    };
    file("decoy", "catalog", c.catalog_path);
    file("prompt", "persona", c.persona_path);
    file("prompt", "template", c.template_path);
    file("policy", "severity", c.severity_path);
    optional_file("policy", "urgency_lexicon", c.lexicon_path);
    optional_file("policy", "known_names", c.names_path);
    optional_file("policy", "device_classes", c.device_classes_path);
    optional_file("policy", "inventory", c.inventory_path);
    c.readability_threshold = ini.number("policy", "readability_threshold", c.readability_threshold);

    c.store_path = resolve_path(base, ini.require("store", "path"));
    c.store.fsync = ini.flag("store", "fsync", true);
    c.store.quota_bytes = ini.number<std::uintmax_t>("store", "quota_mb", 0) * 1024 * 1024;

    c.user.user_ref = ini.get("user", "ref").value_or("default");
    c.user.display_name = ini.get("user", "display_name").value_or("");
    c.window_limit = ini.number<std::size_t>("session", "window_limit", c.window_limit);
    c.session_expiry = std::chrono::hours{ini.number<long long>("session", "expiry_hours", 24)};
    return c;
}

Resources Resources::load(const ServiceConfig& cfg) {
    Resources r;
    r.persona = PersonaConfig::load(cfg.persona_path.string());
    r.prompt_template = PromptTemplate::load(cfg.template_path.string());
    if (auto issues = validate_template(r.prompt_template); !issues.empty()) throw TemplateInvalid(issues);
    r.catalog = load_catalog_file(cfg.catalog_path.string());
    r.severity = SeverityPolicy::load(cfg.severity_path.string());
    r.lexicon = cfg.lexicon_path.empty() ? UrgencyLexicon::default_lexicon()
                                         : UrgencyLexicon::load(cfg.lexicon_path.string());
    if (!cfg.names_path.empty()) r.names = NameCatalog::load(cfg.names_path.string());
    if (!cfg.device_classes_path.empty()) r.device_classes = DeviceClassTable::load(cfg.device_classes_path.string());
    if (!cfg.inventory_path.empty()) {
        r.inventory = DeviceInventory::load(cfg.inventory_path.string(), r.device_classes);
    }
    // Device names and addresses from the inventory are identifiers as well.
    for (const auto& d : r.inventory.devices()) {
        if (d.generalization_level != GeneralizationLevel::Model) r.names.add(RedactionKind::DeviceName, d.display_name);
        r.names.add(RedactionKind::DeviceName, d.device_ref);
    }
    return r;
}

std::shared_ptr<LlmBackend> backend_for(const ServiceConfig& cfg) {
    BackendConfig b = cfg.backend;
    if (cfg.backend_auto) {
        const char* cred = std::getenv(b.credential_ref.c_str());
        bool remote = cred != nullptr && *cred != '\0' && !b.endpoint.empty();
        b.kind = remote ? BackendKind::RemoteHttp : BackendKind::Mock;
    }
    if (b.kind == BackendKind::Mock) {
        spdlog::info("using the offline mock backend");
        return make_backend(b, fs::exists(cfg.mock_corpus) ? cfg.mock_corpus.string() : std::string{});
    }
    return make_backend(b);
}

// Service ----------------------------------------------------------------------

ChatIdsService::ChatIdsService(ServiceConfig cfg, std::shared_ptr<LlmBackend> backend,
                               std::optional<GatewayOptions> gateway_options)
    : cfg_(std::move(cfg)), res_(Resources::load(cfg_)) {
    if (cfg_.k < 1) throw ConfigError("k must be >= 1");
    if (!backend) backend = backend_for(cfg_);
    GatewayOptions gopts = gateway_options.value_or(GatewayOptions::from(cfg_.backend));
    if (!gateway_options && backend->id() == "mock") {
        // Nothing to hide timing from when nothing leaves the host.
        gopts.jitter_min = gopts.jitter_max = Millis{0};
    }
    store_ = std::make_unique<ExplanationStore>(cfg_.store_path, cfg_.store);
    gateway_ = std::make_unique<Gateway>(backend, gopts);
    gateway_->set_debug_scrubber([this](std::string_view text) { return scrub(text, res_.names).scrubbed; });

    ExplainerDeps deps;
    deps.catalog = &res_.catalog;
    deps.persona = &res_.persona;
    deps.prompt_template = &res_.prompt_template;
    deps.lexicon = &res_.lexicon;
    deps.gateway = gateway_.get();
    deps.store = store_.get();
    deps.k = cfg_.k;
    deps.rubric_options.readability_threshold = cfg_.readability_threshold;
    explainer_ = std::make_unique<Explainer>(std::move(deps));

    SessionDeps sdeps;
    sdeps.store = store_.get();
    sdeps.gateway = gateway_.get();
    sdeps.persona = &res_.persona;
    sdeps.names = &res_.names;
    sdeps.inventory = &res_.inventory;
    sdeps.user = &cfg_.user;
    sdeps.window_limit = cfg_.window_limit;
    sdeps.expiry = cfg_.session_expiry;
    sessions_ = std::make_unique<SessionManager>(std::move(sdeps));

    // Replay notifications for what a previous run already explained.
    auto explained = store_->alerts();
    std::reverse(explained.begin(), explained.end());
    for (const auto& r : explained) {
        if (r.status == AlertStatus::Explained) publish(r);
    }
}

ChatIdsService::~ChatIdsService() { stop(); }

void ChatIdsService::start() {
    {
        std::lock_guard lock(queue_mutex_);
        if (worker_.joinable()) return;
        stopping_ = false;
        auto pending = store_->alerts();
        for (auto it = pending.rbegin(); it != pending.rend(); ++it) {
            if (it->status == AlertStatus::Queued &&
                std::find(queue_.begin(), queue_.end(), it->alert_id) == queue_.end()) {
                queue_.push_back(it->alert_id);
            }
        }
    }
    worker_ = std::thread([this] { worker_loop(); });
    queue_cv_.notify_all();
}

void ChatIdsService::stop() {
    tailing_ = false;
    for (auto& t : tailers_) {
        if (t.joinable()) t.join();
    }
    tailers_.clear();
    {
        std::lock_guard lock(queue_mutex_);
        stopping_ = true;
    }
    queue_cv_.notify_all();
    if (worker_.joinable()) worker_.join();
}

std::string ChatIdsService::submit(std::string_view record, SourceFormat format) {
    auto outcome = try_parse(record, format);
    if (auto* err = std::get_if<IngestError>(&outcome)) throw *err;
    if (auto* skip = std::get_if<SkippedRecord>(&outcome)) {
        throw IngestError(IngestErrorKind::NotAnAlert, 0, skip->reason);
    }
    return submit(std::get<NormalizedAlert>(outcome));
}

std::string ChatIdsService::submit(const NormalizedAlert& alert) {
    if (auto existing = store_->find_alert(alert.alert_id)) {
        if (existing->status != AlertStatus::Failed) return alert.alert_id;
    }
    const DeviceProfile* device = res_.inventory.resolve(alert);
    AlertRecord r;
    r.alert_id = alert.alert_id;
    r.alert = anonymize_alert(alert, device, cfg_.user, res_.names);
    r.device_ref = device ? std::optional<std::string>(device->device_ref) : alert.device_ref;
    r.urgency = classify_severity(alert, res_.severity);
    r.status = AlertStatus::Queued;
    r.received_at = r.updated_at = now();
    store_->put_alert(r);
    {
        std::lock_guard lock(queue_mutex_);
        queue_.push_back(r.alert_id);
    }
    queue_cv_.notify_one();
    return r.alert_id;
}

void ChatIdsService::worker_loop() {
    for (;;) {
        std::string id;
        {
            std::unique_lock lock(queue_mutex_);
            queue_cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
            if (stopping_) return;
            id = std::move(queue_.front());
            queue_.pop_front();
            ++busy_;
        }
        process(id);
        {
            std::lock_guard lock(queue_mutex_);
            --busy_;
        }
        idle_cv_.notify_all();
    }
}

void ChatIdsService::drain() {
    for (;;) {
        std::string id;
        {
            std::lock_guard lock(queue_mutex_);
            if (queue_.empty()) break;
            id = std::move(queue_.front());
            queue_.pop_front();
            ++busy_;
        }
        process(id);
        {
            std::lock_guard lock(queue_mutex_);
            --busy_;
        }
        idle_cv_.notify_all();
    }
}

bool ChatIdsService::wait_idle(std::chrono::milliseconds timeout) {
    std::unique_lock lock(queue_mutex_);
    return idle_cv_.wait_for(lock, timeout, [&] { return queue_.empty() && busy_ == 0; });
}

void ChatIdsService::process(const std::string& alert_id) {
    auto r = store_->find_alert(alert_id);
    if (!r || r->status == AlertStatus::Explained) return;
    try {
        explainer_->lookup_or_fetch(r->alert);
        r->status = AlertStatus::Explained;
        r->cache_key = explainer_->key_for(r->alert);
        r->error.clear();
    } catch (const std::exception& e) {
        spdlog::error("alert {}: explanation failed: {}", alert_id, e.what());
        r->status = AlertStatus::Failed;
        r->error = e.what();
    }
    r->updated_at = now();
    try {
        store_->put_alert(*r);
    } catch (const std::exception& e) {
        spdlog::error("alert {}: cannot record status: {}", alert_id, e.what());
        return;
    }
    if (r->status == AlertStatus::Explained) publish(*r);
}

void ChatIdsService::publish(const AlertRecord& r) {
    {
        std::lock_guard lock(events_mutex_);
        events_.push_back({events_.size() + 1, r.alert_id, r.urgency});
    }
    events_cv_.notify_all();
}

std::vector<AlertEvent> ChatIdsService::events_after(std::uint64_t cursor, std::chrono::milliseconds timeout) const {
    std::unique_lock lock(events_mutex_);
    events_cv_.wait_for(lock, timeout, [&] { return events_.size() > cursor; });
    std::vector<AlertEvent> out;
    for (std::size_t i = static_cast<std::size_t>(std::min<std::uint64_t>(cursor, events_.size())); i < events_.size(); ++i) {
        out.push_back(events_[i]);
    }
    return out;
}

const DeviceProfile* ChatIdsService::device_for(const AlertRecord& r) const {
    return r.device_ref ? res_.inventory.find(*r.device_ref) : nullptr;
}

std::string ChatIdsService::display(std::string_view text, const AlertRecord& r) const {
    RehydrateOptions opts;
    opts.keep_unknown = true;
    return rehydrate(text, r.alert.redaction, device_for(r), &cfg_.user, opts);
}

namespace {

std::string first_sentence(std::string_view text) {
    text = trim(text);
    std::size_t end = text.size();
    for (std::size_t i = 0; i < text.size(); ++i) {
        if ((text[i] == '.' || text[i] == '!' || text[i] == '?') &&
            (i + 1 == text.size() || text[i + 1] == ' ' || text[i + 1] == '\n')) {
            end = i + 1;
            break;
        }
    }
    std::string s(text.substr(0, end));
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
}

std::string span_text(const std::string& text, const std::optional<TextSpan>& span) {
    if (!span || span->end > text.size() || span->begin > span->end) return {};
    return text.substr(span->begin, span->end - span->begin);
}

}  // namespace

json ChatIdsService::list_explanations(std::optional<Timestamp> since) const {
    json out = json::array();
    for (const auto& r : store_->alerts()) {
        if (r.status != AlertStatus::Explained || !r.cache_key) continue;
        if (since && r.updated_at <= *since) continue;
        auto e = store_->get(*r.cache_key);
        if (!e || e->is_decoy) continue;
        std::string summary = span_text(e->text, e->sections.description);
        if (summary.empty()) summary = e->text;
        out.push_back({{"alert_id", r.alert_id},
                       {"urgency", to_string(r.urgency)},
                       {"summary", first_sentence(display(summary, r))},
                       {"received_at", format_iso8601(r.received_at)},
                       {"explained_at", format_iso8601(r.updated_at)}});
    }
    return out;
}

json ChatIdsService::explanation_view(const std::string& alert_id) const {
    auto r = store_->find_alert(alert_id);
    if (!r) throw NotFound("unknown alert " + alert_id);
    if (r->status == AlertStatus::Queued) throw PendingExplanation("alert " + alert_id + " is not explained yet");
    if (r->status == AlertStatus::Failed || !r->cache_key) {
        throw ExplanationFailed("explanation for alert " + alert_id + " failed: " + r->error);
    }
    auto e = store_->get(*r->cache_key);
    if (!e || e->is_decoy) throw PendingExplanation("alert " + alert_id + " is not explained yet");
    json steps = json::array();
    for (const auto& s : e->sections.instructions) steps.push_back(display(s, *r));
    return {{"alert_id", r->alert_id},
            {"urgency", to_string(r->urgency)},
            {"message", display(r->alert.inner.message, *r)},
            {"text", display(e->text, *r)},
            {"sections",
             {{"description", display(span_text(e->text, e->sections.description), *r)},
              {"consequences", display(span_text(e->text, e->sections.consequences), *r)},
              {"instructions", steps}}},
            {"rubric", e->rubric ? to_json(*e->rubric) : json(nullptr)},
            {"received_at", format_iso8601(r->received_at)},
            {"created_at", format_iso8601(e->created_at)}};
}

namespace {

json session_json(const SessionRecord& s, const SessionManager& m) {
    json turns = json::array();
    for (const auto& t : s.turns) {
        turns.push_back({{"role", to_string(t.role)}, {"text", m.display_text(s, t)}, {"at", format_iso8601(t.at)}});
    }
    return {{"session_id", s.session_id},
            {"alert_id", s.alert_id},
            {"state", to_string(s.state)},
            {"outcome", s.outcome ? json(to_string(*s.outcome)) : json(nullptr)},
            {"turns", turns}};
}

}  // namespace

json ChatIdsService::open_session(const std::string& alert_id) {
    if (!store_->find_alert(alert_id)) throw NotFound("unknown alert " + alert_id);
    return session_json(sessions_->open_session(alert_id, cfg_.user.user_ref), *sessions_);
}

json ChatIdsService::ask(const std::string& session_id, std::string_view question) {
    auto turn = sessions_->ask(session_id, question);
    auto s = sessions_->get(session_id);
    return {{"session_id", session_id},
            {"turn", {{"role", to_string(turn.role)}, {"text", sessions_->display_text(s, turn)},
                      {"at", format_iso8601(turn.at)}}}};
}

json ChatIdsService::resolve(const std::string& session_id, SessionOutcome outcome) {
    return session_json(sessions_->resolve(session_id, outcome), *sessions_);
}

json ChatIdsService::session_view(const std::string& session_id) {
    return session_json(sessions_->get(session_id), *sessions_);
}

json ChatIdsService::health() const {
    std::size_t queued = 0;
    {
        std::lock_guard lock(queue_mutex_);
        queued = queue_.size() + busy_;
    }
    return {{"status", "ok"},
            {"backend", gateway_->backend_id()},
            {"gateway_requests", gateway_->request_count()},
            {"queued", queued},
            {"explanations", store_->explanation_count(false)}};
}

// File sources -----------------------------------------------------------------

void ChatIdsService::start_sources() {
    tailing_ = true;
    for (const auto& src : cfg_.sources) {
        if (src.follow) {
            tailers_.emplace_back([this, src] { tail_source(src); });
            continue;
        }
        std::ifstream in(src.path);
        if (!in) throw ConfigError("cannot open source " + src.path.string());
        AlertReader reader(in, src.format);
        while (auto alert = reader.next()) submit(*alert);
        const auto& st = reader.stats();
        spdlog::info("source {}: {} alerts, {} skipped, {} malformed", src.name, st.emitted, st.skipped,
                     st.malformed);
    }
}

void ChatIdsService::tail_source(SourceConfig src) {
    std::uintmax_t offset = 0;
    std::string partial;
    while (tailing_) {
        std::error_code ec;
        auto size = fs::file_size(src.path, ec);
        if (!ec) {
            if (size < offset) {
                spdlog::info("source {}: file shrank, starting over", src.name);
                offset = 0;
                partial.clear();
            }
            if (size > offset) {
                std::ifstream in(src.path, std::ios::binary);
                in.seekg(static_cast<std::streamoff>(offset));
                std::string chunk(static_cast<std::size_t>(size - offset), '\0');
                in.read(chunk.data(), static_cast<std::streamsize>(chunk.size()));
                chunk.resize(static_cast<std::size_t>(in.gcount()));
                offset += chunk.size();
                partial += chunk;
                std::size_t nl;
                while ((nl = partial.find('\n')) != std::string::npos) {
                    std::string line = partial.substr(0, nl);
                    partial.erase(0, nl + 1);
                    if (trim(line).empty()) continue;
                    auto outcome = try_parse(line, src.format);
                    if (auto* a = std::get_if<NormalizedAlert>(&outcome)) {
                        try {
                            submit(*a);
                        } catch (const std::exception& e) {
                            spdlog::error("source {}: {}", src.name, e.what());
                        }
                    } else if (auto* err = std::get_if<IngestError>(&outcome)) {
                        spdlog::warn("source {}: malformed record at offset {}: {}", src.name, err->offset(),
                                     err->what());
                    }
                }
            }
        }
        for (int i = 0; i < 5 && tailing_; ++i) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
}

}  // namespace chatids
