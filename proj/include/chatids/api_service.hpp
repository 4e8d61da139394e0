#pragma once

// The running gateway: configuration, an intake queue feeding the explainer,
// display-side queries, and the HTTP routes that expose them.

#include <atomic>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "chatids/explainer.hpp"
#include "chatids/session.hpp"

namespace httplib {
class Server;
}

namespace chatids {

class ConfigError : public Error {
public:
    using Error::Error;
};

struct SourceConfig {
    std::string name;
    std::filesystem::path path;
    SourceFormat format = SourceFormat::SnortFast;
    bool follow = false;
};

struct ServiceConfig {
    std::string listen_host = "127.0.0.1";
    int listen_port = 8080;
    std::vector<SourceConfig> sources;

    BackendConfig backend;
    bool backend_auto = true;  // Mock unless the credential variable is set
    std::filesystem::path mock_corpus;

    std::size_t k = 4;
    std::filesystem::path persona_path;
    std::filesystem::path template_path;
    std::filesystem::path catalog_path;
    std::filesystem::path store_path;
    std::filesystem::path severity_path;
    std::filesystem::path lexicon_path;         // optional
    std::filesystem::path names_path;           // optional
    std::filesystem::path device_classes_path;  // optional
    std::filesystem::path inventory_path;       // optional

    StoreOptions store;
    UserProfile user;
    std::size_t window_limit = 10;
    std::chrono::hours session_expiry{24};
    double readability_threshold = 9.0;

    /// Paths point at the bundled data directory; the store goes to `store_dir`.
    static ServiceConfig defaults(const std::filesystem::path& data_dir, const std::filesystem::path& store_dir);
};

/// INI-style: `[section]` headers and `key = value` lines. Relative paths are
/// resolved against the config file's directory. Throws ConfigError naming
/// the offending key or file.
ServiceConfig load_service_config(const std::filesystem::path& path);

/// Every resource a config points at, loaded and validated.
struct Resources {
    PersonaConfig persona;
    PromptTemplate prompt_template;
    SignatureCatalog catalog;
    SeverityPolicy severity;
    UrgencyLexicon lexicon;
    NameCatalog names;
    DeviceClassTable device_classes;
    DeviceInventory inventory;

    static Resources load(const ServiceConfig& cfg);
};

/// Resolves backend_auto and builds the backend.
std::shared_ptr<LlmBackend> backend_for(const ServiceConfig& cfg);

class NotFound : public Error {
public:
    using Error::Error;
};

class PendingExplanation : public Error {
public:
    using Error::Error;
};

class ExplanationFailed : public Error {
public:
    using Error::Error;
};

struct AlertEvent {
    std::uint64_t seq = 0;
    std::string alert_id;
    UrgencyLevel urgency = UrgencyLevel::Informational;
};

class ChatIdsService {
public:
    /// `backend` overrides the configured one (tests inject fakes here).
    explicit ChatIdsService(ServiceConfig cfg, std::shared_ptr<LlmBackend> backend = nullptr,
                            std::optional<GatewayOptions> gateway_options = std::nullopt);
    ~ChatIdsService();

    ChatIdsService(const ChatIdsService&) = delete;
    ChatIdsService& operator=(const ChatIdsService&) = delete;

    /// Starts the intake worker and re-queues alerts left unexplained by a previous run.
    void start();
    void stop();

    /// Normalizes, anonymizes, records and queues. Returns the alert id; a
    /// known id is not queued again unless its last attempt failed.
    std::string submit(std::string_view record, SourceFormat format);
    std::string submit(const NormalizedAlert& alert);

    /// Runs queued work on the calling thread (used when the worker is not started).
    void drain();
    /// Blocks until the queue is empty and no job is running.
    bool wait_idle(std::chrono::milliseconds timeout);

    /// Summaries of explained alerts, newest first.
    nlohmann::json list_explanations(std::optional<Timestamp> since) const;
    /// Full rehydrated explanation. Throws NotFound, PendingExplanation, ExplanationFailed.
    nlohmann::json explanation_view(const std::string& alert_id) const;

    /// Events with seq > cursor; waits up to `timeout` for the first one.
    std::vector<AlertEvent> events_after(std::uint64_t cursor, std::chrono::milliseconds timeout) const;

    nlohmann::json open_session(const std::string& alert_id);
    nlohmann::json ask(const std::string& session_id, std::string_view question);
    nlohmann::json resolve(const std::string& session_id, SessionOutcome outcome);
    nlohmann::json session_view(const std::string& session_id);

    nlohmann::json health() const;

    /// File sources from the config: read now, and tailed when `follow` is set.
    void start_sources();

    const ServiceConfig& config() const { return cfg_; }
    const Resources& resources() const { return res_; }
    Gateway& gateway() { return *gateway_; }
    ExplanationStore& store() { return *store_; }
    Explainer& explainer() { return *explainer_; }

private:
    void worker_loop();
    void process(const std::string& alert_id);
    void publish(const AlertRecord& r);
    const DeviceProfile* device_for(const AlertRecord& r) const;
    std::string display(std::string_view text, const AlertRecord& r) const;
    void tail_source(SourceConfig src);

    ServiceConfig cfg_;
    Resources res_;
    std::unique_ptr<ExplanationStore> store_;
    std::unique_ptr<Gateway> gateway_;
    std::unique_ptr<Explainer> explainer_;
    std::unique_ptr<SessionManager> sessions_;

    mutable std::mutex queue_mutex_;
    std::condition_variable queue_cv_;
    mutable std::condition_variable idle_cv_;
    std::deque<std::string> queue_;
    std::size_t busy_ = 0;
    bool stopping_ = false;
    std::thread worker_;
    std::vector<std::thread> tailers_;
    std::atomic<bool> tailing_{false};

    mutable std::mutex events_mutex_;
    mutable std::condition_variable events_cv_;
    std::vector<AlertEvent> events_;
};

/// Mounts the /v1 routes on `server`.
void mount_routes(httplib::Server& server, ChatIdsService& service);

/// Blocks serving HTTP until SIGINT/SIGTERM.
int run_server(ChatIdsService& service);

}  // namespace chatids
