#pragma once

// Dispatch of prompt envelopes to a pluggable LLM backend, with
// timeout/retry/backoff, a single-request-in-flight limiter and randomized
// spacing between the requests of one decoy batch.

#include <atomic>
#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "chatids/decoy.hpp"
#include "chatids/prompt_builder.hpp"

namespace chatids {

using Millis = std::chrono::milliseconds;

struct LlmResponse {
    std::string text;
    std::string backend_id;
    Millis latency{0};
    std::size_t token_estimate = 0;
    bool truncated = false;
};

enum class BackendKind { Mock, RemoteHttp };

struct BackendConfig {
    BackendKind kind = BackendKind::Mock;
    std::string endpoint;                              // RemoteHttp only
    std::string credential_ref = "CHATIDS_LLM_API_KEY";  // name of the environment variable
    std::string model = "gpt-3.5-turbo";
    double temperature = 0.2;
    Millis timeout{30000};
    int max_retries = 2;
    Millis backoff_base{500};
    Millis jitter_min{0};
    Millis jitter_max{2000};
};

enum class GatewayErrorKind { Timeout, AuthFailure, BackendUnavailable, Transient };

std::string_view to_string(GatewayErrorKind kind);

class GatewayError : public Error {
public:
    GatewayError(GatewayErrorKind kind, const std::string& what) : Error(what), kind_(kind) {}
    GatewayErrorKind kind() const { return kind_; }
    bool retryable() const {
        return kind_ == GatewayErrorKind::Transient || kind_ == GatewayErrorKind::Timeout;
    }

private:
    GatewayErrorKind kind_;
};

class LlmBackend {
public:
    virtual ~LlmBackend() = default;
    virtual std::string id() const = 0;
    /// One attempt. Throws GatewayError; Transient and Timeout are retried by the gateway.
    virtual LlmResponse complete(const PromptEnvelope& envelope, Millis timeout) = 0;
};

/// Offline backend. Fingerprints found in the canned corpus return their
/// stored text; anything else gets a generated explanation seeded by the
/// fingerprint, so identical input always yields identical output.
class MockBackend : public LlmBackend {
public:
    MockBackend() = default;
    explicit MockBackend(std::map<std::string, std::string> canned_by_fingerprint);

    /// JSON: {"entries": [{"message": "...", "response": "..."}]}; keyed by alert_fingerprint(message).
    static MockBackend from_corpus_file(const std::string& path);

    std::string id() const override { return "mock"; }
    LlmResponse complete(const PromptEnvelope& envelope, Millis timeout) override;

    static std::string generic_explanation(std::string_view fingerprint);

private:
    std::map<std::string, std::string> canned_;
};

/// Chat-completion style HTTP backend. The credential is read from the
/// environment on every call and never stored.
class RemoteHttpBackend : public LlmBackend {
public:
    explicit RemoteHttpBackend(BackendConfig cfg);

    std::string id() const override { return "remote:" + cfg_.model; }
    LlmResponse complete(const PromptEnvelope& envelope, Millis timeout) override;

private:
    BackendConfig cfg_;
};

using Sleeper = std::function<void(Millis)>;

struct GatewayOptions {
    Millis timeout{30000};
    int max_retries = 2;
    Millis backoff_base{500};
    Millis jitter_min{0};
    Millis jitter_max{0};

    static GatewayOptions from(const BackendConfig& cfg);
};

struct BatchRequest {
    std::size_t item_index = 0;
    PromptEnvelope envelope;
    bool is_real = false;
};

enum class Disposition { Display, CacheOnly };

struct ItemOutcome {
    std::size_t item_index = 0;
    bool is_real = false;
    Disposition disposition = Disposition::CacheOnly;
    PromptEnvelope envelope;
    std::optional<LlmResponse> response;
    std::string error;
};

struct BatchResult {
    std::vector<ItemOutcome> outcomes;

    const ItemOutcome* real() const;
    std::size_t failures() const;
};

/// The real item failed; per-item outcomes are attached.
class PartialFailure : public GatewayError {
public:
    PartialFailure(GatewayErrorKind kind, const std::string& what, BatchResult result)
        : GatewayError(kind, what), result_(std::move(result)) {}
    const BatchResult& result() const { return result_; }

private:
    BatchResult result_;
};

class Gateway {
public:
    Gateway(std::shared_ptr<LlmBackend> backend, GatewayOptions opts, Sleeper sleeper = {},
            std::uint64_t jitter_seed = std::random_device{}());

    /// Retries transient failures with exponential backoff; total time stays
    /// within timeout * (max_retries + 1).
    LlmResponse complete(const PromptEnvelope& envelope);

    /// Sends each request independently, in order, separated by jitter.
    BatchResult dispatch(std::span<const BatchRequest> requests);

    BatchResult complete_batch(const DecoyBatch& batch, const PersonaConfig& persona,
                               const PromptTemplate& t);

    /// Debug logging of prompts goes through this scrubber; without one, prompts are not logged.
    void set_debug_scrubber(std::function<std::string(std::string_view)> scrubber);

    /// Backend attempts made so far.
    std::size_t request_count() const { return requests_.load(); }
    const std::string backend_id() const { return backend_->id(); }

private:
    void sleep_jitter();

    std::shared_ptr<LlmBackend> backend_;
    GatewayOptions opts_;
    Sleeper sleeper_;
    std::mutex in_flight_;
    std::mutex rng_mutex_;
    std::mt19937_64 rng_;
    std::function<std::string(std::string_view)> scrubber_;
    std::atomic<std::size_t> requests_{0};
};

std::shared_ptr<LlmBackend> make_backend(const BackendConfig& cfg, const std::string& mock_corpus_path = {});

}  // namespace chatids
