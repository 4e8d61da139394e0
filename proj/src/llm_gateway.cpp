#include "chatids/llm_gateway.hpp"

#include <algorithm>
#include <fstream>
#include <thread>

#include <json.hpp>
#include <spdlog/spdlog.h>

namespace chatids {

std::string_view to_string(GatewayErrorKind kind) {
    switch (kind) {
        case GatewayErrorKind::Timeout: return "Timeout";
        case GatewayErrorKind::AuthFailure: return "AuthFailure";
        case GatewayErrorKind::BackendUnavailable: return "BackendUnavailable";
        case GatewayErrorKind::Transient: return "Transient";
    }
    return "BackendUnavailable";
}

// Mock -------------------------------------------------------------------------

MockBackend::MockBackend(std::map<std::string, std::string> canned_by_fingerprint)
    : canned_(std::move(canned_by_fingerprint)) {}

MockBackend MockBackend::from_corpus_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open mock corpus '" + path + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error("mock corpus '" + path + "': " + e.what());
    }
    std::map<std::string, std::string> canned;
    for (const auto& entry : j.at("entries")) {
        canned[alert_fingerprint(entry.at("message").get<std::string>())] =
            entry.at("response").get<std::string>();
    }
    return MockBackend(std::move(canned));
}

namespace {

template <std::size_t N>
const char* pick(const char* const (&options)[N], std::uint64_t& state) {
    state = state * 6364136223846793005ULL + 1442695040888963407ULL;
    return options[(state >> 33) % N];
}

std::string followup_answer(std::string_view prompt) {
    static const char* const answers[] = {
        "Thank you for asking. The safest thing is to keep the device away from the internet until "
        "it is fixed. If you are not sure how to do this, ask a trusted helper to do it with you.",
        "Good question. You do not need any special tools for this. Do the steps one by one, and "
        "take your time. If something looks strange, stop and ask a trusted helper.",
        "Yes, that is a good idea. Doing it soon keeps your home safer. If the warning comes back "
        "after that, ask a trusted helper to look at the device with you.",
    };
    std::uint64_t state = fnv1a(prompt);
    return pick(answers, state);
}

}  // namespace

std::string MockBackend::generic_explanation(std::string_view fp) {
    static const char* const descriptions[] = {
        "We noticed that someone outside your home is trying to get into {DEV} without your "
        "permission.",
        "We found unusual activity on {DEV}. Someone may be trying to control it without your "
        "permission.",
        "We detected a suspicious attempt to reach {DEV} from outside your home.",
    };
    static const char* const consequences[] = {
        "If you don't do anything, a stranger could take control of the device, watch what happens "
        "in your home, or use it to harm others. Please act right away.",
        "If nothing is done, strangers could use the device to spy on you or to attack other people "
        "on the internet. Please act right away.",
        "If you ignore this message, strangers could steal your personal data or use the device "
        "without you knowing. Please act right away.",
    };
    static const char* const first_steps[] = {
        "Unplug the device from the power for one minute, then plug it back in.",
        "Turn the device off and on again.",
        "Disconnect the device from your home network for now.",
    };
    static const char* const last_steps[] = {
        "Ask a trusted helper for support if this message comes back.",
        "Check your other devices for anything unusual.",
        "Call the maker of the device if you need help.",
    };
    std::uint64_t state = fnv1a(fp);
    std::string description = pick(descriptions, state);
    description.replace(description.find("{DEV}"), 5, "one of your smart home devices");
    std::string text = "Hello,\n\n" + description + "\n\n" + pick(consequences, state) +
                       "\n\nTo keep your home safe, please follow these simple steps:\n\n1. " +
                       pick(first_steps, state) +
                       "\n2. Change the password of the device to a new, long one.\n"
                       "3. Update the device using its app.\n4. " +
                       pick(last_steps, state) + "\n\nBest regards";
    return text;
}

LlmResponse MockBackend::complete(const PromptEnvelope& envelope, Millis) {
    LlmResponse r;
    r.backend_id = id();
    if (envelope.kind == PromptKind::FollowUp) {
        r.text = followup_answer(envelope.prompt_text);
    } else if (auto it = canned_.find(envelope.alert_fingerprint); it != canned_.end()) {
        r.text = it->second;
    } else {
        r.text = generic_explanation(envelope.alert_fingerprint);
    }
    r.token_estimate = (envelope.prompt_text.size() + r.text.size()) / 4;
    return r;
}

// Gateway ----------------------------------------------------------------------

GatewayOptions GatewayOptions::from(const BackendConfig& cfg) {
    GatewayOptions o;
    o.timeout = cfg.timeout;
    o.max_retries = cfg.max_retries;
    o.backoff_base = cfg.backoff_base;
    o.jitter_min = cfg.jitter_min;
    o.jitter_max = cfg.jitter_max;
    return o;
}

const ItemOutcome* BatchResult::real() const {
    for (const auto& o : outcomes) {
        if (o.is_real) return &o;
    }
    return nullptr;
}

std::size_t BatchResult::failures() const {
    return static_cast<std::size_t>(
        std::count_if(outcomes.begin(), outcomes.end(), [](const ItemOutcome& o) { return !o.response; }));
}

Gateway::Gateway(std::shared_ptr<LlmBackend> backend, GatewayOptions opts, Sleeper sleeper,
                 std::uint64_t jitter_seed)
    : backend_(std::move(backend)), opts_(opts), sleeper_(std::move(sleeper)), rng_(jitter_seed) {
    if (!backend_) throw Error("gateway needs a backend");
    if (opts_.max_retries < 0) throw Error("max_retries must be >= 0");
    if (!sleeper_) sleeper_ = [](Millis d) { std::this_thread::sleep_for(d); };
}

void Gateway::set_debug_scrubber(std::function<std::string(std::string_view)> scrubber) {
    scrubber_ = std::move(scrubber);
}

LlmResponse Gateway::complete(const PromptEnvelope& envelope) {
    using Clock = std::chrono::steady_clock;
    std::lock_guard lock(in_flight_);
    const auto budget = opts_.timeout * (opts_.max_retries + 1);
    const auto start = Clock::now();
    auto remaining = [&] { return budget - std::chrono::duration_cast<Millis>(Clock::now() - start); };

    if (scrubber_ && spdlog::should_log(spdlog::level::debug)) {
        spdlog::debug("gateway: request fp={} prompt={}", envelope.alert_fingerprint,
                      scrubber_(envelope.prompt_text));
    }

    std::optional<GatewayError> last;
    for (int attempt = 0; attempt <= opts_.max_retries; ++attempt) {
        if (attempt > 0) {
            Millis backoff = opts_.backoff_base * (1LL << std::min(attempt - 1, 20));
            Millis left = remaining();
            if (left <= Millis{0}) break;
            sleeper_(std::min(backoff, left));
        }
        Millis attempt_timeout = std::min(opts_.timeout, remaining());
        if (attempt_timeout <= Millis{0}) break;
        ++requests_;
        try {
            auto t0 = Clock::now();
            LlmResponse r = backend_->complete(envelope, attempt_timeout);
            if (r.latency == Millis{0}) r.latency = std::chrono::duration_cast<Millis>(Clock::now() - t0);
            if (trim(r.text).empty()) throw GatewayError(GatewayErrorKind::Transient, "empty response");
            return r;
        } catch (const GatewayError& e) {
            if (!e.retryable()) throw;
            spdlog::warn("gateway: attempt {} failed: {}", attempt + 1, e.what());
            last = e;
        }
    }
    if (last && last->kind() == GatewayErrorKind::Timeout) {
        throw GatewayError(GatewayErrorKind::Timeout, "backend timed out after retries");
    }
    throw GatewayError(GatewayErrorKind::BackendUnavailable,
                       std::string("backend unavailable after retries") + (last ? ": " + std::string(last->what()) : ""));
}

void Gateway::sleep_jitter() {
    if (opts_.jitter_max <= Millis{0}) return;
    Millis delay;
    {
        std::lock_guard lock(rng_mutex_);
        auto span = static_cast<std::size_t>((opts_.jitter_max - opts_.jitter_min).count());
        delay = opts_.jitter_min + Millis{static_cast<long long>(uniform_index(rng_, span + 1))};
    }
    sleeper_(delay);
}

BatchResult Gateway::dispatch(std::span<const BatchRequest> requests) {
    BatchResult result;
    std::optional<GatewayError> real_error;
    bool first = true;
    for (const auto& req : requests) {
        if (!first) sleep_jitter();
        first = false;
        ItemOutcome outcome;
        outcome.item_index = req.item_index;
        outcome.is_real = req.is_real;
        outcome.disposition = req.is_real ? Disposition::Display : Disposition::CacheOnly;
        outcome.envelope = req.envelope;
        try {
            outcome.response = complete(req.envelope);
        } catch (const GatewayError& e) {
            outcome.error = e.what();
            if (req.is_real) {
                real_error = e;
            } else {
                spdlog::warn("gateway: decoy request failed: {}", e.what());
            }
        }
        result.outcomes.push_back(std::move(outcome));
    }
    if (real_error) {
        throw PartialFailure(real_error->kind(), std::string("real item failed: ") + real_error->what(),
                             std::move(result));
    }
    return result;
}

BatchResult Gateway::complete_batch(const DecoyBatch& batch, const PersonaConfig& persona,
                                    const PromptTemplate& t) {
    std::vector<BatchRequest> requests;
    requests.reserve(batch.items.size());
    for (std::size_t i = 0; i < batch.items.size(); ++i) {
        requests.push_back({i, render_prompt(batch.items[i], persona, t), i == batch.real_index});
    }
    return dispatch(requests);
}

std::shared_ptr<LlmBackend> make_backend(const BackendConfig& cfg, const std::string& mock_corpus_path) {
    switch (cfg.kind) {
        case BackendKind::Mock:
            if (mock_corpus_path.empty()) return std::make_shared<MockBackend>();
            return std::make_shared<MockBackend>(MockBackend::from_corpus_file(mock_corpus_path));
        case BackendKind::RemoteHttp:
            return std::make_shared<RemoteHttpBackend>(cfg);
    }
    throw Error("unknown backend kind");
}

}  // namespace chatids
