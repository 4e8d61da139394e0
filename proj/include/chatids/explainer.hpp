#pragma once

// Cache-first explanation of anonymized alerts: a hit costs no LLM call, a
// miss dispatches one decoy batch and caches every explanation it returns.

#include <cstdint>
#include <functional>
#include <mutex>

#include "chatids/decoy.hpp"
#include "chatids/explanation_store.hpp"
#include "chatids/llm_gateway.hpp"
#include "chatids/rubric.hpp"

namespace chatids {

struct ExplainerDeps {
    const SignatureCatalog* catalog = nullptr;
    const PersonaConfig* persona = nullptr;
    const PromptTemplate* prompt_template = nullptr;
    const UrgencyLexicon* lexicon = nullptr;
    Gateway* gateway = nullptr;
    ExplanationStore* store = nullptr;
    std::size_t k = 4;
    RubricOptions rubric_options;
    /// Seed for each decoy batch; defaults to std::random_device.
    std::function<std::uint64_t()> seed_source;
};

struct FetchReport {
    bool cache_hit = false;
    std::size_t k_used = 0;
    std::size_t requests = 0;  // gateway calls, retries included
    std::size_t decoy_failures = 0;
    std::size_t jargon_retries = 0;
};

/// Splits a response into sections and packages it for the store.
Explanation make_explanation(std::string text, const AnonymizedAlert& item, const PersonaConfig& persona,
                             const PromptTemplate& t, std::string backend_id);

class Explainer {
public:
    explicit Explainer(ExplainerDeps deps);

    CacheKey key_for(const AnonymizedAlert& alert) const;
    CacheKey key_for_message(std::string_view anonymized_message, std::string_view device_class) const;

    /// Throws GatewayError (PartialFailure when the real item failed) and
    /// StorageFull. Decoy explanations are cached but never returned.
    Explanation lookup_or_fetch(const AnonymizedAlert& alert, FetchReport* report = nullptr);

    const ExplainerDeps& deps() const { return deps_; }

private:
    DecoyBatch build_batch(const AnonymizedAlert& alert, FetchReport& report);
    std::string finish_text(const PromptEnvelope& env, LlmResponse first, FetchReport& report,
                            std::string& backend_id);

    ExplainerDeps deps_;
    std::mutex fetch_mutex_;
};

}  // namespace chatids
