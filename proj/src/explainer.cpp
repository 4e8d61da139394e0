#include "chatids/explainer.hpp"

#include <algorithm>
#include <random>
#include <set>

#include <spdlog/spdlog.h>

namespace chatids {

Explanation make_explanation(std::string text, const AnonymizedAlert& item, const PersonaConfig& persona,
                             const PromptTemplate& t, std::string backend_id) {
    Explanation e;
    auto sections = detect_sections(text);
    e.sections.description = sections.description;
    e.sections.consequences = sections.consequences;
    e.sections.instructions = std::move(sections.steps);
    e.text = std::move(text);
    e.alert_fingerprint = alert_fingerprint(item.inner.message);
    e.template_version = t.version;
    e.persona_version = persona.version;
    e.device_class = item.device_class;
    e.created_at = now();
    e.backend_id = std::move(backend_id);
    e.is_decoy = item.is_decoy;
    return e;
}

Explainer::Explainer(ExplainerDeps deps) : deps_(std::move(deps)) {
    if (!deps_.catalog || !deps_.persona || !deps_.prompt_template || !deps_.lexicon || !deps_.gateway ||
        !deps_.store) {
        throw Error("explainer dependencies incomplete");
    }
    if (deps_.k < 1) throw Error("k must be >= 1");
    if (!deps_.seed_source) {
        deps_.seed_source = [] {
            std::random_device rd;
            return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
        };
    }
}

CacheKey Explainer::key_for_message(std::string_view message, std::string_view device_class) const {
    return CacheKey{alert_fingerprint(message), deps_.prompt_template->version, deps_.persona->version,
                    std::string(device_class)};
}

CacheKey Explainer::key_for(const AnonymizedAlert& alert) const {
    return key_for_message(alert.inner.message, alert.device_class);
}

DecoyBatch Explainer::build_batch(const AnonymizedAlert& alert, FetchReport& report) {
    // Prefer decoys that are not cached yet, so every dispatched request buys a new entry.
    std::vector<SignatureCatalogEntry> fresh;
    for (const auto& e : deps_.catalog->entries()) {
        if (!deps_.store->get(key_for_message(e.message, alert.device_class))) fresh.push_back(e);
    }
    SignatureCatalog fresh_catalog(std::move(fresh));
    const std::size_t needed = deps_.k - 1;
    const bool enough_fresh = [&] {
        std::size_t n = 0;
        for (const auto* e : plausibility_filter(fresh_catalog, alert.device_class)) {
            if (e->message != alert.inner.message) ++n;
        }
        return n >= needed;
    }();
    const SignatureCatalog& source = enough_fresh ? fresh_catalog : *deps_.catalog;

    const std::uint64_t seed = deps_.seed_source();
    try {
        report.k_used = deps_.k;
        return sample_decoys(source, alert, deps_.k, seed);
    } catch (const InsufficientCandidates& e) {
        report.k_used = e.available() + 1;
        spdlog::warn("explainer: {}; continuing with k={}", e.what(), report.k_used);
        return sample_decoys(source, alert, report.k_used, seed);
    }
}

std::string Explainer::finish_text(const PromptEnvelope& env, LlmResponse first, FetchReport& report,
                                   std::string& backend_id) {
    const auto& terms = deps_.persona->forbidden_terms;
    auto hits = forbidden_term_hits(first.text, terms);
    backend_id = first.backend_id;
    if (hits.empty()) return std::move(first.text);

    std::vector<std::string> used;
    for (const auto& h : hits) {
        if (std::none_of(used.begin(), used.end(), [&](const std::string& u) { return iequals(u, h.term); })) {
            used.push_back(h.term);
        }
    }
    ++report.jargon_retries;
    ++report.requests;
    try {
        auto second = deps_.gateway->complete(render_jargon_retry(env, used));
        backend_id = second.backend_id;
        if (!forbidden_term_hits(second.text, terms).empty()) {
            spdlog::info("explainer: response still uses technical terms after one retry");
        }
        return std::move(second.text);
    } catch (const GatewayError& e) {
        spdlog::warn("explainer: retry without technical terms failed: {}", e.what());
        return std::move(first.text);
    }
}

Explanation Explainer::lookup_or_fetch(const AnonymizedAlert& alert, FetchReport* report_out) {
    FetchReport local;
    FetchReport& report = report_out ? *report_out : local;
    report = FetchReport{};

    const CacheKey key = key_for(alert);
    auto cached = [&]() -> std::optional<Explanation> {
        auto hit = deps_.store->get(key);
        if (hit && hit->is_decoy) {
            hit = deps_.store->promote(key, score(hit->text, *deps_.persona, *deps_.lexicon, deps_.rubric_options));
        }
        return hit;
    };
    if (auto hit = cached()) {
        report.cache_hit = true;
        return *hit;
    }

    std::lock_guard lock(fetch_mutex_);
    if (auto hit = cached()) {
        report.cache_hit = true;
        return *hit;
    }

    DecoyBatch batch = build_batch(alert, report);
    std::vector<BatchRequest> requests;
    requests.reserve(batch.items.size());
    for (std::size_t i = 0; i < batch.items.size(); ++i) {
        const bool is_real = i == batch.real_index;
        // Only possible once the catalog has no fresh decoys left for this class.
        if (!is_real && deps_.store->get(key_for(batch.items[i]))) continue;
        requests.push_back({i, render_prompt(batch.items[i], *deps_.persona, *deps_.prompt_template), is_real});
    }
    if (requests.size() < batch.items.size()) {
        spdlog::info("explainer: {} decoys already cached, sending {} of {} requests",
                     batch.items.size() - requests.size(), requests.size(), batch.items.size());
    }

    BatchResult result;
    std::optional<PartialFailure> failure;
    try {
        result = deps_.gateway->dispatch(requests);
    } catch (const PartialFailure& e) {
        failure = e;
        result = e.result();
    }
    report.requests += requests.size();

    std::optional<Explanation> real;
    for (auto& outcome : result.outcomes) {
        if (!outcome.response) {
            if (!outcome.is_real) ++report.decoy_failures;
            continue;
        }
        const auto& item = batch.items[outcome.item_index];
        std::string backend_id;
        std::string text = finish_text(outcome.envelope, std::move(*outcome.response), report, backend_id);
        Explanation e = make_explanation(std::move(text), item, *deps_.persona, *deps_.prompt_template,
                                         std::move(backend_id));
        if (outcome.is_real) {
            e.rubric = score(e.text, *deps_.persona, *deps_.lexicon, deps_.rubric_options);
        }
        CacheKey item_key = key_for(item);
        e.explanation_id = deps_.store->put(item_key, e);
        if (outcome.is_real) real = std::move(e);
    }
    if (failure) throw *failure;
    if (!real) throw GatewayError(GatewayErrorKind::BackendUnavailable, "no response for the real alert");
    // First writer wins: return what the store holds.
    if (auto stored = deps_.store->get(key)) return *stored;
    return *real;
}

}  // namespace chatids
