#include <doctest.h>

#include <fstream>
#include <set>
#include <sstream>

#include "chatids/decoy.hpp"
#include "chatids/prompt_builder.hpp"
#include "generator.hpp"
#include "eval_alerts.hpp"

using namespace chatids;

namespace {

const std::vector<std::string>& kEvalMessages = chatids::testing::evaluation_messages();

SignatureCatalog bundled() { return load_catalog_file(CHATIDS_TEST_DATA_DIR "/signatures.tsv"); }

AnonymizedAlert real_alert(std::string message, std::string device_class, int priority = 1) {
    AnonymizedAlert a;
    a.inner.message = std::move(message);
    a.inner.priority = priority;
    a.device_class = std::move(device_class);
    return a;
}

PromptTemplate bundled_template() { return PromptTemplate::load(CHATIDS_TEST_DATA_DIR "/prompt_template.txt"); }

}  // namespace

TEST_CASE("catalog: loading") {
    auto cat = bundled();
    CHECK(cat.size() >= 8);
    std::set<std::string> messages;
    for (const auto& e : cat.entries()) messages.insert(e.message);
    for (const auto& m : kEvalMessages) CHECK_MESSAGE(messages.count(m) == 1, m);

    std::istringstream empty("");
    CHECK(load_catalog(empty).empty());
    std::istringstream dup("A\tgeneric\t1\t*\nA\tgeneric\t2\t*\n");
    CHECK_THROWS_AS(load_catalog(dup), DuplicateEntry);
    std::istringstream bad("A\tgeneric\tnot-a-number\t*\n");
    CHECK_THROWS_AS(load_catalog(bad), MalformedCatalogLine);
}

TEST_CASE("plausibility filter") {
    std::istringstream in("router only\tgeneric\t1\ta home router\nanything\tgeneric\t1\t*\n");
    auto cat = load_catalog(in);
    auto c = plausibility_filter(cat, "a smart lighting bridge");
    REQUIRE(c.size() == 1);
    CHECK(c[0]->message == "anything");

    auto full = bundled();
    for (std::string cls : {"a smart lighting bridge", "a home router", "a smart speaker", "a smart home device"}) {
        std::size_t brute = 0;
        for (const auto& e : full.entries()) {
            bool ok = false;
            for (const auto& c2 : e.applicable_device_classes) ok = ok || c2 == cls || c2 == "*";
            brute += ok;
        }
        CHECK(plausibility_filter(full, cls).size() == brute);
    }
}

TEST_CASE("sample_decoys: degenerate k and determinism") {
    auto cat = bundled();
    auto real = real_alert(kEvalMessages[0], "a smart lighting bridge");
    auto one = sample_decoys(cat, real, 1, 5);
    CHECK(one.items.size() == 1);
    CHECK(one.real_index == 0);

    auto a = sample_decoys(cat, real, 4, 99);
    auto b = sample_decoys(cat, real, 4, 99);
    REQUIRE(a.items.size() == 4);
    CHECK(a.real_index == b.real_index);
    for (std::size_t i = 0; i < 4; ++i) CHECK(a.items[i].inner.message == b.items[i].inner.message);

    std::istringstream tiny("only one\tgeneric\t1\t*\n");
    CHECK_THROWS_AS(sample_decoys(load_catalog(tiny), real, 4, 1), InsufficientCandidates);
}

TEST_CASE("property: batch invariants over seeds") {
    auto cat = bundled();
    for (const auto& cls : {"a smart lighting bridge", "a home router", "a smart home device"}) {
        auto real = real_alert(kEvalMessages[1], cls, 2);
        for (std::uint64_t seed = 0; seed < 300; ++seed) {
            auto b = sample_decoys(cat, real, 4, seed);
            REQUIRE(b.items.size() == 4);
            std::size_t reals = 0;
            std::set<std::string> seen;
            for (const auto& it : b.items) {
                reals += !it.is_decoy;
                seen.insert(it.inner.message);
                CHECK(it.device_class == cls);
                bool plausible = false;
                for (const auto* e : plausibility_filter(cat, cls)) plausible = plausible || e->message == it.inner.message;
                CHECK((plausible || !it.is_decoy));
            }
            CHECK(reals == 1);
            CHECK(seen.size() == 4);
            CHECK_FALSE(b.items[b.real_index].is_decoy);
            CHECK(b.items[b.real_index].inner.message == kEvalMessages[1]);
        }
    }
}

TEST_CASE("uniform_index stays in range") {
    std::mt19937_64 rng(1);
    for (std::size_t n = 1; n < 50; ++n) {
        for (int i = 0; i < 100; ++i) CHECK(uniform_index(rng, n) < n);
    }
}

TEST_CASE("template validation") {
    auto t = bundled_template();
    CHECK(validate_template(t).empty());

    PromptTemplate missing = t;
    missing.body = "{USER} {DEVICE} {FORBIDDEN_TERMS} {STRUCTURE_SPEC}";
    auto issues = validate_template(missing);
    REQUIRE(issues.size() == 1);
    CHECK(issues[0].kind == TemplateIssueKind::MissingPlaceholder);
    CHECK(issues[0].placeholder == "ALERT_MSG");

    PromptTemplate dup = t;
    dup.body = "{ALERT_MSG} {ALERT_MSG} {USER} {DEVICE} {FORBIDDEN_TERMS} {STRUCTURE_SPEC}";
    issues = validate_template(dup);
    REQUIRE(issues.size() == 1);
    CHECK(issues[0].kind == TemplateIssueKind::DuplicatePlaceholder);

    PromptTemplate unknown = t;
    unknown.body += " {SECRET}";
    issues = validate_template(unknown);
    REQUIRE(issues.size() == 1);
    CHECK(issues[0].kind == TemplateIssueKind::UnknownPlaceholder);
    CHECK_THROWS_AS(render_prompt(real_alert("x", "y"), PersonaConfig::default_persona(), unknown), TemplateInvalid);
}

TEST_CASE("render_prompt") {
    auto t = bundled_template();
    auto persona = PersonaConfig::load(CHATIDS_TEST_DATA_DIR "/persona.conf");
    auto env = render_prompt(real_alert(kEvalMessages[0], "a smart lighting bridge"), persona, t);
    CHECK(env.prompt_text.find("MALWARE-CNC Harakit botnet traffic") != std::string::npos);
    CHECK(env.prompt_text.find(persona.structure_spec()) != std::string::npos);
    CHECK(env.prompt_text.find("Explain the intrusion, explain the potential consequences") != std::string::npos);
    CHECK(env.prompt_text.find("\"two-factor-authentication\"") != std::string::npos);
    CHECK(env.prompt_text.find("\"Intrusion Detection System\"") != std::string::npos);
    CHECK(env.prompt_text.find("a smart lighting bridge") != std::string::npos);
    CHECK(env.prompt_text.find("Philips") == std::string::npos);
    CHECK(env.prompt_text.find('{') == std::string::npos);
    CHECK(env.alert_fingerprint == alert_fingerprint(kEvalMessages[0]));
    CHECK(env.template_version == t.version);
    CHECK(env.persona_version == persona.version);
    CHECK(env.kind == PromptKind::Explanation);

    auto again = render_prompt(real_alert(kEvalMessages[0], "a smart lighting bridge"), persona, t);
    CHECK(again.prompt_text == env.prompt_text);
}

TEST_CASE("render_prompt refuses to carry raw identifiers") {
    auto a = real_alert("contact from 10.1.2.3", "a smart home device");
    a.redaction.assign(RedactionKind::IPv4, "10.1.2.3");
    CHECK_THROWS_AS(render_prompt(a, PersonaConfig::default_persona(), bundled_template()), PromptLeak);
}

TEST_CASE("property: rendered prompts carry no planted identifiers") {
    chatids::testing::AlertGenerator gen(31);
    auto t = bundled_template();
    auto persona = PersonaConfig::default_persona();
    for (int i = 0; i < 1000; ++i) {
        auto p = gen.next();
        auto an = anonymize_alert(p.alert, nullptr, UserProfile{}, gen.names());
        auto env = render_prompt(an, persona, t);
        for (const auto& tok : p.planted) CHECK(env.prompt_text.find(tok) == std::string::npos);
        CHECK(env.prompt_text.find(persona.structure_spec()) != std::string::npos);
    }
}

TEST_CASE("follow-up windowing") {
    auto persona = PersonaConfig::default_persona();
    std::vector<ConversationTurn> none;
    auto base = render_followup(none, "What is a factory reset?", persona);
    CHECK(base.prompt_text.find("What is a factory reset?") != std::string::npos);
    CHECK(base.prompt_text.find(persona.role_line) != std::string::npos);
    CHECK(base.kind == PromptKind::FollowUp);
    CHECK_THROWS_AS(render_followup(none, "", persona), EmptyQuestion);
    CHECK_THROWS_AS(render_followup(none, "   ", persona), EmptyQuestion);

    std::vector<ConversationTurn> history;
    for (int i = 0; i < 50; ++i) {
        history.push_back({i % 2 ? TurnRole::User : TurnRole::Assistant, "turn-marker-" + std::to_string(i) + ";", {}});
    }
    auto w = history_window(history, 10);
    REQUIRE(w.size() == 11);
    CHECK(w[0].text == "turn-marker-0;");
    for (std::size_t i = 1; i < w.size(); ++i) CHECK(w[i].text == "turn-marker-" + std::to_string(39 + i) + ";");

    auto env = render_followup(history, "ok?", persona, 10);
    std::size_t present = 0;
    for (int i = 0; i < 50; ++i) present += env.prompt_text.find("turn-marker-" + std::to_string(i) + ";") != std::string::npos;
    CHECK(present == 11);
}

TEST_CASE("jargon retry prompt names the offending terms") {
    auto env = render_prompt(real_alert(kEvalMessages[0], "a smart home device"), PersonaConfig::default_persona(),
                             bundled_template());
    std::vector<std::string> used{"malware", "DDoS"};
    auto retry = render_jargon_retry(env, used);
    CHECK(retry.prompt_text.find(env.prompt_text) != std::string::npos);
    CHECK(retry.prompt_text.find("DDoS") != std::string::npos);
    CHECK(retry.alert_fingerprint == env.alert_fingerprint);
}
