#include <doctest.h>

#include <set>

#include "chatids/explainer.hpp"
#include "chatids/session.hpp"
#include "fakes.hpp"
#include "eval_alerts.hpp"
#include "tempdir.hpp"

using namespace chatids;
using namespace chatids::testing;

namespace {

struct Rig {
    TempDir dir;
    SignatureCatalog catalog = load_catalog_file(CHATIDS_TEST_DATA_DIR "/signatures.tsv");
    PersonaConfig persona = PersonaConfig::load(CHATIDS_TEST_DATA_DIR "/persona.conf");
    PromptTemplate tmpl = PromptTemplate::load(CHATIDS_TEST_DATA_DIR "/prompt_template.txt");
    UrgencyLexicon lexicon = UrgencyLexicon::load(CHATIDS_TEST_DATA_DIR "/urgency_lexicon.txt");
    std::unique_ptr<ExplanationStore> store;
    std::unique_ptr<Gateway> gateway;
    std::unique_ptr<Explainer> explainer;

    explicit Rig(std::shared_ptr<LlmBackend> backend, std::size_t k = 4) {
        StoreOptions o;
        o.fsync = false;
        store = std::make_unique<ExplanationStore>(dir.path(), o);
        gateway = std::make_unique<Gateway>(std::move(backend), instant_gateway(), no_sleep());
        ExplainerDeps d{&catalog, &persona, &tmpl, &lexicon, gateway.get(), store.get(), k, {}, {}};
        std::uint64_t seed = 0;
        d.seed_source = [seed]() mutable { return seed++; };
        explainer = std::make_unique<Explainer>(d);
    }
};

AnonymizedAlert alert(const std::string& message, const std::string& cls = "a smart home device") {
    AnonymizedAlert a;
    a.inner.message = message;
    a.inner.priority = 1;
    a.device_class = cls;
    return a;
}

}  // namespace

TEST_CASE("explainer: miss then hit") {
    auto counting = std::make_shared<CountingBackend>();
    Rig rig(counting);
    FetchReport r;
    auto e = rig.explainer->lookup_or_fetch(alert(evaluation_messages()[0]), &r);
    CHECK_FALSE(r.cache_hit);
    CHECK(counting->total() == 4);
    CHECK(r.requests == 4);
    CHECK(rig.store->explanation_count(true) >= 4);
    CHECK_FALSE(e.is_decoy);
    REQUIRE(e.rubric);
    CHECK(e.rubric->desc);

    auto again = rig.explainer->lookup_or_fetch(alert(evaluation_messages()[0]), &r);
    CHECK(r.cache_hit);
    CHECK(counting->total() == 4);
    CHECK(again.explanation_id == e.explanation_id);
}

TEST_CASE("explainer: pre-seeded cache only dispatches uncached items") {
    auto counting = std::make_shared<CountingBackend>();
    Rig rig(counting);
    const std::string cls = "a smart home device";
    const auto& real = evaluation_messages()[2];
    std::set<std::string> left_fresh;
    std::size_t fresh_quota = 5;
    for (const auto& entry : rig.catalog.entries()) {
        if (entry.message == real) continue;
        if (fresh_quota > 0 && entry.applies_to(cls)) {
            left_fresh.insert(alert_fingerprint(entry.message));
            --fresh_quota;
            continue;
        }
        Explanation e;
        e.text = "cached";
        e.is_decoy = true;
        rig.store->put(rig.explainer->key_for_message(entry.message, cls), e);
    }
    FetchReport r;
    rig.explainer->lookup_or_fetch(alert(real, cls), &r);
    CHECK(counting->total() == 4);
    CHECK(counting->calls_for(alert_fingerprint(real)) == 1);
    std::size_t dispatched_fresh = 0;
    for (const auto& fp : left_fresh) dispatched_fresh += counting->calls_for(fp);
    CHECK(dispatched_fresh == 3);
}

TEST_CASE("explainer: hitting a cached decoy promotes it without a request") {
    auto counting = std::make_shared<CountingBackend>();
    Rig rig(counting);
    Explanation e;
    e.text = "Someone is trying to reach your device.\n\n1. Unplug it.\n2. Reset it.\n";
    e.is_decoy = true;
    rig.store->put(rig.explainer->key_for(alert(evaluation_messages()[5])), e);
    FetchReport r;
    auto got = rig.explainer->lookup_or_fetch(alert(evaluation_messages()[5]), &r);
    CHECK(r.cache_hit);
    CHECK(counting->total() == 0);
    CHECK_FALSE(got.is_decoy);
    CHECK(got.rubric);
}

TEST_CASE("explainer: k degrades when the catalog is small") {
    auto counting = std::make_shared<CountingBackend>();
    Rig rig(counting);
    std::istringstream in("alpha\tgeneric\t1\t*\nbeta\tgeneric\t1\t*\n");
    rig.catalog = load_catalog(in);
    FetchReport r;
    rig.explainer->lookup_or_fetch(alert("gamma"), &r);
    CHECK(r.k_used == 3);
    CHECK(counting->total() == 3);
}

TEST_CASE("explainer: jargon retry and failures") {
    const auto& msg = evaluation_messages()[0];
    SUBCASE("jargon then clean") {
        auto fault = std::make_shared<FaultBackend>();
        fault->target(alert_fingerprint(msg));
        fault->push(std::string("Your device joined a botnet because of malware. 1. Update the firmware.\n"));
        Rig rig(fault);
        FetchReport r;
        auto e = rig.explainer->lookup_or_fetch(alert(msg), &r);
        CHECK(forbidden_term_hits(e.text, rig.persona.forbidden_terms).empty());
        CHECK(fault->calls_for(alert_fingerprint(msg)) == 2);
        CHECK(r.jargon_retries == 1);
        auto seen = fault->seen();
        bool retry_named_terms = false;
        for (const auto& env : seen) {
            if (env.alert_fingerprint == alert_fingerprint(msg) && env.prompt_text.find("\"botnet\"") != std::string::npos &&
                env.prompt_text.find("\"malware\"") != std::string::npos) {
                retry_named_terms = true;
            }
        }
        CHECK(retry_named_terms);
    }
    SUBCASE("real item fails") {
        auto fault = std::make_shared<FaultBackend>();
        fault->target(alert_fingerprint(msg));
        fault->push(GatewayErrorKind::AuthFailure);
        Rig rig(fault);
        CHECK_THROWS_AS(rig.explainer->lookup_or_fetch(alert(msg)), PartialFailure);
        CHECK_FALSE(rig.store->get(rig.explainer->key_for(alert(msg))));
        CHECK(rig.store->explanation_count(true) == 3);
    }
    SUBCASE("decoy fails") {
        auto fault = std::make_shared<FaultBackend>();
        Rig rig(fault);
        auto target = evaluation_messages()[3];
        // Make the failing decoy the only fresh candidate besides two others.
        std::size_t keep = 0;
        for (const auto& entry : rig.catalog.entries()) {
            if (entry.message == msg || entry.message == target) continue;
            if (keep < 2) {
                ++keep;
                continue;
            }
            Explanation e;
            e.text = "cached";
            e.is_decoy = true;
            rig.store->put(rig.explainer->key_for_message(entry.message, "a smart home device"), e);
        }
        fault->target(alert_fingerprint(target));
        fault->push(GatewayErrorKind::AuthFailure);
        FetchReport r;
        auto e = rig.explainer->lookup_or_fetch(alert(msg), &r);
        CHECK(r.decoy_failures == 1);
        CHECK_FALSE(e.text.empty());
    }
}

TEST_CASE("property: at most one dispatch per key") {
    auto counting = std::make_shared<CountingBackend>();
    Rig rig(counting);
    std::mt19937_64 rng(9);
    for (int i = 0; i < 200; ++i) {
        const auto& m = rig.catalog.entries()[rng() % rig.catalog.size()].message;
        rig.explainer->lookup_or_fetch(alert(m));
    }
    for (const auto& entry : rig.catalog.entries()) CHECK(counting->calls_for(alert_fingerprint(entry.message)) <= 1);
}

namespace {

struct SessionRig {
    Rig rig;
    NameCatalog names;
    UserProfile user;
    DeviceInventory inventory;
    std::unique_ptr<SessionManager> sessions;
    Timestamp clock = now();
    std::string alert_id = "al-1";

    explicit SessionRig(std::shared_ptr<LlmBackend> backend) : rig(std::move(backend)) {
        user.display_name = "Jon";
        names.add(RedactionKind::Hostname, "jons-laptop");
        SessionDeps d;
        d.store = rig.store.get();
        d.gateway = rig.gateway.get();
        d.persona = &rig.persona;
        d.names = &names;
        d.inventory = &inventory;
        d.user = &user;
        d.window_limit = 10;
        d.clock = [this] { return clock; };
        sessions = std::make_unique<SessionManager>(d);
    }

    void explain(const std::string& message) {
        AlertRecord r;
        r.alert_id = alert_id;
        r.alert = alert(message);
        r.alert.redaction.assign(RedactionKind::IPv4, "192.168.1.42");
        r.status = AlertStatus::Explained;
        r.cache_key = rig.explainer->key_for(r.alert);
        rig.explainer->lookup_or_fetch(r.alert);
        rig.store->put_alert(r);
    }
};

}  // namespace

TEST_CASE("session: lifecycle") {
    auto rec = std::make_shared<RecordingBackend>();
    SessionRig s(rec);
    CHECK_THROWS_AS(s.sessions->open_session("al-1", "default"), NoExplanationYet);
    s.explain(evaluation_messages()[0]);
    auto sess = s.sessions->open_session("al-1", "default");
    CHECK(sess.turns.size() == 1);
    auto other = s.sessions->open_session("al-1", "default");
    CHECK(other.session_id != sess.session_id);

    rec->clear();
    s.sessions->ask(sess.session_id, "Should I unplug it now?");
    CHECK(s.sessions->get(sess.session_id).turns.size() == 3);
    CHECK(rec->envelopes().size() == 1);
    CHECK(rec->envelopes()[0].kind == PromptKind::FollowUp);

    s.sessions->ask(sess.session_id, "My laptop jons-laptop at 192.168.1.42 and 10.9.8.7 is slow, Jon here");
    auto stored = s.rig.store->find_session(sess.session_id);
    REQUIRE(stored);
    const auto& q = stored->turns[3].text;
    CHECK(q.find("[[IPv4-1]]") != std::string::npos);
    CHECK(q.find("192.168") == std::string::npos);
    CHECK(q.find("10.9.8.7") == std::string::npos);
    CHECK(q.find("jons-laptop") == std::string::npos);
    CHECK(q.find("Jon ") == std::string::npos);
    for (const auto& env : rec->envelopes()) {
        CHECK(env.prompt_text.find("192.168.1.42") == std::string::npos);
        CHECK(env.prompt_text.find("10.9.8.7") == std::string::npos);
    }
    auto shown = s.sessions->display_text(*stored, stored->turns[3]);
    CHECK(shown.find("192.168.1.42") != std::string::npos);
    CHECK(shown.find("10.9.8.7") != std::string::npos);

    CHECK_THROWS_AS(s.sessions->ask(sess.session_id, "  "), EmptyQuestion);
    auto done = s.sessions->resolve(sess.session_id, SessionOutcome::ActionTaken);
    CHECK(done.state == SessionState::Resolved);
    CHECK_THROWS_AS(s.sessions->resolve(sess.session_id, SessionOutcome::ActionTaken), SessionClosed);
    CHECK_THROWS_AS(s.sessions->ask(sess.session_id, "hello?"), SessionClosed);

    s.sessions->resolve(other.session_id, SessionOutcome::DismissedAsFalseAlert);
    bool found = false;
    for (const auto& a : s.rig.store->audit_log()) {
        found = found || (a.subject_id == other.session_id && a.detail.find("dismissed_as_false_alert") != std::string::npos);
    }
    CHECK(found);
    CHECK_THROWS_AS(s.sessions->get("se-missing"), SessionNotFound);
}

TEST_CASE("session: user turn survives a backend failure, and sessions expire") {
    auto fault = std::make_shared<FaultBackend>();
    SessionRig s(fault);
    s.explain(evaluation_messages()[1]);
    auto sess = s.sessions->open_session("al-1", "default");
    fault->push(GatewayErrorKind::AuthFailure);
    CHECK_THROWS_AS(s.sessions->ask(sess.session_id, "What now?"), GatewayError);
    auto after = s.sessions->get(sess.session_id);
    REQUIRE(after.turns.size() == 2);
    CHECK(after.turns[1].role == TurnRole::User);

    s.clock += std::chrono::hours(25);
    CHECK(s.sessions->get(sess.session_id).state == SessionState::Expired);
    CHECK_THROWS_AS(s.sessions->ask(sess.session_id, "still there?"), SessionClosed);
}

TEST_CASE("session: follow-up jargon is retried once") {
    auto fault = std::make_shared<FaultBackend>();
    SessionRig s(fault);
    s.explain(evaluation_messages()[1]);
    auto sess = s.sessions->open_session("al-1", "default");
    fault->push(std::string("It is malware."));
    auto turn = s.sessions->ask(sess.session_id, "What is it?");
    CHECK(forbidden_term_hits(turn.text, s.rig.persona.forbidden_terms).empty());
}
