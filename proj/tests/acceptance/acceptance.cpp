// Release acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.

#include <array>
#include <chrono>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <httplib.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "chatids/api_service.hpp"
#include "chatids/explainer.hpp"
#include "fakes.hpp"
#include "generator.hpp"
#include "process.hpp"
#include "eval_alerts.hpp"
#include "tempdir.hpp"

using namespace chatids;
using namespace chatids::testing;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

const std::string kData = CHATIDS_TEST_DATA_DIR;
const std::string kFixtures = CHATIDS_TEST_FIXTURES_DIR;

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Pipeline {
    TempDir dir;
    SignatureCatalog catalog = load_catalog_file(kData + "/signatures.tsv");
    PersonaConfig persona = PersonaConfig::load(kData + "/persona.conf");
    PromptTemplate tmpl = PromptTemplate::load(kData + "/prompt_template.txt");
    UrgencyLexicon lexicon = UrgencyLexicon::load(kData + "/urgency_lexicon.txt");
    std::unique_ptr<ExplanationStore> store;
    std::unique_ptr<Gateway> gateway;
    std::unique_ptr<Explainer> explainer;

    Pipeline(std::shared_ptr<LlmBackend> backend, std::size_t k, std::function<std::uint64_t()> seeds) {
        StoreOptions o;
        o.fsync = false;
        store = std::make_unique<ExplanationStore>(dir.path(), o);
        gateway = std::make_unique<Gateway>(std::move(backend), instant_gateway(), no_sleep());
        explainer = std::make_unique<Explainer>(
            ExplainerDeps{&catalog, &persona, &tmpl, &lexicon, gateway.get(), store.get(), k, {}, std::move(seeds)});
    }
};

std::function<std::uint64_t()> mt_seeds(std::uint64_t seed) {
    auto rng = std::make_shared<std::mt19937_64>(seed);
    return [rng] { return (*rng)(); };
}

// 1. No planted identifier reaches any outbound envelope.
Outcome leak_freedom() {
    auto t0 = Clock::now();
    auto rec = std::make_shared<RecordingBackend>();
    Pipeline p(rec, 4, mt_seeds(1));
    AlertGenerator gen(2024);
    std::size_t leaks = 0, envelopes = 0;
    for (int i = 0; i < 10000; ++i) {
        auto a = gen.next();
        auto anon = anonymize_alert(a.alert, nullptr, UserProfile{}, gen.names());
        p.explainer->lookup_or_fetch(anon);
        for (const auto& env : rec->envelopes()) {
            ++envelopes;
            for (const auto& tok : a.planted) leaks += env.prompt_text.find(tok) != std::string::npos;
        }
        rec->clear();
    }
    double secs = seconds_since(t0);
    return {leaks == 0 && secs < 30.0,
            fmt::format("10000 alerts, {} envelopes scanned, {} leaks, {:.1f}s (limit 30s)", envelopes, leaks, secs)};
}

// 2. The printed example explanation scores like its evaluated row.
Outcome rubric_replay() {
    auto persona = PersonaConfig::load(kData + "/persona.conf");
    auto lexicon = UrgencyLexicon::load(kData + "/urgency_lexicon.txt");
    auto s = score(read_file(kFixtures + "/example_explanation.txt"), persona, lexicon);
    std::set<std::string> hit_terms;
    for (const auto& h : s.detail.forbidden_hits) hit_terms.insert(to_lower(h.term));
    bool ok = s.desc && s.cons && !s.urg && !s.intuitive && s.detail.itemized_steps == 4 &&
              hit_terms.count("malware") && hit_terms.count("ddos");
    return {ok, fmt::format("Desc={} Cons={} Urg={} Int={} steps={} malware_hit={} ddos_hit={}", s.desc, s.cons, s.urg,
                            s.intuitive, s.detail.itemized_steps, hit_terms.count("malware") > 0,
                            hit_terms.count("ddos") > 0)};
}

// 3. The real alert's slot is uniform over seeds; every batch is well formed.
Outcome decoy_statistics() {
    auto t0 = Clock::now();
    auto catalog = load_catalog_file(kData + "/signatures.tsv");
    AnonymizedAlert real;
    real.inner.message = evaluation_messages()[0];
    real.inner.priority = 1;
    real.device_class = "a smart lighting bridge";
    auto candidates = plausibility_filter(catalog, real.device_class);
    std::set<std::string> plausible;
    for (const auto* c : candidates) plausible.insert(c->message);

    std::array<int, 4> slots{};
    std::size_t broken = 0;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        auto b = sample_decoys(catalog, real, 4, seed);
        ++slots.at(b.real_index);
        std::size_t reals = 0;
        std::set<std::string> messages;
        bool ok = b.items.size() == 4;
        for (const auto& it : b.items) {
            reals += !it.is_decoy;
            messages.insert(it.inner.message);
            if (it.is_decoy && !plausible.count(it.inner.message)) ok = false;
        }
        ok = ok && reals == 1 && messages.size() == 4 && !b.items[b.real_index].is_decoy &&
             b.items[b.real_index].inner.message == real.inner.message;
        broken += !ok;
    }
    double secs = seconds_since(t0);
    bool within = true;
    for (int c : slots) within = within && c >= 237.5 && c <= 262.5;
    return {within && broken == 0 && secs < 5.0,
            fmt::format("slot counts {}/{}/{}/{} (allowed 250+-12.5), {} invalid batches, {:.2f}s (limit 5s)", slots[0],
                        slots[1], slots[2], slots[3], broken, secs)};
}

std::vector<NormalizedAlert> evaluation_alerts() {
    std::ifstream in(kFixtures + "/eval_alerts.fast");
    SnortParseOptions o;
    o.base_year = 2023;
    return ingest_stream(in, SourceFormat::SnortFast, nullptr, o);
}

// 4. First pass costs k requests per alert, the second pass nothing.
Outcome cache_economy() {
    const std::size_t k = 4;
    auto counting = std::make_shared<CountingBackend>();
    Pipeline p(counting, k, mt_seeds(0));
    auto classes = DeviceClassTable::load(kData + "/device_classes.tsv");
    auto inventory = DeviceInventory::load(kData + "/inventory.tsv", classes);
    auto names = NameCatalog::load(kData + "/known_names.txt");
    UserProfile user;
    user.display_name = "Jon";

    std::vector<AnonymizedAlert> alerts;
    for (auto a : evaluation_alerts()) {
        const DeviceProfile* device = inventory.resolve(a);
        if (device && !a.device_ref) a.device_ref = device->device_ref;
        alerts.push_back(anonymize_alert(a, device, user, names));
    }
    std::vector<std::size_t> first_pass;
    std::size_t before = counting->total();
    for (const auto& a : alerts) {
        std::size_t n = counting->total();
        p.explainer->lookup_or_fetch(a);
        first_pass.push_back(counting->total() - n);
    }
    std::size_t first = counting->total() - before;
    for (const auto& a : alerts) p.explainer->lookup_or_fetch(a);
    std::size_t second = counting->total() - before - first;
    std::string per_alert;
    for (auto n : first_pass) per_alert += (per_alert.empty() ? "" : ",") + std::to_string(n);
    return {alerts.size() == 8 && first == 8 * k && second == 0,
            fmt::format("{} alerts, first pass {} requests (expected {}; per alert {}), second pass {}", alerts.size(),
                        first, 8 * k, per_alert, second)};
}

// 5. The bundled fast and EVE fixtures parse to exactly the expected fields.
Outcome parser_fidelity() {
    auto expected = json::parse(read_file(kFixtures + "/eval_alerts_expected.json"));
    SnortParseOptions o;
    o.base_year = expected["year"].get<int>();
    std::size_t mismatches = 0, malformed = 0, parsed = 0;
    for (auto [file, format] : {std::pair{"/eval_alerts.fast", SourceFormat::SnortFast},
                                std::pair{"/eval_alerts.eve.jsonl", SourceFormat::SuricataEve}}) {
        std::ifstream in(kFixtures + file);
        IngestStats st;
        auto alerts = ingest_stream(in, format, &st, o);
        malformed += st.malformed;
        parsed += alerts.size();
        if (alerts.size() != expected["alerts"].size()) {
            ++mismatches;
            continue;
        }
        for (std::size_t i = 0; i < alerts.size(); ++i) {
            const auto& a = alerts[i];
            const auto& e = expected["alerts"][i];
            bool same = a.message == e["message"] && format_iso8601(a.timestamp) == e["timestamp"] &&
                        a.signature_id &&
                        *a.signature_id == SignatureId{e["gid"].get<std::uint32_t>(), e["sid"].get<std::uint32_t>(),
                                                       e["rev"].get<std::uint32_t>()} &&
                        a.priority == e["priority"].get<int>() && a.protocol == e["protocol"] &&
                        a.src == Endpoint{e["src"], e["src_port"].get<std::uint16_t>()} &&
                        a.dst == Endpoint{e["dst"], e["dst_port"].get<std::uint16_t>()};
            mismatches += !same;
        }
    }
    return {mismatches == 0 && malformed == 0 && parsed == 16,
            fmt::format("{} records parsed, {} field mismatches, {} malformed", parsed, mismatches, malformed)};
}

// 6. A jargon-laden first answer is replaced by exactly one retry.
Outcome forbidden_retry() {
    auto fault = std::make_shared<FaultBackend>();
    Pipeline p(fault, 4, mt_seeds(6));
    const auto& msg = evaluation_messages()[0];
    const auto fp = alert_fingerprint(msg);
    fault->target(fp);
    fault->push(std::string("Your lamp is part of a botnet spreading malware.\n\nAttackers could launch a DDoS.\n\n"
                            "1. Update the firmware.\n2. Block the IP address.\n"));
    AnonymizedAlert a;
    a.inner.message = msg;
    a.inner.priority = 1;
    a.device_class = "a smart lighting bridge";
    auto e = p.explainer->lookup_or_fetch(a);
    auto hits = forbidden_term_hits(e.text, p.persona.forbidden_terms);
    std::size_t calls = fault->calls_for(fp);
    return {hits.empty() && calls == 2,
            fmt::format("final forbidden hits {}, gateway calls for the real item {}", hits.size(), calls)};
}

// 7. The offline CLI explains a fixture quickly.
Outcome offline_latency() {
    auto t0 = Clock::now();
    Child c({CHATIDS_TEST_CLI, "--log-level", "warn", "explain", "--offline", "--alert-file", kFixtures + "/row1.fast", "--format",
             "snort-fast"});
    auto out = c.read_all(std::chrono::seconds(10));
    int code = c.wait();
    double secs = seconds_since(t0);
    auto table = out.find("\nname\tCorr");
    std::string text = out.substr(0, table);
    auto s = detect_sections(text);
    bool three = s.description && s.consequences && s.instructions;
    return {code == 0 && secs < 1.0 && three,
            fmt::format("exit {}, {:.3f}s (limit 1s), sections desc={} cons={} instr={}", code, secs,
                        bool(s.description), bool(s.consequences), bool(s.instructions))};
}

// 8. Explanations survive a hard kill; the restart costs no backend calls.
Outcome durability() {
    TempDir dir;
    auto conf = dir / "chatids.conf";
    std::ofstream(conf) << "[server]\nlisten = 127.0.0.1:0\n"
                        << "[backend]\nkind = mock\nmock_corpus = " << kData << "/mock_corpus.json\n"
                        << "jitter_min_ms = 0\njitter_max_ms = 0\n"
                        << "[decoy]\nk = 4\ncatalog = " << kData << "/signatures.tsv\n"
                        << "[prompt]\npersona = " << kData << "/persona.conf\ntemplate = " << kData
                        << "/prompt_template.txt\n"
                        << "[policy]\nseverity = " << kData << "/severity.policy\n"
                        << "inventory = " << kData << "/inventory.tsv\ndevice_classes = " << kData
                        << "/device_classes.tsv\n"
                        << "[store]\npath = " << (dir / "store").string() << "\nfsync = true\n";

    auto start = [&](Child& c) -> int {
        auto out = c.read_until("\n", std::chrono::seconds(10));
        auto at = out.rfind(':');
        if (out.find("listening on") == std::string::npos || at == std::string::npos) return -1;
        return std::stoi(out.substr(at + 1));
    };
    std::vector<std::string> lines;
    {
        std::ifstream in(kFixtures + "/eval_alerts.fast");
        for (std::string l; std::getline(in, l) && lines.size() < 3;) lines.push_back(l);
    }

    std::size_t accepted = 0, explained_before = 0;
    {
        Child serve({CHATIDS_TEST_CLI, "--log-level", "warn", "serve", "--config", conf.string()});
        int port = start(serve);
        if (port <= 0) return {false, "first server did not report a port"};
        httplib::Client cli("127.0.0.1", port);
        for (const auto& l : lines) {
            auto r = cli.Post("/v1/alerts", json{{"format", "snort-fast"}, {"record", l}}.dump(), "application/json");
            accepted += r && r->status == 202;
        }
        auto deadline = Clock::now() + std::chrono::seconds(30);
        while (Clock::now() < deadline) {
            auto r = cli.Get("/v1/explanations");
            if (r && r->status == 200) explained_before = json::parse(r->body).size();
            if (explained_before == 3) break;
            std::this_thread::sleep_for(std::chrono::milliseconds(50));
        }
        serve.kill(SIGKILL);
        serve.wait();
    }

    Child again({CHATIDS_TEST_CLI, "--log-level", "warn", "serve", "--config", conf.string()});
    int port = start(again);
    if (port <= 0) return {false, "restarted server did not report a port"};
    httplib::Client cli("127.0.0.1", port);
    std::size_t after = 0;
    long long requests = -1;
    if (auto r = cli.Get("/v1/explanations"); r && r->status == 200) after = json::parse(r->body).size();
    if (auto h = cli.Get("/v1/health"); h && h->status == 200) requests = json::parse(h->body)["gateway_requests"];
    again.kill(SIGTERM);
    again.wait();
    return {accepted == 3 && explained_before == 3 && after == 3 && requests == 0,
            fmt::format("{} accepted, {} explained before kill, {} listed after restart, {} gateway requests on restart",
                        accepted, explained_before, after, requests)};
}

}  // namespace

int main() {
    spdlog::set_level(spdlog::level::err);
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"leak freedom", leak_freedom},
        {"rubric replay of the example explanation", rubric_replay},
        {"decoy statistics", decoy_statistics},
        {"cache economy", cache_economy},
        {"parser fidelity", parser_fidelity},
        {"forbidden-term retry", forbidden_retry},
        {"offline latency", offline_latency},
        {"durability", durability},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::cout << fmt::format("criterion {}: {} {}: {}", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first,
                                 o.detail)
                  << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
