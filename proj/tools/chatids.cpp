// chatids command line: run the gateway, explain single alerts, score
// explanation texts and inspect the store.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "chatids/api_service.hpp"

#ifndef CHATIDS_DATA_DIR
#define CHATIDS_DATA_DIR "data"
#endif

namespace fs = std::filesystem;
using namespace chatids;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitBackend = 2;

fs::path data_dir() {
    if (const char* env = std::getenv("CHATIDS_DATA_DIR"); env && *env) return env;
    return CHATIDS_DATA_DIR;
}

class TempDir {
public:
    TempDir() {
        std::string tmpl = (fs::temp_directory_path() / "chatids-XXXXXX").string();
        if (!::mkdtemp(tmpl.data())) throw Error("cannot create a temporary directory");
        path_ = tmpl;
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error("cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int cmd_serve(const std::string& config_path) {
    ServiceConfig cfg = load_service_config(config_path);
    ChatIdsService service(std::move(cfg));
    return run_server(service);
}

struct ExplainArgs {
    std::string alert_file;
    std::string format;
    bool offline = false;
    std::string config;
    std::size_t k = 0;
};

int cmd_explain(const ExplainArgs& a) {
    auto format = parse_source_format(a.format);
    if (!format) {
        std::cerr << "unknown format '" << a.format << "'\n";
        return kExitInput;
    }
    std::ifstream in(a.alert_file);
    if (!in) {
        std::cerr << "cannot open alert file " << a.alert_file << "\n";
        return kExitInput;
    }
    IngestStats stats;
    auto alerts = ingest_stream(in, *format, &stats);
    if (alerts.empty() || stats.malformed > 0) {
        std::cerr << "alert file " << a.alert_file << ": " << stats.emitted << " alerts, " << stats.malformed
                  << " malformed records\n";
        return kExitInput;
    }

    std::optional<TempDir> scratch;
    ServiceConfig cfg;
    if (!a.config.empty()) {
        cfg = load_service_config(a.config);
    } else {
        scratch.emplace();
        cfg = ServiceConfig::defaults(data_dir(), scratch->path() / "store");
        cfg.store.fsync = false;
    }
    if (a.offline) {
        cfg.backend_auto = false;
        cfg.backend.kind = BackendKind::Mock;
    }
    if (a.k > 0) cfg.k = a.k;

    ChatIdsService service(std::move(cfg));
    int rc = kExitOk;
    bool first = true;
    for (const auto& alert : alerts) {
        auto id = service.submit(alert);
        service.drain();
        if (!first) std::cout << "\n";
        first = false;
        try {
            auto view = service.explanation_view(id);
            std::cout << view["text"].get<std::string>() << "\n\n";
            RubricScore s = view["rubric"].is_null() ? RubricScore{} : rubric_from_json(view["rubric"]);
            std::cout << rubric_table_header() << "\n" << rubric_table_row(alert.message, s) << "\n";
        } catch (const ExplanationFailed& e) {
            std::cerr << e.what() << "\n";
            rc = kExitBackend;
        }
    }
    return rc;
}

struct ScoreArgs {
    std::string explanation_file;
    std::string persona;
    std::string lexicon;
    double threshold = 9.0;
    bool json = false;
};

int cmd_score(const ScoreArgs& a) {
    std::string text = read_text(a.explanation_file);
    PersonaConfig persona = a.persona.empty() ? PersonaConfig::load((data_dir() / "persona.conf").string())
                                              : PersonaConfig::load(a.persona);
    UrgencyLexicon lexicon = a.lexicon.empty()
                                 ? UrgencyLexicon::load((data_dir() / "urgency_lexicon.txt").string())
                                 : UrgencyLexicon::load(a.lexicon);
    RubricOptions opts;
    opts.readability_threshold = a.threshold;
    auto s = score(text, persona, lexicon, opts);
    if (a.json) {
        std::cout << to_json(s).dump(2) << "\n";
        return kExitOk;
    }
    std::cout << rubric_table_header() << "\n"
              << rubric_table_row(fs::path(a.explanation_file).filename().string(), s) << "\n\n";
    std::cout << "itemized steps:    " << s.detail.itemized_steps << "\n";
    std::cout << "readability grade: " << fmt::format("{:.1f}", s.detail.readability_grade) << "\n";
    std::cout << "urgency phrases:   " << s.detail.urgency_hits << "\n";
    std::cout << "technical terms:  ";
    if (s.detail.forbidden_hits.empty()) std::cout << " none";
    for (const auto& h : s.detail.forbidden_hits) std::cout << " \"" << h.term << "\"@" << h.offset;
    std::cout << "\n";
    return kExitOk;
}

int cmd_store_dump(const std::string& config, const std::string& store_path) {
    fs::path dir;
    if (!store_path.empty()) {
        dir = store_path;
    } else if (!config.empty()) {
        dir = load_service_config(config).store_path;
    } else {
        std::cerr << "store dump needs --config or --store\n";
        return kExitInput;
    }
    if (!fs::is_directory(dir)) {
        std::cerr << "no store at " << dir.string() << "\n";
        return kExitInput;
    }
    ExplanationStore store(dir, StoreOptions{.fsync = false});
    for (const auto& record : store.dump()) {
        std::cout << "--- " << record.value("type", "?") << "\n" << record.dump(2) << "\n";
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"chatids: plain-language explanations for home network IDS alerts"};
    app.require_subcommand(1);
    std::string log_level = "warn";
    app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off");

    std::string serve_config;
    auto* serve = app.add_subcommand("serve", "Run the HTTP gateway");
    serve->add_option("--config", serve_config, "Service configuration file")->required();

    ExplainArgs explain_args;
    auto* explain = app.add_subcommand("explain", "Explain the alerts in a file and print the rubric row");
    explain->add_option("--alert-file", explain_args.alert_file, "File with one alert record per line")->required();
    explain->add_option("--format", explain_args.format, "snort-fast, suricata-eve or generic")->required();
    explain->add_flag("--offline", explain_args.offline, "Use the built-in mock backend");
    explain->add_option("--config", explain_args.config, "Use this service configuration and its store");
    explain->add_option("--k", explain_args.k, "Batch size (real alert plus decoys)");

    ScoreArgs score_args;
    auto* score_cmd = app.add_subcommand("score", "Score an explanation text against the rubric");
    score_cmd->add_option("--explanation-file", score_args.explanation_file, "Explanation text")->required();
    score_cmd->add_option("--persona", score_args.persona, "Persona file (forbidden terms)");
    score_cmd->add_option("--lexicon", score_args.lexicon, "Urgency lexicon file");
    score_cmd->add_option("--readability-threshold", score_args.threshold, "Highest acceptable grade level");
    score_cmd->add_flag("--json", score_args.json, "Print the score as JSON");

    std::string store_config, store_path;
    auto* store_cmd = app.add_subcommand("store", "Inspect the explanation store");
    store_cmd->require_subcommand(1);
    auto* dump = store_cmd->add_subcommand("dump", "Print every stored record");
    dump->add_option("--config", store_config, "Service configuration naming the store");
    dump->add_option("--store", store_path, "Store directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitInput;
    }

    auto logger = spdlog::stderr_color_mt("chatids");
    spdlog::set_default_logger(logger);
    if (serve->parsed() && !app.get_option("--log-level")->count()) log_level = "info";
    spdlog::set_level(spdlog::level::from_str(log_level));

    try {
        if (serve->parsed()) return cmd_serve(serve_config);
        if (explain->parsed()) return cmd_explain(explain_args);
        if (score_cmd->parsed()) return cmd_score(score_args);
        if (dump->parsed()) return cmd_store_dump(store_config, store_path);
    } catch (const GatewayError& e) {
        std::cerr << "backend error: " << e.what() << "\n";
        return kExitBackend;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    }
    return kExitInput;
}
