#include <csignal>
#include <cstdio>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "chatids/api_service.hpp"

namespace chatids {

using nlohmann::json;

namespace {

void reply(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void error_reply(httplib::Response& res, int status, std::string_view kind, std::string_view message) {
    reply(res, status, {{"error", kind}, {"message", message}});
}

std::optional<json> parse_body(const httplib::Request& req, httplib::Response& res) {
    try {
        auto j = json::parse(req.body);
        if (!j.is_object()) throw std::invalid_argument("not an object");
        return j;
    } catch (const std::exception&) {
        error_reply(res, 400, "MalformedRequest", "request body must be a JSON object");
        return std::nullopt;
    }
}

std::string_view ingest_kind(IngestErrorKind k) {
    switch (k) {
        case IngestErrorKind::MalformedRecord: return "MalformedRecord";
        case IngestErrorKind::InvalidTimestamp: return "InvalidTimestamp";
        case IngestErrorKind::NotAnAlert: return "NotAnAlert";
    }
    return "MalformedRecord";
}

template <typename F>
void guarded(httplib::Response& res, F&& body) {
    try {
        body();
    } catch (const NotFound& e) {
        error_reply(res, 404, "NotFound", e.what());
    } catch (const SessionNotFound& e) {
        error_reply(res, 404, "NotFound", e.what());
    } catch (const PendingExplanation& e) {
        error_reply(res, 409, "PendingExplanation", e.what());
    } catch (const NoExplanationYet& e) {
        error_reply(res, 409, "NoExplanationYet", e.what());
    } catch (const SessionClosed& e) {
        error_reply(res, 410, "SessionClosed", e.what());
    } catch (const EmptyQuestion& e) {
        error_reply(res, 400, "EmptyQuestion", e.what());
    } catch (const ExplanationFailed& e) {
        error_reply(res, 502, "BackendUnavailable", e.what());
    } catch (const GatewayError& e) {
        error_reply(res, e.kind() == GatewayErrorKind::Timeout ? 504 : 502, to_string(e.kind()), e.what());
    } catch (const StorageFull& e) {
        error_reply(res, 507, "StorageFull", e.what());
    } catch (const std::exception& e) {
        spdlog::error("http: {}", e.what());
        error_reply(res, 500, "Internal", "internal error");
    }
}

}  // namespace

void mount_routes(httplib::Server& server, ChatIdsService& service) {
    server.Post("/v1/alerts", [&service](const httplib::Request& req, httplib::Response& res) {
        auto body = parse_body(req, res);
        if (!body) return;
        auto format_tag = body->value("format", "");
        auto format = parse_source_format(format_tag);
        if (!format) return error_reply(res, 400, "MalformedRecord", "unknown or missing format tag");
        if (!body->contains("record")) return error_reply(res, 400, "MalformedRecord", "missing record");
        const auto& rec = (*body)["record"];
        std::string line = rec.is_string() ? rec.get<std::string>() : rec.dump();
        guarded(res, [&] {
            try {
                auto id = service.submit(line, *format);
                reply(res, 202, {{"alert_id", id}});
            } catch (const IngestError& e) {
                reply(res, 400, {{"error", ingest_kind(e.kind())}, {"message", e.what()}, {"offset", e.offset()}});
            }
        });
    });

    server.Get("/v1/explanations", [&service](const httplib::Request& req, httplib::Response& res) {
        std::optional<Timestamp> since;
        if (req.has_param("since")) {
            since = parse_iso8601(req.get_param_value("since"));
            if (!since) return error_reply(res, 400, "BadRequest", "since must be an ISO-8601 instant");
        }
        guarded(res, [&] { reply(res, 200, service.list_explanations(since)); });
    });

    server.Get(R"(/v1/explanations/([A-Za-z0-9_.-]+))", [&service](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { reply(res, 200, service.explanation_view(req.matches[1])); });
    });

    server.Post("/v1/sessions", [&service](const httplib::Request& req, httplib::Response& res) {
        auto body = parse_body(req, res);
        if (!body) return;
        auto alert_id = body->value("alert_id", "");
        if (alert_id.empty()) return error_reply(res, 400, "BadRequest", "missing alert_id");
        guarded(res, [&] { reply(res, 201, service.open_session(alert_id)); });
    });

    server.Get(R"(/v1/sessions/([A-Za-z0-9_.-]+))", [&service](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { reply(res, 200, service.session_view(req.matches[1])); });
    });

    server.Post(R"(/v1/sessions/([A-Za-z0-9_.-]+)/messages)",
                [&service](const httplib::Request& req, httplib::Response& res) {
                    auto body = parse_body(req, res);
                    if (!body) return;
                    auto question = body->value("question", "");
                    guarded(res, [&] { reply(res, 200, service.ask(req.matches[1], question)); });
                });

    server.Post(R"(/v1/sessions/([A-Za-z0-9_.-]+)/resolve)",
                [&service](const httplib::Request& req, httplib::Response& res) {
                    auto body = parse_body(req, res);
                    if (!body) return;
                    auto outcome = parse_session_outcome(body->value("outcome", ""));
                    if (!outcome) {
                        return error_reply(res, 400, "BadRequest",
                                           "outcome must be action_taken or dismissed_as_false_alert");
                    }
                    guarded(res, [&] { reply(res, 200, service.resolve(req.matches[1], *outcome)); });
                });

    server.Get("/v1/events", [&service](const httplib::Request& req, httplib::Response& res) {
        std::uint64_t cursor = 0;
        long long timeout_ms = 25000;
        try {
            if (req.has_param("since")) cursor = std::stoull(req.get_param_value("since"));
            if (req.has_param("timeout_ms")) timeout_ms = std::stoll(req.get_param_value("timeout_ms"));
        } catch (const std::exception&) {
            return error_reply(res, 400, "BadRequest", "since and timeout_ms must be integers");
        }
        timeout_ms = std::clamp<long long>(timeout_ms, 0, 60000);
        auto events = service.events_after(cursor, std::chrono::milliseconds(timeout_ms));
        json items = json::array();
        for (const auto& e : events) {
            items.push_back({{"seq", e.seq}, {"alert_id", e.alert_id}, {"urgency", to_string(e.urgency)}});
            cursor = e.seq;
        }
        reply(res, 200, {{"events", items}, {"cursor", cursor}});
    });

    server.Get("/v1/health", [&service](const httplib::Request&, httplib::Response& res) {
        reply(res, 200, service.health());
    });
}

namespace {

httplib::Server* g_server = nullptr;

extern "C" void handle_stop(int) {
    if (g_server) g_server->stop();
}

}  // namespace

int run_server(ChatIdsService& service) {
    httplib::Server server;
    server.set_read_timeout(65, 0);
    server.set_write_timeout(65, 0);
    mount_routes(server, service);

    const auto& cfg = service.config();
    int port = cfg.listen_port;
    if (port == 0) {
        port = server.bind_to_any_port(cfg.listen_host);
        if (port < 0) port = 0;
    } else if (!server.bind_to_port(cfg.listen_host, port)) {
        port = 0;
    }
    if (port == 0) {
        spdlog::error("cannot listen on {}:{}", cfg.listen_host, cfg.listen_port);
        return 1;
    }
    g_server = &server;
    std::signal(SIGINT, handle_stop);
    std::signal(SIGTERM, handle_stop);
    service.start();
    service.start_sources();
    std::printf("chatids listening on http://%s:%d\n", cfg.listen_host.c_str(), port);
    std::fflush(stdout);
    bool ok = server.listen_after_bind();
    g_server = nullptr;
    service.stop();
    return ok ? 0 : 1;
}

}  // namespace chatids
