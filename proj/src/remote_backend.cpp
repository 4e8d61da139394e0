#include <cstdlib>

#include <httplib.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "chatids/llm_gateway.hpp"

namespace chatids {

namespace {

struct ParsedUrl {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

ParsedUrl split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw Error("backend endpoint '" + url + "' lacks a scheme");
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

RemoteHttpBackend::RemoteHttpBackend(BackendConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.endpoint.empty()) throw Error("remote backend needs an endpoint");
    split_url(cfg_.endpoint);
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (cfg_.endpoint.rfind("https://", 0) == 0) {
        throw Error("https endpoint configured but this build has no TLS support");
    }
#endif
}

LlmResponse RemoteHttpBackend::complete(const PromptEnvelope& envelope, Millis timeout) {
    const char* credential = std::getenv(cfg_.credential_ref.c_str());
    if (credential == nullptr || *credential == '\0') {
        throw GatewayError(GatewayErrorKind::AuthFailure,
                           "credential variable " + cfg_.credential_ref + " is not set");
    }

    auto [origin, path] = split_url(cfg_.endpoint);
    httplib::Client client(origin);
    auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
    auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    client.set_bearer_token_auth(credential);

    nlohmann::json body = {
        {"model", cfg_.model},
        {"temperature", cfg_.temperature},
        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", envelope.prompt_text}}})},
    };

    auto start = std::chrono::steady_clock::now();
    auto res = client.Post(path, body.dump(), "application/json");
    auto elapsed = std::chrono::duration_cast<Millis>(std::chrono::steady_clock::now() - start);

    if (!res) {
        auto err = res.error();
        if (err == httplib::Error::ConnectionTimeout || (err == httplib::Error::Read && elapsed >= timeout)) {
            throw GatewayError(GatewayErrorKind::Timeout, "backend request timed out");
        }
        throw GatewayError(GatewayErrorKind::Transient, "backend request failed: " + httplib::to_string(err));
    }
    if (res->status == 401 || res->status == 403) {
        throw GatewayError(GatewayErrorKind::AuthFailure,
                           "backend rejected the credential (HTTP " + std::to_string(res->status) + ")");
    }
    if (res->status == 408 || res->status == 429 || res->status >= 500) {
        throw GatewayError(GatewayErrorKind::Transient, "backend returned HTTP " + std::to_string(res->status));
    }
    if (res->status != 200) {
        throw GatewayError(GatewayErrorKind::BackendUnavailable,
                           "backend returned HTTP " + std::to_string(res->status));
    }

    LlmResponse out;
    out.backend_id = id();
    out.latency = elapsed;
    try {
        auto j = nlohmann::json::parse(res->body);
        const auto& choice = j.at("choices").at(0);
        out.text = choice.at("message").at("content").get<std::string>();
        out.truncated = choice.value("finish_reason", "") == "length";
        if (j.contains("usage")) out.token_estimate = j["usage"].value("total_tokens", 0);
    } catch (const nlohmann::json::exception& e) {
        throw GatewayError(GatewayErrorKind::Transient, std::string("unreadable backend response: ") + e.what());
    }
    if (out.token_estimate == 0) out.token_estimate = (envelope.prompt_text.size() + out.text.size()) / 4;
    return out;
}

}  // namespace chatids
