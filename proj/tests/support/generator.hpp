#pragma once

// Synthetic alerts with identifiers planted in the message, for leak checks,
// plus serializers that turn a NormalizedAlert back into wire records.

#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "chatids/anonymizer.hpp"

namespace chatids::testing {

struct PlantedAlert {
    NormalizedAlert alert;
    std::vector<std::string> planted;  // every raw identifier placed in the alert
};

class AlertGenerator {
public:
    explicit AlertGenerator(std::uint64_t seed, std::size_t pool = 64) : rng_(seed) {
        for (std::size_t i = 0; i < pool; ++i) {
            hosts_.push_back(fmt::format("hostq{}x{}", i, pick(1000, 9999)));
            users_.push_back(fmt::format("userz{}k{}", i, pick(1000, 9999)));
            names_.add(RedactionKind::Hostname, hosts_.back());
            names_.add(RedactionKind::UserName, users_.back());
        }
    }

    const NameCatalog& names() const { return names_; }

    std::string ipv4() { return fmt::format("{}.{}.{}.{}", pick(11, 223), pick(11, 254), pick(11, 254), pick(11, 254)); }
    std::string ipv6() {
        return fmt::format("2001:db8:{:x}:{:x}:{:x}:{:x}:{:x}:{:x}", pick(0x1000, 0xffff), pick(0x1000, 0xffff),
                           pick(0x1000, 0xffff), pick(0x1000, 0xffff), pick(0x1000, 0xffff), pick(0x1000, 0xffff));
    }
    std::string mac() {
        return fmt::format("{:02x}:{:02x}:{:02x}:{:02x}:{:02x}:{:02x}", pick(16, 255), pick(0, 255), pick(0, 255),
                           pick(0, 255), pick(0, 255), pick(0, 255));
    }
    std::string host() { return hosts_[pick(0, static_cast<int>(hosts_.size()) - 1)]; }
    std::string user() { return users_[pick(0, static_cast<int>(users_.size()) - 1)]; }

    PlantedAlert next() {
        PlantedAlert out;
        auto v4 = ipv4(), v6 = ipv6(), m = mac(), h = host(), u = user();
        auto src = ipv4(), dst = ipv4();
        auto& a = out.alert;
        a.source_format = SourceFormat::Generic;
        a.alert_id = fmt::format("gen-{}", counter_++);
        static const char* kShapes[] = {
            "ET POLICY {h} ({m}) contacted {v4} for user {u} via {v6}",
            "SCAN sweep from {v4} by {u} on {h} [{v6}] hw {m}",
            "Suspicious login for {u}@{h} from {v6} relayed by {v4}, station {m}",
            "{h}:{m}:{v4}:{v6}:{u} beacon",
        };
        std::string shape = kShapes[pick(0, 3)];
        // The rule number keeps scrubbed messages distinct, so each alert is a cache miss.
        a.message = fmt::format(fmt::runtime(shape), fmt::arg("h", h), fmt::arg("m", m), fmt::arg("v4", v4),
                                fmt::arg("u", u), fmt::arg("v6", v6)) +
                    fmt::format(" rule {}", counter_);
        a.src = Endpoint{src, static_cast<std::uint16_t>(pick(1024, 65535))};
        a.dst = Endpoint{dst, static_cast<std::uint16_t>(pick(1, 1023))};
        a.priority = pick(1, 4);
        a.protocol = "TCP";
        a.timestamp = now();
        a.raw = a.message + " " + src + " -> " + dst;
        out.planted = {v4, v6, m, h, u, src, dst};
        return out;
    }

    int pick(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }

private:
    std::mt19937_64 rng_;
    std::vector<std::string> hosts_;
    std::vector<std::string> users_;
    NameCatalog names_;
    std::size_t counter_ = 0;
};

inline std::string endpoint_text(const Endpoint& e) {
    std::string s = e.address;
    if (e.port) s += ":" + std::to_string(*e.port);
    return s;
}

// MM/DD-HH:MM:SS.ffffff [**] [g:s:r] msg [**] [Priority: p] {PROTO} src -> dst
inline std::string to_snort_fast(const NormalizedAlert& a) {
    auto day = std::chrono::floor<std::chrono::days>(a.timestamp);
    std::chrono::year_month_day ymd{day};
    std::chrono::hh_mm_ss tod{a.timestamp - day};
    std::string line = fmt::format("{:02}/{:02}-{:02}:{:02}:{:02}.{:06} [**] ", unsigned(ymd.month()),
                                   unsigned(ymd.day()), tod.hours().count(), tod.minutes().count(),
                                   tod.seconds().count(), tod.subseconds().count());
    if (a.signature_id) {
        line += fmt::format("[{}:{}:{}] ", a.signature_id->generator, a.signature_id->signature,
                            a.signature_id->revision);
    }
    line += a.message + " [**]";
    if (a.priority) line += fmt::format(" [Priority: {}]", *a.priority);
    if (!a.protocol.empty()) line += " {" + a.protocol + "}";
    if (a.src && a.dst) line += " " + endpoint_text(*a.src) + " -> " + endpoint_text(*a.dst);
    return line;
}

inline std::string to_eve(const NormalizedAlert& a) {
    nlohmann::json j;
    j["timestamp"] = format_iso8601(a.timestamp);
    j["event_type"] = "alert";
    if (a.src) {
        j["src_ip"] = a.src->address;
        if (a.src->port) j["src_port"] = *a.src->port;
    }
    if (a.dst) {
        j["dest_ip"] = a.dst->address;
        if (a.dst->port) j["dest_port"] = *a.dst->port;
    }
    if (!a.protocol.empty()) j["proto"] = a.protocol;
    nlohmann::json alert;
    alert["signature"] = a.message;
    if (a.signature_id) {
        alert["gid"] = a.signature_id->generator;
        alert["signature_id"] = a.signature_id->signature;
        alert["rev"] = a.signature_id->revision;
    }
    if (a.priority) alert["severity"] = *a.priority;
    j["alert"] = alert;
    return j.dump();
}

}  // namespace chatids::testing
