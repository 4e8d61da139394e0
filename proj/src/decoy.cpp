#include "chatids/decoy.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <unordered_set>

namespace chatids {

bool SignatureCatalogEntry::applies_to(std::string_view device_class) const {
    return applicable_device_classes.count(std::string(kAnyDeviceClass)) > 0 ||
           applicable_device_classes.count(std::string(device_class)) > 0;
}

SignatureCatalog::SignatureCatalog(std::vector<SignatureCatalogEntry> entries) {
    std::unordered_set<std::string> seen;
    for (auto& e : entries) {
        if (trim(e.message).empty()) throw Error("catalog entry with empty message");
        if (e.applicable_device_classes.empty()) {
            throw Error("catalog entry '" + e.message + "' has no device classes");
        }
        if (!seen.insert(e.message).second) throw DuplicateEntry("duplicate catalog message '" + e.message + "'");
    }
    entries_ = std::move(entries);
}

SignatureCatalog load_catalog(std::istream& source) {
    std::vector<SignatureCatalogEntry> entries;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(source, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty() || trim(line).front() == '#') continue;
        auto fields = split(line, '\t');
        if (fields.size() != 4) throw MalformedCatalogLine(lineno, "expected 4 tab-separated fields");
        SignatureCatalogEntry e;
        e.message = std::string(trim(fields[0]));
        if (e.message.empty()) throw MalformedCatalogLine(lineno, "empty message");
        auto format = parse_source_format(fields[1]);
        if (!format) throw MalformedCatalogLine(lineno, "unknown format tag '" + fields[1] + "'");
        e.source_format = *format;
        auto prio = trim(fields[2]);
        auto [ptr, ec] = std::from_chars(prio.data(), prio.data() + prio.size(), e.typical_priority);
        if (ec != std::errc{} || ptr != prio.data() + prio.size() || e.typical_priority < 1) {
            throw MalformedCatalogLine(lineno, "bad priority '" + fields[2] + "'");
        }
        for (const auto& cls : split(fields[3], ',')) {
            if (!trim(cls).empty()) e.applicable_device_classes.emplace(trim(cls));
        }
        if (e.applicable_device_classes.empty()) throw MalformedCatalogLine(lineno, "no device classes");
        if (!seen.insert(e.message).second) {
            throw DuplicateEntry("catalog line " + std::to_string(lineno) + ": duplicate message '" +
                                 e.message + "'");
        }
        entries.push_back(std::move(e));
    }
    return SignatureCatalog(std::move(entries));
}

SignatureCatalog load_catalog_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open signature catalog '" + path + "'");
    return load_catalog(in);
}

std::vector<const SignatureCatalogEntry*> plausibility_filter(const SignatureCatalog& catalog,
                                                              std::string_view device_class) {
    std::vector<const SignatureCatalogEntry*> out;
    for (const auto& e : catalog.entries()) {
        if (e.applies_to(device_class)) out.push_back(&e);
    }
    return out;
}

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
    if (n <= 1) return 0;
    const std::uint64_t range = n;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % range;
    std::uint64_t draw;
    do {
        draw = rng();
    } while (draw >= limit);
    return static_cast<std::size_t>(draw % range);
}

namespace {

template <typename T>
void shuffle_prefix(std::vector<T>& v, std::size_t count, std::mt19937_64& rng) {
    // Partial Fisher-Yates: the first `count` slots become a uniform sample.
    for (std::size_t i = 0; i < count && i + 1 < v.size(); ++i) {
        std::size_t j = i + uniform_index(rng, v.size() - i);
        std::swap(v[i], v[j]);
    }
}

AnonymizedAlert make_decoy(const SignatureCatalogEntry& entry, const AnonymizedAlert& real) {
    AnonymizedAlert d;
    d.inner.source_format = entry.source_format;
    d.inner.message = entry.message;
    d.inner.priority = entry.typical_priority;
    d.inner.timestamp = real.inner.timestamp;
    d.inner.raw = entry.message;
    d.inner.alert_id = "decoy-" + fingerprint(entry.message + '\n' + real.inner.alert_id);
    d.device_class = real.device_class;
    d.is_decoy = true;
    d.resolution = real.resolution;
    return d;
}

}  // namespace

DecoyBatch sample_decoys(const SignatureCatalog& catalog, const AnonymizedAlert& real, std::size_t k,
                         std::uint64_t seed) {
    if (k < 1) throw Error("decoy batch size k must be >= 1");
    DecoyBatch batch;
    batch.k = k;
    batch.seed = seed;
    std::mt19937_64 rng(seed);

    const std::size_t needed = k - 1;
    std::vector<const SignatureCatalogEntry*> near, far;
    const int real_priority = real.inner.priority.value_or(2);
    for (const auto* e : plausibility_filter(catalog, real.device_class)) {
        if (e->message == real.inner.message) continue;
        (std::abs(e->typical_priority - real_priority) <= 1 ? near : far).push_back(e);
    }
    if (near.size() + far.size() < needed) throw InsufficientCandidates(near.size() + far.size(), needed);

    std::vector<const SignatureCatalogEntry*> chosen;
    shuffle_prefix(near, std::min(needed, near.size()), rng);
    for (std::size_t i = 0; i < needed && i < near.size(); ++i) chosen.push_back(near[i]);
    if (chosen.size() < needed) {
        std::size_t rest = needed - chosen.size();
        shuffle_prefix(far, rest, rng);
        for (std::size_t i = 0; i < rest; ++i) chosen.push_back(far[i]);
    }

    batch.items.push_back(real);
    batch.items.front().is_decoy = false;
    for (const auto* e : chosen) batch.items.push_back(make_decoy(*e, real));

    // Full Fisher-Yates over the batch, tracking where the real alert lands.
    std::vector<std::size_t> order(batch.items.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i) {
        std::swap(order[i - 1], order[uniform_index(rng, i)]);
    }
    std::vector<AnonymizedAlert> shuffled;
    shuffled.reserve(order.size());
    for (std::size_t slot = 0; slot < order.size(); ++slot) {
        if (order[slot] == 0) batch.real_index = slot;
        shuffled.push_back(std::move(batch.items[order[slot]]));
    }
    batch.items = std::move(shuffled);
    return batch;
}

}  // namespace chatids
