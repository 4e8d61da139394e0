#pragma once

// Dummy-alert padding. Every real anonymized alert is sent together with k-1
// plausible decoys drawn from a signature catalog, so the LLM endpoint cannot
// tell which alert actually fired.

#include <cstdint>
#include <istream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "chatids/anonymizer.hpp"

namespace chatids {

/// Device class that makes a catalog entry plausible for any device.
inline constexpr std::string_view kAnyDeviceClass = "*";

struct SignatureCatalogEntry {
    std::string message;
    SourceFormat source_format = SourceFormat::Generic;
    int typical_priority = 2;
    std::set<std::string> applicable_device_classes;

    bool applies_to(std::string_view device_class) const;
};

class DuplicateEntry : public Error {
public:
    using Error::Error;
};

class MalformedCatalogLine : public Error {
public:
    MalformedCatalogLine(std::size_t line, const std::string& why)
        : Error("catalog line " + std::to_string(line) + ": " + why), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

class InsufficientCandidates : public Error {
public:
    InsufficientCandidates(std::size_t available, std::size_t needed)
        : Error("only " + std::to_string(available) + " decoy candidates, need " +
                std::to_string(needed)),
          available_(available),
          needed_(needed) {}
    std::size_t available() const { return available_; }
    std::size_t needed() const { return needed_; }

private:
    std::size_t available_;
    std::size_t needed_;
};

/// Immutable after loading.
class SignatureCatalog {
public:
    SignatureCatalog() = default;
    explicit SignatureCatalog(std::vector<SignatureCatalogEntry> entries);

    const std::vector<SignatureCatalogEntry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

private:
    std::vector<SignatureCatalogEntry> entries_;
};

/// One record per line, tab-separated: message, format tag, priority,
/// comma-separated device classes. `#` lines are comments.
SignatureCatalog load_catalog(std::istream& source);
SignatureCatalog load_catalog_file(const std::string& path);

/// Entries applicable to `device_class` (or to every class via "*"), in catalog order.
std::vector<const SignatureCatalogEntry*> plausibility_filter(const SignatureCatalog& catalog,
                                                              std::string_view device_class);

struct DecoyBatch {
    std::vector<AnonymizedAlert> items;
    std::size_t real_index = 0;  // never serialized outward
    std::size_t k = 1;
    std::uint64_t seed = 0;

    const AnonymizedAlert& real() const { return items.at(real_index); }
};

/// Deterministic for a given (catalog, real, k, seed). Decoys stay within +-1
/// of the real priority whenever enough such candidates exist.
DecoyBatch sample_decoys(const SignatureCatalog& catalog, const AnonymizedAlert& real, std::size_t k,
                         std::uint64_t seed);

/// Unbiased index in [0, n) from a 64-bit engine; identical on every platform,
/// unlike std::uniform_int_distribution.
std::size_t uniform_index(std::mt19937_64& rng, std::size_t n);

}  // namespace chatids
