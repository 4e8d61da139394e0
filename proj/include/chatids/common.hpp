#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace chatids {

/// UTC instant with microsecond precision.
using Timestamp = std::chrono::sys_time<std::chrono::microseconds>;

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

Timestamp now();

/// Formats as `YYYY-MM-DDTHH:MM:SS.ffffffZ`.
std::string format_iso8601(Timestamp t);

/// Accepts `YYYY-MM-DD[T ]HH:MM:SS[.fraction][Z|+HH:MM|+HHMM]`; no suffix means UTC.
/// Fractions beyond microseconds are truncated. Returns nullopt on any range or
/// syntax violation.
std::optional<Timestamp> parse_iso8601(std::string_view text);

/// Builds a timestamp from calendar fields, validating every range.
std::optional<Timestamp> make_timestamp(int year, unsigned month, unsigned day, unsigned hour,
                                        unsigned minute, unsigned second, std::uint32_t micros);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view data, std::uint64_t seed = 14695981039346656037ULL);

/// Lowercase hex rendering of fnv1a(data); used for fingerprints and ids.
std::string fingerprint(std::string_view data);

std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);
bool iequals(std::string_view a, std::string_view b);
bool starts_with_icase(std::string_view s, std::string_view prefix);
std::vector<std::string> split(std::string_view s, char sep);

inline bool is_alnum(char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

/// Case-insensitive whole-phrase search: a hit must not be flanked by
/// alphanumerics on either side. Returns every start offset.
std::vector<std::size_t> find_phrase_icase(std::string_view text, std::string_view phrase);

}  // namespace chatids
