#include "chatids/common.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

#include <fmt/format.h>

namespace chatids {

namespace {

bool read_uint(std::string_view s, std::size_t& pos, std::size_t digits, unsigned& out) {
    if (pos + digits > s.size()) return false;
    unsigned value = 0;
    for (std::size_t i = 0; i < digits; ++i) {
        char c = s[pos + i];
        if (c < '0' || c > '9') return false;
        value = value * 10 + static_cast<unsigned>(c - '0');
    }
    pos += digits;
    out = value;
    return true;
}

bool expect(std::string_view s, std::size_t& pos, char c) {
    if (pos >= s.size() || s[pos] != c) return false;
    ++pos;
    return true;
}

}  // namespace

Timestamp now() {
    return std::chrono::time_point_cast<std::chrono::microseconds>(
        std::chrono::system_clock::now());
}

std::string format_iso8601(Timestamp t) {
    using namespace std::chrono;
    auto day = floor<days>(t);
    year_month_day ymd{day};
    hh_mm_ss<microseconds> tod{t - day};
    return fmt::format("{:04}-{:02}-{:02}T{:02}:{:02}:{:02}.{:06}Z", static_cast<int>(ymd.year()),
                       static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                       tod.hours().count(), tod.minutes().count(), tod.seconds().count(),
                       tod.subseconds().count());
}

std::optional<Timestamp> make_timestamp(int year, unsigned month, unsigned day, unsigned hour,
                                        unsigned minute, unsigned second, std::uint32_t micros) {
    using namespace std::chrono;
    year_month_day ymd{std::chrono::year{year}, std::chrono::month{month}, std::chrono::day{day}};
    if (!ymd.ok() || hour > 23 || minute > 59 || second > 59 || micros > 999999) {
        return std::nullopt;
    }
    return Timestamp{sys_days{ymd}} + hours{hour} + minutes{minute} + seconds{second} +
           microseconds{micros};
}

std::optional<Timestamp> parse_iso8601(std::string_view text) {
    std::string_view s = trim(text);
    std::size_t pos = 0;
    unsigned year = 0, month = 0, day = 0, hour = 0, minute = 0, second = 0;
    if (!read_uint(s, pos, 4, year) || !expect(s, pos, '-') || !read_uint(s, pos, 2, month) ||
        !expect(s, pos, '-') || !read_uint(s, pos, 2, day)) {
        return std::nullopt;
    }
    if (pos >= s.size() || (s[pos] != 'T' && s[pos] != ' ' && s[pos] != 't')) return std::nullopt;
    ++pos;
    if (!read_uint(s, pos, 2, hour) || !expect(s, pos, ':') || !read_uint(s, pos, 2, minute) ||
        !expect(s, pos, ':') || !read_uint(s, pos, 2, second)) {
        return std::nullopt;
    }
    std::uint32_t micros = 0;
    if (pos < s.size() && s[pos] == '.') {
        ++pos;
        std::size_t digits = 0;
        while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') {
            if (digits < 6) micros = micros * 10 + static_cast<std::uint32_t>(s[pos] - '0');
            ++digits;
            ++pos;
        }
        if (digits == 0) return std::nullopt;
        for (std::size_t d = digits; d < 6; ++d) micros *= 10;
    }
    int offset_minutes = 0;
    if (pos < s.size()) {
        char c = s[pos];
        if (c == 'Z' || c == 'z') {
            ++pos;
        } else if (c == '+' || c == '-') {
            ++pos;
            unsigned oh = 0, om = 0;
            if (!read_uint(s, pos, 2, oh)) return std::nullopt;
            if (pos < s.size() && s[pos] == ':') ++pos;
            if (!read_uint(s, pos, 2, om)) return std::nullopt;
            if (oh > 23 || om > 59) return std::nullopt;
            offset_minutes = static_cast<int>(oh * 60 + om) * (c == '-' ? -1 : 1);
        } else {
            return std::nullopt;
        }
    }
    if (pos != s.size()) return std::nullopt;
    auto t = make_timestamp(static_cast<int>(year), month, day, hour, minute, second, micros);
    if (!t) return std::nullopt;
    return *t - std::chrono::minutes{offset_minutes};
}

std::uint64_t fnv1a(std::string_view data, std::uint64_t seed) {
    constexpr std::uint64_t prime = 1099511628211ULL;
    std::uint64_t hash = seed;
    for (unsigned char byte : data) {
        hash ^= byte;
        hash *= prime;
    }
    return hash;
}

std::string fingerprint(std::string_view data) {
    return fmt::format("{:016x}", fnv1a(data));
}

std::string_view trim(std::string_view s) {
    auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

bool iequals(std::string_view a, std::string_view b) {
    return a.size() == b.size() &&
           std::equal(a.begin(), a.end(), b.begin(), [](unsigned char x, unsigned char y) {
               return std::tolower(x) == std::tolower(y);
           });
}

bool starts_with_icase(std::string_view s, std::string_view prefix) {
    return s.size() >= prefix.size() && iequals(s.substr(0, prefix.size()), prefix);
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        auto next = s.find(sep, start);
        parts.emplace_back(s.substr(start, next - start));
        if (next == std::string_view::npos) break;
        start = next + 1;
    }
    return parts;
}

std::vector<std::size_t> find_phrase_icase(std::string_view text, std::string_view phrase) {
    std::vector<std::size_t> hits;
    if (phrase.empty() || phrase.size() > text.size()) return hits;
    for (std::size_t i = 0; i + phrase.size() <= text.size(); ++i) {
        if (!iequals(text.substr(i, phrase.size()), phrase)) continue;
        bool left_ok = i == 0 || !is_alnum(text[i - 1]) || !is_alnum(phrase.front());
        std::size_t end = i + phrase.size();
        bool right_ok = end == text.size() || !is_alnum(text[end]) || !is_alnum(phrase.back());
        if (left_ok && right_ok) hits.push_back(i);
    }
    return hits;
}

}  // namespace chatids
