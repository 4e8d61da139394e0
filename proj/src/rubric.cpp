#include "chatids/rubric.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>

#include <fmt/format.h>

namespace chatids {

namespace {

constexpr std::string_view kDescriptionCues[] = {
    "detected", "noticed", "discovered", "found", "attempt", "trying to", "tried to",
    "unusual", "suspicious", "unauthorized", "which means", "this means", "someone",
};

constexpr std::string_view kConsequenceCues[] = {
    "if you don't", "if you do not", "if you won't", "if you do nothing", "if nothing is done", "if no action",
    "if you ignore", "if this is ignored", "if left", "otherwise", "consequence",
    "could be used", "could lose", "could steal", "could take", "could use", "would be able to",
    "might be able to", "could be able to", "at risk",
};

bool contains_any(std::string_view text, std::span<const std::string_view> cues) {
    return std::any_of(cues.begin(), cues.end(),
                       [&](std::string_view cue) { return !find_phrase_icase(text, cue).empty(); });
}

/// Length of a list marker plus following space at the start of `line`, or 0.
std::size_t list_marker_length(std::string_view line) {
    std::size_t i = 0;
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t start = i;
    if (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) {
        while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
        if (i - start > 3 || i >= line.size() || (line[i] != '.' && line[i] != ')')) return 0;
        ++i;
    } else if (i < line.size() && (line[i] == '-' || line[i] == '*')) {
        ++i;
    } else if (line.substr(i, 3) == "\xE2\x80\xA2") {  // U+2022 bullet
        i += 3;
    } else {
        return 0;
    }
    if (i >= line.size() || (line[i] != ' ' && line[i] != '\t')) return 0;
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    if (i >= line.size()) return 0;
    return i;
}

struct Line {
    std::size_t begin;
    std::size_t end;  // excludes newline
    enum { Blank, Plain, List } kind;
};

std::vector<Line> split_lines(std::string_view text) {
    std::vector<Line> lines;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        std::size_t end = nl == std::string_view::npos ? text.size() : nl;
        auto content = text.substr(pos, end - pos);
        std::size_t trimmed_end = end;
        while (trimmed_end > pos && (text[trimmed_end - 1] == '\r' || text[trimmed_end - 1] == ' ')) --trimmed_end;
        Line line{pos, trimmed_end, Line::Plain};
        if (trim(content).empty()) {
            line.kind = Line::Blank;
        } else if (list_marker_length(content) > 0) {
            line.kind = Line::List;
        }
        lines.push_back(line);
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    return lines;
}

struct Block {
    TextSpan span;
    bool is_list;
};

std::vector<Block> split_blocks(const std::vector<Line>& lines) {
    std::vector<Block> blocks;
    for (std::size_t i = 0; i < lines.size();) {
        if (lines[i].kind == Line::Blank) {
            ++i;
            continue;
        }
        bool is_list = lines[i].kind == Line::List;
        std::size_t begin = lines[i].begin, end = lines[i].end;
        std::size_t j = i + 1;
        while (j < lines.size()) {
            if (lines[j].kind == Line::Blank) {
                // A list may have blank lines between items.
                std::size_t k = j;
                while (k < lines.size() && lines[k].kind == Line::Blank) ++k;
                if (is_list && k < lines.size() && lines[k].kind == Line::List) {
                    j = k;
                    continue;
                }
                break;
            }
            if ((lines[j].kind == Line::List) != is_list) break;
            end = lines[j].end;
            ++j;
        }
        blocks.push_back({TextSpan{begin, end}, is_list});
        i = j;
    }
    return blocks;
}

int count_syllables(std::string_view word) {
    std::string w = to_lower(word);
    if (std::all_of(w.begin(), w.end(), [](unsigned char c) { return std::isdigit(c); })) return 1;
    auto vowel = [](char c) { return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u' || c == 'y'; };
    int count = 0;
    bool prev = false;
    for (char c : w) {
        bool v = vowel(c);
        if (v && !prev) ++count;
        prev = v;
    }
    if (w.size() > 2 && w.back() == 'e' && w[w.size() - 2] != 'l' && !vowel(w[w.size() - 2]) && count > 1) --count;
    if (w.size() > 3 && w.substr(w.size() - 2) == "es" && count > 1 &&
        !(w[w.size() - 3] == 's' || w[w.size() - 3] == 'x' || w[w.size() - 3] == 'z' ||
          w[w.size() - 3] == 'c' || w[w.size() - 3] == 'g')) {
        --count;
    }
    if (w.size() > 3 && w.substr(w.size() - 2) == "ed" && count > 1 && w[w.size() - 3] != 't' &&
        w[w.size() - 3] != 'd') {
        --count;
    }
    return std::max(count, 1);
}

const std::set<std::string>& imperative_verbs() {
    static const std::set<std::string> verbs{
        "ask",     "avoid",   "back",    "block",     "buy",      "call",    "change",  "check",
        "choose",  "close",   "configure", "connect", "contact",  "create",  "delete",  "disable",
        "disconnect", "do",   "don't",   "download",  "enable",   "ensure",  "find",    "follow",
        "get",     "give",    "go",      "install",   "isolate",  "keep",    "leave",   "let",
        "log",     "look",    "make",    "monitor",   "move",     "never",   "open",    "pick",
        "plug",    "power",   "press",   "pull",      "put",      "read",    "reboot",  "remove",
        "replace", "report",  "reset",   "restart",   "restore",  "review",  "run",     "scan",
        "see",     "set",     "sign",    "stop",      "switch",   "take",    "tell",    "turn",
        "unplug",  "update",  "use",     "verify",    "wait",     "watch",   "write",   "try",
        "think",   "note",    "save",    "shut",      "hold",     "type",    "visit",   "consider",
    };
    return verbs;
}

const std::set<std::string>& non_imperative_openers() {
    static const std::set<std::string> words{
        "the", "a",  "an",  "your", "you",   "we",    "it",    "this", "that", "there", "i",
        "they", "he", "she", "our", "my",    "his",   "her",   "its",  "these", "those", "if",
        "when", "because", "is", "are", "was", "were", "will", "can",  "could", "should", "maybe",
    };
    return words;
}

std::vector<std::string> words_of(std::string_view text) {
    std::vector<std::string> words;
    std::string cur;
    for (char c : text) {
        if (is_alnum(c) || c == '\'') {
            cur.push_back(c);
        } else if (!cur.empty()) {
            words.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) words.push_back(std::move(cur));
    return words;
}

}  // namespace

std::vector<std::string> itemized_steps(std::string_view text) {
    std::vector<std::string> steps;
    for (const auto& line : split_lines(text)) {
        if (line.kind != Line::List) continue;
        auto content = text.substr(line.begin, line.end - line.begin);
        steps.emplace_back(trim(content.substr(list_marker_length(content))));
    }
    return steps;
}

std::size_t count_itemized_steps(std::string_view text) { return itemized_steps(text).size(); }

DetectedSections detect_sections(std::string_view text) {
    DetectedSections out;
    auto blocks = split_blocks(split_lines(text));

    for (const auto& b : blocks) {
        if (b.is_list) continue;
        auto body = text.substr(b.span.begin, b.span.end - b.span.begin);
        if (contains_any(body, kDescriptionCues) && !contains_any(body, kConsequenceCues)) {
            out.description = b.span;
            break;
        }
    }
    std::size_t floor = out.description ? out.description->end : 0;
    for (const auto& b : blocks) {
        if (b.is_list || b.span.begin < floor) continue;
        auto body = text.substr(b.span.begin, b.span.end - b.span.begin);
        if (contains_any(body, kConsequenceCues)) {
            out.consequences = b.span;
            break;
        }
    }
    if (out.consequences) floor = out.consequences->end;
    for (const auto& b : blocks) {
        if (!b.is_list || b.span.begin < floor) continue;
        out.instructions = b.span;
        out.steps = itemized_steps(text.substr(b.span.begin, b.span.end - b.span.begin));
        break;
    }
    return out;
}

std::vector<ForbiddenHit> forbidden_term_hits(std::string_view text, std::span<const std::string> terms) {
    std::vector<ForbiddenHit> hits;
    for (const auto& term : terms) {
        for (auto offset : find_phrase_icase(text, term)) hits.push_back({term, offset});
    }
    std::stable_sort(hits.begin(), hits.end(),
                     [](const ForbiddenHit& a, const ForbiddenHit& b) { return a.offset < b.offset; });
    return hits;
}

double readability_grade(std::string_view text) {
    std::size_t word_count = 0, syllables = 0, sentences = 0;
    for (const auto& line : split_lines(text)) {
        if (line.kind == Line::Blank) continue;
        auto content = text.substr(line.begin, line.end - line.begin);
        if (line.kind == Line::List) content = content.substr(list_marker_length(content));
        bool words_since_stop = false;
        std::string cur;
        auto flush = [&] {
            if (cur.empty()) return;
            ++word_count;
            syllables += static_cast<std::size_t>(count_syllables(cur));
            words_since_stop = true;
            cur.clear();
        };
        for (std::size_t i = 0; i < content.size(); ++i) {
            char c = content[i];
            if (is_alnum(c) || c == '\'') {
                cur.push_back(c);
                continue;
            }
            flush();
            bool stop = (c == '.' || c == '!' || c == '?') &&
                        (i + 1 == content.size() || !is_alnum(content[i + 1]));
            if (stop && words_since_stop) {
                ++sentences;
                words_since_stop = false;
            }
        }
        flush();
        if (words_since_stop) ++sentences;
    }
    if (word_count == 0 || sentences == 0) return 0.0;
    return 0.39 * static_cast<double>(word_count) / static_cast<double>(sentences) +
           11.8 * static_cast<double>(syllables) / static_cast<double>(word_count) - 15.59;
}

bool looks_imperative(std::string_view step) {
    auto words = words_of(step);
    if (words.empty()) return false;
    std::string first = to_lower(words[0]);
    if (first == "please" && words.size() > 1) first = to_lower(words[1]);
    if (imperative_verbs().count(first)) return true;
    if (non_imperative_openers().count(first)) return false;
    auto ends_with = [&](std::string_view suffix) {
        return first.size() > suffix.size() && first.compare(first.size() - suffix.size(), suffix.size(), suffix) == 0;
    };
    return !(ends_with("ing") || ends_with("ed") || ends_with("s") || ends_with("ly"));
}

UrgencyLexicon UrgencyLexicon::default_lexicon() {
    UrgencyLexicon lex;
    lex.terms_ = {"immediately", "right away", "as soon as possible", "urgent", "urgently",
                  "right now", "without delay", "at once", "act now"};
    return lex;
}

UrgencyLexicon UrgencyLexicon::parse(std::istream& in) {
    UrgencyLexicon lex;
    std::string line;
    while (std::getline(in, line)) {
        auto t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        lex.terms_.emplace_back(t);
    }
    return lex;
}

UrgencyLexicon UrgencyLexicon::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open urgency lexicon '" + path + "'");
    return parse(in);
}

std::string_view to_string(CorrectnessMark mark) {
    switch (mark) {
        case CorrectnessMark::Unscored: return "Unscored";
        case CorrectnessMark::HumanPass: return "HumanPass";
        case CorrectnessMark::HumanFail: return "HumanFail";
    }
    return "Unscored";
}

std::optional<CorrectnessMark> parse_correctness(std::string_view text) {
    if (text == "Unscored") return CorrectnessMark::Unscored;
    if (text == "HumanPass") return CorrectnessMark::HumanPass;
    if (text == "HumanFail") return CorrectnessMark::HumanFail;
    return std::nullopt;
}

RubricScore score(std::string_view text, const PersonaConfig& persona, const UrgencyLexicon& lexicon,
                  const RubricOptions& opts) {
    RubricScore s;
    auto sections = detect_sections(text);
    s.desc = sections.description.has_value();
    s.cons = sections.consequences.has_value();

    auto steps = itemized_steps(text);
    s.detail.itemized_steps = steps.size();
    s.meas = steps.size() >= 2 &&
             std::all_of(steps.begin(), steps.end(), [](const std::string& st) { return looks_imperative(st); });

    for (const auto& span : {sections.description, sections.consequences}) {
        if (!span) continue;
        auto body = text.substr(span->begin, span->end - span->begin);
        for (const auto& term : lexicon.terms()) s.detail.urgency_hits += find_phrase_icase(body, term).size();
    }
    s.urg = s.detail.urgency_hits >= 1;

    s.detail.forbidden_hits = forbidden_term_hits(text, persona.forbidden_terms);
    s.detail.readability_grade = readability_grade(text);
    s.intuitive = s.detail.forbidden_hits.empty() && !trim(text).empty() &&
                  s.detail.readability_grade <= opts.readability_threshold;
    return s;
}

std::string rubric_table_header() { return "name\tCorr\tDesc\tCons\tMeas\tUrg\tInt"; }

std::string rubric_table_row(std::string_view name, const RubricScore& s) {
    auto mark = [](bool b) { return b ? "✓" : "x"; };
    const char* corr = s.corr == CorrectnessMark::HumanPass   ? "✓"
                       : s.corr == CorrectnessMark::HumanFail ? "x"
                                                              : "-";
    return fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}", name, corr, mark(s.desc), mark(s.cons), mark(s.meas),
                       mark(s.urg), mark(s.intuitive));
}

}  // namespace chatids
