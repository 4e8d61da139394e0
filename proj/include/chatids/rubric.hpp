#pragma once

// Explanation quality scoring along six dimensions: correctness (human
// annotated only), problem description, consequences, measures, urgency and
// intuitiveness. Everything except correctness is structural and automatic.

#include <istream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "chatids/prompt_builder.hpp"

namespace chatids {

struct TextSpan {
    std::size_t begin = 0;
    std::size_t end = 0;  // exclusive

    friend bool operator==(const TextSpan&, const TextSpan&) = default;
};

struct DetectedSections {
    std::optional<TextSpan> description;
    std::optional<TextSpan> consequences;
    std::optional<TextSpan> instructions;
    std::vector<std::string> steps;  // text of each itemized step, markers stripped
};

/// Locates sections by cue phrases and list structure. Sections that cannot
/// be found are reported absent; present spans are disjoint and ordered.
DetectedSections detect_sections(std::string_view text);

/// Lines starting with `1.`, `1)`, `-`, `*` or a bullet.
std::size_t count_itemized_steps(std::string_view text);
std::vector<std::string> itemized_steps(std::string_view text);

struct ForbiddenHit {
    std::string term;
    std::size_t offset = 0;

    friend bool operator==(const ForbiddenHit&, const ForbiddenHit&) = default;
};

/// Case-insensitive whole-phrase matches, sorted by offset; overlapping terms
/// are each reported.
std::vector<ForbiddenHit> forbidden_term_hits(std::string_view text, std::span<const std::string> terms);

/// Flesch-Kincaid grade level.
double readability_grade(std::string_view text);

/// True when the step's first word reads as a command ("Unplug", "Please reset").
bool looks_imperative(std::string_view step);

class UrgencyLexicon {
public:
    static UrgencyLexicon default_lexicon();
    /// One term per line; `#` comments.
    static UrgencyLexicon parse(std::istream& in);
    static UrgencyLexicon load(const std::string& path);

    const std::vector<std::string>& terms() const { return terms_; }

private:
    std::vector<std::string> terms_;
};

enum class CorrectnessMark { Unscored, HumanPass, HumanFail };

std::string_view to_string(CorrectnessMark mark);
std::optional<CorrectnessMark> parse_correctness(std::string_view text);

struct RubricDetail {
    std::size_t itemized_steps = 0;
    std::vector<ForbiddenHit> forbidden_hits;
    std::size_t urgency_hits = 0;
    double readability_grade = 0.0;
};

struct RubricScore {
    CorrectnessMark corr = CorrectnessMark::Unscored;
    bool desc = false;
    bool cons = false;
    bool meas = false;
    bool urg = false;
    bool intuitive = false;  // the "Int" column
    RubricDetail detail;
};

struct RubricOptions {
    double readability_threshold = 9.0;
};

RubricScore score(std::string_view text, const PersonaConfig& persona, const UrgencyLexicon& lexicon,
                  const RubricOptions& opts = {});

/// Tab-separated `name Corr Desc Cons Meas Urg Int`, with check marks as in
/// the evaluation table.
std::string rubric_table_header();
std::string rubric_table_row(std::string_view name, const RubricScore& s);

}  // namespace chatids
