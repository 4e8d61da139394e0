#pragma once

// Prompt rendering. A PromptTemplate fixes the output structure, a
// PersonaConfig assigns the model its role and vocabulary limits, and
// follow-up prompts carry a bounded window of the conversation.

#include <array>
#include <istream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "chatids/anonymizer.hpp"

namespace chatids {

inline constexpr std::string_view kPhAlertMsg = "ALERT_MSG";
inline constexpr std::string_view kPhUser = "USER";
inline constexpr std::string_view kPhDevice = "DEVICE";
inline constexpr std::string_view kPhForbiddenTerms = "FORBIDDEN_TERMS";
inline constexpr std::string_view kPhStructureSpec = "STRUCTURE_SPEC";
/// Optional: the persona's role line.
inline constexpr std::string_view kPhRole = "ROLE";

struct PromptTemplate {
    std::string template_id = "default";
    int version = 1;
    std::string body;
    std::set<std::string> required_placeholders{std::string(kPhAlertMsg), std::string(kPhUser),
                                                std::string(kPhDevice), std::string(kPhForbiddenTerms),
                                                std::string(kPhStructureSpec)};

    /// File format: a header line `# chatids-template id=<id> version=<n> [required=A,B,...]`
    /// followed by the body.
    static PromptTemplate parse(std::istream& in);
    static PromptTemplate load(const std::string& path);
};

struct PersonaConfig {
    std::string role_line;
    std::vector<std::string> forbidden_terms;
    std::array<std::string, 3> sections;  // description, consequences, instructions
    int version = 1;

    /// The ordering clause: "<s0>, <s1> and <s2>."
    std::string structure_spec() const;
    /// `"a", "b", "c"`
    std::string quoted_forbidden_terms() const;

    static PersonaConfig default_persona();
    /// `key = value` lines: version, role, forbidden (repeatable), section (exactly 3).
    static PersonaConfig parse(std::istream& in);
    static PersonaConfig load(const std::string& path);
};

enum class PromptKind { Explanation, FollowUp };

struct PromptEnvelope {
    PromptKind kind = PromptKind::Explanation;
    std::string prompt_text;
    int template_version = 0;
    int persona_version = 0;
    std::string alert_fingerprint;
    bool is_decoy = false;
    Timestamp created_at{};
};

/// Fingerprint of an anonymized alert message.
std::string alert_fingerprint(std::string_view anonymized_message);

enum class TemplateIssueKind { MissingPlaceholder, DuplicatePlaceholder, UnknownPlaceholder };

struct TemplateIssue {
    TemplateIssueKind kind;
    std::string placeholder;
    std::string message;
};

/// Empty result means the template is valid.
std::vector<TemplateIssue> validate_template(const PromptTemplate& t);

class TemplateInvalid : public Error {
public:
    explicit TemplateInvalid(std::vector<TemplateIssue> issues);
    const std::vector<TemplateIssue>& issues() const { return issues_; }

private:
    std::vector<TemplateIssue> issues_;
};

/// Raised when a rendered prompt would carry an original identifier value.
class PromptLeak : public Error {
public:
    using Error::Error;
};

PromptEnvelope render_prompt(const AnonymizedAlert& alert, const PersonaConfig& persona,
                             const PromptTemplate& t);

enum class TurnRole { System, Assistant, User };

std::string_view to_string(TurnRole role);
std::optional<TurnRole> parse_turn_role(std::string_view text);

struct ConversationTurn {
    TurnRole role = TurnRole::Assistant;
    std::string text;  // anonymized
    Timestamp at{};
};

class EmptyQuestion : public Error {
public:
    EmptyQuestion() : Error("follow-up question is empty") {}
};

/// Turn 0 (the original explanation) is always kept; of the remaining turns
/// only the `window_limit` most recent survive.
std::vector<ConversationTurn> history_window(std::span<const ConversationTurn> history,
                                             std::size_t window_limit);

/// `question` must already be scrubbed.
PromptEnvelope render_followup(std::span<const ConversationTurn> history, std::string_view question,
                               const PersonaConfig& persona, std::size_t window_limit = 10,
                               std::string_view fingerprint = {});

/// Second attempt after a response used forbidden terms.
PromptEnvelope render_jargon_retry(const PromptEnvelope& original,
                                   std::span<const std::string> used_terms);

}  // namespace chatids
