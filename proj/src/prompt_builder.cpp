#include "chatids/prompt_builder.hpp"

#include <fstream>
#include <map>
#include <sstream>

namespace chatids {

namespace {

bool is_placeholder_char(char c) { return (c >= 'A' && c <= 'Z') || c == '_' || (c >= '0' && c <= '9'); }

const std::set<std::string>& known_placeholders() {
    static const std::set<std::string> known{std::string(kPhAlertMsg), std::string(kPhUser),
                                             std::string(kPhDevice), std::string(kPhForbiddenTerms),
                                             std::string(kPhStructureSpec), std::string(kPhRole)};
    return known;
}

struct PlaceholderSpan {
    std::size_t pos;
    std::size_t length;  // including braces
    std::string name;
};

std::vector<PlaceholderSpan> find_placeholders(std::string_view body) {
    std::vector<PlaceholderSpan> out;
    for (std::size_t i = 0; i < body.size(); ++i) {
        if (body[i] != '{') continue;
        std::size_t j = i + 1;
        while (j < body.size() && is_placeholder_char(body[j])) ++j;
        if (j > i + 1 && j < body.size() && body[j] == '}' && body[i + 1] >= 'A' && body[i + 1] <= 'Z') {
            out.push_back({i, j + 1 - i, std::string(body.substr(i + 1, j - i - 1))});
            i = j;
        }
    }
    return out;
}

std::string expand(std::string_view body, const std::map<std::string, std::string>& values) {
    std::string out;
    std::size_t last = 0;
    for (const auto& ph : find_placeholders(body)) {
        auto it = values.find(ph.name);
        if (it == values.end()) continue;
        out.append(body.substr(last, ph.pos - last));
        out += it->second;
        last = ph.pos + ph.length;
    }
    out.append(body.substr(last));
    return out;
}

}  // namespace

std::string alert_fingerprint(std::string_view anonymized_message) {
    return fingerprint(anonymized_message);
}

// Templates --------------------------------------------------------------------

PromptTemplate PromptTemplate::parse(std::istream& in) {
    std::string header;
    if (!std::getline(in, header) || header.rfind("# chatids-template", 0) != 0) {
        throw Error("template: first line must be '# chatids-template id=<id> version=<n>'");
    }
    PromptTemplate t;
    std::istringstream hs(header.substr(std::string("# chatids-template").size()));
    std::string tok;
    bool have_version = false;
    while (hs >> tok) {
        auto eq = tok.find('=');
        if (eq == std::string::npos) throw Error("template header: bad token '" + tok + "'");
        auto key = tok.substr(0, eq), value = tok.substr(eq + 1);
        if (key == "id") {
            t.template_id = value;
        } else if (key == "version") {
            try {
                t.version = std::stoi(value);
            } catch (const std::exception&) {
                throw Error("template header: bad version '" + value + "'");
            }
            have_version = true;
        } else if (key == "required") {
            t.required_placeholders.clear();
            for (auto& name : split(value, ',')) {
                if (!name.empty()) t.required_placeholders.insert(name);
            }
        } else {
            throw Error("template header: unknown key '" + key + "'");
        }
    }
    if (!have_version) throw Error("template header: missing version");
    std::ostringstream body;
    body << in.rdbuf();
    t.body = body.str();
    while (!t.body.empty() && (t.body.back() == '\n' || t.body.back() == '\r')) t.body.pop_back();
    return t;
}

PromptTemplate PromptTemplate::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open template '" + path + "'");
    return parse(in);
}

std::vector<TemplateIssue> validate_template(const PromptTemplate& t) {
    std::vector<TemplateIssue> issues;
    std::map<std::string, int> counts;
    for (const auto& ph : find_placeholders(t.body)) ++counts[ph.name];
    for (const auto& name : t.required_placeholders) {
        if (counts[name] == 0) {
            issues.push_back({TemplateIssueKind::MissingPlaceholder, name, "missing placeholder {" + name + "}"});
        }
    }
    for (const auto& [name, n] : counts) {
        if (n == 0) continue;
        if (!known_placeholders().count(name)) {
            issues.push_back({TemplateIssueKind::UnknownPlaceholder, name, "unknown placeholder {" + name + "}"});
        } else if (n > 1) {
            issues.push_back({TemplateIssueKind::DuplicatePlaceholder, name,
                              "duplicate placeholder {" + name + "} (" + std::to_string(n) + " occurrences)"});
        }
    }
    return issues;
}

TemplateInvalid::TemplateInvalid(std::vector<TemplateIssue> issues)
    : Error([&] {
          std::string msg = "template invalid:";
          for (const auto& i : issues) msg += " " + i.message + ";";
          return msg;
      }()),
      issues_(std::move(issues)) {}

// Persona ----------------------------------------------------------------------

std::string PersonaConfig::structure_spec() const {
    return sections[0] + ", " + sections[1] + " and " + sections[2] + ".";
}

std::string PersonaConfig::quoted_forbidden_terms() const {
    std::string out;
    for (std::size_t i = 0; i < forbidden_terms.size(); ++i) {
        if (i) out += ", ";
        out += '"' + forbidden_terms[i] + '"';
    }
    return out;
}

PersonaConfig PersonaConfig::default_persona() {
    PersonaConfig p;
    p.role_line =
        "Act as a security expert who reads the alert and turns it into a short warning message "
        "for a person without any technical background.";
    p.forbidden_terms = {"two-factor-authentication",
                         "Intrusion Detection System",
                         "intrusion",
                         "unassigned message",
                         "malware",
                         "botnet",
                         "DDoS",
                         "Distributed Denial of Service",
                         "firmware",
                         "IP address",
                         "exploit",
                         "payload"};
    p.sections = {"Explain the intrusion",
                  "explain the potential consequences for the user if they won't comply with the "
                  "warning message",
                  "give instructions on how to stop the intrusion in an itemized list"};
    p.version = 1;
    return p;
}

PersonaConfig PersonaConfig::parse(std::istream& in) {
    PersonaConfig p;
    p.version = 0;
    std::vector<std::string> sections;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        auto eq = t.find('=');
        if (eq == std::string_view::npos) {
            throw Error("persona line " + std::to_string(lineno) + ": expected 'key = value'");
        }
        std::string key(trim(t.substr(0, eq)));
        std::string value(trim(t.substr(eq + 1)));
        if (key == "version") {
            try {
                p.version = std::stoi(value);
            } catch (const std::exception&) {
                throw Error("persona line " + std::to_string(lineno) + ": bad version");
            }
        } else if (key == "role") {
            p.role_line = value;
        } else if (key == "forbidden") {
            p.forbidden_terms.push_back(value);
        } else if (key == "section") {
            sections.push_back(value);
        } else {
            throw Error("persona line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        }
    }
    if (p.version < 1) throw Error("persona: missing or invalid version");
    if (p.role_line.empty()) throw Error("persona: missing role");
    if (sections.size() != 3) {
        throw Error("persona: structure must name exactly 3 sections, got " + std::to_string(sections.size()));
    }
    std::copy(sections.begin(), sections.end(), p.sections.begin());
    return p;
}

PersonaConfig PersonaConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open persona '" + path + "'");
    return parse(in);
}

// Rendering --------------------------------------------------------------------

PromptEnvelope render_prompt(const AnonymizedAlert& alert, const PersonaConfig& persona,
                             const PromptTemplate& t) {
    if (auto issues = validate_template(t); !issues.empty()) throw TemplateInvalid(std::move(issues));

    std::map<std::string, std::string> values{
        {std::string(kPhAlertMsg), alert.inner.message},
        {std::string(kPhUser), std::string(kPseudonym)},
        {std::string(kPhDevice), alert.device_class},
        {std::string(kPhForbiddenTerms), persona.quoted_forbidden_terms()},
        {std::string(kPhStructureSpec), persona.structure_spec()},
        {std::string(kPhRole), persona.role_line},
    };

    PromptEnvelope env;
    env.prompt_text = expand(t.body, values);
    env.template_version = t.version;
    env.persona_version = persona.version;
    env.alert_fingerprint = alert_fingerprint(alert.inner.message);
    env.is_decoy = alert.is_decoy;
    env.created_at = now();

    for (const auto& entry : alert.redaction.entries()) {
        if (entry.kind == RedactionKind::Port) continue;  // bare numbers occur in ordinary text
        if (env.prompt_text.find(entry.original) != std::string::npos) {
            throw PromptLeak("rendered prompt contains a redacted " + std::string(to_string(entry.kind)));
        }
    }
    return env;
}

std::string_view to_string(TurnRole role) {
    switch (role) {
        case TurnRole::System: return "System";
        case TurnRole::Assistant: return "Assistant";
        case TurnRole::User: return "User";
    }
    return "System";
}

std::optional<TurnRole> parse_turn_role(std::string_view text) {
    if (text == "System") return TurnRole::System;
    if (text == "Assistant") return TurnRole::Assistant;
    if (text == "User") return TurnRole::User;
    return std::nullopt;
}

std::vector<ConversationTurn> history_window(std::span<const ConversationTurn> history,
                                             std::size_t window_limit) {
    std::vector<ConversationTurn> out;
    if (history.empty()) return out;
    out.push_back(history.front());
    std::size_t rest = history.size() - 1;
    std::size_t keep = std::min(rest, window_limit);
    for (std::size_t i = history.size() - keep; i < history.size(); ++i) out.push_back(history[i]);
    return out;
}

PromptEnvelope render_followup(std::span<const ConversationTurn> history, std::string_view question,
                               const PersonaConfig& persona, std::size_t window_limit,
                               std::string_view fingerprint_value) {
    if (trim(question).empty()) throw EmptyQuestion();
    std::string text = persona.role_line;
    text += "\nDon't use technical terms like " + persona.quoted_forbidden_terms() +
            ", use simple non-technical terms instead.";
    auto window = history_window(history, window_limit);
    if (!window.empty()) {
        text += "\nThis is the conversation with the user so far:\n";
        for (const auto& turn : window) {
            text += "\n";
            text += to_string(turn.role);
            text += ": ";
            text += turn.text;
            text += "\n";
        }
    }
    text += "\nThe user now asks: ";
    text += trim(question);
    text += "\nAnswer the question for the user with clear, easy and non-technical words.";

    PromptEnvelope env;
    env.kind = PromptKind::FollowUp;
    env.prompt_text = std::move(text);
    env.template_version = 0;
    env.persona_version = persona.version;
    env.alert_fingerprint = std::string(fingerprint_value);
    env.is_decoy = false;
    env.created_at = now();
    return env;
}

PromptEnvelope render_jargon_retry(const PromptEnvelope& original,
                                   std::span<const std::string> used_terms) {
    PromptEnvelope env = original;
    env.prompt_text += "\nYour previous answer used technical terms (";
    for (std::size_t i = 0; i < used_terms.size(); ++i) {
        if (i) env.prompt_text += ", ";
        env.prompt_text += '"' + used_terms[i] + '"';
    }
    env.prompt_text += "). Write the answer again without any of them.";
    env.created_at = now();
    return env;
}

}  // namespace chatids
