#pragma once

// Follow-up conversations about an explained alert. Questions are scrubbed
// before they are stored or sent; follow-ups go out without decoys.

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>

#include "chatids/explanation_store.hpp"
#include "chatids/llm_gateway.hpp"

namespace chatids {

class NoExplanationYet : public Error {
public:
    using Error::Error;
};

class SessionClosed : public Error {
public:
    using Error::Error;
};

class SessionNotFound : public Error {
public:
    using Error::Error;
};

struct SessionDeps {
    ExplanationStore* store = nullptr;
    Gateway* gateway = nullptr;
    const PersonaConfig* persona = nullptr;
    const NameCatalog* names = nullptr;
    const DeviceInventory* inventory = nullptr;  // may be null
    const UserProfile* user = nullptr;
    std::size_t window_limit = 10;
    std::chrono::hours expiry{24};
    std::function<Timestamp()> clock;  // defaults to now()
};

class SessionManager {
public:
    explicit SessionManager(SessionDeps deps);

    /// Seeds the session with the alert's displayed explanation as turn 0.
    SessionRecord open_session(const std::string& alert_id, const std::string& user_ref);

    /// Returns the assistant turn. The scrubbed user turn is persisted before
    /// the gateway is called, so it survives a backend failure.
    ConversationTurn ask(const std::string& session_id, std::string_view question);

    SessionRecord resolve(const std::string& session_id, SessionOutcome outcome);

    /// Marks the session Expired first if it has been idle too long.
    SessionRecord get(const std::string& session_id);

    /// Turn text with placeholders, pseudonym and device class restored.
    std::string display_text(const SessionRecord& s, const ConversationTurn& turn) const;

private:
    std::shared_ptr<std::mutex> session_lock(const std::string& session_id);
    SessionRecord load_checked(const std::string& session_id);
    RedactionMap& session_map(const SessionRecord& s);
    const DeviceProfile* device_for(const AlertRecord& a) const;
    Timestamp clock() const { return deps_.clock(); }

    SessionDeps deps_;
    std::mutex locks_mutex_;
    std::map<std::string, std::shared_ptr<std::mutex>> locks_;
    mutable std::mutex maps_mutex_;
    std::map<std::string, RedactionMap> maps_;  // memory only
};

}  // namespace chatids
