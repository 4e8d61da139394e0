#include "chatids/session.hpp"

#include <algorithm>
#include <atomic>
#include <random>

#include <spdlog/spdlog.h>

namespace chatids {

namespace {

std::string new_session_id(const std::string& alert_id, Timestamp at) {
    static std::atomic<std::uint64_t> counter{0};
    return "se-" + fingerprint(alert_id + "\n" + format_iso8601(at) + "\n" + std::to_string(counter++) +
                               "\n" + std::to_string(std::random_device{}()));
}

}  // namespace

SessionManager::SessionManager(SessionDeps deps) : deps_(std::move(deps)) {
    if (!deps_.store || !deps_.gateway || !deps_.persona || !deps_.names || !deps_.user) {
        throw Error("session dependencies incomplete");
    }
    if (!deps_.clock) deps_.clock = [] { return now(); };
}

std::shared_ptr<std::mutex> SessionManager::session_lock(const std::string& session_id) {
    std::lock_guard lock(locks_mutex_);
    auto& m = locks_[session_id];
    if (!m) m = std::make_shared<std::mutex>();
    return m;
}

const DeviceProfile* SessionManager::device_for(const AlertRecord& a) const {
    if (!deps_.inventory || !a.device_ref) return nullptr;
    return deps_.inventory->find(*a.device_ref);
}

RedactionMap& SessionManager::session_map(const SessionRecord& s) {
    std::lock_guard lock(maps_mutex_);
    auto it = maps_.find(s.session_id);
    if (it != maps_.end()) return it->second;
    RedactionMap base;
    if (auto alert = deps_.store->find_alert(s.alert_id)) base = alert->alert.redaction;
    return maps_.emplace(s.session_id, std::move(base)).first->second;
}

SessionRecord SessionManager::open_session(const std::string& alert_id, const std::string& user_ref) {
    auto alert = deps_.store->find_alert(alert_id);
    if (!alert || alert->status != AlertStatus::Explained || !alert->cache_key) {
        throw NoExplanationYet("alert " + alert_id + " has no explanation yet");
    }
    auto explanation = deps_.store->get(*alert->cache_key);
    if (!explanation || explanation->is_decoy) {
        throw NoExplanationYet("alert " + alert_id + " has no explanation yet");
    }
    SessionRecord s;
    s.alert_id = alert_id;
    s.user_ref = user_ref;
    s.window_limit = deps_.window_limit;
    s.last_activity = clock();
    s.session_id = new_session_id(alert_id, s.last_activity);
    s.turns.push_back({TurnRole::Assistant, explanation->text, s.last_activity});
    deps_.store->put_session(s);
    return s;
}

SessionRecord SessionManager::load_checked(const std::string& session_id) {
    auto s = deps_.store->find_session(session_id);
    if (!s) throw SessionNotFound("unknown session " + session_id);
    if (s->state == SessionState::Open && clock() - s->last_activity > deps_.expiry) {
        s->state = SessionState::Expired;
        deps_.store->put_session(*s);
    }
    return *s;
}

SessionRecord SessionManager::get(const std::string& session_id) {
    auto lock = session_lock(session_id);
    std::lock_guard guard(*lock);
    return load_checked(session_id);
}

ConversationTurn SessionManager::ask(const std::string& session_id, std::string_view question) {
    auto lock = session_lock(session_id);
    std::lock_guard guard(*lock);
    SessionRecord s = load_checked(session_id);
    if (s.state != SessionState::Open) {
        throw SessionClosed("session " + session_id + " is " + std::string(to_string(s.state)));
    }
    if (trim(question).empty()) throw EmptyQuestion();

    auto alert = deps_.store->find_alert(s.alert_id);
    const DeviceProfile* device = alert ? device_for(*alert) : nullptr;
    std::vector<KnownName> extra;
    const auto& user = *deps_.user;
    if (!user.display_name.empty()) extra.push_back({user.display_name, RedactionKind::UserName});
    if (device && device->generalization_level != GeneralizationLevel::Model) {
        extra.push_back({device->display_name, RedactionKind::DeviceName});
    }

    std::string scrubbed;
    {
        RedactionMap& map = session_map(s);
        std::lock_guard maps_lock(maps_mutex_);
        scrubbed = scrub_into(trim(question), *deps_.names, map, extra);
    }

    std::vector<ConversationTurn> history = s.turns;
    Timestamp at = std::max(clock(), s.turns.back().at);
    s.turns.push_back({TurnRole::User, scrubbed, at});
    s.last_activity = at;
    deps_.store->put_session(s);

    std::string fp = alert ? alert_fingerprint(alert->alert.inner.message) : std::string{};
    auto env = render_followup(history, scrubbed, *deps_.persona, s.window_limit, fp);
    auto response = deps_.gateway->complete(env);

    auto hits = forbidden_term_hits(response.text, deps_.persona->forbidden_terms);
    if (!hits.empty()) {
        std::vector<std::string> used;
        for (const auto& h : hits) {
            if (std::find(used.begin(), used.end(), h.term) == used.end()) used.push_back(h.term);
        }
        try {
            response = deps_.gateway->complete(render_jargon_retry(env, used));
        } catch (const GatewayError& e) {
            spdlog::warn("session: retry without technical terms failed: {}", e.what());
        }
    }

    at = std::max(clock(), at);
    ConversationTurn turn{TurnRole::Assistant, response.text, at};
    s.turns.push_back(turn);
    s.last_activity = at;
    deps_.store->put_session(s);
    return turn;
}

SessionRecord SessionManager::resolve(const std::string& session_id, SessionOutcome outcome) {
    auto lock = session_lock(session_id);
    std::lock_guard guard(*lock);
    SessionRecord s = load_checked(session_id);
    if (s.state != SessionState::Open) {
        throw SessionClosed("session " + session_id + " is " + std::string(to_string(s.state)));
    }
    s.state = SessionState::Resolved;
    s.outcome = outcome;
    s.last_activity = std::max(clock(), s.last_activity);
    deps_.store->put_session(s);
    deps_.store->append_audit({"session_resolved", session_id,
                               std::string(to_string(outcome)) + " alert=" + s.alert_id, s.last_activity});
    return s;
}

std::string SessionManager::display_text(const SessionRecord& s, const ConversationTurn& turn) const {
    RedactionMap map;
    {
        std::lock_guard lock(maps_mutex_);
        if (auto it = maps_.find(s.session_id); it != maps_.end()) map = it->second;
    }
    const DeviceProfile* device = nullptr;
    if (auto alert = deps_.store->find_alert(s.alert_id)) {
        if (map.empty()) map = alert->alert.redaction;
        device = device_for(*alert);
    }
    RehydrateOptions opts;
    opts.keep_unknown = true;
    return rehydrate(turn.text, map, device, deps_.user, opts);
}

}  // namespace chatids
