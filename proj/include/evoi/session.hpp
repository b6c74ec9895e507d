#pragma once

// Live GridWorld episodes driven by a human expert.
//
// A session runs the same decide/answer/act loop as the offline harness, but
// stops whenever a query is posed and waits for submit_response(). While a
// query is pending the environment does not move. After an answer the step's
// action is taken on the next advance(), without a second querying decision,
// so a transcript replays offline through Lab::replay to the same beliefs and
// actions.

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "evoi/errors.hpp"
#include "evoi/harness.hpp"

namespace evoi::session {

inline constexpr int kProtocolVersion = 1;

/// Raised by the state machine; `code()` is the wire error code.
class ProtocolError : public std::logic_error {
public:
    ProtocolError(std::string code, const std::string& what) : std::logic_error(what), code_(std::move(code)) {}
    const std::string& code() const { return code_; }

private:
    std::string code_;
};

struct PendingQuery : ProtocolError {
    PendingQuery() : ProtocolError("PendingQuery", "a query is awaiting a response") {}
};
struct NoPendingQuery : ProtocolError {
    NoPendingQuery() : ProtocolError("NoPendingQuery", "no query is pending") {}
};
struct InvalidChoice : ProtocolError {
    explicit InvalidChoice(const std::string& got)
        : ProtocolError("InvalidChoice", "choice must be \"first\" or \"second\", got \"" + got + "\"") {}
};
struct EpisodeOver : ProtocolError {
    EpisodeOver() : ProtocolError("EpisodeOver", "the episode has ended") {}
};
struct UnknownSession : ProtocolError {
    explicit UnknownSession(const std::string& id) : ProtocolError("UnknownSession", "no session '" + id + "'") {}
};

inline Choice parse_choice(const std::string& s) {
    if (s == "first") return Choice::First;
    if (s == "second") return Choice::Second;
    throw InvalidChoice(s);
}

inline const char* to_string(Choice c) { return c == Choice::First ? "first" : "second"; }

/// Session settings. Only GridWorld environments are served.
struct SessionConfig {
    std::string env = "empty";
    MethodSpec method{};
    double beta = 10.0;
    std::uint64_t seed = 0;
    std::optional<std::size_t> task;
    std::optional<std::vector<double>> prior;
    grid::SolverParams solver{};

    EpisodeConfig episode() const {
        EpisodeConfig c;
        c.env = env;
        c.method = method;
        c.beta = beta;
        c.seed = seed;
        c.task = task;
        c.prior = prior;
        c.solver = solver;
        return c;
    }
};

/// Reads a config object; fields missing from `j` keep their values from `defaults`.
inline SessionConfig config_from_json(const nlohmann::json& j, SessionConfig defaults = {}) {
    if (!j.is_object()) throw ConfigError("session config must be an object");
    SessionConfig c = std::move(defaults);
    try {
        c.env = j.value("env", c.env);
        if (j.contains("method")) c.method.kind = parse_method(j.at("method").get<std::string>());
        c.method.param = j.value("param", c.method.param);
        c.method.n_samples = j.value("n_samples", c.method.n_samples);
        c.beta = j.value("beta", c.beta);
        c.seed = j.value("seed", c.seed);
        if (j.contains("task") && !j.at("task").is_null()) c.task = j.at("task").get<std::size_t>();
        if (j.contains("prior") && !j.at("prior").is_null()) c.prior = j.at("prior").get<std::vector<double>>();
        c.solver.gamma = j.value("gamma", c.solver.gamma);
        c.solver.horizon = j.value("horizon", c.solver.horizon);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad session config: ") + e.what());
    }
    if (c.env == "pointgoal") throw ConfigError("sessions serve GridWorld maps only");
    return c;
}

struct Hypothesis {
    grid::Pos goal;
    double weight = 0.0;
};

/// One answered or pending query as kept in the transcript.
struct TranscriptQuery {
    int step = 0;
    ActionPair<grid::Action> pair;
    std::optional<Choice> response;
};

class Session {
public:
    Session(std::string id, SessionConfig cfg, const GridEnvironment& env)
        : id_(std::move(id)), cfg_(std::move(cfg)), env_(&env),
          prior_(detail::episode_prior(cfg_.episode(), env.source.num_tasks())),
          belief_(prior_), truth_(detail::episode_truth(cfg_.episode(), prior_)), model_(cfg_.beta),
          method_rng_(make_stream(cfg_.seed, 2)), state_(env.start()) {
        cfg_.method.validate();
    }

    const std::string& id() const { return id_; }

    /// The opening StateUpdate.
    std::vector<nlohmann::json> start() {
        std::lock_guard lock(mu_);
        return {state_update(std::nullopt)};
    }

    std::vector<nlohmann::json> advance() {
        std::lock_guard lock(mu_);
        if (done_) throw EpisodeOver{};
        if (pending_) throw PendingQuery{};
        if (!decided_) {
            decided_ = true;
            const auto d = decide(cfg_.method, belief_, state_, env_->source, model_, method_rng_);
            if (d.pair) {
                ++n_queries_;
                if (previous_query_ && previous_query_->same_question(*d.pair)) ++n_repetitive_;
                previous_query_ = d.pair;
                pending_ = d.pair;
                queries_.push_back({t_, *d.pair, std::nullopt});
                return {query_posed(*d.pair, d.score)};
            }
            previous_query_.reset();
        }
        return take_action();
    }

    std::vector<nlohmann::json> submit_response(Choice choice) {
        std::lock_guard lock(mu_);
        if (!pending_) throw NoPendingQuery{};
        try {
            belief_ = belief_.updated(QueryRecord<grid::State, grid::Action>{state_, *pending_, choice}, env_->source,
                                      model_);
        } catch (const DegenerateBelief&) {
            belief_ = prior_;
        }
        queries_.back().response = choice;
        pending_.reset();
        belief_log_.push_back(belief_.weights());
        return {state_update(std::nullopt)};
    }

    std::vector<nlohmann::json> submit_response(const std::string& choice) { return submit_response(parse_choice(choice)); }

    // Inspection; each takes the session lock.
    TaskBelief belief() const { std::lock_guard lock(mu_); return belief_; }
    grid::State state() const { std::lock_guard lock(mu_); return state_; }
    bool done() const { std::lock_guard lock(mu_); return done_; }
    bool has_pending() const { std::lock_guard lock(mu_); return pending_.has_value(); }
    std::size_t n_queries() const { std::lock_guard lock(mu_); return n_queries_; }
    std::size_t true_task() const { return truth_.index; }
    const SessionConfig& config() const { return cfg_; }
    std::vector<TranscriptQuery> queries() const { std::lock_guard lock(mu_); return queries_; }
    std::vector<grid::Action> actions() const { std::lock_guard lock(mu_); return actions_; }
    /// Posterior weights after each answer and each action, in event order.
    std::vector<std::vector<double>> belief_log() const { std::lock_guard lock(mu_); return belief_log_; }

    /// The answers given so far, for offline replay.
    std::vector<Choice> responses() const {
        std::lock_guard lock(mu_);
        std::vector<Choice> out;
        for (const auto& q : queries_)
            if (q.response) out.push_back(*q.response);
        return out;
    }

    /// Top hypotheses by weight, ties by task index.
    std::vector<Hypothesis> top_hypotheses(std::size_t k) const {
        std::lock_guard lock(mu_);
        return top_locked(k);
    }

private:
    std::vector<nlohmann::json> take_action() {
        const grid::Action a = act(belief_, state_, env_->source);
        const auto r = env_->step(state_, a, truth_);
        actions_.push_back(a);
        rewards_.push_back(r.reward);
        state_ = r.next;
        ++t_;
        decided_ = false;
        if (r.success) success_ = true;
        belief_log_.push_back(belief_.weights());
        std::vector<nlohmann::json> out{state_update(a)};
        if (r.done || t_ >= env_->horizon()) {
            done_ = true;
            out.push_back(episode_end());
        }
        return out;
    }

    std::vector<Hypothesis> top_locked(std::size_t k) const {
        std::vector<std::size_t> order(belief_.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return belief_.weight(a) > belief_.weight(b); });
        std::vector<Hypothesis> out;
        for (std::size_t i = 0; i < std::min(k, order.size()); ++i)
            out.push_back({env_->table.goals()[belief_.task(order[i]).index].goal, belief_.weight(order[i])});
        return out;
    }

    nlohmann::json header(const char* kind) {
        return {{"v", kProtocolVersion}, {"kind", kind}, {"session", id_}, {"seq", seq_++}, {"step", t_}};
    }

    static nlohmann::json pose_json(const grid::State& s) {
        return {{"row", s.pos.row}, {"col", s.pos.col}, {"dir", grid::to_string(s.dir)}};
    }
    static nlohmann::json pos_json(grid::Pos p) { return {{"row", p.row}, {"col", p.col}}; }

    nlohmann::json state_update(std::optional<grid::Action> last) {
        const grid::Map& m = env_->map;
        nlohmann::json rows = nlohmann::json::array();
        std::istringstream text(grid::serialize_map(m));
        for (std::string line; std::getline(text, line);) rows.push_back(line);

        std::vector<double> heat(m.num_cells(), 0.0);
        for (std::size_t i = 0; i < belief_.size(); ++i)
            heat[m.index(env_->table.goals()[belief_.task(i).index].goal)] += belief_.weight(i);
        nlohmann::json top = nlohmann::json::array();
        for (const auto& h : top_locked(3)) top.push_back({{"goal", pos_json(h.goal)}, {"p", h.weight}});

        nlohmann::json j = header("StateUpdate");
        j["grid"] = {{"width", m.width()}, {"height", m.height()}, {"rows", rows}};
        j["agent"] = pose_json(state_);
        j["goal"] = pos_json(env_->table.goals()[truth_.index].goal);
        j["last_action"] = last ? nlohmann::json(grid::to_string(*last)) : nlohmann::json(nullptr);
        j["belief"] = {{"entropy", belief_.entropy()}, {"top", top}, {"heatmap", heat}};
        j["n_queries"] = n_queries_;
        return j;
    }

    nlohmann::json query_posed(const ActionPair<grid::Action>& pair, double score) {
        nlohmann::json opts = nlohmann::json::array();
        for (const grid::Action a : {pair.first, pair.second}) {
            const grid::State preview = grid::step(env_->map, state_, a, grid::Task{{-1, -1}}, env_->horizon() + 1).next;
            opts.push_back({{"label", grid::to_string(a)}, {"preview", pose_json(preview)}});
        }
        nlohmann::json j = header("QueryPosed");
        j["options"] = opts;
        j["value"] = score;
        return j;
    }

    nlohmann::json episode_end() {
        nlohmann::json j = header("EpisodeEnd");
        j["score"] = env_->score(rewards_, success_, t_);
        j["success"] = success_;
        j["steps"] = t_;
        j["n_queries"] = n_queries_;
        j["n_repetitive"] = n_repetitive_;
        return j;
    }

    mutable std::mutex mu_;
    std::string id_;
    SessionConfig cfg_;
    const GridEnvironment* env_;
    TaskBelief prior_;
    TaskBelief belief_;
    TaskId truth_;
    ResponseModel model_;
    Rng method_rng_;
    grid::State state_;
    int t_ = 0;
    bool decided_ = false;
    bool done_ = false;
    bool success_ = false;
    std::optional<ActionPair<grid::Action>> pending_;
    std::optional<ActionPair<grid::Action>> previous_query_;
    std::size_t n_queries_ = 0;
    std::size_t n_repetitive_ = 0;
    std::uint64_t seq_ = 0;
    std::vector<double> rewards_;
    std::vector<TranscriptQuery> queries_;
    std::vector<grid::Action> actions_;
    std::vector<std::vector<double>> belief_log_;
};

/// Owns sessions and the solved maps they run on. Safe to call from many
/// threads; each session serializes its own operations.
class SessionManager {
public:
    explicit SessionManager(Lab lab = Lab::from_environment(), SessionConfig defaults = {})
        : lab_(std::move(lab)), defaults_(std::move(defaults)) {}

    /// Values used for fields a create request leaves out.
    const SessionConfig& defaults() const { return defaults_; }

    /// Creates a session and returns it with its opening events.
    std::pair<std::shared_ptr<Session>, std::vector<nlohmann::json>> create(const SessionConfig& cfg) {
        cfg.method.validate();
        if (!(cfg.beta >= 0.0) || !std::isfinite(cfg.beta)) throw ConfigError("beta must be finite and >= 0");
        std::shared_ptr<Session> s;
        {
            std::lock_guard lock(mu_);
            const GridEnvironment& env = lab_.grid_env(cfg.env, cfg.solver);
            s = std::make_shared<Session>(next_id(), cfg, env);
            sessions_.emplace(s->id(), s);
        }
        return {s, s->start()};
    }

    std::shared_ptr<Session> get(const std::string& id) const {
        std::lock_guard lock(mu_);
        auto it = sessions_.find(id);
        if (it == sessions_.end()) throw UnknownSession(id);
        return it->second;
    }

    void erase(const std::string& id) {
        std::lock_guard lock(mu_);
        sessions_.erase(id);
    }

    std::size_t size() const {
        std::lock_guard lock(mu_);
        return sessions_.size();
    }

private:
    std::string next_id() {
        std::ostringstream os;
        os << std::hex << id_salt_ << '-' << ++counter_;
        return os.str();
    }

    mutable std::mutex mu_;
    Lab lab_;
    SessionConfig defaults_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::uint64_t id_salt_ = std::random_device{}();
    std::uint64_t counter_ = 0;
};

/// Handles one client message and returns the reply events. Errors come back as
/// a single Error event rather than an exception.
///
/// Requests: {"v":1,"op":"create","config":{...}}, {"v":1,"op":"advance",
/// "session":id}, {"v":1,"op":"respond","session":id,"choice":"first"}.
inline std::vector<nlohmann::json> handle_message(SessionManager& mgr, const std::string& text) {
    auto error = [](const std::string& code, const std::string& msg) {
        return std::vector<nlohmann::json>{{{"v", kProtocolVersion}, {"kind", "Error"}, {"code", code}, {"message", msg}}};
    };
    nlohmann::json req;
    try {
        req = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        return error("BadMessage", e.what());
    }
    if (!req.is_object() || !req.contains("op") || !req.at("op").is_string())
        return error("BadMessage", "message needs a string 'op'");
    if (req.value("v", kProtocolVersion) != kProtocolVersion)
        return error("VersionMismatch", "server speaks protocol version " + std::to_string(kProtocolVersion));
    const std::string op = req.at("op").get<std::string>();
    try {
        if (op == "create") {
            const auto cfg = config_from_json(req.value("config", nlohmann::json::object()), mgr.defaults());
            return mgr.create(cfg).second;
        }
        const std::string id = req.value("session", "");
        if (op == "advance") return mgr.get(id)->advance();
        if (op == "respond") {
            if (!req.contains("choice") || !req.at("choice").is_string()) throw InvalidChoice("");
            return mgr.get(id)->submit_response(req.at("choice").get<std::string>());
        }
        return error("BadMessage", "unknown op '" + op + "'");
    } catch (const ProtocolError& e) {
        return error(e.code(), e.what());
    } catch (const ConfigError& e) {
        return error("ConfigError", e.what());
    } catch (const IoError& e) {
        return error("IoError", e.what());
    }
}

}  // namespace evoi::session
