#pragma once

// Episode runner and threshold sweeps.
//
// Each step: the method decides whether to query; a query is answered by the
// simulated expert and folded into the posterior before the agent acts, so the
// answer informs the same step's action. A query does not consume an
// environment step.
//
// Every random draw comes from streams derived from the episode seed: the true
// task, the expert's answers and the method's own randomness each get their own
// stream. Sweeps give episode i the seed `seed_base + i` for every method and
// parameter, so all points share goals and expert noise.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "evoi/baselines.hpp"
#include "evoi/belief.hpp"
#include "evoi/errors.hpp"
#include "evoi/evoi.hpp"
#include "evoi/expert.hpp"
#include "evoi/gridworld.hpp"
#include "evoi/maps.hpp"
#include "evoi/pointgoal.hpp"
#include "evoi/qtable_io.hpp"
#include "evoi/random.hpp"

namespace evoi {

enum class Method { Evoi, Random, Uncertainty };

inline const char* to_string(Method m) {
    switch (m) {
        case Method::Evoi: return "evoi";
        case Method::Random: return "random";
        case Method::Uncertainty: return "uncertainty";
    }
    return "?";
}

inline Method parse_method(std::string_view s) {
    if (s == "evoi") return Method::Evoi;
    if (s == "random") return Method::Random;
    if (s == "uncertainty") return Method::Uncertainty;
    throw ConfigError("unknown method '" + std::string(s) + "' (expected evoi, random or uncertainty)");
}

/// A querying method together with its tuning parameter: the EVOI threshold c,
/// the per-step query probability, or the variance threshold.
struct MethodSpec {
    Method kind = Method::Evoi;
    double param = 1e-3;
    std::size_t n_samples = 16;

    void validate() const {
        if (!std::isfinite(param)) throw ConfigError("method parameter must be finite");
        if (kind == Method::Random && !(param >= 0.0 && param <= 1.0))
            throw ConfigError("random querying probability must lie in [0, 1]");
        if (kind != Method::Random && !(param >= 0.0)) throw ConfigError("query threshold must be >= 0");
        if (n_samples < 1) throw ConfigError("n_samples must be >= 1");
    }
};

template <QSource Q>
QueryDecision<ActionOf<Q>> decide(const MethodSpec& m, const TaskBelief& belief, const StateOf<Q>& s, const Q& q,
                                  const ResponseModel& model, Rng& rng) {
    switch (m.kind) {
        case Method::Evoi: {
            const QuerierConfig cfg{m.param, m.n_samples};
            if constexpr (DiscreteQSource<Q>)
                return select_query_discrete(belief, s, q, model, cfg);
            else
                return select_query_continuous(belief, s, q, model, cfg, rng);
        }
        case Method::Random:
            return random_decide(belief, s, q, RandomQuerierConfig{m.param}, rng);
        case Method::Uncertainty:
            return uncertainty_decide(belief, s, q, model, UncertaintyQuerierConfig{m.param, m.n_samples}, rng);
    }
    throw ConfigError("unknown method");
}

struct EpisodeConfig {
    std::string env = "empty";  // shipped map name, map file path, or "pointgoal"
    MethodSpec method{};
    double beta = 10.0;
    ExpertMode expert = ExpertMode::Stochastic;
    std::uint64_t seed = 0;
    std::optional<std::size_t> task;          // true task; drawn from the prior when absent
    std::optional<std::vector<double>> prior; // task weights; uniform when absent
    grid::SolverParams solver{};
    pg::Params pg{};
    std::size_t pg_tasks = 4;
    bool record_beliefs = false;  // store the posterior weights on every trace event
};

/// One trace line. Queries and actions are separate events; `entropy` is the
/// posterior entropy after the event.
struct TraceEvent {
    int step = 0;
    std::string state;
    std::string kind;  // "query" or "act"
    std::string action;
    std::string option1;
    std::string option2;
    int response = -1;  // 0 first, 1 second
    double entropy = 0.0;
    std::vector<double> belief;  // only with EpisodeConfig::record_beliefs

    friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

struct EpisodeResult {
    double score = 0.0;
    std::size_t n_queries = 0;
    std::size_t n_repetitive = 0;
    int steps = 0;
    std::size_t true_task = 0;
    bool success = false;
    std::vector<TraceEvent> trace;

    friend bool operator==(const EpisodeResult&, const EpisodeResult&) = default;
};

namespace detail {

inline std::string label(grid::Action a) { return grid::to_string(a); }
inline std::string label(const grid::State& s) { return grid::to_string(s); }
inline std::string label(const pg::Vec2& v) { return pg::to_string(v); }

inline TaskId draw_task(const TaskBelief& prior, Rng& rng) {
    double u = uniform01(rng);
    for (std::size_t i = 0; i < prior.size(); ++i) {
        u -= prior.weight(i);
        if (u < 0.0) return prior.task(i);
    }
    return prior.task(prior.size() - 1);
}

inline TaskBelief episode_prior(const EpisodeConfig& cfg, std::size_t n) {
    if (!cfg.prior) return TaskBelief::uniform(n);
    if (cfg.prior->size() != n)
        throw ConfigError("prior has " + std::to_string(cfg.prior->size()) + " weights but the environment has " +
                          std::to_string(n) + " tasks");
    try {
        return TaskBelief::from_weights(*cfg.prior);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("invalid prior: ") + e.what());
    }
}

/// The configured true task, or a draw from the prior on the task stream.
inline TaskId episode_truth(const EpisodeConfig& cfg, const TaskBelief& prior) {
    if (cfg.task) {
        if (*cfg.task >= prior.size()) throw ConfigError("true task index out of range");
        return TaskId{*cfg.task};
    }
    Rng task_rng = make_stream(cfg.seed, 0);
    return draw_task(prior, task_rng);
}

/// Simulated expert answering from the true task.
template <QSource Q>
struct SimulatedResponder {
    ExpertConfig expert;
    Rng rng;

    Choice operator()(const ActionPair<ActionOf<Q>>& pair, const StateOf<Q>& s, TaskId truth, const Q& q) {
        return respond(pair, s, truth, q, expert, rng);
    }
};

/// Shared step loop. `Env` supplies start(), step(state, action) returning
/// {next, reward, done, success}, horizon() and score(rewards, success, steps).
/// `answer(pair, state, truth, q)` supplies the expert's choice.
template <QSource Q, class Env, class Responder>
EpisodeResult run_loop(const Q& q, const Env& env, const TaskBelief& prior, TaskId truth, const EpisodeConfig& cfg,
                       Responder&& answer) {
    const ResponseModel model{cfg.beta};
    Rng method_rng = make_stream(cfg.seed, 2);

    EpisodeResult out;
    out.true_task = truth.index;
    TaskBelief belief = prior;
    StateOf<Q> s = env.start();
    std::optional<ActionPair<ActionOf<Q>>> previous_query;
    std::vector<double> rewards;
    auto record = [&](TraceEvent e) {
        e.entropy = belief.entropy();
        if (cfg.record_beliefs) e.belief = belief.weights();
        out.trace.push_back(std::move(e));
    };

    for (int t = 0; t < env.horizon(); ++t) {
        const auto decision = decide(cfg.method, belief, s, q, model, method_rng);
        if (decision.pair) {
            const auto& pair = *decision.pair;
            ++out.n_queries;
            if (previous_query && previous_query->same_question(pair)) ++out.n_repetitive;
            const Choice choice = answer(pair, s, truth, q);
            try {
                belief = belief.updated(QueryRecord<StateOf<Q>, ActionOf<Q>>{s, pair, choice}, q, model);
            } catch (const DegenerateBelief&) {
                std::clog << "warning: posterior collapsed at step " << t << ", resetting to the prior\n";
                belief = prior;
            }
            TraceEvent e;
            e.step = t;
            e.state = label(s);
            e.kind = "query";
            e.option1 = label(pair.first);
            e.option2 = label(pair.second);
            e.response = choice == Choice::First ? 0 : 1;
            record(std::move(e));
        }
        previous_query = decision.pair;

        const ActionOf<Q> a = act(belief, s, q);
        const auto r = env.step(s, a, truth);
        TraceEvent e;
        e.step = t;
        e.state = label(s);
        e.kind = "act";
        e.action = label(a);
        record(std::move(e));
        rewards.push_back(r.reward);
        s = r.next;
        out.steps = t + 1;
        if (r.success) out.success = true;
        if (r.done) break;
    }
    out.score = env.score(rewards, out.success, out.steps);
    return out;
}

/// Replays recorded answers in order. Running out of answers is an error.
class ScriptedResponder {
public:
    explicit ScriptedResponder(std::vector<Choice> choices) : choices_(std::move(choices)) {}

    template <class Pair, class State, class Q>
    Choice operator()(const Pair&, const State&, TaskId, const Q&) {
        if (next_ >= choices_.size()) throw ConfigError("transcript has fewer responses than the replay asks for");
        return choices_[next_++];
    }

    std::size_t used() const { return next_; }

private:
    std::vector<Choice> choices_;
    std::size_t next_ = 0;
};

}  // namespace detail

/// A GridWorld with its solved table. Address-stable: the QSource points into it.
struct GridEnvironment {
    grid::Map map;
    grid::QTable table;
    grid::QSource source;

    GridEnvironment(grid::Map m, grid::QTable t) : map(std::move(m)), table(std::move(t)), source(map, table) {}
    GridEnvironment(const GridEnvironment&) = delete;
    GridEnvironment& operator=(const GridEnvironment&) = delete;

    grid::State start() const { return map.start_state(); }
    int horizon() const { return table.params().horizon; }

    struct Step {
        grid::State next;
        double reward;
        bool done;
        bool success;
    };
    Step step(const grid::State& s, grid::Action a, TaskId truth) const {
        const auto r = grid::step(map, s, a, table.goals()[truth.index], horizon());
        return {r.next, r.reward, r.done, r.reached_goal};
    }

    /// gamma^(steps-1) on reaching the goal, else 0.
    double score(const std::vector<double>&, bool success, int steps) const {
        return success ? std::pow(table.params().gamma, steps - 1) : 0.0;
    }
};

struct PointGoalEnvironment {
    pg::QSource source;

    pg::State start() const { return source.params().arena.center(); }
    int horizon() const { return source.params().horizon; }

    struct Step {
        pg::State next;
        double reward;
        bool done;
        bool success;
    };
    Step step(const pg::State& s, const pg::Action& a, TaskId truth) const {
        const auto r = pg::step(s, a, source.tasks()[truth.index], source.params());
        return {r.next, r.reward, r.done, r.done};
    }

    /// Discounted return.
    double score(const std::vector<double>& rewards, bool, int) const {
        double g = 0.0;
        double discount = 1.0;
        for (double r : rewards) {
            g += discount * r;
            discount *= source.params().gamma;
        }
        return g;
    }
};

inline grid::Map load_map(const std::string& env) {
    try {
        if (auto text = grid::shipped_map(env)) return grid::parse_map(*text);
        if (!std::filesystem::is_regular_file(env))
            throw ConfigError("unknown environment '" + env + "' (not a shipped map, 'pointgoal', or a map file)");
        std::ifstream f(env, std::ios::binary);
        if (!f) throw IoError("cannot read map file " + env);
        std::stringstream ss;
        ss << f.rdbuf();
        return grid::parse_map(ss.str());
    } catch (const grid::MalformedMap& e) {
        throw ConfigError("malformed map '" + env + "': " + e.what());
    }
}

/// Owns solved environments and runs episodes against them. Environments are
/// built on first use and read-only afterwards.
class Lab {
public:
    explicit Lab(std::optional<std::filesystem::path> cache_dir = std::nullopt) : cache_dir_(std::move(cache_dir)) {}

    /// Cache directory from EVOI_CACHE_DIR, when set.
    static Lab from_environment() {
        if (const char* dir = std::getenv("EVOI_CACHE_DIR"); dir && *dir) return Lab(std::filesystem::path(dir));
        return Lab();
    }

    const GridEnvironment& grid_env(const std::string& env, const grid::SolverParams& params) {
        params.validate();
        const auto key = std::make_tuple(env, params.gamma, params.horizon);
        if (auto it = grids_.find(key); it != grids_.end()) return *it->second;
        grid::Map m = load_map(env);
        grid::QTable t = cache_dir_ ? grid::solve_cached(m, params, *cache_dir_) : grid::value_iteration(m, params);
        auto [it, _] = grids_.emplace(key, std::make_unique<GridEnvironment>(std::move(m), std::move(t)));
        return *it->second;
    }

    EpisodeResult run(const EpisodeConfig& cfg) { return run_impl(cfg, nullptr); }

    /// Re-runs an episode with the expert's answers taken from `choices`
    /// instead of the simulated expert.
    EpisodeResult replay(const EpisodeConfig& cfg, std::vector<Choice> choices) {
        detail::ScriptedResponder script(std::move(choices));
        return run_impl(cfg, &script);
    }

private:
    EpisodeResult run_impl(const EpisodeConfig& cfg, detail::ScriptedResponder* script) {
        cfg.method.validate();
        if (!(cfg.beta >= 0.0) || !std::isfinite(cfg.beta)) throw ConfigError("beta must be finite and >= 0");
        if (cfg.env == "pointgoal") {
            PointGoalEnvironment env{pg::QSource(cfg.pg, pg::grid_tasks(cfg.pg_tasks, cfg.pg.arena))};
            return run_with(env.source, env, cfg, script);
        }
        const GridEnvironment& env = grid_env(cfg.env, cfg.solver);
        return run_with(env.source, env, cfg, script);
    }

    template <QSource Q, class Env>
    static EpisodeResult run_with(const Q& q, const Env& env, const EpisodeConfig& cfg,
                                  detail::ScriptedResponder* script) {
        const TaskBelief prior = detail::episode_prior(cfg, q.num_tasks());
        const TaskId truth = detail::episode_truth(cfg, prior);
        if (script) return detail::run_loop(q, env, prior, truth, cfg, *script);
        return detail::run_loop(q, env, prior, truth, cfg,
                                detail::SimulatedResponder<Q>{{cfg.beta, cfg.expert}, make_stream(cfg.seed, 1)});
    }

    std::optional<std::filesystem::path> cache_dir_;
    std::map<std::tuple<std::string, double, int>, std::unique_ptr<GridEnvironment>> grids_;
};

// ---------------------------------------------------------------------------
// Sweeps

/// start * exp(k * step_log) for k = 0, 1, ... up to `stop` (inclusive, with a
/// relative slack of 1e-9 for the last point).
inline std::vector<double> log_grid(double start, double stop, double step_log) {
    if (!(start > 0.0) || !(stop >= start) || !(step_log > 0.0))
        throw ConfigError("log grid needs 0 < start <= stop and a positive step");
    std::vector<double> out;
    for (std::size_t k = 0;; ++k) {
        const double v = start * std::exp(static_cast<double>(k) * step_log);
        if (v > stop * (1.0 + 1e-9)) break;
        out.push_back(v);
    }
    return out;
}

/// `points` values evenly spaced in log space from start to stop inclusive.
inline std::vector<double> log_grid_points(double start, double stop, std::size_t points) {
    if (points == 1) return {start};
    return log_grid(start, stop, std::log(stop / start) / static_cast<double>(points - 1));
}

struct SweepConfig {
    std::vector<double> grid;
    std::size_t episodes = 200;
    std::uint64_t seed_base = 0;
};

struct EpisodeRow {
    Method method = Method::Evoi;
    double param = 0.0;
    std::uint64_t seed = 0;
    double score = 0.0;
    std::size_t n_queries = 0;
    std::size_t n_repetitive = 0;
    int steps = 0;
};

struct SweepRow {
    Method method = Method::Evoi;
    double param = 0.0;
    std::size_t episodes = 0;
    double mean_score = 0.0;
    double se_score = 0.0;
    double mean_queries = 0.0;
    double se_queries = 0.0;
    double mean_repetitive = 0.0;
};

struct SweepTable {
    std::vector<SweepRow> rows;
    std::vector<EpisodeRow> episodes;
};

namespace detail {

inline std::pair<double, double> mean_se(const std::vector<double>& xs) {
    const double n = static_cast<double>(xs.size());
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= n;
    if (xs.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

}  // namespace detail

inline SweepRow aggregate(Method m, double param, const std::vector<EpisodeRow>& eps) {
    std::vector<double> score, queries, rep;
    for (const auto& e : eps) {
        score.push_back(e.score);
        queries.push_back(static_cast<double>(e.n_queries));
        rep.push_back(static_cast<double>(e.n_repetitive));
    }
    SweepRow row{m, param, eps.size()};
    std::tie(row.mean_score, row.se_score) = detail::mean_se(score);
    std::tie(row.mean_queries, row.se_queries) = detail::mean_se(queries);
    row.mean_repetitive = detail::mean_se(rep).first;
    return row;
}

/// Runs `sweep.episodes` episodes at every grid value with goals drawn from
/// the uniform prior. Rows come back ordered by parameter.
inline SweepTable sweep_pareto(Lab& lab, const EpisodeConfig& base, const SweepConfig& sweep) {
    if (sweep.grid.empty()) throw ConfigError("sweep grid is empty");
    if (sweep.episodes == 0) throw ConfigError("sweep needs at least one episode per point");
    std::vector<double> grid = sweep.grid;
    std::sort(grid.begin(), grid.end());

    SweepTable out;
    for (double param : grid) {
        std::vector<EpisodeRow> eps;
        for (std::size_t i = 0; i < sweep.episodes; ++i) {
            EpisodeConfig cfg = base;
            cfg.method.param = param;
            cfg.seed = sweep.seed_base + i;
            cfg.task.reset();
            const EpisodeResult r = lab.run(cfg);
            eps.push_back({cfg.method.kind, param, cfg.seed, r.score, r.n_queries, r.n_repetitive, r.steps});
        }
        out.rows.push_back(aggregate(base.method.kind, param, eps));
        out.episodes.insert(out.episodes.end(), eps.begin(), eps.end());
    }
    return out;
}

}  // namespace evoi
