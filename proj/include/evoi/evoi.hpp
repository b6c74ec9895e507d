#pragma once

// Expected value of information for pairwise action queries, and the
// belief-marginalized acting policy.
//
// The value of a belief at state s is max_a E_w[Q(s,a;w)]: the expected Q of
// the action the agent would actually take. The EVOI of a query (a1, a2) is the
// response-weighted value of the two conditioned beliefs minus the value of the
// current belief:
//
//     EVOI = p1 * max_a E_{w|D1}[Q] + p2 * max_a E_{w|D2}[Q] - max_a E_{w|D}[Q]
//
// with p_r the marginal probability of response r under the current belief.
// The max sits outside the expectation. Putting it inside (expectation of each
// task's own optimum) telescopes to exactly zero by total expectation, so that
// form cannot rank queries.

#include <algorithm>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "evoi/belief.hpp"
#include "evoi/random.hpp"

namespace evoi {

struct QuerierConfig {
    double c = 1e-3;            // query iff best EVOI > c
    std::size_t n_samples = 16; // sampled pairs, continuous action spaces

    void validate() const {
        if (!(c >= 0.0)) throw std::invalid_argument("EVOI threshold must be >= 0");
        if (n_samples < 1) throw std::invalid_argument("n_samples must be >= 1");
    }
};

/// Outcome of one querying decision. `score` is the statistic the method
/// thresholds on (EVOI, variance, or the uniform draw for random querying).
template <class Action>
struct QueryDecision {
    std::optional<ActionPair<Action>> pair;
    double score = 0.0;
    std::size_t considered = 0;

    bool asks() const { return pair.has_value(); }
};

struct ResponseMarginals {
    double first = 0.5;
    double second = 0.5;
};

template <QSource Q>
ResponseMarginals response_marginals(const TaskBelief& belief, const StateOf<Q>& s,
                                     const ActionPair<ActionOf<Q>>& pair, const Q& q,
                                     const ResponseModel& model) {
    double p1 = 0.0;
    for (std::size_t i = 0; i < belief.size(); ++i) {
        const double w = belief.weight(i);
        if (w == 0.0) continue;
        const TaskId t = belief.task(i);
        p1 += w * response_probability(q.q(s, pair.first, t), q.q(s, pair.second, t), model);
    }
    p1 = std::clamp(p1, 0.0, 1.0);
    return {p1, 1.0 - p1};
}

/// max over candidates of the belief-expected Q.
template <QSource Q>
double belief_value(const TaskBelief& belief, const StateOf<Q>& s, const Q& q,
                    std::span<const ActionOf<Q>> candidates) {
    return greedy_expected(belief, s, q, candidates).value;
}

template <QSource Q>
double evoi_of_pair(const TaskBelief& belief, const StateOf<Q>& s, const ActionPair<ActionOf<Q>>& pair,
                    const Q& q, const ResponseModel& model, std::span<const ActionOf<Q>> candidates) {
    if (candidates.empty()) throw EmptyCandidates{};
    const auto [p1, p2] = response_marginals(belief, s, pair, q, model);
    const double before = belief_value(belief, s, q, candidates);

    // Accumulated as gains so a belief the query cannot move scores exactly 0.
    double gain = 0.0;
    for (const auto& [choice, p] : {std::pair{Choice::First, p1}, std::pair{Choice::Second, p2}}) {
        if (p <= 0.0) continue;
        const TaskBelief conditioned =
            belief.updated(QueryRecord<StateOf<Q>, ActionOf<Q>>{s, pair, choice}, q, model);
        gain += p * (belief_value(conditioned, s, q, candidates) - before);
    }
    return gain;
}

namespace detail {

/// Present the higher expected-Q action first; ties keep the given order.
template <QSource Q>
ActionPair<ActionOf<Q>> presentation_order(const TaskBelief& belief, const StateOf<Q>& s,
                                           ActionPair<ActionOf<Q>> pair, const Q& q) {
    if (expected_q(belief, s, pair.second, q) > expected_q(belief, s, pair.first, q)) return pair.swapped();
    return pair;
}

}  // namespace detail

/// Exhaustive search over unordered pairs of the action inventory.
template <DiscreteQSource Q>
QueryDecision<ActionOf<Q>> select_query_discrete(const TaskBelief& belief, const StateOf<Q>& s, const Q& q,
                                                 const ResponseModel& model, const QuerierConfig& cfg) {
    const std::vector<ActionOf<Q>> actions = q.actions(s);
    if (actions.size() < 2) throw std::invalid_argument("need at least two actions to pose a query");

    QueryDecision<ActionOf<Q>> out;
    out.score = -std::numeric_limits<double>::infinity();
    ActionPair<ActionOf<Q>> best{};
    for (std::size_t i = 0; i < actions.size(); ++i) {
        for (std::size_t j = i + 1; j < actions.size(); ++j) {
            const ActionPair<ActionOf<Q>> pair{actions[i], actions[j]};
            const double v = evoi_of_pair(belief, s, pair, q, model, std::span<const ActionOf<Q>>(actions));
            ++out.considered;
            if (v > out.score) {
                out.score = v;
                best = pair;
            }
        }
    }
    if (out.score > cfg.c) out.pair = detail::presentation_order(belief, s, best, q);
    return out;
}

/// Per-task greedy actions with non-negligible weight, plus the mixture action.
template <ContinuousQSource Q>
std::vector<ActionOf<Q>> value_candidates(const TaskBelief& belief, const StateOf<Q>& s, const Q& q) {
    std::vector<ActionOf<Q>> out;
    ActionOf<Q> mixture{};
    for (std::size_t i = 0; i < belief.size(); ++i) {
        const double w = belief.weight(i);
        if (w == 0.0) continue;
        const ActionOf<Q> a = q.greedy(s, belief.task(i));
        mixture = mixture + a * w;
        if (w > 1e-9) out.push_back(a);
    }
    out.push_back(mixture);
    return out;
}

template <ContinuousQSource Q>
ActionPair<ActionOf<Q>> sample_distinct_pair(const Q& q, Rng& rng) {
    ActionPair<ActionOf<Q>> pair{q.sample_action(rng), q.sample_action(rng)};
    while (pair.second == pair.first) pair.second = q.sample_action(rng);
    return pair;
}

/// Best of `cfg.n_samples` random pairs.
template <ContinuousQSource Q>
QueryDecision<ActionOf<Q>> select_query_continuous(const TaskBelief& belief, const StateOf<Q>& s, const Q& q,
                                                   const ResponseModel& model, const QuerierConfig& cfg,
                                                   Rng& rng) {
    const std::vector<ActionOf<Q>> candidates = value_candidates(belief, s, q);
    QueryDecision<ActionOf<Q>> out;
    out.score = -std::numeric_limits<double>::infinity();
    ActionPair<ActionOf<Q>> best{};
    for (std::size_t k = 0; k < cfg.n_samples; ++k) {
        const auto pair = sample_distinct_pair(q, rng);
        const double v = evoi_of_pair(belief, s, pair, q, model, std::span<const ActionOf<Q>>(candidates));
        ++out.considered;
        if (v > out.score) {
            out.score = v;
            best = pair;
        }
    }
    if (out.score > cfg.c) out.pair = detail::presentation_order(belief, s, best, q);
    return out;
}

/// Belief-weighted average of the per-task greedy actions.
template <ContinuousQSource Q>
ActionOf<Q> expected_policy_action(const TaskBelief& belief, const StateOf<Q>& s, const Q& q) {
    ActionOf<Q> a{};
    for (std::size_t i = 0; i < belief.size(); ++i) {
        const double w = belief.weight(i);
        if (w > 0.0) a = a + q.greedy(s, belief.task(i)) * w;
    }
    return a;
}

/// The action the agent takes when not querying.
template <QSource Q>
ActionOf<Q> act(const TaskBelief& belief, const StateOf<Q>& s, const Q& q) {
    if constexpr (DiscreteQSource<Q>) {
        const std::vector<ActionOf<Q>> actions = q.actions(s);
        return greedy_expected(belief, s, q, std::span<const ActionOf<Q>>(actions)).action;
    } else {
        static_assert(ContinuousQSource<Q>, "QSource must be discrete or continuous");
        return expected_policy_action(belief, s, q);
    }
}

}  // namespace evoi
