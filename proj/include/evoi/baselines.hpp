#pragma once

// Comparison queriers: a coin-flip trigger and a posterior-variance trigger.

#include <algorithm>
#include <cstddef>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "evoi/belief.hpp"
#include "evoi/evoi.hpp"
#include "evoi/random.hpp"

namespace evoi {

struct RandomQuerierConfig {
    double p_query = 0.1;

    void validate() const {
        if (!(p_query >= 0.0 && p_query <= 1.0)) throw std::invalid_argument("p_query must lie in [0, 1]");
    }
};

struct UncertaintyQuerierConfig {
    double threshold = 1e-2;
    std::size_t n_samples = 16;

    void validate() const {
        if (!(threshold >= 0.0)) throw std::invalid_argument("uncertainty threshold must be >= 0");
        if (n_samples < 1) throw std::invalid_argument("n_samples must be >= 1");
    }
};

/// The two actions with the highest expected Q, best first; ties by index.
template <DiscreteQSource Q>
ActionPair<ActionOf<Q>> top_two(const TaskBelief& belief, const StateOf<Q>& s, const Q& q) {
    const std::vector<ActionOf<Q>> actions = q.actions(s);
    if (actions.size() < 2) throw std::invalid_argument("need at least two actions to pose a query");
    std::vector<double> value(actions.size());
    for (std::size_t i = 0; i < actions.size(); ++i) value[i] = expected_q(belief, s, actions[i], q);
    std::vector<std::size_t> order(actions.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return value[a] > value[b]; });
    return {actions[order[0]], actions[order[1]]};
}

/// Queries with a fixed probability per step. One uniform draw is consumed per
/// call whatever the outcome, so decision streams stay aligned across configs.
template <QSource Q>
QueryDecision<ActionOf<Q>> random_decide(const TaskBelief& belief, const StateOf<Q>& s, const Q& q,
                                         const RandomQuerierConfig& cfg, Rng& rng) {
    QueryDecision<ActionOf<Q>> out;
    out.score = uniform01(rng);
    if (!(out.score < cfg.p_query)) return out;
    out.considered = 1;
    if constexpr (DiscreteQSource<Q>) {
        out.pair = top_two(belief, s, q);
    } else {
        out.pair = sample_distinct_pair(q, rng);
    }
    return out;
}

/// Expected posterior variance of Q at the post-response greedy action.
template <ContinuousQSource Q>
double expected_variance_after(const TaskBelief& belief, const StateOf<Q>& s,
                               const ActionPair<ActionOf<Q>>& pair, const Q& q, const ResponseModel& model) {
    const auto [p1, p2] = response_marginals(belief, s, pair, q, model);
    double v = 0.0;
    for (const auto& [choice, p] : {std::pair{Choice::First, p1}, std::pair{Choice::Second, p2}}) {
        if (p <= 0.0) continue;
        const TaskBelief b = belief.updated(QueryRecord<StateOf<Q>, ActionOf<Q>>{s, pair, choice}, q, model);
        v += p * variance_at(b, s, expected_policy_action(b, s, q), q);
    }
    return v;
}

/// Queries when the posterior variance of the chosen action's Q exceeds the
/// threshold.
template <QSource Q>
QueryDecision<ActionOf<Q>> uncertainty_decide(const TaskBelief& belief, const StateOf<Q>& s, const Q& q,
                                              const ResponseModel& model, const UncertaintyQuerierConfig& cfg,
                                              Rng& rng) {
    QueryDecision<ActionOf<Q>> out;
    out.score = variance_at(belief, s, act(belief, s, q), q);
    if (!(out.score > cfg.threshold)) return out;
    if constexpr (DiscreteQSource<Q>) {
        out.considered = 1;
        out.pair = top_two(belief, s, q);
    } else {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < cfg.n_samples; ++k) {
            const auto pair = sample_distinct_pair(q, rng);
            const double v = expected_variance_after(belief, s, pair, q, model);
            ++out.considered;
            if (v < best) {
                best = v;
                out.pair = pair;
            }
        }
        out.pair = detail::presentation_order(belief, s, *out.pair, q);
    }
    return out;
}

}  // namespace evoi
