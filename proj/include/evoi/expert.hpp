#pragma once

// Simulated expert: knows the true task and answers pairwise queries with the
// same Boltzmann model the agent assumes.

#include <stdexcept>

#include "evoi/belief.hpp"
#include "evoi/random.hpp"

namespace evoi {

enum class ExpertMode { Stochastic, Deterministic };

struct ExpertConfig {
    double beta = 10.0;
    ExpertMode mode = ExpertMode::Stochastic;
};

/// Deterministic mode picks the higher-Q option (the first on ties) and draws
/// nothing from `rng`. Stochastic mode consumes exactly one uniform draw.
template <QSource Q>
Choice respond(const ActionPair<ActionOf<Q>>& pair, const StateOf<Q>& s, TaskId true_task, const Q& q,
               const ExpertConfig& cfg, Rng& rng) {
    if (pair.first == pair.second) throw std::invalid_argument("query options must be distinct");
    const double q1 = q.q(s, pair.first, true_task);
    const double q2 = q.q(s, pair.second, true_task);
    if (cfg.mode == ExpertMode::Deterministic) return q2 > q1 ? Choice::Second : Choice::First;
    const double p1 = response_probability(q1, q2, ResponseModel{cfg.beta});
    return bernoulli(rng, p1) ? Choice::First : Choice::Second;
}

}  // namespace evoi
