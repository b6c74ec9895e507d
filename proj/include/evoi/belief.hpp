#pragma once

// Boltzmann response model, discrete task posterior and belief-marginalized
// Q statistics.
//
// The expert is modeled as choosing a1 over a2 in state s under task w with
// probability 1 / (1 + exp(beta * (Q(s,a2;w) - Q(s,a1;w)))). The posterior over
// a finite task support is the prior times the product of those probabilities
// over the answered queries. Weights live in the log domain: a few dozen
// confident answers underflow a plain product.
//
// One QSource serves both the agent's Q and the expert's Q. With the exact
// solvers in this library the learned and optimal Q coincide, so the
// distinction between the two response models disappears.

#include <algorithm>
#include <cmath>
#include <compare>
#include <concepts>
#include <cstddef>
#include <limits>
#include <numbers>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "evoi/random.hpp"

namespace evoi {

/// Index of one task hypothesis inside a finite support.
struct TaskId {
    std::size_t index = 0;
    friend auto operator<=>(const TaskId&, const TaskId&) = default;
};

/// Supplies task-conditioned Q values and per-task greedy actions.
template <class Q>
concept QSource = requires(const Q& q, const typename Q::state_type& s,
                           const typename Q::action_type& a, TaskId t) {
    typename Q::state_type;
    typename Q::action_type;
    { q.num_tasks() } -> std::convertible_to<std::size_t>;
    { q.q(s, a, t) } -> std::convertible_to<double>;
    { q.greedy(s, t) } -> std::convertible_to<typename Q::action_type>;
};

/// A QSource with a finite action inventory per state.
template <class Q>
concept DiscreteQSource = QSource<Q> && requires(const Q& q, const typename Q::state_type& s) {
    { q.actions(s) } -> std::convertible_to<std::vector<typename Q::action_type>>;
};

/// A QSource over a vector action space: actions can be sampled and averaged.
template <class Q>
concept ContinuousQSource =
    QSource<Q> && requires(const Q& q, Rng& rng, const typename Q::action_type& a, double w) {
        { q.sample_action(rng) } -> std::convertible_to<typename Q::action_type>;
        { a + a } -> std::convertible_to<typename Q::action_type>;
        { a * w } -> std::convertible_to<typename Q::action_type>;
    };

template <QSource Q>
using StateOf = typename Q::state_type;
template <QSource Q>
using ActionOf = typename Q::action_type;

struct ResponseModel {
    double beta = 10.0;

    explicit ResponseModel(double b = 10.0) : beta(b) {
        if (!(b >= 0.0) || !std::isfinite(b))
            throw std::invalid_argument("response model precision must be finite and >= 0");
    }
};

/// log(1 / (1 + exp(-x))) without overflow in either tail.
inline double log_sigmoid(double x) noexcept {
    if (x >= 0.0) return -std::log1p(std::exp(-x));
    return x - std::log1p(std::exp(x));
}

inline double sigmoid(double x) noexcept {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

/// Probability that the expert picks the option worth `q_chosen` over the one
/// worth `q_rejected`.
inline double response_probability(double q_chosen, double q_rejected, const ResponseModel& model) {
    if (model.beta == 0.0) return 0.5;
    return sigmoid(model.beta * (q_chosen - q_rejected));
}

inline double log_response_probability(double q_chosen, double q_rejected, const ResponseModel& model) {
    if (model.beta == 0.0) return -std::numbers::ln2;
    return log_sigmoid(model.beta * (q_chosen - q_rejected));
}

enum class Choice { First, Second };

inline Choice other(Choice c) { return c == Choice::First ? Choice::Second : Choice::First; }

template <class Action>
struct ActionPair {
    Action first{};
    Action second{};

    ActionPair swapped() const { return {second, first}; }
    const Action& operator[](Choice c) const { return c == Choice::First ? first : second; }

    /// Same question regardless of presentation order.
    bool same_question(const ActionPair& o) const {
        return (first == o.first && second == o.second) || (first == o.second && second == o.first);
    }
    friend bool operator==(const ActionPair&, const ActionPair&) = default;
};

/// One answered query.
template <class State, class Action>
struct QueryRecord {
    State state{};
    ActionPair<Action> pair{};
    Choice chosen = Choice::First;

    const Action& chosen_action() const { return pair[chosen]; }
    const Action& rejected_action() const { return pair[other(chosen)]; }
};

/// Raised when every hypothesis has been driven to zero weight.
class DegenerateBelief : public std::runtime_error {
public:
    DegenerateBelief() : std::runtime_error("posterior has no surviving hypothesis") {}
};

class TaskBelief {
public:
    /// Uniform over tasks 0..n-1.
    static TaskBelief uniform(std::size_t n) {
        if (n == 0) throw std::invalid_argument("belief support must be non-empty");
        TaskBelief b;
        b.support_.resize(n);
        for (std::size_t i = 0; i < n; ++i) b.support_[i] = TaskId{i};
        b.log_w_.assign(n, -std::log(static_cast<double>(n)));
        return b;
    }

    /// All mass on one task, over a support of size n.
    static TaskBelief point_mass(std::size_t n, TaskId task) {
        if (task.index >= n) throw std::out_of_range("point mass outside support");
        std::vector<double> w(n, 0.0);
        w[task.index] = 1.0;
        return from_weights(w);
    }

    /// Tasks 0..n-1 with the given (unnormalized, non-negative) weights.
    static TaskBelief from_weights(std::span<const double> weights) {
        std::vector<TaskId> support(weights.size());
        for (std::size_t i = 0; i < support.size(); ++i) support[i] = TaskId{i};
        return from_weights(std::move(support), weights);
    }

    static TaskBelief from_weights(std::vector<TaskId> support, std::span<const double> weights) {
        if (support.empty() || support.size() != weights.size())
            throw std::invalid_argument("belief support and weights must be non-empty and aligned");
        std::vector<double> lw(weights.size());
        for (std::size_t i = 0; i < weights.size(); ++i) {
            if (!(weights[i] >= 0.0) || !std::isfinite(weights[i]))
                throw std::invalid_argument("belief weights must be finite and non-negative");
            lw[i] = weights[i] > 0.0 ? std::log(weights[i]) : -std::numeric_limits<double>::infinity();
        }
        return from_log_weights(std::move(support), std::move(lw));
    }

    static TaskBelief from_log_weights(std::vector<TaskId> support, std::vector<double> log_weights) {
        TaskBelief b;
        b.support_ = std::move(support);
        b.log_w_ = std::move(log_weights);
        b.normalize();
        return b;
    }

    std::size_t size() const { return support_.size(); }
    std::span<const TaskId> support() const { return support_; }
    std::span<const double> log_weights() const { return log_w_; }
    TaskId task(std::size_t i) const { return support_[i]; }
    double weight(std::size_t i) const { return std::exp(log_w_[i]); }

    std::vector<double> weights() const {
        std::vector<double> w(log_w_.size());
        std::transform(log_w_.begin(), log_w_.end(), w.begin(), [](double l) { return std::exp(l); });
        return w;
    }

    /// Shannon entropy in nats.
    double entropy() const {
        double h = 0.0;
        for (double l : log_w_)
            if (std::isfinite(l)) h -= std::exp(l) * l;
        return h;
    }

    /// Multiply in one answered query.
    template <QSource Q>
    TaskBelief updated(const QueryRecord<StateOf<Q>, ActionOf<Q>>& rec, const Q& q,
                       const ResponseModel& model) const {
        TaskBelief b = *this;
        for (std::size_t i = 0; i < b.size(); ++i) {
            const double qc = q.q(rec.state, rec.chosen_action(), b.support_[i]);
            const double qr = q.q(rec.state, rec.rejected_action(), b.support_[i]);
            b.log_w_[i] += log_response_probability(qc, qr, model);
        }
        b.normalize();
        return b;
    }

    /// Multiply in arbitrary per-hypothesis log likelihoods.
    TaskBelief reweighted(std::span<const double> log_likelihood) const {
        if (log_likelihood.size() != size()) throw std::invalid_argument("likelihood size mismatch");
        TaskBelief b = *this;
        for (std::size_t i = 0; i < size(); ++i) b.log_w_[i] += log_likelihood[i];
        b.normalize();
        return b;
    }

private:
    TaskBelief() = default;

    void normalize() {
        double mx = -std::numeric_limits<double>::infinity();
        for (double l : log_w_) {
            if (std::isnan(l)) throw DegenerateBelief{};
            mx = std::max(mx, l);
        }
        if (!std::isfinite(mx)) throw DegenerateBelief{};
        double s = 0.0;
        for (double l : log_w_) s += std::exp(l - mx);
        const double lse = mx + std::log(s);
        for (double& l : log_w_) l -= lse;
    }

    std::vector<TaskId> support_;
    std::vector<double> log_w_;
};

/// Prior times the likelihood of every record. Order of records is irrelevant.
template <QSource Q, class Records>
TaskBelief posterior_from_history(const TaskBelief& prior, const Records& history, const Q& q,
                                  const ResponseModel& model) {
    std::vector<double> ll(prior.size(), 0.0);
    for (const auto& rec : history) {
        for (std::size_t i = 0; i < prior.size(); ++i) {
            const double qc = q.q(rec.state, rec.chosen_action(), prior.task(i));
            const double qr = q.q(rec.state, rec.rejected_action(), prior.task(i));
            ll[i] += log_response_probability(qc, qr, model);
        }
    }
    return prior.reweighted(ll);
}

template <QSource Q>
double expected_q(const TaskBelief& belief, const StateOf<Q>& s, const ActionOf<Q>& a, const Q& q) {
    double acc = 0.0;
    for (std::size_t i = 0; i < belief.size(); ++i) {
        const double w = belief.weight(i);
        if (w > 0.0) acc += w * q.q(s, a, belief.task(i));
    }
    return acc;
}

template <class Action>
struct ScoredAction {
    Action action{};
    std::size_t index = 0;
    double value = 0.0;
};

class EmptyCandidates : public std::invalid_argument {
public:
    EmptyCandidates() : std::invalid_argument("candidate action list is empty") {}
};

/// Candidate with the highest belief-expected Q; ties go to the lowest index.
template <QSource Q>
ScoredAction<ActionOf<Q>> greedy_expected(const TaskBelief& belief, const StateOf<Q>& s, const Q& q,
                                          std::span<const ActionOf<Q>> candidates) {
    if (candidates.empty()) throw EmptyCandidates{};
    ScoredAction<ActionOf<Q>> best{candidates[0], 0, expected_q(belief, s, candidates[0], q)};
    for (std::size_t i = 1; i < candidates.size(); ++i) {
        const double v = expected_q(belief, s, candidates[i], q);
        if (v > best.value) best = {candidates[i], i, v};
    }
    return best;
}

/// Posterior variance of Q(s, a; w).
template <QSource Q>
double variance_at(const TaskBelief& belief, const StateOf<Q>& s, const ActionOf<Q>& a, const Q& q) {
    const double mean = expected_q(belief, s, a, q);
    double var = 0.0;
    for (std::size_t i = 0; i < belief.size(); ++i) {
        const double w = belief.weight(i);
        if (w > 0.0) {
            const double d = q.q(s, a, belief.task(i)) - mean;
            var += w * d * d;
        }
    }
    return var;
}

}  // namespace evoi
