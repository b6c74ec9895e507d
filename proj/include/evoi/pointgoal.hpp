#pragma once

// Continuous point-goal environment with a closed-form optimal Q.
//
// A point moves in an axis-aligned arena by displacement actions of norm at
// most a_max; the reward is minus the distance to the goal after the move.
// Heading straight for the goal is optimal, which gives
//
//     V(d)       = -sum_{k>=1} gamma^(k-1) * max(0, d - k*a_max)
//     Q(s, a; g) = -|s' - g| + gamma * V(|s' - g|)
//
// where s' is the successor of s under a. V is the infinite-horizon value; it
// has ceil(d / a_max) non-zero terms. Episode truncation only affects rollouts.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "evoi/belief.hpp"
#include "evoi/random.hpp"

namespace evoi::pg {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
    friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
    friend Vec2 operator*(Vec2 a, double k) { return {a.x * k, a.y * k}; }
    friend Vec2 operator*(double k, Vec2 a) { return a * k; }
    friend bool operator==(const Vec2&, const Vec2&) = default;

    double norm() const { return std::hypot(x, y); }
};

inline double distance(Vec2 a, Vec2 b) { return (a - b).norm(); }

inline std::string to_string(Vec2 v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "(%.6f,%.6f)", v.x, v.y);
    return buf;
}

struct Arena {
    Vec2 lo{-1.0, -1.0};
    Vec2 hi{1.0, 1.0};

    Vec2 clip(Vec2 p) const { return {std::clamp(p.x, lo.x, hi.x), std::clamp(p.y, lo.y, hi.y)}; }
    bool contains(Vec2 p) const { return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y; }
    Vec2 center() const { return (lo + hi) * 0.5; }
};

struct Params {
    double a_max = 0.2;
    double gamma = 0.9;
    Arena arena{};
    int horizon = 30;
    double goal_tolerance = 1e-3;

    void validate() const {
        if (!(a_max > 0.0)) throw std::invalid_argument("a_max must be positive");
        if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in (0, 1)");
        if (!(arena.lo.x < arena.hi.x && arena.lo.y < arena.hi.y)) throw std::invalid_argument("arena is empty");
        if (horizon < 1) throw std::invalid_argument("horizon must be positive");
    }
};

using State = Vec2;
using Action = Vec2;

struct Task {
    Vec2 goal;
    friend bool operator==(const Task&, const Task&) = default;
};

/// Rescales `a` onto the disk of radius a_max when it lies outside.
inline Action clip_action(Action a, const Params& p) {
    const double n = a.norm();
    if (n <= p.a_max) return a;
    return a * (p.a_max / n);
}

struct StepResult {
    State next;
    double reward = 0.0;
    bool done = false;
};

inline State successor(State s, Action a, const Params& p) { return p.arena.clip(s + clip_action(a, p)); }

inline StepResult step(State s, Action a, const Task& task, const Params& p) {
    StepResult r;
    r.next = successor(s, a, p);
    const double d = distance(r.next, task.goal);
    r.reward = -d;
    r.done = d < p.goal_tolerance;
    return r;
}

inline double value(double d, const Params& p) {
    double v = 0.0;
    double discount = 1.0;
    for (int k = 1;; ++k) {
        const double remaining = d - k * p.a_max;
        if (remaining <= 0.0) break;
        v -= discount * remaining;
        discount *= p.gamma;
    }
    return v;
}

inline double q_value(State s, Action a, const Task& task, const Params& p) {
    const double d = distance(successor(s, a, p), task.goal);
    return -d + p.gamma * value(d, p);
}

/// Straight at the goal, stopping on it.
inline Action policy(State s, const Task& task, const Params& p) {
    const Vec2 delta = task.goal - s;
    const double d = delta.norm();
    if (d == 0.0) return {};
    if (d <= p.a_max) return delta;
    return delta * (p.a_max / d);
}

/// `n` goals at the cell centers of a near-square grid over the arena,
/// row-major from the low corner; the trailing cells of an incomplete grid are
/// left out.
inline std::vector<Task> grid_tasks(std::size_t n, const Arena& arena) {
    if (n == 0) throw std::invalid_argument("need at least one task");
    const auto cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
    const std::size_t rows = (n + cols - 1) / cols;
    std::vector<Task> out;
    out.reserve(n);
    for (std::size_t r = 0; r < rows && out.size() < n; ++r)
        for (std::size_t c = 0; c < cols && out.size() < n; ++c)
            out.push_back({{arena.lo.x + (arena.hi.x - arena.lo.x) * (static_cast<double>(c) + 0.5) / static_cast<double>(cols),
                            arena.lo.y + (arena.hi.y - arena.lo.y) * (static_cast<double>(r) + 0.5) / static_cast<double>(rows)}});
    return out;
}

inline std::vector<Task> random_tasks(std::size_t n, const Arena& arena, Rng& rng) {
    if (n == 0) throw std::invalid_argument("need at least one task");
    std::vector<Task> out(n);
    for (auto& t : out) {
        t.goal.x = uniform(rng, arena.lo.x, arena.hi.x);
        t.goal.y = uniform(rng, arena.lo.y, arena.hi.y);
    }
    return out;
}

/// Analytic task-conditioned Q over a fixed goal list.
class QSource {
public:
    using state_type = State;
    using action_type = Action;

    QSource(Params p, std::vector<Task> tasks) : params_(p), tasks_(std::move(tasks)) {
        params_.validate();
        if (tasks_.empty()) throw std::invalid_argument("need at least one task");
    }

    std::size_t num_tasks() const { return tasks_.size(); }
    double q(State s, Action a, TaskId t) const { return q_value(s, a, tasks_.at(t.index), params_); }
    Action greedy(State s, TaskId t) const { return policy(s, tasks_.at(t.index), params_); }

    /// Uniform over the disk of radius a_max.
    Action sample_action(Rng& rng) const {
        const double r = params_.a_max * std::sqrt(uniform01(rng));
        const double th = 2.0 * std::numbers::pi * uniform01(rng);
        return {r * std::cos(th), r * std::sin(th)};
    }

    const Params& params() const { return params_; }
    const std::vector<Task>& tasks() const { return tasks_; }

private:
    Params params_;
    std::vector<Task> tasks_;
};

}  // namespace evoi::pg
