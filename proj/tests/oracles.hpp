#pragma once

// Naive reference implementations the library is checked against. Everything
// here works in the linear probability domain with straightforward loops and
// shares no code with the library beyond plain data types.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <limits>
#include <random>
#include <vector>

#include "evoi/belief.hpp"
#include "evoi/gridworld.hpp"

namespace oracle {

/// Random finite Q table: q[task][state][action].
struct TableQ {
    using state_type = int;
    using action_type = int;

    std::vector<std::vector<std::vector<double>>> values;

    std::size_t num_tasks() const { return values.size(); }
    std::size_t num_states() const { return values[0].size(); }
    std::size_t num_actions() const { return values[0][0].size(); }
    double q(int s, int a, evoi::TaskId t) const { return values[t.index][s][a]; }
    int greedy(int s, evoi::TaskId t) const {
        const auto& row = values[t.index][s];
        return static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    }
    std::vector<int> actions(int) const {
        std::vector<int> out(num_actions());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<int>(i);
        return out;
    }
};

inline TableQ random_table(std::mt19937_64& rng, std::size_t tasks, std::size_t states, std::size_t actions) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    TableQ t;
    t.values.assign(tasks, std::vector<std::vector<double>>(states, std::vector<double>(actions)));
    for (auto& a : t.values)
        for (auto& b : a)
            for (auto& v : b) v = u(rng);
    return t;
}

inline std::vector<double> random_simplex(std::mt19937_64& rng, std::size_t n) {
    std::exponential_distribution<double> e(1.0);
    std::vector<double> w(n);
    double s = 0.0;
    for (auto& x : w) s += (x = e(rng));
    for (auto& x : w) x /= s;
    return w;
}

inline double p_choose(double qc, double qr, double beta) { return 1.0 / (1.0 + std::exp(-beta * (qc - qr))); }

struct Record {
    int state;
    int chosen;
    int rejected;
};

/// Prior times the product of every likelihood, then normalized.
inline std::vector<double> posterior(const std::vector<double>& prior, const std::vector<Record>& history,
                                     const TableQ& q, double beta) {
    std::vector<double> w = prior;
    for (std::size_t i = 0; i < w.size(); ++i)
        for (const auto& r : history)
            w[i] *= p_choose(q.values[i][r.state][r.chosen], q.values[i][r.state][r.rejected], beta);
    double z = 0.0;
    for (double x : w) z += x;
    for (double& x : w) x /= z;
    return w;
}

inline double value(const std::vector<double>& w, const TableQ& q, int s) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < q.num_actions(); ++a) {
        double e = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) e += w[i] * q.values[i][s][a];
        best = std::max(best, e);
    }
    return best;
}

/// Enumerates both responses: sum_r P(r) * value(posterior_r) - value(prior).
inline double evoi(const std::vector<double>& w, const TableQ& q, int s, int a1, int a2, double beta) {
    double total = 0.0;
    for (int r = 0; r < 2; ++r) {
        const int chosen = r == 0 ? a1 : a2;
        const int rejected = r == 0 ? a2 : a1;
        std::vector<double> joint(w.size());
        double pr = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) {
            joint[i] = w[i] * p_choose(q.values[i][s][chosen], q.values[i][s][rejected], beta);
            pr += joint[i];
        }
        if (pr == 0.0) continue;
        for (double& x : joint) x /= pr;
        total += pr * value(joint, q, s);
    }
    return total - value(w, q, s);
}

/// The textbook form with the max inside the expectation: the response-
/// weighted posterior expectation of each task's own optimum, minus the prior
/// expectation of the same. Equal to zero for every query.
inline double evoi_max_inside(const std::vector<double>& w, const TableQ& q, int s, int a1, int a2, double beta) {
    auto per_task_v = [&](std::size_t i) {
        return *std::max_element(q.values[i][s].begin(), q.values[i][s].end());
    };
    double before = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) before += w[i] * per_task_v(i);
    double after = 0.0;
    for (int r = 0; r < 2; ++r) {
        const int chosen = r == 0 ? a1 : a2;
        const int rejected = r == 0 ? a2 : a1;
        std::vector<double> joint(w.size());
        double pr = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) {
            joint[i] = w[i] * p_choose(q.values[i][s][chosen], q.values[i][s][rejected], beta);
            pr += joint[i];
        }
        if (pr == 0.0) continue;
        double e = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) e += joint[i] / pr * per_task_v(i);
        after += pr * e;
    }
    return after - before;
}

/// Fewest actions from (pos, dir) that enter `goal`, never entering lava; -1
/// when unreachable. Breadth-first search on the oriented graph.
inline int bfs_steps(const evoi::grid::Map& m, evoi::grid::Pos from, evoi::grid::Dir dir, evoi::grid::Pos goal) {
    using namespace evoi::grid;
    if (from == goal) return 0;
    const auto key = [&](Pos p, Dir d) { return (p.row * m.width() + p.col) * 4 + static_cast<int>(d); };
    std::vector<int> dist(static_cast<std::size_t>(m.width() * m.height() * 4), -1);
    std::deque<std::pair<Pos, Dir>> frontier{{from, dir}};
    dist[key(from, dir)] = 0;
    const int dr[4] = {-1, 0, 1, 0};
    const int dc[4] = {0, 1, 0, -1};
    while (!frontier.empty()) {
        const auto [p, d] = frontier.front();
        frontier.pop_front();
        const int here = dist[key(p, d)];
        const Dir l = static_cast<Dir>((static_cast<int>(d) + 3) % 4);
        const Dir r = static_cast<Dir>((static_cast<int>(d) + 1) % 4);
        Pos f{p.row + dr[static_cast<int>(d)], p.col + dc[static_cast<int>(d)]};
        if (!m.in_bounds(f) || m.cell(f) == Cell::Wall) f = p;
        if (f == goal) return here + 1;
        std::vector<std::pair<Pos, Dir>> next{{p, l}, {p, r}};
        if (f != p && m.cell(f) != Cell::Lava) next.push_back({f, d});
        for (const auto& [np, nd] : next) {
            if (dist[key(np, nd)] != -1) continue;
            dist[key(np, nd)] = here + 1;
            frontier.push_back({np, nd});
        }
    }
    return -1;
}

/// Q from shortest paths: 0 when standing on the goal, 1 for stepping onto the goal, 0 for lava or a
/// successor that cannot reach the goal within the remaining budget, else
/// gamma^d where d counts the actions still needed after this one.
inline double bfs_q(const evoi::grid::Map& m, evoi::grid::State s, evoi::grid::Action a, evoi::grid::Pos goal,
                    double gamma, int horizon) {
    using namespace evoi::grid;
    if (s.pos == goal) return 0.0;  // terminal under this goal
    Dir nd = s.dir;
    Pos np = s.pos;
    if (a == Action::TurnLeft) nd = static_cast<Dir>((static_cast<int>(s.dir) + 3) % 4);
    if (a == Action::TurnRight) nd = static_cast<Dir>((static_cast<int>(s.dir) + 1) % 4);
    if (a == Action::Forward) {
        const int dr[4] = {-1, 0, 1, 0};
        const int dc[4] = {0, 1, 0, -1};
        const Pos f{s.pos.row + dr[static_cast<int>(s.dir)], s.pos.col + dc[static_cast<int>(s.dir)]};
        if (m.in_bounds(f) && m.cell(f) != Cell::Wall) np = f;
    }
    if (np == goal && np != s.pos) return 1.0;
    if (m.cell(np) == Cell::Lava) return 0.0;
    const int d = bfs_steps(m, np, nd, goal);
    if (d < 0 || d > horizon - 1) return 0.0;
    return std::pow(gamma, d);
}

}  // namespace oracle
