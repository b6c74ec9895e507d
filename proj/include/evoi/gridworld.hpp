#pragma once

// Oriented-agent GridWorld with wall and lava cells, plus an exact
// finite-horizon value iteration that yields goal-conditioned Q tables.
//
// Map text: one LF-terminated line per row, '.' empty, '#' wall, 'L' lava, and
// exactly one of '>' '<' '^' 'v' marking the start cell and heading. Row 0 is
// the top line.

#include <algorithm>
#include <array>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "evoi/belief.hpp"

namespace evoi::grid {

enum class Cell : std::uint8_t { Empty, Wall, Lava };
enum class Dir : std::uint8_t { North = 0, East = 1, South = 2, West = 3 };
enum class Action : std::uint8_t { TurnLeft = 0, TurnRight = 1, Forward = 2 };

inline constexpr std::array<Action, 3> kActions{Action::TurnLeft, Action::TurnRight, Action::Forward};

inline const char* to_string(Action a) {
    switch (a) {
        case Action::TurnLeft: return "left";
        case Action::TurnRight: return "right";
        case Action::Forward: return "forward";
    }
    return "?";
}

inline const char* to_string(Dir d) {
    switch (d) {
        case Dir::North: return "N";
        case Dir::East: return "E";
        case Dir::South: return "S";
        case Dir::West: return "W";
    }
    return "?";
}

inline Dir turn_left(Dir d) { return static_cast<Dir>((static_cast<int>(d) + 3) % 4); }
inline Dir turn_right(Dir d) { return static_cast<Dir>((static_cast<int>(d) + 1) % 4); }

struct Pos {
    int row = 0;
    int col = 0;
    friend auto operator<=>(const Pos&, const Pos&) = default;
};

inline Pos ahead(Pos p, Dir d) {
    switch (d) {
        case Dir::North: return {p.row - 1, p.col};
        case Dir::East: return {p.row, p.col + 1};
        case Dir::South: return {p.row + 1, p.col};
        case Dir::West: return {p.row, p.col - 1};
    }
    return p;
}

struct State {
    Pos pos;
    Dir dir = Dir::East;
    int t = 0;
    friend bool operator==(const State&, const State&) = default;
};

inline std::string to_string(const State& s) {
    return "(" + std::to_string(s.pos.row) + "," + std::to_string(s.pos.col) + "," + to_string(s.dir) + ")";
}

class MalformedMap : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class Map {
public:
    Map(int width, int height, std::vector<Cell> cells, Pos start, Dir start_dir)
        : width_(width), height_(height), cells_(std::move(cells)), start_(start), start_dir_(start_dir) {
        if (width <= 0 || height <= 0) throw MalformedMap("map must be non-empty");
        if (cells_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
            throw MalformedMap("cell count does not match dimensions");
        if (!in_bounds(start) || cell(start) != Cell::Empty) throw MalformedMap("start must be an empty cell");
        const auto empties = std::count(cells_.begin(), cells_.end(), Cell::Empty);
        if (empties < 2) throw MalformedMap("map has no valid goal cell");
    }

    int width() const { return width_; }
    int height() const { return height_; }
    Pos start() const { return start_; }
    Dir start_dir() const { return start_dir_; }
    State start_state() const { return {start_, start_dir_, 0}; }

    bool in_bounds(Pos p) const { return p.row >= 0 && p.col >= 0 && p.row < height_ && p.col < width_; }
    Cell cell(Pos p) const { return cells_[index(p)]; }
    std::size_t index(Pos p) const {
        return static_cast<std::size_t>(p.row) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(p.col);
    }
    std::size_t num_cells() const { return cells_.size(); }
    Pos pos_of(std::size_t cell_index) const {
        return {static_cast<int>(cell_index / static_cast<std::size_t>(width_)),
                static_cast<int>(cell_index % static_cast<std::size_t>(width_))};
    }

    friend bool operator==(const Map&, const Map&) = default;

private:
    int width_;
    int height_;
    std::vector<Cell> cells_;
    Pos start_;
    Dir start_dir_;
};

inline Map parse_map(std::string_view text) {
    std::vector<std::string_view> rows;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        if (nl == std::string_view::npos) {
            rows.push_back(text);
            break;
        }
        rows.push_back(text.substr(0, nl));
        text.remove_prefix(nl + 1);
    }
    if (rows.empty() || rows.front().empty()) throw MalformedMap("empty map");

    const auto width = rows.front().size();
    std::vector<Cell> cells;
    cells.reserve(width * rows.size());
    int starts = 0;
    Pos start{};
    Dir dir = Dir::East;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != width)
            throw MalformedMap("ragged map: row " + std::to_string(r) + " has " + std::to_string(rows[r].size()) +
                               " cells, expected " + std::to_string(width));
        for (std::size_t c = 0; c < width; ++c) {
            const char ch = rows[r][c];
            Cell cell = Cell::Empty;
            if (ch == '#') {
                cell = Cell::Wall;
            } else if (ch == 'L') {
                cell = Cell::Lava;
            } else if (ch == '>' || ch == '<' || ch == '^' || ch == 'v') {
                ++starts;
                start = {static_cast<int>(r), static_cast<int>(c)};
                dir = ch == '>' ? Dir::East : ch == '<' ? Dir::West : ch == '^' ? Dir::North : Dir::South;
            } else if (ch != '.') {
                throw MalformedMap(std::string("unknown map character '") + ch + "' at row " + std::to_string(r));
            }
            cells.push_back(cell);
        }
    }
    if (starts == 0) throw MalformedMap("map has no start marker");
    if (starts > 1) throw MalformedMap("map has more than one start marker");
    return Map(static_cast<int>(width), static_cast<int>(rows.size()), std::move(cells), start, dir);
}

inline std::string serialize_map(const Map& m) {
    std::string out;
    out.reserve(static_cast<std::size_t>((m.width() + 1) * m.height()));
    for (int r = 0; r < m.height(); ++r) {
        for (int c = 0; c < m.width(); ++c) {
            const Pos p{r, c};
            if (p == m.start()) {
                constexpr char arrows[] = {'^', '>', 'v', '<'};
                out.push_back(arrows[static_cast<int>(m.start_dir())]);
                continue;
            }
            switch (m.cell(p)) {
                case Cell::Empty: out.push_back('.'); break;
                case Cell::Wall: out.push_back('#'); break;
                case Cell::Lava: out.push_back('L'); break;
            }
        }
        out.push_back('\n');
    }
    return out;
}

/// FNV-1a over the serialized map; identifies the map in cache files.
inline std::uint64_t map_hash(const Map& m) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const unsigned char ch : serialize_map(m)) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    return h;
}

struct Task {
    Pos goal;
    friend bool operator==(const Task&, const Task&) = default;
};

/// Every empty cell except the start, row-major.
inline std::vector<Task> valid_goals(const Map& m) {
    std::vector<Task> out;
    for (std::size_t i = 0; i < m.num_cells(); ++i) {
        const Pos p = m.pos_of(i);
        if (m.cell(p) == Cell::Empty && p != m.start()) out.push_back({p});
    }
    return out;
}

struct SolverParams {
    double gamma = 0.99;
    int horizon = 50;

    void validate() const {
        if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must lie in (0, 1]");
        if (horizon < 1) throw std::invalid_argument("horizon must be positive");
    }
};

struct StepResult {
    State next;
    double reward = 0.0;
    bool done = false;
    bool reached_goal = false;
    bool hit_lava = false;
};

/// Position after taking `a`, ignoring goals and lava; walls and the border block.
inline Pos moved(const Map& m, Pos p, Dir d, Action a) {
    if (a != Action::Forward) return p;
    const Pos n = ahead(p, d);
    if (!m.in_bounds(n) || m.cell(n) == Cell::Wall) return p;
    return n;
}

inline StepResult step(const Map& m, const State& s, Action a, const Task& task, int horizon) {
    StepResult r;
    r.next = s;
    r.next.t = s.t + 1;
    switch (a) {
        case Action::TurnLeft: r.next.dir = turn_left(s.dir); break;
        case Action::TurnRight: r.next.dir = turn_right(s.dir); break;
        case Action::Forward: {
            const Pos n = moved(m, s.pos, s.dir, a);
            if (n != s.pos) {
                r.next.pos = n;
                if (n == task.goal) {
                    r.reward = 1.0;
                    r.reached_goal = true;
                    r.done = true;
                } else if (m.cell(n) == Cell::Lava) {
                    r.hit_lava = true;
                    r.done = true;
                }
            }
            break;
        }
    }
    if (r.next.t >= horizon) r.done = true;
    return r;
}

/// Dense goal-conditioned Q over (cell, heading, action). Entries for walls,
/// lava and the goal cell itself stay 0.
class QTable {
public:
    QTable(const Map& m, std::vector<Task> goals, SolverParams params)
        : width_(m.width()), height_(m.height()), goals_(std::move(goals)), params_(params),
          hash_(map_hash(m)), values_(goals_.size() * num_states() * kActions.size(), 0.0) {}

    std::size_t num_states() const { return static_cast<std::size_t>(width_ * height_) * 4; }
    std::size_t num_goals() const { return goals_.size(); }
    const std::vector<Task>& goals() const { return goals_; }
    const SolverParams& params() const { return params_; }
    std::uint64_t hash() const { return hash_; }
    int width() const { return width_; }
    int height() const { return height_; }

    std::size_t state_index(Pos p, Dir d) const {
        return (static_cast<std::size_t>(p.row) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(p.col)) * 4 +
               static_cast<std::size_t>(d);
    }

    double at(std::size_t state, Action a, std::size_t goal) const { return values_[slot(state, a, goal)]; }
    double& at(std::size_t state, Action a, std::size_t goal) { return values_[slot(state, a, goal)]; }

    std::vector<double>& raw() { return values_; }
    const std::vector<double>& raw() const { return values_; }

private:
    std::size_t slot(std::size_t state, Action a, std::size_t goal) const {
        return (goal * num_states() + state) * kActions.size() + static_cast<std::size_t>(a);
    }

    int width_;
    int height_;
    std::vector<Task> goals_;
    SolverParams params_;
    std::uint64_t hash_;
    std::vector<double> values_;
};

/// Runs `horizon` Bellman backups per goal starting from Q = 0, so every entry
/// is the optimal value with at most `horizon` steps left.
inline QTable value_iteration(const Map& m, const SolverParams& params) {
    params.validate();
    QTable table(m, valid_goals(m), params);
    const std::size_t ns = table.num_states();

    struct Edge {
        std::size_t next;
        std::size_t next_cell;
        bool moved;
    };
    std::vector<Edge> edges(ns * kActions.size());
    std::vector<bool> live(ns, false);
    for (std::size_t ci = 0; ci < m.num_cells(); ++ci) {
        const Pos p = m.pos_of(ci);
        if (m.cell(p) != Cell::Empty) continue;
        for (int d = 0; d < 4; ++d) {
            const Dir dir = static_cast<Dir>(d);
            const std::size_t si = table.state_index(p, dir);
            live[si] = true;
            for (const Action a : kActions) {
                Dir nd = dir;
                if (a == Action::TurnLeft) nd = turn_left(dir);
                if (a == Action::TurnRight) nd = turn_right(dir);
                const Pos np = moved(m, p, dir, a);
                edges[si * 3 + static_cast<std::size_t>(a)] = {table.state_index(np, nd), m.index(np), np != p};
            }
        }
    }

    std::vector<double> v(ns), v_next(ns);
    for (std::size_t g = 0; g < table.num_goals(); ++g) {
        const std::size_t goal_cell = m.index(table.goals()[g].goal);
        std::fill(v.begin(), v.end(), 0.0);
        for (int k = 0; k < params.horizon; ++k) {
            for (std::size_t si = 0; si < ns; ++si) {
                v_next[si] = 0.0;
                if (!live[si] || si / 4 == goal_cell) continue;
                double best = 0.0;
                for (const Action a : kActions) {
                    const Edge& e = edges[si * 3 + static_cast<std::size_t>(a)];
                    double q = 0.0;
                    if (e.moved && e.next_cell == goal_cell) {
                        q = 1.0;
                    } else if (e.moved && m.cell(m.pos_of(e.next_cell)) == Cell::Lava) {
                        q = 0.0;
                    } else {
                        q = params.gamma * v[e.next];
                    }
                    table.at(si, a, g) = q;
                    best = std::max(best, q);
                }
                v_next[si] = best;
            }
            std::swap(v, v_next);
        }
    }
    return table;
}

/// Goal-conditioned Q lookup over a solved table. The time counter of a state
/// is ignored: evaluation uses the stationary horizon-step values.
class QSource {
public:
    using state_type = State;
    using action_type = Action;

    QSource(const Map& m, const QTable& t) : map_(&m), table_(&t) {
        if (t.hash() != map_hash(m)) throw std::invalid_argument("Q table was solved for a different map");
    }

    std::size_t num_tasks() const { return table_->num_goals(); }
    double q(const State& s, Action a, TaskId t) const {
        return table_->at(table_->state_index(s.pos, s.dir), a, t.index);
    }
    Action greedy(const State& s, TaskId t) const {
        Action best = kActions[0];
        double bv = q(s, best, t);
        for (std::size_t i = 1; i < kActions.size(); ++i) {
            const double v = q(s, kActions[i], t);
            if (v > bv) {
                bv = v;
                best = kActions[i];
            }
        }
        return best;
    }
    std::vector<Action> actions(const State&) const { return {kActions.begin(), kActions.end()}; }

    const Map& map() const { return *map_; }
    const QTable& table() const { return *table_; }

private:
    const Map* map_;
    const QTable* table_;
};

}  // namespace evoi::grid
