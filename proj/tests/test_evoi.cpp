#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "evoi/evoi.hpp"
#include "evoi/pointgoal.hpp"
#include "oracles.hpp"

using namespace evoi;
using Catch::Approx;

namespace {

double lib_evoi(const std::vector<double>& w, const oracle::TableQ& q, int s, int a1, int a2, double beta) {
    const auto acts = q.actions(s);
    return evoi_of_pair(TaskBelief::from_weights(w), s, ActionPair<int>{a1, a2}, q, ResponseModel{beta},
                        std::span<const int>(acts));
}

}  // namespace

TEST_CASE("max-inside-expectation form is identically zero") {
    std::mt19937_64 rng(21);
    for (int i = 0; i < 100; ++i) {
        const std::size_t tasks = 1 + rng() % 6;
        const auto q = oracle::random_table(rng, tasks, 2, 4);
        const auto w = oracle::random_simplex(rng, tasks);
        const int a = static_cast<int>(rng() % 4);
        const int b = static_cast<int>((a + 1 + rng() % 3) % 4);
        CHECK(std::abs(oracle::evoi_max_inside(w, q, 1, a, b, 10.0)) <= 1e-9);
    }
}

TEST_CASE("EVOI matches response enumeration") {
    std::mt19937_64 rng(22);
    for (double beta : {0.1, 1.0, 10.0}) {
        for (std::size_t tasks = 1; tasks <= 5; ++tasks) {
            for (int rep = 0; rep < 60; ++rep) {
                const auto q = oracle::random_table(rng, tasks, 3, 3);
                const auto w = oracle::random_simplex(rng, tasks);
                const int s = static_cast<int>(rng() % 3);
                for (int a = 0; a < 3; ++a)
                    for (int b = 0; b < 3; ++b) {
                        if (a == b) continue;
                        REQUIRE(std::abs(lib_evoi(w, q, s, a, b, beta) - oracle::evoi(w, q, s, a, b, beta)) <= 1e-9);
                    }
            }
        }
    }
}

TEST_CASE("EVOI is non-negative and symmetric") {
    std::mt19937_64 rng(23);
    for (int i = 0; i < 1000; ++i) {
        const std::size_t tasks = 1 + rng() % 8;
        const auto q = oracle::random_table(rng, tasks, 1, 4);
        const auto w = oracle::random_simplex(rng, tasks);
        const double beta = std::exp(std::uniform_real_distribution<double>(-3.0, 5.0)(rng));
        const int a = static_cast<int>(rng() % 4);
        const int b = static_cast<int>((a + 1 + rng() % 3) % 4);
        const double v = lib_evoi(w, q, 0, a, b, beta);
        REQUIRE(v >= -1e-10);
        REQUIRE(std::abs(v - lib_evoi(w, q, 0, b, a, beta)) <= 1e-12);
    }
}

TEST_CASE("EVOI is zero for a point mass and shift invariant") {
    std::mt19937_64 rng(24);
    for (int i = 0; i < 200; ++i) {
        const std::size_t tasks = 2 + rng() % 4;
        auto q = oracle::random_table(rng, tasks, 1, 3);
        std::vector<double> w(tasks, 0.0);
        w[rng() % tasks] = 1.0;
        CHECK(lib_evoi(w, q, 0, 0, 1, 10.0) == 0.0);

        const auto soft = oracle::random_simplex(rng, tasks);
        const double before = lib_evoi(soft, q, 0, 0, 2, 3.0);
        for (auto& task : q.values)
            for (auto& v : task[0]) v += 0.37;
        CHECK(lib_evoi(soft, q, 0, 0, 2, 3.0) == Approx(before).margin(1e-12));
    }
}

TEST_CASE("EVOI vanishes when beta is zero") {
    std::mt19937_64 rng(25);
    const auto q = oracle::random_table(rng, 4, 1, 3);
    CHECK(lib_evoi(oracle::random_simplex(rng, 4), q, 0, 0, 1, 0.0) == Approx(0.0).margin(1e-15));
}

TEST_CASE("discrete selection scans every pair and thresholds strictly") {
    // Two goals: action 0 is right for task 0, action 1 for task 1, action 2 is
    // mediocre for both.
    oracle::TableQ q;
    q.values = {{{1.0, 0.0, 0.4}}, {{0.0, 1.0, 0.4}}};
    const auto b = TaskBelief::uniform(2);
    const ResponseModel m{10.0};
    auto d = select_query_discrete(b, 0, q, m, QuerierConfig{1e-3});
    REQUIRE(d.asks());
    CHECK(d.considered == 3);
    CHECK(d.pair->same_question(ActionPair<int>{0, 1}));
    CHECK(d.score == Approx(oracle::evoi({0.5, 0.5}, q, 0, 0, 1, 10.0)).epsilon(1e-12));

    CHECK_FALSE(select_query_discrete(b, 0, q, m, QuerierConfig{d.score}).asks());
    CHECK_FALSE(select_query_discrete(TaskBelief::point_mass(2, TaskId{0}), 0, q, m, QuerierConfig{0.0}).asks());
}

TEST_CASE("higher expected value is presented first") {
    oracle::TableQ q;
    q.values = {{{0.2, 0.9}}, {{0.8, 0.1}}};
    const std::vector<double> w{0.7, 0.3};
    const auto d = select_query_discrete(TaskBelief::from_weights(w), 0, q, ResponseModel{10.0}, QuerierConfig{0.0});
    REQUIRE(d.asks());
    CHECK(d.pair->first == 1);
    CHECK(d.pair->second == 0);
}

TEST_CASE("continuous selection on the point-goal source") {
    const pg::Params p;
    const pg::QSource q(p, pg::grid_tasks(4, p.arena));
    const auto b = TaskBelief::uniform(4);
    const pg::State s{0.0, 0.0};
    Rng rng = make_stream(5, 2);
    const auto d = select_query_continuous(b, s, q, ResponseModel{10.0}, QuerierConfig{1e-3, 16}, rng);
    CHECK(d.considered == 16);
    REQUIRE(d.asks());
    CHECK(d.pair->first.norm() <= p.a_max + 1e-12);
    CHECK_FALSE(d.pair->first == d.pair->second);
    CHECK(expected_q(b, s, d.pair->first, q) >= expected_q(b, s, d.pair->second, q));

    Rng again = make_stream(5, 2);
    const auto d2 = select_query_continuous(b, s, q, ResponseModel{10.0}, QuerierConfig{1e-3, 16}, again);
    CHECK(*d2.pair == *d.pair);
    CHECK(d2.score == d.score);

    Rng r3 = make_stream(5, 2);
    CHECK_FALSE(select_query_continuous(TaskBelief::point_mass(4, TaskId{2}), s, q, ResponseModel{10.0},
                                        QuerierConfig{0.0, 16}, r3)
                    .asks());
}

TEST_CASE("continuous acting averages the per-task greedy actions") {
    const pg::Params p;
    const pg::QSource q(p, pg::grid_tasks(4, p.arena));
    const std::vector<double> w{1.0, 0.0, 0.0, 0.0};
    const pg::State s{0.0, 0.0};
    const auto a = act(TaskBelief::from_weights(w), s, q);
    CHECK(a == q.greedy(s, TaskId{0}));
    const auto mixed = act(TaskBelief::uniform(4), s, q);
    CHECK(mixed.norm() == Approx(0.0).margin(1e-12));
}

TEST_CASE("two-goal EVOI examples") {
    oracle::TableQ q;
    q.values = {{{1.0, 0.0}}, {{0.0, 1.0}}};
    const std::vector<double> u{0.5, 0.5};
    CHECK(lib_evoi(u, q, 0, 0, 1, 1e4) == Approx(0.5).epsilon(1e-12));
    // Either answer leaves sigmoid(10) on the matching goal.
    CHECK(lib_evoi(u, q, 0, 0, 1, 10.0) == Approx(1.0 / (1.0 + std::exp(-10.0)) - 0.5).epsilon(1e-12));
    CHECK(lib_evoi(u, q, 0, 0, 1, 10.0) == Approx(oracle::evoi(u, q, 0, 0, 1, 10.0)).epsilon(1e-12));

    const auto m = response_marginals(TaskBelief::uniform(2), 0, ActionPair<int>{0, 1}, q, ResponseModel{10.0});
    CHECK(m.first == Approx(0.5).epsilon(1e-12));
    const auto pm = response_marginals(TaskBelief::point_mass(2, TaskId{0}), 0, ActionPair<int>{0, 1}, q, ResponseModel{10.0});
    CHECK(pm.first == Approx(1.0 / (1.0 + std::exp(-10.0))).epsilon(1e-12));

    oracle::TableQ flat;
    flat.values = {{{0.3, 0.7}}, {{0.3, 0.7}}};
    const auto fm = response_marginals(TaskBelief::uniform(2), 0, ActionPair<int>{0, 1}, flat, ResponseModel{0.0});
    CHECK(fm.first == 0.5);
}

TEST_CASE("continuous EVOI of the two greedy actions matches enumeration") {
    const pg::Params p;
    const pg::QSource q(p, {pg::Task{{0.6, 0.0}}, pg::Task{{-0.6, 0.0}}});
    const pg::State s{0.0, 0.0};
    const auto b = TaskBelief::uniform(2);
    const auto g0 = q.greedy(s, TaskId{0}), g1 = q.greedy(s, TaskId{1});
    const auto cands = value_candidates(b, s, q);
    REQUIRE(cands.size() == 3);
    const double v = evoi_of_pair(b, s, ActionPair<pg::Vec2>{g0, g1}, q, ResponseModel{10.0},
                                  std::span<const pg::Vec2>(cands));

    // Enumerate both answers with plain arithmetic over the same candidates.
    auto qv = [&](int task, pg::Vec2 a) {
        const pg::Vec2 goal = task == 0 ? pg::Vec2{0.6, 0.0} : pg::Vec2{-0.6, 0.0};
        const pg::Vec2 next{s.x + a.x, s.y + a.y};
        const double d = std::hypot(next.x - goal.x, next.y - goal.y);
        double vnext = 0.0, disc = 1.0;
        for (int k = 1; d - k * 0.2 > 0; ++k, disc *= 0.9) vnext -= disc * (d - k * 0.2);
        return -d + 0.9 * vnext;
    };
    auto value = [&](double w0) {
        double best = -1e300;
        for (const auto& a : cands) best = std::max(best, w0 * qv(0, a) + (1 - w0) * qv(1, a));
        return best;
    };
    double total = 0.0;
    for (int r = 0; r < 2; ++r) {
        const pg::Vec2 c = r == 0 ? g0 : g1, rj = r == 0 ? g1 : g0;
        const double l0 = oracle::p_choose(qv(0, c), qv(0, rj), 10.0), l1 = oracle::p_choose(qv(1, c), qv(1, rj), 10.0);
        const double pr = 0.5 * l0 + 0.5 * l1;
        total += pr * value(0.5 * l0 / pr);
    }
    CHECK(std::abs(v - (total - value(0.5))) <= 1e-6);
    CHECK(v > 0.0);

    Rng rng = make_stream(1, 2);
    const auto one = select_query_continuous(b, s, q, ResponseModel{10.0}, QuerierConfig{0.0, 1}, rng);
    CHECK(one.considered == 1);
}

TEST_CASE("discrete acting breaks ties toward the first action") {
    oracle::TableQ q;
    q.values = {{{0.3, 0.6, 0.6}}};
    CHECK(act(TaskBelief::uniform(1), 0, q) == 1);
    CHECK_FALSE(select_query_discrete(TaskBelief::uniform(1), 0, q, ResponseModel{10.0}, QuerierConfig{1e300}).asks());
}
