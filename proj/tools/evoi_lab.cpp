// evoi_lab: solve maps, run single episodes and threshold sweeps, serve live sessions.

#include <csignal>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include <pthread.h>

#include <CLI11.hpp>

#include "evoi/harness.hpp"
#include "evoi/qtable_io.hpp"
#include "evoi/results_io.hpp"
#include "evoi/server.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;

struct EpisodeArgs {
    std::string env = "empty";
    std::string method = "evoi";
    double param = 1e-3;
    double beta = 10.0;
    std::string expert = "stochastic";
    std::size_t n_samples = 16;
    double gamma = 0.99;
    int horizon = 50;
    std::size_t pg_tasks = 4;

    void add_to(CLI::App& app) {
        app.add_option("--env", env, "Shipped map name, map file, or 'pointgoal'")->capture_default_str();
        app.add_option("--method", method, "evoi, random or uncertainty")->capture_default_str();
        app.add_option("--param", param, "Query threshold or query probability")->capture_default_str();
        app.add_option("--beta", beta, "Expert rationality")->capture_default_str();
        app.add_option("--expert", expert, "stochastic or deterministic")->capture_default_str();
        app.add_option("--n-samples", n_samples, "Sampled action pairs for continuous actions")->capture_default_str();
        app.add_option("--gamma", gamma, "Grid discount")->capture_default_str();
        app.add_option("--horizon", horizon, "Grid horizon")->capture_default_str();
        app.add_option("--pg-tasks", pg_tasks, "Point-goal task count")->capture_default_str();
    }

    evoi::EpisodeConfig config() const {
        evoi::EpisodeConfig c;
        c.env = env;
        c.method = {evoi::parse_method(method), param, n_samples};
        c.beta = beta;
        if (expert == "stochastic")
            c.expert = evoi::ExpertMode::Stochastic;
        else if (expert == "deterministic")
            c.expert = evoi::ExpertMode::Deterministic;
        else
            throw evoi::ConfigError("unknown expert mode '" + expert + "' (expected stochastic or deterministic)");
        c.solver = {gamma, horizon};
        c.pg_tasks = pg_tasks;
        return c;
    }
};

int cmd_solve(const std::string& map, const evoi::grid::SolverParams& params, const std::string& out) {
    params.validate();
    const evoi::grid::Map m = evoi::load_map(map);
    const char* cache = std::getenv("EVOI_CACHE_DIR");
    const evoi::grid::QTable t = out.empty() && cache && *cache ? evoi::grid::solve_cached(m, params, cache)
                                                                : evoi::grid::value_iteration(m, params);
    if (!out.empty()) evoi::grid::save_qtable(t, out);
    std::cout << "solved " << map << ": " << m.width() << "x" << m.height() << ", "
              << evoi::grid::valid_goals(m).size() << " goals\n";
    return 0;
}

int cmd_episode(const EpisodeArgs& args, std::uint64_t seed, std::optional<std::size_t> task, const std::string& trace) {
    evoi::EpisodeConfig cfg = args.config();
    cfg.seed = seed;
    cfg.task = task;
    evoi::Lab lab = evoi::Lab::from_environment();
    const evoi::EpisodeResult r = lab.run(cfg);
    std::cout << evoi::episodes_csv({evoi::to_row(cfg, r)});
    if (!trace.empty()) evoi::write_text(trace, evoi::trace_json(r).dump(2) + "\n");
    return 0;
}

int cmd_sweep(const EpisodeArgs& args, double start, double stop, double step_log, std::size_t episodes,
              std::uint64_t seed_base, const std::string& out) {
    const evoi::EpisodeConfig base = args.config();
    evoi::Lab lab = evoi::Lab::from_environment();
    const auto table = evoi::sweep_pareto(lab, base, {evoi::log_grid(start, stop, step_log), episodes, seed_base});
    if (!out.empty()) evoi::write_results(table, out);
    std::cout << evoi::aggregate_csv(table.rows);
    return 0;
}

int cmd_serve(std::uint16_t port, const std::string& address, const std::string& map) {
    evoi::session::SessionConfig defaults;
    defaults.env = map;
    evoi::load_map(map);  // fail early on a bad default map

    // Handle SIGINT/SIGTERM on a dedicated thread so shutdown runs outside
    // signal context.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    evoi::session::SessionManager mgr(evoi::Lab::from_environment(), defaults);
    evoi::session::Server server(mgr, port, address);
    std::thread waiter([&] {
        int sig = 0;
        sigwait(&signals, &sig);
        server.stop();
    });
    std::cout << "listening on " << address << ":" << server.port() << std::endl;
    server.run();
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Querying experts by expected value of information"};
    app.set_config("--config", "", "TOML config file mirroring the flags");
    app.require_subcommand(1);

    auto* solve = app.add_subcommand("solve", "Solve a grid map and store its Q table");
    std::string solve_map, solve_out;
    evoi::grid::SolverParams solve_params;
    solve->add_option("map", solve_map, "Shipped map name or map file")->required();
    solve->add_option("--gamma", solve_params.gamma, "Discount")->capture_default_str();
    solve->add_option("--horizon", solve_params.horizon, "Horizon")->capture_default_str();
    solve->add_option("--out", solve_out, "Q table output file (default: the cache directory)");

    auto* episode = app.add_subcommand("episode", "Run one episode and print its result row");
    EpisodeArgs ep_args;
    std::uint64_t ep_seed = 0;
    std::optional<std::size_t> ep_task;
    std::string ep_trace;
    ep_args.add_to(*episode);
    episode->add_option("--seed", ep_seed, "Random seed")->capture_default_str();
    episode->add_option("--task", ep_task, "True task index (default: drawn from the prior)");
    episode->add_option("--trace", ep_trace, "Write the episode trace as JSON");

    auto* sweep = app.add_subcommand("sweep", "Sweep the method parameter over a log grid");
    EpisodeArgs sw_args;
    double grid_start = 1e-4, grid_stop = 1e-1, grid_step_log = std::log(1.05);
    std::size_t sw_episodes = 200;
    std::uint64_t seed_base = 0;
    std::string sw_out;
    sw_args.add_to(*sweep);
    sweep->add_option("--grid-start", grid_start, "First parameter value")->capture_default_str();
    sweep->add_option("--grid-stop", grid_stop, "Last parameter value")->capture_default_str();
    sweep->add_option("--grid-step-log", grid_step_log, "Step in log space")->capture_default_str();
    sweep->add_option("--episodes", sw_episodes, "Episodes per parameter value")->capture_default_str();
    sweep->add_option("--seed-base", seed_base, "Seed of the first episode")->capture_default_str();
    sweep->add_option("--out", sw_out, "Episode CSV path; the aggregate goes next to it");

    auto* serve = app.add_subcommand("serve", "Serve live sessions over WebSocket");
    std::uint16_t port = 8765;
    std::string address = "127.0.0.1", serve_map = "empty";
    serve->add_option("--port", port, "TCP port (0 picks a free one)")->capture_default_str();
    serve->add_option("--address", address, "Bind address")->capture_default_str();
    serve->add_option("--map", serve_map, "Default map for new sessions")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (*solve) return cmd_solve(solve_map, solve_params, solve_out);
        if (*episode) return cmd_episode(ep_args, ep_seed, ep_task, ep_trace);
        if (*sweep) return cmd_sweep(sw_args, grid_start, grid_stop, grid_step_log, sw_episodes, seed_base, sw_out);
        if (*serve) return cmd_serve(port, address, serve_map);
    } catch (const evoi::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const evoi::IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return kExitIo;
    } catch (const boost::system::system_error& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return kExitIo;
    }
    return 0;
}
