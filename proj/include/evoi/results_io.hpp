#pragma once

// CSV and trace persistence. Numbers are written with %.17g so files round-trip
// exactly and are byte-stable for identical inputs.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "evoi/errors.hpp"
#include "evoi/harness.hpp"

namespace evoi {

inline constexpr const char* kEpisodeCsvHeader = "method,param,seed,score,n_queries,n_repetitive,steps";
inline constexpr const char* kAggregateCsvHeader =
    "method,param,episodes,mean_score,se_score,mean_queries,se_queries,mean_repetitive";

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string episodes_csv(std::vector<EpisodeRow> rows) {
    std::stable_sort(rows.begin(), rows.end(), [](const EpisodeRow& a, const EpisodeRow& b) {
        return std::tie(a.method, a.param, a.seed) < std::tie(b.method, b.param, b.seed);
    });
    std::string out = std::string(kEpisodeCsvHeader) + "\n";
    for (const auto& r : rows) {
        out += std::string(to_string(r.method)) + "," + format_double(r.param) + "," + std::to_string(r.seed) + "," +
               format_double(r.score) + "," + std::to_string(r.n_queries) + "," + std::to_string(r.n_repetitive) +
               "," + std::to_string(r.steps) + "\n";
    }
    return out;
}

inline std::string aggregate_csv(std::vector<SweepRow> rows) {
    std::stable_sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
        return std::tie(a.method, a.param) < std::tie(b.method, b.param);
    });
    std::string out = std::string(kAggregateCsvHeader) + "\n";
    for (const auto& r : rows) {
        out += std::string(to_string(r.method)) + "," + format_double(r.param) + "," + std::to_string(r.episodes) +
               "," + format_double(r.mean_score) + "," + format_double(r.se_score) + "," +
               format_double(r.mean_queries) + "," + format_double(r.se_queries) + "," +
               format_double(r.mean_repetitive) + "\n";
    }
    return out;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + path.string() + " for writing");
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!f) throw IoError("failed writing " + path.string());
}

/// Writes `<path>` with one row per episode and `<stem>.aggregate.csv` next to
/// it with one row per parameter value.
inline void write_results(const SweepTable& table, const std::filesystem::path& path) {
    write_text(path, episodes_csv(table.episodes));
    auto agg = path;
    agg.replace_filename(path.stem().string() + ".aggregate.csv");
    write_text(agg, aggregate_csv(table.rows));
}

inline EpisodeRow to_row(const EpisodeConfig& cfg, const EpisodeResult& r) {
    return {cfg.method.kind, cfg.method.param, cfg.seed, r.score, r.n_queries, r.n_repetitive, r.steps};
}

inline nlohmann::json trace_json(const EpisodeResult& r) {
    nlohmann::json events = nlohmann::json::array();
    for (const auto& e : r.trace) {
        nlohmann::json j{{"step", e.step}, {"state", e.state}, {"kind", e.kind}, {"entropy", e.entropy}};
        if (e.kind == "act") {
            j["action"] = e.action;
        } else {
            j["options"] = {e.option1, e.option2};
            j["response"] = e.response;
        }
        events.push_back(std::move(j));
    }
    return {{"score", r.score},     {"n_queries", r.n_queries}, {"n_repetitive", r.n_repetitive},
            {"steps", r.steps},     {"true_task", r.true_task}, {"success", r.success},
            {"trace", std::move(events)}};
}

}  // namespace evoi
