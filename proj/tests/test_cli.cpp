#include <catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out;
};

/// Runs the tool with `args`, capturing stdout; stderr is discarded.
Run lab(const std::string& args) {
    const std::string cmd = std::string(EVOI_LAB_PATH) + " " + args + " 2>/dev/null";
    FILE* p = popen(cmd.c_str(), "r");
    REQUIRE(p != nullptr);
    std::string out;
    char buf[4096];
    while (const std::size_t n = std::fread(buf, 1, sizeof buf, p)) out.append(buf, n);
    const int status = pclose(p);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string read_file(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const auto d = fs::temp_directory_path() / ("evoi_cli_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

}  // namespace

TEST_CASE("episode prints one result row") {
    const auto r = lab("episode --env maze --seed 3 --param 1e-3");
    CHECK(r.code == 0);
    CHECK(r.out.rfind("method,param,seed,score,n_queries,n_repetitive,steps\nevoi,", 0) == 0);
    CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 2);
    CHECK(lab("episode --env maze --seed 3 --param 1e-3").out == r.out);
}

TEST_CASE("episode trace file") {
    const auto dir = scratch("trace");
    const auto r = lab("episode --env empty --method random --param 0.5 --task 10 --trace " + (dir / "t.json").string());
    REQUIRE(r.code == 0);
    const auto j = nlohmann::json::parse(read_file(dir / "t.json"));
    CHECK(j.is_object());
}

TEST_CASE("sweep writes byte-identical files on re-run") {
    const auto dir = scratch("sweep");
    const std::string args =
        "sweep --env empty --method evoi --grid-start 1e-3 --grid-stop 1e-2 --grid-step-log 1.2 --episodes 5 --out ";
    REQUIRE(lab(args + (dir / "a.csv").string()).code == 0);
    REQUIRE(lab(args + (dir / "b.csv").string()).code == 0);
    CHECK(read_file(dir / "a.csv") == read_file(dir / "b.csv"));
    CHECK(read_file(dir / "a.aggregate.csv") == read_file(dir / "b.aggregate.csv"));
    // 1e-3 and 1e-3 * e^1.2 lie in range: two points of five episodes.
    const auto rows = read_file(dir / "a.csv");
    CHECK(std::count(rows.begin(), rows.end(), '\n') == 11);
}

TEST_CASE("solve writes a Q table") {
    const auto dir = scratch("solve");
    const auto r = lab("solve maze --out " + (dir / "maze.bin").string());
    CHECK(r.code == 0);
    CHECK(r.out.find("41 goals") != std::string::npos);
    CHECK(fs::file_size(dir / "maze.bin") > 0);
}

TEST_CASE("config file mirrors the flags") {
    const auto dir = scratch("config");
    std::ofstream(dir / "cfg.toml") << "[episode]\nenv = \"maze\"\nseed = 3\nparam = 1e-3\n";
    const auto from_file = lab("--config " + (dir / "cfg.toml").string() + " episode");
    CHECK(from_file.code == 0);
    CHECK(from_file.out == lab("episode --env maze --seed 3 --param 1e-3").out);
}

TEST_CASE("exit codes") {
    CHECK(lab("--help").code == 0);
    CHECK(lab("").code == 2);
    CHECK(lab("episode --method psychic").code == 2);
    CHECK(lab("episode --env nowhere").code == 2);
    CHECK(lab("episode --method random --param 3").code == 2);
    CHECK(lab("episode --beta -1").code == 2);
    CHECK(lab("episode --expert sleepy").code == 2);
    CHECK(lab("episode --seed notanumber").code == 2);
    CHECK(lab("sweep --grid-start 0").code == 2);
    CHECK(lab("solve").code == 2);

    const auto dir = scratch("exit");
    std::ofstream(dir / "blocker") << "x";
    CHECK(lab("solve maze --out " + (dir / "blocker" / "q.bin").string()).code == 3);
    CHECK(lab("sweep --episodes 1 --grid-start 1 --grid-stop 1 --out " + (dir / "blocker" / "r.csv").string()).code == 3);
}
