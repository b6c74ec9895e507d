#pragma once

// QTable cache files. Layout (all integers and doubles little-endian):
//
//   offset  size  field
//   0       8     magic "EVOIQTB\0"
//   8       4     u32 format version (1)
//   12      8     u64 map hash (FNV-1a of the serialized map)
//   20      8     f64 gamma
//   28      4     i32 horizon
//   32      4     i32 width
//   36      4     i32 height
//   40      4     u32 goal count G
//   44      8*G   goals as (i32 row, i32 col)
//   ...     8*N   f64 values, N = G * width * height * 4 * 3, indexed
//                 [goal][row][col][heading N,E,S,W][action left,right,forward]
//
// docs/qtable_format.md carries the same table.

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "evoi/errors.hpp"
#include "evoi/gridworld.hpp"

namespace evoi::grid {

inline constexpr std::array<char, 8> kQTableMagic{'E', 'V', 'O', 'I', 'Q', 'T', 'B', '\0'};
inline constexpr std::uint32_t kQTableVersion = 1;

using evoi::IoError;

namespace detail {

template <class T>
void put_le(std::string& out, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    std::array<char, sizeof(T)> bytes;
    std::memcpy(bytes.data(), &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    out.append(bytes.data(), bytes.size());
}

template <class T>
T get_le(const std::string& in, std::size_t& off) {
    if (off + sizeof(T) > in.size()) throw IoError("truncated Q table file");
    std::array<char, sizeof(T)> bytes;
    std::memcpy(bytes.data(), in.data() + off, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    off += sizeof(T);
    T value;
    std::memcpy(&value, bytes.data(), sizeof(T));
    return value;
}

}  // namespace detail

inline std::string encode_qtable(const QTable& t) {
    std::string out(kQTableMagic.begin(), kQTableMagic.end());
    detail::put_le<std::uint32_t>(out, kQTableVersion);
    detail::put_le<std::uint64_t>(out, t.hash());
    detail::put_le<double>(out, t.params().gamma);
    detail::put_le<std::int32_t>(out, t.params().horizon);
    detail::put_le<std::int32_t>(out, t.width());
    detail::put_le<std::int32_t>(out, t.height());
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.num_goals()));
    for (const Task& g : t.goals()) {
        detail::put_le<std::int32_t>(out, g.goal.row);
        detail::put_le<std::int32_t>(out, g.goal.col);
    }
    for (double v : t.raw()) detail::put_le<double>(out, v);
    return out;
}

/// Decodes a cache image and checks it was produced for `m` with `params`.
inline QTable decode_qtable(const std::string& bytes, const Map& m, const SolverParams& params) {
    if (bytes.size() < kQTableMagic.size() || !std::equal(kQTableMagic.begin(), kQTableMagic.end(), bytes.begin()))
        throw IoError("not a Q table file");
    std::size_t off = kQTableMagic.size();
    if (detail::get_le<std::uint32_t>(bytes, off) != kQTableVersion) throw IoError("unsupported Q table version");
    const auto hash = detail::get_le<std::uint64_t>(bytes, off);
    const auto gamma = detail::get_le<double>(bytes, off);
    const auto horizon = detail::get_le<std::int32_t>(bytes, off);
    const auto width = detail::get_le<std::int32_t>(bytes, off);
    const auto height = detail::get_le<std::int32_t>(bytes, off);
    if (hash != map_hash(m) || width != m.width() || height != m.height())
        throw IoError("Q table file belongs to a different map");
    if (gamma != params.gamma || horizon != params.horizon)
        throw IoError("Q table file was solved with different parameters");

    const auto n_goals = detail::get_le<std::uint32_t>(bytes, off);
    std::vector<Task> goals(n_goals);
    for (auto& g : goals) {
        g.goal.row = detail::get_le<std::int32_t>(bytes, off);
        g.goal.col = detail::get_le<std::int32_t>(bytes, off);
    }
    if (goals != valid_goals(m)) throw IoError("Q table goal list does not match the map");

    QTable t(m, std::move(goals), params);
    for (double& v : t.raw()) v = detail::get_le<double>(bytes, off);
    if (off != bytes.size()) throw IoError("trailing bytes in Q table file");
    return t;
}

inline void save_qtable(const QTable& t, const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + path.string() + " for writing");
    const std::string bytes = encode_qtable(t);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("failed writing " + path.string());
}

inline QTable load_qtable(const std::filesystem::path& path, const Map& m, const SolverParams& params) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string());
    const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return decode_qtable(bytes, m, params);
}

/// Cache file name for a (map, params) combination.
inline std::string qtable_cache_name(const Map& m, const SolverParams& params) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "qtable-%016llx-g%.6g-h%d.bin", static_cast<unsigned long long>(map_hash(m)),
                  params.gamma, params.horizon);
    return buf;
}

/// Loads from `dir` when a matching file exists, otherwise solves and stores.
inline QTable solve_cached(const Map& m, const SolverParams& params, const std::filesystem::path& dir) {
    const auto path = dir / qtable_cache_name(m, params);
    if (std::filesystem::exists(path)) {
        try {
            return load_qtable(path, m, params);
        } catch (const IoError&) {
            // stale or corrupt; fall through and rebuild
        }
    }
    QTable t = value_iteration(m, params);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    save_qtable(t, path);
    return t;
}

}  // namespace evoi::grid
