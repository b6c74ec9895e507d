#pragma once

// The shipped GridWorld layouts. Byte-identical copies live in maps/*.txt.
//   empty  8x8, no obstacles
//   maze   8x8, wall corridors with lava pockets
//   rooms  15x15, four rooms joined by single-cell doorways, lava next to the doors

#include <array>
#include <optional>
#include <string_view>

namespace evoi::grid {

struct ShippedMap {
    std::string_view name;
    std::string_view text;
};

inline constexpr std::string_view kEmptyMap =
    R"MAP(>.......
........
........
........
........
........
........
........
)MAP";

inline constexpr std::string_view kMazeMap =
    R"MAP(>..#....
.#.#.##.
.#...#..
.####.L.
......#.
L##.#.#.
....#...
.#L...#.
)MAP";

inline constexpr std::string_view kRoomsMap =
    R"MAP(>......#.......
.......#.......
.......#.......
...............
.......#.......
.......#.......
.......L.......
###.####LL##.##
.......#.......
.......#.......
.......L.......
...............
.......#.......
.......#.......
.......#.......
)MAP";

inline constexpr std::array<ShippedMap, 3> kShippedMaps{{
    {"empty", kEmptyMap},
    {"maze", kMazeMap},
    {"rooms", kRoomsMap},
}};

inline std::optional<std::string_view> shipped_map(std::string_view name) {
    for (const auto& m : kShippedMaps)
        if (m.name == name) return m.text;
    return std::nullopt;
}

}  // namespace evoi::grid
