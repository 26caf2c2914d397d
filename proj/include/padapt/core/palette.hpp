#pragma once

#include <array>
#include <cstdint>
#include <cstdio>
#include <string>

namespace padapt {

using Rgb8 = std::array<std::uint8_t, 3>;

/// Display color of a class id; the first entries match the ToyShapes hues.
inline Rgb8 class_color(std::size_t k) {
    static constexpr Rgb8 table[] = {{64, 64, 64},   {220, 40, 40},  {40, 180, 60},  {50, 90, 220},
                                     {230, 200, 40}, {180, 60, 200}, {40, 200, 200}, {240, 140, 40}};
    return table[k % (sizeof table / sizeof table[0])];
}

inline std::string hex_color(const Rgb8& c) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c[0], c[1], c[2]);
    return buf;
}

}  // namespace padapt
