#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cxhg/raster.hpp"

namespace cxhg {

using Rgb = std::array<std::uint8_t, 3>;

/// 0 white, 1 blue, 2 cyan, 3 green, 4 yellow, 5 red. Classes >= 6 take the
/// low three bytes (r, g, b) of the first SplitMix64 draw seeded with the class
/// id; kIgnoreIndex is black.
Rgb class_color(std::uint8_t class_id);

/// Binary P6: "P6\n<w> <h>\n255\n" then row-major RGB triples.
std::vector<std::uint8_t> encode_ppm(const LabelMap& labels);
void write_ppm(const LabelMap& labels, const std::string& path);

}  // namespace cxhg
