#include "cxhg/render.hpp"

#include <fmt/format.h>

#include "binary_io.hpp"
#include "cxhg/rng.hpp"

namespace cxhg {

namespace {
constexpr std::array<Rgb, 6> kPalette{{
    {255, 255, 255},
    {0, 0, 255},
    {0, 255, 255},
    {0, 255, 0},
    {255, 255, 0},
    {255, 0, 0},
}};
}  // namespace

Rgb class_color(std::uint8_t class_id) {
  if (class_id < kPalette.size()) return kPalette[class_id];
  if (class_id == kIgnoreIndex) return {0, 0, 0};
  const std::uint64_t v = SplitMix64(class_id).next();
  return {static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v >> 8),
          static_cast<std::uint8_t>(v >> 16)};
}

std::vector<std::uint8_t> encode_ppm(const LabelMap& labels) {
  io::ByteWriter w;
  w.bytes(fmt::format("P6\n{} {}\n255\n", labels.width, labels.height));
  for (auto id : labels.data) {
    const Rgb c = class_color(id);
    w.raw(c);
  }
  return std::move(w.buffer());
}

void write_ppm(const LabelMap& labels, const std::string& path) {
  io::write_file(path, encode_ppm(labels));
}

}  // namespace cxhg
