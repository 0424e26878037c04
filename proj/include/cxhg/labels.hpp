#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace cxhg {

inline constexpr std::uint8_t kIgnoreIndex = 255;

/// Per-pixel class ids for a batch, laid out (B, H, W) row-major.
struct Labels {
  std::size_t batch = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> ids;

  Labels() = default;
  Labels(std::size_t b, std::size_t h, std::size_t w, std::uint8_t fill = 0)
      : batch(b), height(h), width(w), ids(b * h * w, fill) {}

  std::size_t pixels_per_sample() const { return height * width; }
  std::uint8_t& at(std::size_t b, std::size_t y, std::size_t x) {
    return ids[(b * height + y) * width + x];
  }
  std::uint8_t at(std::size_t b, std::size_t y, std::size_t x) const {
    return ids[(b * height + y) * width + x];
  }
};

}  // namespace cxhg
