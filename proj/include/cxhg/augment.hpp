#pragma once

#include <cstddef>
#include <cstdint>

#include "cxhg/patches.hpp"

namespace cxhg {

/// One draw of the training-time augmentation. Offsets are the crop origin in
/// the scaled sample; negative values place the content away from the top-left
/// corner, and anything outside the scaled sample is padding.
struct AugmentParams {
  bool flip_h = false;
  bool flip_v = false;
  double scale = 1.0;
  long offset_y = 0;
  long offset_x = 0;
};

inline constexpr double kMinScale = 0.5;
inline constexpr double kMaxScale = 2.0;

/// Scaled extent of one axis: max(1, round(extent * scale)).
std::size_t scaled_extent(std::size_t extent, double scale);

/// Flip h (p = 0.5), flip v (p = 0.5), scale ~ U[0.5, 2], then offsets
/// uniform over every valid crop position, in that draw order.
AugmentParams draw_augment(std::size_t height, std::size_t width, std::size_t out_size,
                           std::uint64_t seed);

/// Image resampled bilinearly, labels by nearest neighbour; image padding 0,
/// label padding kIgnoreIndex.
SegmentationSample apply_augment(const SegmentationSample& sample, const AugmentParams& params,
                                 std::size_t out_size);

SegmentationSample augment(const SegmentationSample& sample, std::uint64_t seed,
                           std::size_t out_size);

}  // namespace cxhg
