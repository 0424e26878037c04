#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "cxhg/raster.hpp"

namespace cxhg {

/// Object families painted by the generator. Class c >= 1 draws the family
/// at index (c - 1) % 5.
enum class ShapeKind { large_rect, thin_bar, disc, small_rect, small_disc };

ShapeKind shape_kind(std::size_t class_id);

/// Synthetic aerial scene. densities[c] is the expected object count of class
/// c per 256x256 of scene area (index 0, the background, is ignored).
struct SceneSpec {
  std::size_t num_classes = 6;
  std::size_t channels = 5;
  std::uint32_t width = 256;
  std::uint32_t height = 256;
  std::vector<double> densities{0.0, 5.0, 4.0, 10.0, 12.0, 8.0};
  double noise_sigma = 0.05;
  /// Multiplier on the density of every small-rectangle ("car") class.
  double rare_class_rate = 1.0;

  void validate() const;
};

/// Base intensity of class `c` in channel `ch`, in [0, 1].
double class_intensity(std::size_t class_id, std::size_t channel);

/// u8 image and labels; a pure function of (spec, seed).
std::pair<RasterImage, LabelMap> synth_generate(const SceneSpec& spec, std::uint64_t seed);

/// Pixel count per class (ignore pixels are skipped).
std::vector<std::uint64_t> class_census(const LabelMap& labels, std::size_t num_classes);

}  // namespace cxhg
