#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "cxhg/labels.hpp"
#include "cxhg/raster.hpp"
#include "cxhg/tensor.hpp"

namespace cxhg {

/// f32 image patch (values in [0, 1]) with labels of the same extent.
struct SegmentationSample {
  RasterImage image;
  LabelMap labels;
};

/// Non-overlapping tiling of a width x height raster into patch x patch windows.
struct PatchGrid {
  std::size_t cols = 0;
  std::size_t rows = 0;
  std::size_t patch = 0;

  std::size_t count() const { return cols * rows; }
  /// Tile (row, col) of source pixel (y, x) and its position inside that tile.
  struct Location {
    std::size_t row, col, local_y, local_x;
  };
  Location locate(std::size_t y, std::size_t x) const {
    return {y / patch, x / patch, y % patch, x % patch};
  }
};

PatchGrid patch_grid(std::size_t width, std::size_t height, std::size_t patch);

/// Row-major tile order. Images are padded with 0 and scaled by 1/255 when
/// stored as u8; labels are padded with kIgnoreIndex.
std::vector<SegmentationSample> extract_patches(const RasterImage& image, const LabelMap& labels,
                                                std::size_t patch);

/// Train fraction num/den.
struct Ratio {
  std::uint64_t num = 9;
  std::uint64_t den = 10;
};

/// (floor(n * ratio), remainder).
std::pair<std::size_t, std::size_t> split_sizes(std::size_t n, Ratio ratio = {});

/// Seeded shuffle of 0..n-1, then the first floor(n * ratio) indices train.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n,
                                                                            Ratio ratio,
                                                                            std::uint64_t seed);

template <class T>
std::pair<std::vector<T>, std::vector<T>> split(const std::vector<T>& samples, Ratio ratio,
                                                std::uint64_t seed) {
  auto [train_idx, val_idx] = split_indices(samples.size(), ratio, seed);
  std::pair<std::vector<T>, std::vector<T>> out;
  for (auto i : train_idx) out.first.push_back(samples[i]);
  for (auto i : val_idx) out.second.push_back(samples[i]);
  return out;
}

/// Stacks samples[indices] into an image tensor (B, C, P, P) and labels.
std::pair<Tensor, Labels> make_batch(const std::vector<SegmentationSample>& samples,
                                     const std::vector<std::size_t>& indices,
                                     DType dtype = DType::f32);

/// Inverse of extract_patches for label predictions: patch labels in tile
/// order back to a width x height map (padding cropped).
LabelMap stitch_labels(const std::vector<LabelMap>& patches, std::size_t width,
                       std::size_t height);

}  // namespace cxhg
