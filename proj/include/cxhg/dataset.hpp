#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "cxhg/raster.hpp"
#include "cxhg/synth.hpp"

namespace cxhg {

/// A dataset root holds images/NNNN.cxrs, labels/NNNN.cxlb and manifest.txt
/// (one sample id per line).
struct Tile {
  std::string id;
  RasterImage image;
  LabelMap labels;
};

std::string tile_id(std::size_t index);

/// Tile i is synth_generate(spec, derive_seed(seed, i)). Returns the pixel
/// census per class over all tiles.
std::vector<std::uint64_t> generate_dataset(const std::string& root, const SceneSpec& spec,
                                            std::size_t tiles, std::uint64_t seed);

std::vector<std::string> read_manifest(const std::string& root);

/// Every tile listed in the manifest, in manifest order. Throws Error(io) for
/// a missing or empty dataset.
std::vector<Tile> load_dataset(const std::string& root);

}  // namespace cxhg
