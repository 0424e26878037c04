#include "cxhg/dataset.hpp"

#include <filesystem>
#include <fstream>

#include <fmt/format.h>

#include "cxhg/error.hpp"
#include "cxhg/rng.hpp"

namespace cxhg {

namespace fs = std::filesystem;

std::string tile_id(std::size_t index) { return fmt::format("{:04d}", index); }

std::vector<std::uint64_t> generate_dataset(const std::string& root, const SceneSpec& spec,
                                            std::size_t tiles, std::uint64_t seed) {
  spec.validate();
  if (tiles == 0) throw Error(ErrorCode::config, "tiles must be >= 1");
  std::error_code ec;
  fs::create_directories(fs::path(root) / "images", ec);
  if (!ec) fs::create_directories(fs::path(root) / "labels", ec);
  if (ec) throw Error(ErrorCode::io, "cannot create dataset directory " + root + ": " + ec.message());

  std::vector<std::uint64_t> census(spec.num_classes, 0);
  std::string manifest;
  for (std::size_t i = 0; i < tiles; ++i) {
    const std::string id = tile_id(i);
    auto [image, labels] = synth_generate(spec, derive_seed(seed, i));
    write_raster(image, (fs::path(root) / "images" / (id + ".cxrs")).string());
    write_labels(labels, (fs::path(root) / "labels" / (id + ".cxlb")).string());
    const auto counts = class_census(labels, spec.num_classes);
    for (std::size_t c = 0; c < counts.size(); ++c) census[c] += counts[c];
    manifest += id + "\n";
  }
  std::ofstream out(fs::path(root) / "manifest.txt", std::ios::binary);
  out << manifest;
  if (!out) throw Error(ErrorCode::io, "cannot write manifest in " + root);
  return census;
}

std::vector<std::string> read_manifest(const std::string& root) {
  std::ifstream in(fs::path(root) / "manifest.txt", std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "no manifest.txt in " + root);
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) ids.push_back(line);
  }
  return ids;
}

std::vector<Tile> load_dataset(const std::string& root) {
  const auto ids = read_manifest(root);
  if (ids.empty()) throw Error(ErrorCode::io, "dataset " + root + " is empty");
  std::vector<Tile> tiles;
  for (const auto& id : ids) {
    Tile t{id, read_raster((fs::path(root) / "images" / (id + ".cxrs")).string()),
           read_labels((fs::path(root) / "labels" / (id + ".cxlb")).string())};
    if (t.image.width != t.labels.width || t.image.height != t.labels.height) {
      throw FormatError(FormatIssue::shape_mismatch, "tile " + id + ": image and labels differ");
    }
    tiles.push_back(std::move(t));
  }
  return tiles;
}

}  // namespace cxhg
