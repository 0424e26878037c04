#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "cxhg/augment.hpp"
#include "cxhg/dataset.hpp"
#include "cxhg/error.hpp"
#include "cxhg/patches.hpp"
#include "cxhg/raster.hpp"
#include "cxhg/rng.hpp"
#include "cxhg/synth.hpp"

using namespace cxhg;
namespace fs = std::filesystem;

namespace {

RasterImage random_u8(std::uint32_t w, std::uint32_t h, std::uint32_t c, std::uint64_t seed) {
  SplitMix64 rng(seed);
  RasterImage img = RasterImage::zeros(w, h, c, PixelType::u8);
  for (auto& v : img.u8()) v = static_cast<std::uint8_t>(rng.below(256));
  return img;
}

LabelMap random_labels(std::uint32_t w, std::uint32_t h, std::size_t classes, std::uint64_t seed) {
  SplitMix64 rng(seed);
  LabelMap m = LabelMap::filled(w, h, 0);
  for (auto& v : m.data) v = static_cast<std::uint8_t>(rng.below(classes));
  return m;
}

SegmentationSample random_sample(std::uint32_t size, std::uint64_t seed) {
  SplitMix64 rng(seed);
  SegmentationSample s;
  s.image = RasterImage::zeros(size, size, 2, PixelType::f32);
  for (auto& v : s.image.f32()) v = static_cast<float>(rng.uniform());
  s.labels = random_labels(size, size, 4, seed + 1);
  return s;
}

fs::path temp_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("cxhg_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST(Raster, RoundTripBothTypes) {
  const RasterImage u8 = random_u8(5, 3, 4, 1);
  EXPECT_EQ(decode_raster(encode_raster(u8)), u8);
  RasterImage f = RasterImage::zeros(3, 2, 2, PixelType::f32);
  SplitMix64 rng(2);
  for (auto& v : f.f32()) v = static_cast<float>(rng.uniform(-1e3, 1e3));
  const auto bytes = encode_raster(f);
  EXPECT_EQ(decode_raster(bytes), f);
  EXPECT_EQ(encode_raster(decode_raster(bytes)), bytes);
  const LabelMap labels = random_labels(7, 2, 6, 3);
  EXPECT_EQ(decode_labels(encode_labels(labels)), labels);
}

TEST(Raster, FileRoundTrip) {
  const fs::path dir = temp_dir("raster");
  const RasterImage img = random_u8(4, 4, 3, 4);
  write_raster(img, (dir / "a.cxrs").string());
  EXPECT_EQ(read_raster((dir / "a.cxrs").string()), img);
  const LabelMap labels = random_labels(4, 4, 6, 5);
  write_labels(labels, (dir / "a.cxlb").string());
  EXPECT_EQ(read_labels((dir / "a.cxlb").string()), labels);
  fs::remove_all(dir);
}

// The listed header fields (magic, version, width, height, channels, dtype,
// 3 reserved) add up to 24 bytes.
TEST(Raster, TwoByTwoByteCount) {
  const auto bytes = encode_raster(random_u8(2, 2, 1, 6));
  EXPECT_EQ(kRasterHeaderBytes, 4u + 4 + 4 + 4 + 4 + 1 + 3);
  EXPECT_EQ(bytes.size(), kRasterHeaderBytes + 4);
  EXPECT_EQ(bytes[20], 0);  // dtype u8
  EXPECT_EQ(bytes[21] | bytes[22] | bytes[23], 0);
  EXPECT_EQ(encode_labels(LabelMap::filled(2, 2, 1)).size(), kLabelHeaderBytes + 4);
  RasterImage f = RasterImage::zeros(2, 2, 1, PixelType::f32);
  EXPECT_EQ(encode_raster(f).size(), kRasterHeaderBytes + 16);
}

TEST(Raster, HeaderIsLittleEndian) {
  const auto bytes = encode_raster(random_u8(258, 1, 3, 7));
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "CXRS");
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[8], 2);  // 258 = 0x0102
  EXPECT_EQ(bytes[9], 1);
  EXPECT_EQ(bytes[16], 3);
}

TEST(Raster, DistinctRejections) {
  auto bytes = encode_raster(random_u8(2, 2, 1, 8));
  auto expect_issue = [](const std::vector<std::uint8_t>& b, FormatIssue issue) {
    try {
      decode_raster(b);
      FAIL() << "accepted";
    } catch (const FormatError& e) {
      EXPECT_EQ(e.issue(), issue) << e.what();
    }
  };
  auto bad_magic = bytes;
  std::copy_n("XXXX", 4, bad_magic.begin());
  expect_issue(bad_magic, FormatIssue::bad_magic);
  auto bad_version = bytes;
  bad_version[4] = 2;
  expect_issue(bad_version, FormatIssue::bad_version);
  auto truncated = bytes;
  truncated.pop_back();
  expect_issue(truncated, FormatIssue::truncated);
  auto header_only = std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + 10);
  expect_issue(header_only, FormatIssue::truncated);

  auto lb = encode_labels(LabelMap::filled(2, 2, 0));
  lb[0] = 'X';
  EXPECT_THROW(decode_labels(lb), FormatError);
}

TEST(Synth, Deterministic) {
  SceneSpec spec;
  spec.width = spec.height = 96;
  const auto a = synth_generate(spec, 42), b = synth_generate(spec, 42), c = synth_generate(spec, 43);
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
  EXPECT_FALSE(a.first == c.first);
}

TEST(Synth, EmptySceneIsConstantBackground) {
  SceneSpec spec;
  spec.width = spec.height = 64;
  spec.noise_sigma = 0;
  spec.densities.assign(spec.num_classes, 0.0);
  const auto [img, labels] = synth_generate(spec, 9);
  for (auto v : labels.data) EXPECT_EQ(v, 0);
  for (std::size_t ch = 0; ch < spec.channels; ++ch) {
    const auto first = img.u8()[ch * img.plane_size()];
    for (std::size_t i = 0; i < img.plane_size(); ++i) ASSERT_EQ(img.u8()[ch * img.plane_size() + i], first);
  }
}

TEST(Synth, ClassImbalanceOverHundredSeeds) {
  SceneSpec spec;
  std::uint64_t rare = 0, background = 0, total = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto census = class_census(synth_generate(spec, seed).second, spec.num_classes);
    rare += census[4];
    background += census[0];
    for (auto c : census) total += c;
  }
  EXPECT_LT(static_cast<double>(rare) / total, 0.02);
  EXPECT_GT(static_cast<double>(background) / total, 0.40);
}

TEST(Synth, LabelsAreValidAndSmallObjectsAreSmall) {
  SceneSpec spec;
  const auto [img, labels] = synth_generate(spec, 5);
  EXPECT_EQ(img.channels, spec.channels);
  for (auto v : labels.data) EXPECT_LT(v, spec.num_classes);
  EXPECT_EQ(shape_kind(4), ShapeKind::small_rect);
  for (std::size_t c = 1; c < spec.num_classes; ++c) {
    for (std::size_t d = c + 1; d < spec.num_classes; ++d) {
      bool differs = false;
      for (std::size_t ch = 0; ch < spec.channels; ++ch)
        differs |= class_intensity(c, ch) != class_intensity(d, ch);
      EXPECT_TRUE(differs) << c << " vs " << d;
    }
  }
}

TEST(Synth, RejectsNegativeDensityOrNoise) {
  SceneSpec spec;
  spec.noise_sigma = -1;
  EXPECT_THROW(spec.validate(), Error);
  spec = SceneSpec{};
  spec.densities[2] = -0.5;
  EXPECT_THROW(spec.validate(), Error);
}

TEST(Patches, FullSizeTileGeometry) {
  const PatchGrid g = patch_grid(6000, 6000, 256);
  EXPECT_EQ(g.cols, 24u);
  EXPECT_EQ(g.rows, 24u);
  EXPECT_EQ(g.count(), 576u);
  EXPECT_EQ(24 * g.count(), 13824u);
  EXPECT_EQ(split_sizes(13824), (std::pair<std::size_t, std::size_t>{12441, 1383}));
  EXPECT_EQ(split_sizes(10), (std::pair<std::size_t, std::size_t>{9, 1}));
}

TEST(Patches, ExactTileHasOnePatch) {
  const RasterImage img = random_u8(256, 256, 1, 1);
  const LabelMap lab = random_labels(256, 256, 3, 2);
  const auto ps = extract_patches(img, lab, 256);
  ASSERT_EQ(ps.size(), 1u);
  EXPECT_EQ(ps[0].labels, lab);
  for (std::size_t i = 0; i < img.size(); ++i) EXPECT_EQ(ps[0].image.f32()[i], img.u8()[i] / 255.0f);
}

TEST(Patches, PaddedCornerGeometry) {
  const RasterImage img = random_u8(300, 300, 2, 3);
  const LabelMap lab = random_labels(300, 300, 6, 4);
  const auto ps = extract_patches(img, lab, 256);
  ASSERT_EQ(ps.size(), 4u);
  const auto& corner = ps[3];
  std::size_t padded_cols = 0;
  for (std::size_t x = 0; x < 256; ++x) padded_cols += corner.labels.at(0, x) == kIgnoreIndex;
  EXPECT_EQ(padded_cols, 212u);
  for (std::size_t y = 0; y < 256; ++y) {
    for (std::size_t x = 0; x < 256; ++x) {
      const bool pad = y >= 44 || x >= 44;
      EXPECT_EQ(corner.labels.at(y, x) == kIgnoreIndex, pad);
      if (pad) EXPECT_EQ(corner.image.f32()[y * 256 + x], 0.0f);
    }
  }
  const auto loc = patch_grid(300, 300, 256).locate(299, 299);
  EXPECT_EQ(loc.row, 1u);
  EXPECT_EQ(loc.col, 1u);
  EXPECT_EQ(loc.local_y, 43u);
  EXPECT_EQ(loc.local_x, 43u);
}

TEST(Patches, TilingIsAPartition) {
  const std::uint32_t w = 37, h = 23;
  const std::size_t p = 8;
  RasterImage img = RasterImage::zeros(w, h, 1, PixelType::f32);
  for (std::size_t i = 0; i < img.size(); ++i) img.f32()[i] = static_cast<float>(i + 1);
  const auto ps = extract_patches(img, LabelMap::filled(w, h, 1), p);
  const PatchGrid g = patch_grid(w, h, p);
  ASSERT_EQ(ps.size(), g.count());
  std::vector<int> seen(img.size(), 0);
  for (std::size_t t = 0; t < ps.size(); ++t) {
    for (std::size_t y = 0; y < p; ++y) {
      for (std::size_t x = 0; x < p; ++x) {
        const float v = ps[t].image.f32()[y * p + x];
        if (v == 0.0f) continue;
        const auto src = static_cast<std::size_t>(v) - 1;
        ++seen[src];
        const auto loc = g.locate(src / w, src % w);
        EXPECT_EQ(loc.row * g.cols + loc.col, t);
        EXPECT_EQ(loc.local_y, y);
        EXPECT_EQ(loc.local_x, x);
      }
    }
  }
  for (int s : seen) EXPECT_EQ(s, 1);
}

TEST(Patches, StitchInvertsExtraction) {
  const LabelMap lab = random_labels(300, 300, 6, 5);
  const auto ps = extract_patches(random_u8(300, 300, 1, 6), lab, 256);
  std::vector<LabelMap> parts;
  for (const auto& s : ps) parts.push_back(s.labels);
  EXPECT_EQ(stitch_labels(parts, 300, 300), lab);
}

TEST(Split, DeterministicPartition) {
  const auto [a_train, a_val] = split_indices(50, {}, 1);
  const auto [b_train, b_val] = split_indices(50, {}, 1);
  const auto [c_train, c_val] = split_indices(50, {}, 2);
  EXPECT_EQ(a_train, b_train);
  EXPECT_EQ(a_val, b_val);
  EXPECT_NE(a_train, c_train);
  EXPECT_EQ(a_train.size(), 45u);
  EXPECT_EQ(c_val.size(), 5u);
  std::set<std::size_t> all(a_train.begin(), a_train.end());
  all.insert(a_val.begin(), a_val.end());
  EXPECT_EQ(all.size(), 50u);
}

TEST(Split, RejectsEmptyAndBadRatio) {
  EXPECT_THROW(split_indices(0, {}, 1), Error);
  EXPECT_THROW(split_sizes(10, {0, 10}), Error);
  EXPECT_THROW(split_sizes(10, {10, 10}), Error);
}

TEST(Batch, StacksSamples) {
  std::vector<SegmentationSample> samples{random_sample(4, 1), random_sample(4, 2), random_sample(4, 3)};
  const auto [images, labels] = make_batch(samples, {2, 0});
  EXPECT_EQ(images.shape(), (Shape{2, 2, 4, 4}));
  EXPECT_EQ(labels.batch, 2u);
  EXPECT_EQ(images.at(0), samples[2].image.f32()[0]);
  EXPECT_EQ(labels.at(1, 3, 3), samples[0].labels.at(3, 3));
}

TEST(Augment, FlipsAreInvolutions) {
  const auto s = random_sample(16, 7);
  AugmentParams p;
  p.flip_h = p.flip_v = true;
  const auto twice = apply_augment(apply_augment(s, p, 16), p, 16);
  EXPECT_EQ(twice.image, s.image);
  EXPECT_EQ(twice.labels, s.labels);
  p.flip_v = false;
  const auto once = apply_augment(s, p, 16);
  EXPECT_EQ(once.labels.at(3, 0), s.labels.at(3, 15));
}

TEST(Augment, UnitScaleIsIdentity) {
  const auto s = random_sample(16, 8);
  const auto out = apply_augment(s, AugmentParams{}, 16);
  EXPECT_EQ(out.image, s.image);
  EXPECT_EQ(out.labels, s.labels);
}

TEST(Augment, HalfScalePadsWithIgnore) {
  auto s = random_sample(64, 9);
  AugmentParams p;
  p.scale = 0.5;
  const auto out = apply_augment(s, p, 64);
  EXPECT_EQ(scaled_extent(64, 0.5), 32u);
  for (std::size_t y = 0; y < 64; ++y) {
    for (std::size_t x = 0; x < 64; ++x) {
      const bool pad = y >= 32 || x >= 32;
      ASSERT_EQ(out.labels.at(y, x) == kIgnoreIndex, pad) << y << "," << x;
      if (pad) ASSERT_EQ(out.image.f32()[y * 64 + x], 0.0f);
    }
  }
  // nearest neighbour: output (y, x) comes from source (2y + 1, 2x + 1)
  EXPECT_EQ(out.labels.at(5, 7), s.labels.at(11, 15));
}

TEST(Augment, DrawsStayInRange) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const AugmentParams p = draw_augment(64, 64, 64, seed);
    EXPECT_GE(p.scale, kMinScale);
    EXPECT_LE(p.scale, kMaxScale);
    const long s = static_cast<long>(scaled_extent(64, p.scale));
    EXPECT_GE(p.offset_y, std::min(0L, s - 64));
    EXPECT_LE(p.offset_y, std::max(0L, s - 64));
  }
  EXPECT_EQ(draw_augment(64, 64, 64, 3).scale, draw_augment(64, 64, 64, 3).scale);
}

TEST(Augment, NeverInventsClasses) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    SegmentationSample s = random_sample(32, seed);
    for (auto& v : s.labels.data) v = v % 2 == 0 ? 0 : 3;
    const auto out = augment(s, seed, 32);
    for (auto v : out.labels.data) EXPECT_TRUE(v == 0 || v == 3 || v == kIgnoreIndex) << int(v);
    const auto again = augment(s, seed, 32);
    EXPECT_EQ(out.image, again.image);
  }
}

TEST(Dataset, GenerateAndLoad) {
  const fs::path dir = temp_dir("dataset");
  SceneSpec spec;
  spec.width = spec.height = 64;
  const auto census = generate_dataset(dir.string(), spec, 3, 11);
  EXPECT_EQ(census.size(), spec.num_classes);
  std::uint64_t total = 0;
  for (auto c : census) total += c;
  EXPECT_EQ(total, 3u * 64 * 64);
  EXPECT_EQ(read_manifest(dir.string()), (std::vector<std::string>{"0000", "0001", "0002"}));
  const auto tiles = load_dataset(dir.string());
  ASSERT_EQ(tiles.size(), 3u);
  const auto direct = synth_generate(spec, derive_seed(11, 1));
  EXPECT_EQ(tiles[1].image, direct.first);
  EXPECT_EQ(tiles[1].labels, direct.second);
  fs::remove_all(dir);
  EXPECT_THROW(load_dataset(dir.string()), Error);
}
