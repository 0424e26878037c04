#include "cxhg/patches.hpp"

#include <numeric>
#include <string>

#include "cxhg/error.hpp"
#include "cxhg/rng.hpp"

namespace cxhg {

PatchGrid patch_grid(std::size_t width, std::size_t height, std::size_t patch) {
  if (patch < 1) throw Error(ErrorCode::value, "patch size must be >= 1");
  return {(width + patch - 1) / patch, (height + patch - 1) / patch, patch};
}

std::vector<SegmentationSample> extract_patches(const RasterImage& image, const LabelMap& labels,
                                                std::size_t patch) {
  if (image.width != labels.width || image.height != labels.height) {
    throw Error(ErrorCode::shape, "extract_patches: image and labels differ in extent");
  }
  const PatchGrid grid = patch_grid(image.width, image.height, patch);
  const auto P = static_cast<std::uint32_t>(patch);
  const std::size_t plane = image.plane_size();
  std::vector<SegmentationSample> out;
  out.reserve(grid.count());
  for (std::size_t r = 0; r < grid.rows; ++r) {
    for (std::size_t c = 0; c < grid.cols; ++c) {
      SegmentationSample s{RasterImage::zeros(P, P, image.channels, PixelType::f32),
                           LabelMap::filled(P, P, kIgnoreIndex)};
      auto dst = s.image.f32();
      const std::size_t y0 = r * patch;
      const std::size_t x0 = c * patch;
      const std::size_t h = std::min<std::size_t>(patch, image.height - y0);
      const std::size_t w = std::min<std::size_t>(patch, image.width - x0);
      for (std::size_t ch = 0; ch < image.channels; ++ch) {
        for (std::size_t y = 0; y < h; ++y) {
          for (std::size_t x = 0; x < w; ++x) {
            const std::size_t src = ch * plane + (y0 + y) * image.width + x0 + x;
            float v = image.type() == PixelType::u8 ? image.u8()[src] / 255.0f : image.f32()[src];
            dst[(ch * patch + y) * patch + x] = v;
          }
        }
      }
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) s.labels.at(y, x) = labels.at(y0 + y, x0 + x);
      }
      out.push_back(std::move(s));
    }
  }
  return out;
}

std::pair<std::size_t, std::size_t> split_sizes(std::size_t n, Ratio ratio) {
  if (ratio.den == 0 || ratio.num == 0 || ratio.num >= ratio.den) {
    throw Error(ErrorCode::value, "split ratio must lie strictly between 0 and 1");
  }
  const auto train = static_cast<std::size_t>(
      static_cast<unsigned __int128>(n) * ratio.num / ratio.den);
  return {train, n - train};
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n,
                                                                            Ratio ratio,
                                                                            std::uint64_t seed) {
  if (n == 0) throw Error(ErrorCode::value, "split: empty input");
  const auto [train, val] = split_sizes(n, ratio);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  SplitMix64 rng(seed);
  shuffle(order, rng);
  return {std::vector<std::size_t>(order.begin(), order.begin() + train),
          std::vector<std::size_t>(order.begin() + train, order.end())};
}

std::pair<Tensor, Labels> make_batch(const std::vector<SegmentationSample>& samples,
                                     const std::vector<std::size_t>& indices, DType dtype) {
  if (indices.empty()) throw Error(ErrorCode::value, "make_batch: empty batch");
  const auto& first = samples.at(indices[0]);
  const std::size_t C = first.image.channels;
  const std::size_t H = first.image.height;
  const std::size_t W = first.image.width;
  const std::size_t per = C * H * W;
  Tensor images = Tensor::zeros({indices.size(), C, H, W}, dtype);
  Labels labels(indices.size(), H, W);
  dispatch(dtype, [&](auto tag) {
    using T = decltype(tag);
    auto dst = images.mutable_values<T>();
    for (std::size_t b = 0; b < indices.size(); ++b) {
      const auto& s = samples.at(indices[b]);
      if (s.image.channels != C || s.image.height != H || s.image.width != W ||
          s.labels.height != H || s.labels.width != W) {
        throw Error(ErrorCode::shape, "make_batch: sample " + std::to_string(indices[b]) +
                                          " differs in shape");
      }
      auto src = s.image.f32();
      for (std::size_t i = 0; i < per; ++i) dst[b * per + i] = static_cast<T>(src[i]);
      std::copy(s.labels.data.begin(), s.labels.data.end(), labels.ids.begin() + b * H * W);
    }
  });
  return {images, std::move(labels)};
}

LabelMap stitch_labels(const std::vector<LabelMap>& patches, std::size_t width,
                       std::size_t height) {
  if (patches.empty()) throw Error(ErrorCode::value, "stitch: no patches");
  const std::size_t P = patches[0].width;
  const PatchGrid grid = patch_grid(width, height, P);
  if (patches.size() != grid.count()) {
    throw Error(ErrorCode::shape, "stitch: expected " + std::to_string(grid.count()) +
                                      " patches, got " + std::to_string(patches.size()));
  }
  LabelMap out = LabelMap::filled(static_cast<std::uint32_t>(width),
                                  static_cast<std::uint32_t>(height), 0);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const auto loc = grid.locate(y, x);
      out.at(y, x) = patches[loc.row * grid.cols + loc.col].at(loc.local_y, loc.local_x);
    }
  }
  return out;
}

}  // namespace cxhg
