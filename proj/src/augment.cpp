#include "cxhg/augment.hpp"

#include <algorithm>
#include <cmath>

#include "cxhg/error.hpp"
#include "cxhg/rng.hpp"

namespace cxhg {

namespace {

long draw_offset(SplitMix64& rng, std::size_t scaled, std::size_t out) {
  const long slack = static_cast<long>(scaled) - static_cast<long>(out);
  const long lo = std::min(0L, slack);
  const long hi = std::max(0L, slack);
  return lo + static_cast<long>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
}

// half-pixel source coordinate of destination index d
double source_coord(std::size_t d, std::size_t in, std::size_t out) {
  return (static_cast<double>(d) + 0.5) * static_cast<double>(in) / static_cast<double>(out) - 0.5;
}

}  // namespace

std::size_t scaled_extent(std::size_t extent, double scale) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(extent * scale)));
}

AugmentParams draw_augment(std::size_t height, std::size_t width, std::size_t out_size,
                           std::uint64_t seed) {
  SplitMix64 rng(seed);
  AugmentParams p;
  p.flip_h = rng.coin();
  p.flip_v = rng.coin();
  p.scale = rng.uniform(kMinScale, kMaxScale);
  p.offset_y = draw_offset(rng, scaled_extent(height, p.scale), out_size);
  p.offset_x = draw_offset(rng, scaled_extent(width, p.scale), out_size);
  return p;
}

SegmentationSample apply_augment(const SegmentationSample& sample, const AugmentParams& params,
                                 std::size_t out_size) {
  const RasterImage& img = sample.image;
  if (img.type() != PixelType::f32) throw Error(ErrorCode::value, "augment: expects an f32 sample");
  if (img.width != sample.labels.width || img.height != sample.labels.height) {
    throw Error(ErrorCode::shape, "augment: image and labels differ in extent");
  }
  if (!(params.scale > 0.0)) throw Error(ErrorCode::value, "augment: scale must be > 0");
  const std::size_t H = img.height, W = img.width, C = img.channels;
  const std::size_t SH = scaled_extent(H, params.scale);
  const std::size_t SW = scaled_extent(W, params.scale);
  const auto O = static_cast<std::uint32_t>(out_size);

  SegmentationSample out{RasterImage::zeros(O, O, img.channels, PixelType::f32),
                         LabelMap::filled(O, O, kIgnoreIndex)};
  auto src = img.f32();
  auto dst = out.image.f32();

  auto flip = [&](std::size_t y, std::size_t x) {
    if (params.flip_v) y = H - 1 - y;
    if (params.flip_h) x = W - 1 - x;
    return y * W + x;
  };

  for (std::size_t oy = 0; oy < out_size; ++oy) {
    const long sy = static_cast<long>(oy) + params.offset_y;
    if (sy < 0 || sy >= static_cast<long>(SH)) continue;
    const double fy = std::clamp(source_coord(sy, H, SH), 0.0, static_cast<double>(H - 1));
    const auto y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, H - 1);
    const double wy = fy - y0;
    const std::size_t ny = std::min(
        H - 1, static_cast<std::size_t>((sy + 0.5) * static_cast<double>(H) / SH));
    for (std::size_t ox = 0; ox < out_size; ++ox) {
      const long sx = static_cast<long>(ox) + params.offset_x;
      if (sx < 0 || sx >= static_cast<long>(SW)) continue;
      const double fx = std::clamp(source_coord(sx, W, SW), 0.0, static_cast<double>(W - 1));
      const auto x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, W - 1);
      const double wx = fx - x0;
      for (std::size_t ch = 0; ch < C; ++ch) {
        const float* plane = src.data() + ch * H * W;
        const double v = (1 - wy) * ((1 - wx) * plane[flip(y0, x0)] + wx * plane[flip(y0, x1)]) +
                         wy * ((1 - wx) * plane[flip(y1, x0)] + wx * plane[flip(y1, x1)]);
        dst[(ch * out_size + oy) * out_size + ox] = static_cast<float>(v);
      }
      const std::size_t nx = std::min(
          W - 1, static_cast<std::size_t>((sx + 0.5) * static_cast<double>(W) / SW));
      out.labels.at(oy, ox) = sample.labels.data[flip(ny, nx)];
    }
  }
  return out;
}

SegmentationSample augment(const SegmentationSample& sample, std::uint64_t seed,
                           std::size_t out_size) {
  return apply_augment(
      sample, draw_augment(sample.image.height, sample.image.width, out_size, seed), out_size);
}

}  // namespace cxhg
