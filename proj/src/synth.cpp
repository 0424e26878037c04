#include "cxhg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cxhg/error.hpp"
#include "cxhg/rng.hpp"

namespace cxhg {

namespace {

// rows: impervious, building, low vegetation, tree, car, clutter
// columns: NIR, R, G, B, height
constexpr std::array<std::array<double, 5>, 6> kBaseIntensity{{
    {0.45, 0.60, 0.60, 0.60, 0.05},
    {0.35, 0.30, 0.25, 0.45, 0.80},
    {0.80, 0.30, 0.65, 0.25, 0.10},
    {0.90, 0.15, 0.45, 0.15, 0.55},
    {0.20, 0.85, 0.80, 0.15, 0.25},
    {0.60, 0.80, 0.20, 0.35, 0.35},
}};

struct Canvas {
  LabelMap& labels;
  std::uint8_t id;

  void rect(long x0, long y0, long w, long h) {
    const long x1 = std::min<long>(x0 + w, labels.width);
    const long y1 = std::min<long>(y0 + h, labels.height);
    for (long y = std::max(0L, y0); y < y1; ++y) {
      for (long x = std::max(0L, x0); x < x1; ++x) labels.at(y, x) = id;
    }
  }

  void disc(double cx, double cy, double r) {
    const long y0 = std::max(0L, static_cast<long>(std::floor(cy - r)));
    const long y1 = std::min<long>(labels.height - 1, static_cast<long>(std::ceil(cy + r)));
    const long x0 = std::max(0L, static_cast<long>(std::floor(cx - r)));
    const long x1 = std::min<long>(labels.width - 1, static_cast<long>(std::ceil(cx + r)));
    for (long y = y0; y <= y1; ++y) {
      for (long x = x0; x <= x1; ++x) {
        const double dx = x + 0.5 - cx;
        const double dy = y + 0.5 - cy;
        if (dx * dx + dy * dy <= r * r) labels.at(y, x) = id;
      }
    }
  }
};

long draw_int(SplitMix64& rng, long lo, long hi) {
  return lo + static_cast<long>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
}

void paint_object(Canvas& canvas, ShapeKind kind, SplitMix64& rng) {
  const long W = canvas.labels.width;
  const long H = canvas.labels.height;
  switch (kind) {
    case ShapeKind::large_rect: {
      const long w = draw_int(rng, 24, 64);
      const long h = draw_int(rng, 24, 64);
      canvas.rect(draw_int(rng, -w / 2, W - w / 2), draw_int(rng, -h / 2, H - h / 2), w, h);
      break;
    }
    case ShapeKind::thin_bar: {
      const long thick = draw_int(rng, 5, 10);
      const bool horizontal = rng.coin();
      const long along = horizontal ? W : H;
      const long len = std::max(1L, static_cast<long>(along * rng.uniform(0.4, 1.0)));
      const long start = draw_int(rng, 0, along - len);
      const long across = draw_int(rng, 0, (horizontal ? H : W) - 1);
      if (horizontal) {
        canvas.rect(start, across - thick / 2, len, thick);
      } else {
        canvas.rect(across - thick / 2, start, thick, len);
      }
      break;
    }
    case ShapeKind::disc:
    case ShapeKind::small_disc: {
      const double r = kind == ShapeKind::disc ? rng.uniform(6.0, 16.0) : rng.uniform(3.0, 6.0);
      canvas.disc(rng.uniform(0.0, W), rng.uniform(0.0, H), r);
      break;
    }
    case ShapeKind::small_rect: {
      // at most 8x14 = 112 pixels: under half a percent of a 256x256 scene
      const bool horizontal = rng.coin();
      const long a = draw_int(rng, 5, 8);
      const long b = draw_int(rng, 9, 14);
      const long w = horizontal ? b : a;
      const long h = horizontal ? a : b;
      canvas.rect(draw_int(rng, 0, W - 1) - w / 2, draw_int(rng, 0, H - 1) - h / 2, w, h);
      break;
    }
  }
}

}  // namespace

ShapeKind shape_kind(std::size_t class_id) {
  return static_cast<ShapeKind>((class_id - 1) % 5);
}

void SceneSpec::validate() const {
  if (num_classes < 1 || num_classes > 255) {
    throw Error(ErrorCode::config, "scene: num_classes must be in [1, 255]");
  }
  if (channels < 1) throw Error(ErrorCode::config, "scene: channels must be >= 1");
  if (width < 1 || height < 1) throw Error(ErrorCode::config, "scene: width and height must be >= 1");
  if (densities.size() < num_classes) {
    throw Error(ErrorCode::config, "scene: need one density per class (" +
                                       std::to_string(num_classes) + ")");
  }
  for (double d : densities) {
    if (!(d >= 0.0) || !std::isfinite(d)) throw Error(ErrorCode::config, "scene: densities must be >= 0");
  }
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    throw Error(ErrorCode::config, "scene: noise_sigma must be >= 0");
  }
  if (!(rare_class_rate >= 0.0) || !std::isfinite(rare_class_rate)) {
    throw Error(ErrorCode::config, "scene: rare_class_rate must be >= 0");
  }
}

double class_intensity(std::size_t class_id, std::size_t channel) {
  if (class_id < kBaseIntensity.size() && channel < kBaseIntensity[0].size()) {
    return kBaseIntensity[class_id][channel];
  }
  SplitMix64 h(0xC1A55ULL ^ (class_id << 16) ^ channel);
  return 0.1 + 0.8 * h.uniform();
}

std::pair<RasterImage, LabelMap> synth_generate(const SceneSpec& spec, std::uint64_t seed) {
  spec.validate();
  SplitMix64 rng(seed);
  LabelMap labels = LabelMap::filled(spec.width, spec.height, 0);

  const double area_scale = static_cast<double>(spec.width) * spec.height / 65536.0;
  for (std::size_t c = 1; c < spec.num_classes; ++c) {
    const ShapeKind kind = shape_kind(c);
    double expected = spec.densities[c] * area_scale;
    if (kind == ShapeKind::small_rect) expected *= spec.rare_class_rate;
    const double whole = std::floor(expected);
    const std::size_t count =
        static_cast<std::size_t>(whole) + (rng.uniform() < expected - whole ? 1 : 0);
    Canvas canvas{labels, static_cast<std::uint8_t>(c)};
    for (std::size_t i = 0; i < count; ++i) paint_object(canvas, kind, rng);
  }

  RasterImage image = RasterImage::zeros(spec.width, spec.height,
                                         static_cast<std::uint32_t>(spec.channels), PixelType::u8);
  auto px = image.u8();
  const std::size_t plane = image.plane_size();
  for (std::size_t ch = 0; ch < spec.channels; ++ch) {
    for (std::size_t i = 0; i < plane; ++i) {
      double v = class_intensity(labels.data[i], ch);
      if (spec.noise_sigma > 0.0) v += spec.noise_sigma * rng.normal();
      px[ch * plane + i] = static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(v, 0.0, 1.0)));
    }
  }
  return {std::move(image), std::move(labels)};
}

std::vector<std::uint64_t> class_census(const LabelMap& labels, std::size_t num_classes) {
  std::vector<std::uint64_t> counts(num_classes, 0);
  for (auto id : labels.data) {
    if (id < num_classes) ++counts[id];
  }
  return counts;
}

}  // namespace cxhg
