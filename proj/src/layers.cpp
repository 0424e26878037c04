#include "cxhg/layers.hpp"

#include <Eigen/Core>
#include <cmath>
#include <cstdint>

#include "cxhg/error.hpp"
#include "cxhg/ops.hpp"

namespace cxhg {

using detail::Buffer;

namespace {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void require_rank4(const Tensor& t, const char* op) {
  if (t.rank() != 4) {
    throw Error(ErrorCode::shape, std::string(op) + ": expected (B, C, H, W), got " +
                                      shape_str(t.shape()));
  }
}

struct ConvShape {
  std::size_t batch, in_c, height, width;
  std::size_t out_c, kh, kw;
  std::size_t out_h, out_w;
  std::size_t stride, pad;

  std::size_t patch_rows() const { return in_c * kh * kw; }
  std::size_t out_pixels() const { return out_h * out_w; }
  bool pointwise() const { return kh == 1 && kw == 1 && stride == 1 && pad == 0; }
};

template <class T>
void im2col(const T* in, const ConvShape& s, T* col) {
  const std::size_t cols = s.out_pixels();
  for (std::size_t c = 0; c < s.in_c; ++c) {
    for (std::size_t ky = 0; ky < s.kh; ++ky) {
      for (std::size_t kx = 0; kx < s.kw; ++kx) {
        T* row = col + ((c * s.kh + ky) * s.kw + kx) * cols;
        for (std::size_t oy = 0; oy < s.out_h; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * s.stride + ky) -
                          static_cast<std::ptrdiff_t>(s.pad);
          T* dst = row + oy * s.out_w;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(s.height)) {
            std::fill(dst, dst + s.out_w, T(0));
            continue;
          }
          const T* src = in + (c * s.height + static_cast<std::size_t>(iy)) * s.width;
          for (std::size_t ox = 0; ox < s.out_w; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * s.stride + kx) -
                            static_cast<std::ptrdiff_t>(s.pad);
            dst[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(s.width))
                          ? T(0)
                          : src[ix];
          }
        }
      }
    }
  }
}

template <class T>
void col2im_add(const T* col, const ConvShape& s, T* in) {
  const std::size_t cols = s.out_pixels();
  for (std::size_t c = 0; c < s.in_c; ++c) {
    for (std::size_t ky = 0; ky < s.kh; ++ky) {
      for (std::size_t kx = 0; kx < s.kw; ++kx) {
        const T* row = col + ((c * s.kh + ky) * s.kw + kx) * cols;
        for (std::size_t oy = 0; oy < s.out_h; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * s.stride + ky) -
                          static_cast<std::ptrdiff_t>(s.pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(s.height)) continue;
          T* dst = in + (c * s.height + static_cast<std::size_t>(iy)) * s.width;
          const T* src = row + oy * s.out_w;
          for (std::size_t ox = 0; ox < s.out_w; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * s.stride + kx) -
                            static_cast<std::ptrdiff_t>(s.pad);
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(s.width)) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              ConvGeometry geometry) {
  require_rank4(input, "conv2d");
  if (weight.rank() != 4 || bias.rank() != 1 || bias.dim(0) != weight.dim(0)) {
    throw Error(ErrorCode::shape, "conv2d: bad kernel " + shape_str(weight.shape()) +
                                      " / bias " + shape_str(bias.shape()));
  }
  if (input.dtype() != weight.dtype() || input.dtype() != bias.dtype()) {
    throw Error(ErrorCode::value, "conv2d: mixed dtypes");
  }
  ConvShape s{input.dim(0), input.dim(1), input.dim(2), input.dim(3),
              weight.dim(0), weight.dim(2), weight.dim(3), 0, 0,
              geometry.stride, geometry.padding};
  if (weight.dim(1) != s.in_c) {
    throw Error(ErrorCode::shape, "conv2d: input has " + std::to_string(s.in_c) +
                                      " channels, kernel expects " +
                                      std::to_string(weight.dim(1)));
  }
  if (s.stride == 0) throw Error(ErrorCode::shape, "conv2d: stride must be positive");
  const std::size_t span_h = s.height + 2 * s.pad;
  const std::size_t span_w = s.width + 2 * s.pad;
  if (span_h < s.kh || span_w < s.kw || (span_h - s.kh) % s.stride != 0 ||
      (span_w - s.kw) % s.stride != 0) {
    throw Error(ErrorCode::shape,
                "conv2d: non-integer output extent for input " + std::to_string(s.height) +
                    "x" + std::to_string(s.width) + ", kernel " + std::to_string(s.kh) +
                    "x" + std::to_string(s.kw) + ", stride " + std::to_string(s.stride) +
                    ", padding " + std::to_string(s.pad));
  }
  s.out_h = (span_h - s.kh) / s.stride + 1;
  s.out_w = (span_w - s.kw) / s.stride + 1;

  return dispatch(input.dtype(), [&](auto tag) {
    using T = decltype(tag);
    using CMap = Eigen::Map<const RowMat<T>>;
    using MMap = Eigen::Map<RowMat<T>>;
    const auto rows = static_cast<Eigen::Index>(s.patch_rows());
    const auto cols = static_cast<Eigen::Index>(s.out_pixels());
    const auto out_c = static_cast<Eigen::Index>(s.out_c);
    const std::size_t in_stride = s.in_c * s.height * s.width;
    const std::size_t out_stride = s.out_c * s.out_pixels();

    Buffer out = Buffer::zeros(input.dtype(), s.batch * out_stride);
    auto o = out.as<T>();
    auto x = input.values<T>();
    CMap w(weight.values<T>().data(), out_c, rows);
    auto bv = bias.values<T>();
    std::vector<T> col(s.pointwise() ? 0 : s.patch_rows() * s.out_pixels());
    for (std::size_t b = 0; b < s.batch; ++b) {
      const T* src = x.data() + b * in_stride;
      if (!s.pointwise()) {
        im2col(src, s, col.data());
        src = col.data();
      }
      MMap y(o.data() + b * out_stride, out_c, cols);
      y.noalias() = w * CMap(src, rows, cols);
      for (Eigen::Index c = 0; c < out_c; ++c) y.row(c).array() += bv[c];
    }

    auto backward = [s, input, weight](const Buffer& gout, std::span<Buffer* const> gin) {
      const auto rows = static_cast<Eigen::Index>(s.patch_rows());
      const auto cols = static_cast<Eigen::Index>(s.out_pixels());
      const auto out_c = static_cast<Eigen::Index>(s.out_c);
      const std::size_t in_stride = s.in_c * s.height * s.width;
      const std::size_t out_stride = s.out_c * s.out_pixels();
      auto g = gout.as<T>();
      auto x = input.values<T>();
      CMap w(weight.values<T>().data(), out_c, rows);
      std::vector<T> col(s.pointwise() ? 0 : s.patch_rows() * s.out_pixels());
      for (std::size_t b = 0; b < s.batch; ++b) {
        CMap gy(g.data() + b * out_stride, out_c, cols);
        if (gin[1]) {
          const T* src = x.data() + b * in_stride;
          if (!s.pointwise()) {
            im2col(src, s, col.data());
            src = col.data();
          }
          MMap(gin[1]->as<T>().data(), out_c, rows).noalias() +=
              gy * CMap(src, rows, cols).transpose();
        }
        if (gin[2]) {
          auto gb = gin[2]->as<T>();
          for (Eigen::Index c = 0; c < out_c; ++c) gb[c] += gy.row(c).sum();
        }
        if (gin[0]) {
          T* dx = gin[0]->as<T>().data() + b * in_stride;
          if (s.pointwise()) {
            MMap(dx, rows, cols).noalias() += w.transpose() * gy;
          } else {
            MMap(col.data(), rows, cols).noalias() = w.transpose() * gy;
            col2im_add(col.data(), s, dx);
          }
        }
      }
    };
    return make_result({s.batch, s.out_c, s.out_h, s.out_w}, std::move(out), "conv2d",
                       {input, weight, bias}, backward);
  });
}

Tensor max_pool2d(const Tensor& input) {
  require_rank4(input, "max_pool2d");
  const std::size_t batch = input.dim(0), channels = input.dim(1);
  const std::size_t h = input.dim(2), w = input.dim(3);
  if (h % 2 != 0 || w % 2 != 0) {
    throw Error(ErrorCode::shape, "max_pool2d: odd extent in " + shape_str(input.shape()));
  }
  const std::size_t oh = h / 2, ow = w / 2;
  return dispatch(input.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const std::size_t n_out = batch * channels * oh * ow;
    Buffer out = Buffer::zeros(input.dtype(), n_out);
    auto o = out.as<T>();
    auto x = input.values<T>();
    auto argmax = std::make_shared<std::vector<std::uint32_t>>(n_out);
    std::size_t k = 0;
    for (std::size_t plane = 0; plane < batch * channels; ++plane) {
      const std::size_t base = plane * h * w;
      for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox, ++k) {
          std::size_t best = base + (2 * oy) * w + 2 * ox;
          for (std::size_t dy = 0; dy < 2; ++dy) {
            for (std::size_t dx = 0; dx < 2; ++dx) {
              std::size_t idx = base + (2 * oy + dy) * w + 2 * ox + dx;
              if (x[idx] > x[best]) best = idx;
            }
          }
          o[k] = x[best];
          (*argmax)[k] = static_cast<std::uint32_t>(best);
        }
      }
    }
    auto backward = [argmax](const Buffer& gout, std::span<Buffer* const> gin) {
      if (!gin[0]) return;
      auto g = gout.as<T>();
      auto d = gin[0]->as<T>();
      for (std::size_t i = 0; i < g.size(); ++i) d[(*argmax)[i]] += g[i];
    };
    return make_result({batch, channels, oh, ow}, std::move(out), "max_pool2d", {input},
                       backward);
  });
}

namespace {

struct InterpTable {
  std::vector<std::size_t> lo, hi;
  std::vector<double> frac;
};

InterpTable interp_table(std::size_t src_extent, std::size_t factor) {
  const std::size_t n = src_extent * factor;
  InterpTable t;
  t.lo.resize(n);
  t.hi.resize(n);
  t.frac.resize(n);
  const double max_coord = static_cast<double>(src_extent - 1);
  for (std::size_t d = 0; d < n; ++d) {
    double src = (static_cast<double>(d) + 0.5) / static_cast<double>(factor) - 0.5;
    src = std::clamp(src, 0.0, max_coord);
    auto lo = static_cast<std::size_t>(std::floor(src));
    t.lo[d] = lo;
    t.hi[d] = std::min(lo + 1, src_extent - 1);
    t.frac[d] = src - static_cast<double>(lo);
  }
  return t;
}

}  // namespace

Tensor bilinear_upsample(const Tensor& input, std::size_t factor) {
  require_rank4(input, "bilinear_upsample");
  if (factor == 0) throw Error(ErrorCode::shape, "bilinear_upsample: factor must be >= 1");
  const std::size_t planes = input.dim(0) * input.dim(1);
  const std::size_t h = input.dim(2), w = input.dim(3);
  const std::size_t oh = h * factor, ow = w * factor;
  auto ty = std::make_shared<const InterpTable>(interp_table(h, factor));
  auto tx = std::make_shared<const InterpTable>(interp_table(w, factor));
  return dispatch(input.dtype(), [&](auto tag) {
    using T = decltype(tag);
    Buffer out = Buffer::zeros(input.dtype(), planes * oh * ow);
    auto o = out.as<T>();
    auto x = input.values<T>();
    for (std::size_t p = 0; p < planes; ++p) {
      const T* src = x.data() + p * h * w;
      T* dst = o.data() + p * oh * ow;
      for (std::size_t y = 0; y < oh; ++y) {
        const T fy = static_cast<T>(ty->frac[y]);
        const T* r0 = src + ty->lo[y] * w;
        const T* r1 = src + ty->hi[y] * w;
        for (std::size_t xx = 0; xx < ow; ++xx) {
          const T fx = static_cast<T>(tx->frac[xx]);
          const std::size_t c0 = tx->lo[xx], c1 = tx->hi[xx];
          const T top = r0[c0] + fx * (r0[c1] - r0[c0]);
          const T bot = r1[c0] + fx * (r1[c1] - r1[c0]);
          dst[y * ow + xx] = top + fy * (bot - top);
        }
      }
    }
    auto backward = [=](const Buffer& gout, std::span<Buffer* const> gin) {
      if (!gin[0]) return;
      auto g = gout.as<T>();
      auto d = gin[0]->as<T>();
      for (std::size_t p = 0; p < planes; ++p) {
        const T* gsrc = g.data() + p * oh * ow;
        T* dst = d.data() + p * h * w;
        for (std::size_t y = 0; y < oh; ++y) {
          const T fy = static_cast<T>(ty->frac[y]);
          T* r0 = dst + ty->lo[y] * w;
          T* r1 = dst + ty->hi[y] * w;
          for (std::size_t xx = 0; xx < ow; ++xx) {
            const T fx = static_cast<T>(tx->frac[xx]);
            const std::size_t c0 = tx->lo[xx], c1 = tx->hi[xx];
            const T gv = gsrc[y * ow + xx];
            const T top = gv * (T(1) - fy);
            const T bot = gv * fy;
            r0[c0] += top * (T(1) - fx);
            r0[c1] += top * fx;
            r1[c0] += bot * (T(1) - fx);
            r1[c1] += bot * fx;
          }
        }
      }
    };
    return make_result({input.dim(0), input.dim(1), oh, ow}, std::move(out),
                       "bilinear_upsample", {input}, backward);
  });
}

Tensor fully_connected(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  if (input.rank() != 2 || weight.rank() != 2 || bias.rank() != 1 ||
      input.dim(1) != weight.dim(0) || bias.dim(0) != weight.dim(1)) {
    throw Error(ErrorCode::shape, "fully_connected: input " + shape_str(input.shape()) +
                                      ", weight " + shape_str(weight.shape()) + ", bias " +
                                      shape_str(bias.shape()));
  }
  return add(matmul(input, weight), bias);
}

Tensor batch_norm(const Tensor& input, BatchNormState& state, Mode mode) {
  require_rank4(input, "batch_norm");
  const std::size_t batch = input.dim(0), channels = input.dim(1);
  const std::size_t plane = input.dim(2) * input.dim(3);
  if (state.gamma.numel() != channels) {
    throw Error(ErrorCode::shape, "batch_norm: " + std::to_string(channels) +
                                      " channels, state has " +
                                      std::to_string(state.gamma.numel()));
  }
  const std::size_t count = batch * plane;
  if (mode == Mode::train && count < 2) {
    throw Error(ErrorCode::shape, "batch_norm: train mode needs B*H*W >= 2");
  }
  if (mode == Mode::eval && state.tracked.item() <= 0.0) {
    throw Error(ErrorCode::value, "batch_norm: eval mode with uninitialized running statistics");
  }

  return dispatch(input.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto x = input.values<T>();
    std::vector<double> mean(channels), inv_std(channels);
    if (mode == Mode::train) {
      auto rm = state.running_mean.mutable_values<T>();
      auto rv = state.running_var.mutable_values<T>();
      for (std::size_t c = 0; c < channels; ++c) {
        double s = 0.0;
        for (std::size_t b = 0; b < batch; ++b) {
          const T* p = x.data() + (b * channels + c) * plane;
          for (std::size_t i = 0; i < plane; ++i) s += p[i];
        }
        const double mu = s / static_cast<double>(count);
        double ss = 0.0;
        for (std::size_t b = 0; b < batch; ++b) {
          const T* p = x.data() + (b * channels + c) * plane;
          for (std::size_t i = 0; i < plane; ++i) {
            const double d = p[i] - mu;
            ss += d * d;
          }
        }
        const double var = ss / static_cast<double>(count);
        mean[c] = mu;
        inv_std[c] = 1.0 / std::sqrt(var + state.epsilon);
        rm[c] = static_cast<T>(state.momentum * rm[c] + (1.0 - state.momentum) * mu);
        rv[c] = static_cast<T>(state.momentum * rv[c] + (1.0 - state.momentum) * var);
      }
      state.tracked.set(0, state.tracked.item() + 1.0);
    } else {
      auto rm = state.running_mean.values<T>();
      auto rv = state.running_var.values<T>();
      for (std::size_t c = 0; c < channels; ++c) {
        mean[c] = rm[c];
        inv_std[c] = 1.0 / std::sqrt(static_cast<double>(rv[c]) + state.epsilon);
      }
    }

    Buffer out = Buffer::zeros(input.dtype(), input.numel());
    auto o = out.as<T>();
    auto gamma = state.gamma.values<T>();
    auto beta = state.beta.values<T>();
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t c = 0; c < channels; ++c) {
        const std::size_t off = (b * channels + c) * plane;
        const T mu = static_cast<T>(mean[c]);
        const T is = static_cast<T>(inv_std[c]);
        for (std::size_t i = 0; i < plane; ++i) {
          o[off + i] = gamma[c] * ((x[off + i] - mu) * is) + beta[c];
        }
      }
    }

    const bool train = mode == Mode::train;
    Tensor gamma_t = state.gamma;
    auto backward = [=](const Buffer& gout, std::span<Buffer* const> gin) {
      auto g = gout.as<T>();
      auto x = input.values<T>();
      auto gamma = gamma_t.values<T>();
      for (std::size_t c = 0; c < channels; ++c) {
        double sum_g = 0.0, sum_gx = 0.0;
        for (std::size_t b = 0; b < batch; ++b) {
          const std::size_t off = (b * channels + c) * plane;
          for (std::size_t i = 0; i < plane; ++i) {
            const double xhat = (x[off + i] - mean[c]) * inv_std[c];
            sum_g += g[off + i];
            sum_gx += g[off + i] * xhat;
          }
        }
        if (gin[1]) gin[1]->as<T>()[c] += static_cast<T>(sum_gx);
        if (gin[2]) gin[2]->as<T>()[c] += static_cast<T>(sum_g);
        if (!gin[0]) continue;
        auto d = gin[0]->as<T>();
        const double scale = gamma[c] * inv_std[c];
        const double n = static_cast<double>(count);
        for (std::size_t b = 0; b < batch; ++b) {
          const std::size_t off = (b * channels + c) * plane;
          for (std::size_t i = 0; i < plane; ++i) {
            if (train) {
              const double xhat = (x[off + i] - mean[c]) * inv_std[c];
              d[off + i] += static_cast<T>(scale * (g[off + i] - sum_g / n - xhat * sum_gx / n));
            } else {
              d[off + i] += static_cast<T>(scale * g[off + i]);
            }
          }
        }
      }
    };
    return make_result(input.shape(), std::move(out), "batch_norm",
                       {input, state.gamma, state.beta}, backward);
  });
}

Tensor uniform_tensor(Shape shape, double bound, SplitMix64& rng) {
  std::vector<float> v(shape_numel(shape));
  for (auto& e : v) e = static_cast<float>(rng.uniform(-bound, bound));
  return Tensor::from_vector(std::move(shape), std::move(v));
}

Conv2d::Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
               ConvGeometry geom, SplitMix64& rng)
    : geometry(geom) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_channels * kernel * kernel));
  weight = uniform_tensor({out_channels, in_channels, kernel, kernel}, bound, rng);
  bias = uniform_tensor({out_channels}, bound, rng);
  weight.set_requires_grad(true);
  bias.set_requires_grad(true);
}

Tensor Conv2d::forward(const Tensor& input) const {
  return conv2d(input, weight, bias, geometry);
}

void Conv2d::visit_parameters(const std::string& prefix, const TensorVisitor& visit) {
  visit(prefix + ".weight", weight);
  visit(prefix + ".bias", bias);
}

BatchNorm2d::BatchNorm2d(std::size_t channels) {
  state.gamma = Tensor::full({channels}, 1.0);
  state.beta = Tensor::zeros({channels});
  state.running_mean = Tensor::zeros({channels});
  state.running_var = Tensor::full({channels}, 1.0);
  state.tracked = Tensor::zeros({1});
  state.gamma.set_requires_grad(true);
  state.beta.set_requires_grad(true);
}

void BatchNorm2d::visit_parameters(const std::string& prefix, const TensorVisitor& visit) {
  visit(prefix + ".gamma", state.gamma);
  visit(prefix + ".beta", state.beta);
}

void BatchNorm2d::visit_buffers(const std::string& prefix, const TensorVisitor& visit) {
  visit(prefix + ".running_mean", state.running_mean);
  visit(prefix + ".running_var", state.running_var);
  visit(prefix + ".tracked", state.tracked);
}

Linear::Linear(std::size_t in_features, std::size_t out_features, SplitMix64& rng) {
  weight = uniform_tensor({in_features, out_features},
                          1.0 / std::sqrt(static_cast<double>(in_features)), rng);
  bias = Tensor::zeros({out_features});
  weight.set_requires_grad(true);
  bias.set_requires_grad(true);
}

void Linear::visit_parameters(const std::string& prefix, const TensorVisitor& visit) {
  visit(prefix + ".weight", weight);
  visit(prefix + ".bias", bias);
}

ResidualBlock::ResidualBlock(std::size_t in_channels, std::size_t out_channels,
                             SplitMix64& rng)
    : in_channels_(in_channels), out_channels_(out_channels) {
  if (out_channels == 0 || out_channels % 2 != 0) {
    throw Error(ErrorCode::value, "residual block width " + std::to_string(out_channels) +
                                      " is not divisible by 2");
  }
  const std::size_t mid = out_channels / 2;
  bn1_ = BatchNorm2d(in_channels);
  conv1_ = Conv2d(in_channels, mid, 1, {1, 0}, rng);
  bn2_ = BatchNorm2d(mid);
  conv2_ = Conv2d(mid, mid, 3, {1, 1}, rng);
  bn3_ = BatchNorm2d(mid);
  conv3_ = Conv2d(mid, out_channels, 1, {1, 0}, rng);
  projected_skip_ = in_channels != out_channels;
  if (projected_skip_) skip_ = Conv2d(in_channels, out_channels, 1, {1, 0}, rng);
}

Tensor ResidualBlock::forward(const Tensor& input, Mode mode) {
  if (input.rank() != 4 || input.dim(1) != in_channels_) {
    throw Error(ErrorCode::shape, "residual block expects " + std::to_string(in_channels_) +
                                      " channels, got " + shape_str(input.shape()));
  }
  Tensor h = conv1_.forward(relu(bn1_.forward(input, mode)));
  h = conv2_.forward(relu(bn2_.forward(h, mode)));
  h = conv3_.forward(relu(bn3_.forward(h, mode)));
  Tensor skip = projected_skip_ ? skip_.forward(input) : input;
  return add(h, skip);
}

void ResidualBlock::visit_parameters(const std::string& prefix, const TensorVisitor& visit) {
  bn1_.visit_parameters(prefix + ".bn1", visit);
  conv1_.visit_parameters(prefix + ".conv1", visit);
  bn2_.visit_parameters(prefix + ".bn2", visit);
  conv2_.visit_parameters(prefix + ".conv2", visit);
  bn3_.visit_parameters(prefix + ".bn3", visit);
  conv3_.visit_parameters(prefix + ".conv3", visit);
  if (projected_skip_) skip_.visit_parameters(prefix + ".skip", visit);
}

void ResidualBlock::visit_buffers(const std::string& prefix, const TensorVisitor& visit) {
  bn1_.visit_buffers(prefix + ".bn1", visit);
  bn2_.visit_buffers(prefix + ".bn2", visit);
  bn3_.visit_buffers(prefix + ".bn3", visit);
}

}  // namespace cxhg
