#include "cxhg/verify/oracles.hpp"

#include <cmath>
#include <stdexcept>

namespace cxhg::oracle {

using ld = long double;

EncodeResult encode(const std::vector<double>& x, std::size_t batch, std::size_t channels,
                    std::size_t positions, const std::vector<double>& codewords,
                    const std::vector<double>& smoothing, std::size_t num_codewords) {
  const std::size_t B = batch, C = channels, N = positions, K = num_codewords;
  EncodeResult out;
  out.residual_encoders.assign(B * K * C, 0.0);
  out.aggregate.assign(B * C, 0.0);
  out.weights.assign(B * N * K, 0.0);
  for (std::size_t b = 0; b < B; ++b) {
    std::vector<ld> E(K * C, 0.0L);
    for (std::size_t i = 0; i < N; ++i) {
      std::vector<ld> logit(K);
      for (std::size_t k = 0; k < K; ++k) {
        ld dist = 0;
        for (std::size_t c = 0; c < C; ++c) {
          const ld r = static_cast<ld>(x[(b * C + c) * N + i]) - codewords[k * C + c];
          dist += r * r;
        }
        logit[k] = -static_cast<ld>(smoothing[k]) * dist;
      }
      ld denom = 0;
      for (std::size_t k = 0; k < K; ++k) denom += std::exp(logit[k]);
      for (std::size_t k = 0; k < K; ++k) {
        const ld w = std::exp(logit[k]) / denom;
        out.weights[(b * N + i) * K + k] = static_cast<double>(w);
        for (std::size_t c = 0; c < C; ++c) {
          E[k * C + c] += w * (static_cast<ld>(x[(b * C + c) * N + i]) - codewords[k * C + c]);
        }
      }
    }
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t c = 0; c < C; ++c) {
        out.residual_encoders[(b * K + k) * C + c] = static_cast<double>(E[k * C + c]);
        if (E[k * C + c] > 0) out.aggregate[b * C + c] += static_cast<double>(E[k * C + c]);
      }
    }
  }
  return out;
}

std::vector<double> conv2d(const std::vector<double>& input, std::size_t batch,
                           std::size_t in_channels, std::size_t height, std::size_t width,
                           const std::vector<double>& weight, const std::vector<double>& bias,
                           std::size_t out_channels, std::size_t kernel, std::size_t stride,
                           std::size_t padding) {
  const long H = static_cast<long>(height), W = static_cast<long>(width);
  const std::size_t OH = (height + 2 * padding - kernel) / stride + 1;
  const std::size_t OW = (width + 2 * padding - kernel) / stride + 1;
  std::vector<double> out(batch * out_channels * OH * OW);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t o = 0; o < out_channels; ++o)
      for (std::size_t oy = 0; oy < OH; ++oy)
        for (std::size_t ox = 0; ox < OW; ++ox) {
          ld acc = bias[o];
          for (std::size_t c = 0; c < in_channels; ++c)
            for (std::size_t ky = 0; ky < kernel; ++ky)
              for (std::size_t kx = 0; kx < kernel; ++kx) {
                const long y = static_cast<long>(oy * stride + ky) - static_cast<long>(padding);
                const long xx = static_cast<long>(ox * stride + kx) - static_cast<long>(padding);
                if (y < 0 || y >= H || xx < 0 || xx >= W) continue;
                acc += static_cast<ld>(input[((b * in_channels + c) * height + y) * width + xx]) *
                       weight[((o * in_channels + c) * kernel + ky) * kernel + kx];
              }
          out[((b * out_channels + o) * OH + oy) * OW + ox] = static_cast<double>(acc);
        }
  return out;
}

std::vector<double> matmul(const std::vector<double>& a, const std::vector<double>& b,
                           std::size_t m, std::size_t k, std::size_t n) {
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      ld acc = 0;
      for (std::size_t p = 0; p < k; ++p) acc += static_cast<ld>(a[i * k + p]) * b[p * n + j];
      out[i * n + j] = static_cast<double>(acc);
    }
  return out;
}

double cross_entropy(const std::vector<double>& logits, const std::vector<std::uint8_t>& labels,
                     std::size_t batch, std::size_t classes, std::size_t pixels) {
  ld total = 0;
  std::size_t count = 0;
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t p = 0; p < pixels; ++p) {
      const auto t = labels[b * pixels + p];
      if (t == 255) continue;
      ld denom = 0;
      for (std::size_t d = 0; d < classes; ++d) denom += std::exp(static_cast<ld>(logits[(b * classes + d) * pixels + p]));
      total += std::log(denom) - logits[(b * classes + t) * pixels + p];
      ++count;
    }
  return count == 0 ? 0.0 : static_cast<double>(total / count);
}

double binary_cross_entropy(const std::vector<double>& probs, const std::vector<double>& targets) {
  ld total = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    ld p = probs[i];
    if (p < 1e-7L) p = 1e-7L;
    if (p > 1 - 1e-7L) p = 1 - 1e-7L;
    total -= targets[i] * std::log(p) + (1 - targets[i]) * std::log(1 - p);
  }
  return static_cast<double>(total / probs.size());
}

double poly_lr(double base, double power, std::uint64_t iter, std::uint64_t total) {
  const ld frac = 1.0L - static_cast<ld>(iter) / static_cast<ld>(total);
  return static_cast<double>(base * std::pow(frac, static_cast<ld>(power)));
}

std::vector<double> adam_quadratic(double x0, double lr, int steps) {
  ld x = x0, m = 0, v = 0;
  const ld b1 = 0.9L, b2 = 0.999L, eps = 1e-8L;
  std::vector<double> traj{x0};
  for (int t = 1; t <= steps; ++t) {
    const ld g = 2 * x;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const ld mhat = m / (1 - std::pow(b1, t));
    const ld vhat = v / (1 - std::pow(b2, t));
    x -= lr * mhat / (std::sqrt(vhat) + eps);
    traj.push_back(static_cast<double>(x));
  }
  return traj;
}

Tally tally(const std::vector<std::uint8_t>& prediction, const std::vector<std::uint8_t>& truth,
            std::size_t classes) {
  if (prediction.size() != truth.size()) throw std::invalid_argument("tally: size mismatch");
  Tally t;
  t.intersection.assign(classes, 0);
  t.union_.assign(classes, 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] == 255) continue;
    ++t.valid;
    if (truth[i] == prediction[i]) ++t.correct;
    for (std::size_t c = 0; c < classes; ++c) {
      const bool in_t = truth[i] == c, in_p = prediction[i] == c;
      if (in_t && in_p) ++t.intersection[c];
      if (in_t || in_p) ++t.union_[c];
    }
  }
  return t;
}

double tally_pixacc(const Tally& t) {
  return static_cast<double>(t.correct) / static_cast<double>(t.valid);
}

double tally_miou(const Tally& t) {
  double sum = 0;
  std::size_t n = 0;
  for (std::size_t c = 0; c < t.union_.size(); ++c) {
    if (t.union_[c] == 0) continue;
    sum += static_cast<double>(t.intersection[c]) / static_cast<double>(t.union_[c]);
    ++n;
  }
  return sum / static_cast<double>(n);
}

std::uint64_t patch_count(std::uint64_t width, std::uint64_t height, std::uint64_t patch) {
  std::uint64_t cols = 0, rows = 0;
  for (std::uint64_t x = 0; x < width; x += patch) ++cols;
  for (std::uint64_t y = 0; y < height; y += patch) ++rows;
  return cols * rows;
}

}  // namespace cxhg::oracle
