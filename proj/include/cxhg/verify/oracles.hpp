#pragma once

// Plain scalar-loop reference implementations. They share no code with the
// library kernels and work in long double / 64-bit integers throughout.

#include <cstddef>
#include <cstdint>
#include <vector>

namespace cxhg::oracle {

struct EncodeResult {
  std::vector<double> residual_encoders;  // (B, K, C)
  std::vector<double> aggregate;          // (B, C)
  std::vector<double> weights;            // (B, N, K)
};

/// x: (B, C, N) with N = H*W, codewords (K, C), smoothing (K).
EncodeResult encode(const std::vector<double>& x, std::size_t batch, std::size_t channels,
                    std::size_t positions, const std::vector<double>& codewords,
                    const std::vector<double>& smoothing, std::size_t num_codewords);

/// Direct 6-loop cross-correlation; input (B, Ci, H, W), weight (Co, Ci, k, k).
std::vector<double> conv2d(const std::vector<double>& input, std::size_t batch,
                           std::size_t in_channels, std::size_t height, std::size_t width,
                           const std::vector<double>& weight, const std::vector<double>& bias,
                           std::size_t out_channels, std::size_t kernel, std::size_t stride,
                           std::size_t padding);

std::vector<double> matmul(const std::vector<double>& a, const std::vector<double>& b,
                           std::size_t m, std::size_t k, std::size_t n);

/// Mean per-pixel softmax cross entropy over logits (B, D, H, W); 255 ignored.
double cross_entropy(const std::vector<double>& logits, const std::vector<std::uint8_t>& labels,
                     std::size_t batch, std::size_t classes, std::size_t pixels);

double binary_cross_entropy(const std::vector<double>& probs, const std::vector<double>& targets);

double poly_lr(double base, double power, std::uint64_t iter, std::uint64_t total);

/// x_t trajectory of Adam on f(x) = x^2 (gradient 2x).
std::vector<double> adam_quadratic(double x0, double lr, int steps);

struct Tally {
  std::uint64_t valid = 0;
  std::uint64_t correct = 0;
  std::vector<std::uint64_t> intersection;  // per class
  std::vector<std::uint64_t> union_;        // per class
};

/// Pixel scan of (prediction, truth); truth 255 skipped.
Tally tally(const std::vector<std::uint8_t>& prediction, const std::vector<std::uint8_t>& truth,
            std::size_t classes);

/// Exact rational results as (numerator, denominator) pairs are compared by
/// cross-multiplication in the callers; these give the double values.
double tally_pixacc(const Tally& t);
double tally_miou(const Tally& t);

/// ceil-division tiling count.
std::uint64_t patch_count(std::uint64_t width, std::uint64_t height, std::uint64_t patch);

}  // namespace cxhg::oracle
