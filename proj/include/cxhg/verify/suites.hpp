#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cxhg/encoding.hpp"
#include "cxhg/hourglass.hpp"

namespace cxhg::verify {

struct CheckResult {
  std::string name;
  bool passed = false;
  double error = 0.0;      // worst observed error (0 for exact checks)
  double tolerance = 0.0;
  std::string detail;
};

using EncodeFn = std::function<EncodedSemantics(const Tensor&, const EncodingCodebook&)>;

inline constexpr double kGradTolerance = 1e-4;
inline constexpr double kGradStep = 1e-7;
inline constexpr double kEncodeTolerance = 1e-6;

/// patch 16, depth 2, widths [4, 4], K = 2, encoding at 1/4.
HourglassConfig tiny_config();

/// Encode with the residual sign flipped (r = d - x); a deliberately broken
/// implementation for mutation tests.
EncodedSemantics sign_flipped_encode(const Tensor& features, const EncodingCodebook& codebook);

/// `encode_fn` against the scalar oracle on `instances` random problems
/// (N <= 16, K <= 8, C <= 8), plus the per-position weight sum.
std::vector<CheckResult> check_encode_oracle(const EncodeFn& encode_fn, std::size_t instances,
                                             std::uint64_t seed);

/// Every layer op, in 64-bit mode.
std::vector<CheckResult> check_layer_gradients();
/// All parameters of the tiny network under the full training loss.
CheckResult check_network_gradient();

std::vector<CheckResult> check_kernels_against_oracles();
std::vector<CheckResult> check_losses_against_oracles();
CheckResult check_poly_lr(std::size_t samples);
CheckResult check_adam_trajectory();
CheckResult check_metrics_bruteforce(std::size_t pairs, std::uint64_t seed);
CheckResult check_pipeline_counts();
std::vector<CheckResult> check_roundtrips();

std::vector<CheckResult> gradcheck_suite();
std::vector<CheckResult> oracle_suite(const EncodeFn& encode_fn = encode);
std::vector<CheckResult> roundtrip_suite();

std::string format_result(const CheckResult& r);

}  // namespace cxhg::verify
