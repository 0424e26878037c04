#pragma once

#include <cstddef>
#include <functional>
#include <string>

#include "cxhg/rng.hpp"
#include "cxhg/tensor.hpp"

namespace cxhg {

enum class Mode { train, eval };

/// Visits a named tensor. Parameter names are stable across builds of the
/// same configuration and form the checkpoint keys.
using TensorVisitor = std::function<void(const std::string& name, Tensor& tensor)>;

struct ConvGeometry {
  std::size_t stride = 1;
  std::size_t padding = 0;
};

/// Cross-correlation of (B, C_in, H, W) with (C_out, C_in, kh, kw) plus bias.
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              ConvGeometry geometry);

/// 2x2 window, stride 2. Gradient goes to the first maximum in row-major
/// order within each window.
Tensor max_pool2d(const Tensor& input);

/// Bilinear upsampling with half-pixel centers:
/// src = (dst + 0.5) / factor - 0.5, clamped to [0, extent - 1].
Tensor bilinear_upsample(const Tensor& input, std::size_t factor);

/// input (B, F_in) x weight (F_in, F_out) + bias (F_out).
Tensor fully_connected(const Tensor& input, const Tensor& weight, const Tensor& bias);

struct BatchNormState {
  Tensor gamma;
  Tensor beta;
  Tensor running_mean;
  Tensor running_var;
  /// Number of train-mode updates folded into the running statistics.
  Tensor tracked;
  double momentum = 0.9;
  double epsilon = 1e-5;
};

/// Per-channel normalization then affine. Train mode normalizes with the
/// (biased) batch statistics and folds them into the running statistics as
/// running = momentum * running + (1 - momentum) * batch. Eval mode uses the
/// running statistics only and rejects state that was never trained.
Tensor batch_norm(const Tensor& input, BatchNormState& state, Mode mode);

struct Conv2d {
  Tensor weight;
  Tensor bias;
  ConvGeometry geometry;

  Conv2d() = default;
  /// Weights and bias ~ uniform(+-1/sqrt(fan_in)).
  Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
         ConvGeometry geometry, SplitMix64& rng);

  std::size_t in_channels() const { return weight.dim(1); }
  std::size_t out_channels() const { return weight.dim(0); }

  Tensor forward(const Tensor& input) const;
  void visit_parameters(const std::string& prefix, const TensorVisitor& visit);
};

struct BatchNorm2d {
  BatchNormState state;

  BatchNorm2d() = default;
  explicit BatchNorm2d(std::size_t channels);

  Tensor forward(const Tensor& input, Mode mode) { return batch_norm(input, state, mode); }
  void visit_parameters(const std::string& prefix, const TensorVisitor& visit);
  void visit_buffers(const std::string& prefix, const TensorVisitor& visit);
};

struct Linear {
  Tensor weight;  // (F_in, F_out)
  Tensor bias;    // (F_out)

  Linear() = default;
  /// Weight ~ uniform(+-1/sqrt(F_in)), bias 0.
  Linear(std::size_t in_features, std::size_t out_features, SplitMix64& rng);

  Tensor forward(const Tensor& input) const { return fully_connected(input, weight, bias); }
  void visit_parameters(const std::string& prefix, const TensorVisitor& visit);
};

/// Bottleneck residual block:
///   BN-ReLU-conv1x1(out/2) -> BN-ReLU-conv3x3(out/2) -> BN-ReLU-conv1x1(out)
/// plus a skip branch that is the identity when widths agree and a 1x1
/// convolution otherwise.
class ResidualBlock {
 public:
  ResidualBlock() = default;
  ResidualBlock(std::size_t in_channels, std::size_t out_channels, SplitMix64& rng);

  Tensor forward(const Tensor& input, Mode mode);
  std::size_t in_channels() const { return in_channels_; }
  std::size_t out_channels() const { return out_channels_; }

  void visit_parameters(const std::string& prefix, const TensorVisitor& visit);
  void visit_buffers(const std::string& prefix, const TensorVisitor& visit);

 private:
  std::size_t in_channels_ = 0;
  std::size_t out_channels_ = 0;
  BatchNorm2d bn1_, bn2_, bn3_;
  Conv2d conv1_, conv2_, conv3_;
  bool projected_skip_ = false;
  Conv2d skip_;
};

Tensor uniform_tensor(Shape shape, double bound, SplitMix64& rng);

}  // namespace cxhg
