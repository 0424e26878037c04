#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "cxhg/encoding.hpp"
#include "cxhg/labels.hpp"
#include "cxhg/layers.hpp"
#include "cxhg/tensor.hpp"

namespace cxhg {

/// Architecture blueprint. widths[l] is the feature count after the l-th
/// resolution drop inside every module (1/2, 1/4, ...); the module input and
/// output run at widths[0].
struct HourglassConfig {
  std::size_t num_modules = 4;
  std::size_t depth = 4;
  std::vector<std::size_t> widths{128, 128, 256, 256};
  std::size_t stem_width = 64;
  std::size_t num_classes = 6;
  std::size_t input_channels = 5;
  std::size_t patch_size = 256;
  std::size_t encoding_divisor = 8;
  std::size_t num_codewords = 32;

  /// Throws Error(config) naming the violated invariant.
  void validate() const;
  /// log2(encoding_divisor): the level index the encoding layers sit at.
  std::size_t encoding_level() const;
};

struct NetworkOutput {
  std::vector<Tensor> per_module_logits;  // each (B, D, H, W)
  Tensor fused_logits;                    // elementwise sum of the above
  std::vector<Tensor> se_probs;           // (B, D), two per module; empty when bypassed
};

/// Phase-1 training runs the network with the encoding layers bypassed
/// (attention replaced by identity, no presence predictions).
enum class EncodingUse { enabled, bypassed };

struct ModuleOutput {
  Tensor features;             // input to the next module
  Tensor logits;               // intermediate prediction
  std::vector<Tensor> se_probs;
};

class ContextualHourglassModule {
 public:
  ContextualHourglassModule() = default;
  ContextualHourglassModule(const HourglassConfig& config, SplitMix64& rng);

  ModuleOutput forward(const Tensor& input, Mode mode, EncodingUse use);

  EncodingCodebook& codebook() { return codebook_; }
  /// index 0: encoder-path layer, index 1: decoder-path layer.
  EncodingHeads& heads(std::size_t index) { return heads_.at(index); }
  Conv2d& prediction_head() { return head_; }

  void visit_parameters(const std::string& prefix, const TensorVisitor& visit);
  void visit_buffers(const std::string& prefix, const TensorVisitor& visit);

 private:
  Tensor apply_encoding(const Tensor& features, std::size_t layer, EncodingUse use,
                        std::vector<Tensor>& se_probs);

  std::size_t depth_ = 0;
  std::size_t encoding_level_ = 0;
  std::size_t input_width_ = 0;
  std::vector<ResidualBlock> skip_;
  std::vector<ResidualBlock> down_;
  std::vector<ResidualBlock> up_;
  ResidualBlock bottom_;
  ResidualBlock output_block_;
  Conv2d head_;
  Conv2d feature_remap_;
  Conv2d logit_remap_;
  EncodingCodebook codebook_;
  std::vector<EncodingHeads> heads_;
};

class HourglassNetwork {
 public:
  HourglassNetwork(const HourglassConfig& config, std::uint64_t seed);

  /// image: (B, input_channels, patch, patch).
  NetworkOutput forward(const Tensor& image, Mode mode,
                        EncodingUse use = EncodingUse::enabled);

  const HourglassConfig& config() const { return config_; }
  ContextualHourglassModule& module(std::size_t m) { return modules_.at(m); }

  /// Trainable tensors in a stable order.
  void visit_parameters(const TensorVisitor& visit);
  /// Non-trainable state (batch-norm running statistics).
  void visit_buffers(const TensorVisitor& visit);

  std::vector<std::pair<std::string, Tensor>> named_parameters();
  std::vector<std::pair<std::string, Tensor>> named_buffers();

  /// Converts every parameter and buffer to `dtype` (f64 for verification).
  void to(DType dtype);
  void zero_grad();

 private:
  HourglassConfig config_;
  Conv2d stem_conv_;
  ResidualBlock stem_block_;
  std::vector<ContextualHourglassModule> modules_;
};

/// True for codebook and encoding-head parameters (frozen in phase 1).
bool is_encoding_parameter(const std::string& name);

/// Per-pixel argmax over the class axis; ties go to the smallest class id.
Labels predict_labels(const Tensor& logits);

}  // namespace cxhg
