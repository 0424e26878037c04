#pragma once

#include <cstddef>
#include <string>

#include "cxhg/labels.hpp"
#include "cxhg/layers.hpp"
#include "cxhg/tensor.hpp"

namespace cxhg {

/// Learnable codewords (K x C) and per-codeword smoothing factors (K). One
/// instance is shared by both encoding layers of a contextual hourglass
/// module; copies of this struct alias the same parameter storage.
struct EncodingCodebook {
  Tensor codewords;
  Tensor smoothing;

  EncodingCodebook() = default;
  /// codewords ~ uniform(+-1/sqrt(K)), smoothing ~ uniform(0, 1).
  EncodingCodebook(std::size_t num_codewords, std::size_t channels, SplitMix64& rng);

  std::size_t num_codewords() const { return codewords.dim(0); }
  std::size_t channels() const { return codewords.dim(1); }

  void visit_parameters(const std::string& prefix, const TensorVisitor& visit);
};

struct EncodedSemantics {
  Tensor residual_encoders;  // (B, K, C)
  Tensor aggregate;          // (B, C), sum over k of relu(E_k)
};

/// The two fully connected branches stacked on an encoding layer. Heads are
/// owned per encoding layer; only the codebook is shared.
struct EncodingHeads {
  Linear attention;  // C -> C, sigmoid gives the channel scaling factors
  Linear presence;   // C -> num_classes, sigmoid gives class presence

  EncodingHeads() = default;
  EncodingHeads(std::size_t channels, std::size_t num_classes, SplitMix64& rng);

  void visit_parameters(const std::string& prefix, const TensorVisitor& visit);
};

/// Residual encoders E (B, K, C) of features (B, C, H, W):
///   r_ik = x_i - d_k
///   w_ik = exp(-s_k |r_ik|^2) / sum_j exp(-s_j |r_ij|^2)
///   E_k  = sum_i w_ik r_ik
/// Differentiable with respect to features, codewords and smoothing.
Tensor residual_encoding(const Tensor& features, const Tensor& codewords,
                         const Tensor& smoothing);

EncodedSemantics encode(const Tensor& features, const EncodingCodebook& codebook);

/// Soft-assignment weights (B, N, K) without gradient tracking.
Tensor soft_assignment_weights(const Tensor& features, const EncodingCodebook& codebook);

/// gamma = sigmoid(attention(e)), shape (B, C).
Tensor scaling_factors(const EncodedSemantics& enc, const EncodingHeads& heads);

/// Y[b, c, h, w] = features[b, c, h, w] * gamma[b, c].
Tensor attention_scale(const Tensor& features, const EncodedSemantics& enc,
                       const EncodingHeads& heads);

/// Per-class presence probabilities sigmoid(presence(e)), shape (B, D).
Tensor presence_logits(const EncodedSemantics& enc, const EncodingHeads& heads);

/// (B, D) tensor with 1 where class d occurs at a non-ignored pixel of sample b.
Tensor presence_targets(const Labels& labels, std::size_t num_classes,
                        DType dtype = DType::f32);

}  // namespace cxhg
