#pragma once

#include <cstddef>

#include "cxhg/hourglass.hpp"
#include "cxhg/labels.hpp"
#include "cxhg/tensor.hpp"

namespace cxhg {

/// Softmax cross entropy per pixel over logits (B, D, H, W), averaged over
/// pixels whose label is not kIgnoreIndex. Zero when every pixel is ignored.
Tensor ce_loss(const Tensor& logits, const Labels& labels);

inline constexpr double kProbabilityClamp = 1e-7;

/// Mean binary cross entropy; probabilities are clamped to
/// [1e-7, 1 - 1e-7] (zero gradient where the clamp is active).
Tensor bce_loss(const Tensor& probs, const Tensor& targets);

struct LossWeights {
  double se_weight = 0.2;
};

struct LossTerms {
  Tensor total;
  double ce = 0.0;  // sum of segmentation terms
  double se = 0.0;  // weighted sum of semantic-encoding terms
  std::size_t ce_terms = 0;
  std::size_t se_terms = 0;
};

/// Sum of the per-module cross entropies plus se_weight times the sum of the
/// presence BCE terms against presence_targets(labels).
LossTerms total_loss(const NetworkOutput& out, const Labels& labels, LossWeights weights);

}  // namespace cxhg
