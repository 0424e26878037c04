#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "cxhg/tensor.hpp"

namespace cxhg {

using ScalarFunction = std::function<Tensor(const std::vector<Tensor>&)>;

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t entries_checked = 0;
};

/// Compares reverse-mode gradients of `f` against central differences with a
/// relative step `eps` (step = eps * max(1, |x|)). The error per entry is
/// |analytic - numeric| / max(1, |analytic|, |numeric|).
///
/// `inputs` must be leaves; they are marked requires_grad, perturbed in place
/// and restored. Throws Error(numeric) naming the entry when f or its
/// gradient is non-finite.
GradCheckReport grad_check_report(const ScalarFunction& f, const std::vector<Tensor>& inputs,
                                  double eps);

double grad_check(const ScalarFunction& f, const std::vector<Tensor>& inputs, double eps);

}  // namespace cxhg
