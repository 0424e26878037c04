#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "cxhg/tensor.hpp"

namespace cxhg {

struct LrSchedule {
  double base_lr = 1e-4;
  double power = 0.95;
  std::uint64_t total_iter = 1;
};

/// base_lr * (1 - iter / total_iter)^power. Iterations past total_iter give 0
/// (with a warning on stderr).
double poly_lr(const LrSchedule& schedule, std::uint64_t iter);

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  std::map<std::string, Tensor> first_moment;
  std::map<std::string, Tensor> second_moment;
};

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

/// One bias-corrected Adam update over `params` using their accumulated
/// gradients (missing gradients count as zero). Every gradient is checked
/// before any parameter moves; a non-finite entry rejects the whole step with
/// an Error(numeric) naming the parameter.
void adam_step(NamedTensors& params, AdamState& state, double lr);

}  // namespace cxhg
