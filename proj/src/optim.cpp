#include "cxhg/optim.hpp"

#include <cmath>
#include <iostream>

#include "cxhg/error.hpp"

namespace cxhg {

double poly_lr(const LrSchedule& schedule, std::uint64_t iter) {
  if (schedule.total_iter == 0) throw Error(ErrorCode::value, "poly_lr: total_iter must be >= 1");
  if (iter > schedule.total_iter) {
    std::cerr << "warning: poly_lr iteration " << iter << " past total " << schedule.total_iter
              << ", clamping learning rate to 0\n";
    return 0.0;
  }
  const double remaining =
      1.0 - static_cast<double>(iter) / static_cast<double>(schedule.total_iter);
  return schedule.base_lr * std::pow(remaining, schedule.power);
}

void adam_step(NamedTensors& params, AdamState& state, double lr) {
  for (auto& [name, p] : params) {
    if (!p.has_grad()) continue;
    for (double g : p.grad_vector()) {
      if (!std::isfinite(g)) {
        throw Error(ErrorCode::numeric, "adam_step: non-finite gradient in " + name);
      }
    }
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);

  for (auto& [name, p] : params) {
    auto [m_it, m_new] = state.first_moment.try_emplace(name);
    if (m_new) m_it->second = Tensor::zeros(p.shape(), p.dtype());
    auto [v_it, v_new] = state.second_moment.try_emplace(name);
    if (v_new) v_it->second = Tensor::zeros(p.shape(), p.dtype());
    Tensor grad = p.grad();
    dispatch(p.dtype(), [&](auto tag) {
      using T = decltype(tag);
      auto values = p.mutable_values<T>();
      auto g = grad.values<T>();
      auto m = m_it->second.mutable_values<T>();
      auto v = v_it->second.mutable_values<T>();
      for (std::size_t i = 0; i < values.size(); ++i) {
        const double gi = g[i];
        const double mi = state.beta1 * m[i] + (1.0 - state.beta1) * gi;
        const double vi = state.beta2 * v[i] + (1.0 - state.beta2) * gi * gi;
        m[i] = static_cast<T>(mi);
        v[i] = static_cast<T>(vi);
        const double m_hat = mi / correction1;
        const double v_hat = vi / correction2;
        values[i] = static_cast<T>(values[i] - lr * m_hat / (std::sqrt(v_hat) + state.epsilon));
      }
    });
  }
}

}  // namespace cxhg
