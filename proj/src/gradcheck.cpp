#include "cxhg/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cxhg/error.hpp"

namespace cxhg {

namespace {

double evaluate(const ScalarFunction& f, const std::vector<Tensor>& inputs) {
  NoGradGuard guard;
  return f(inputs).item();
}

[[noreturn]] void non_finite(const char* what, std::size_t input, std::size_t index) {
  throw Error(ErrorCode::numeric, std::string("grad_check: non-finite ") + what +
                                      " at input " + std::to_string(input) +
                                      ", entry " + std::to_string(index));
}

}  // namespace

GradCheckReport grad_check_report(const ScalarFunction& f, const std::vector<Tensor>& inputs,
                                  double eps) {
  std::vector<Tensor> leaves = inputs;
  for (auto& t : leaves) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  Tensor out = f(leaves);
  if (!std::isfinite(out.item())) non_finite("function value", 0, 0);
  out.backward();

  GradCheckReport report;
  for (std::size_t t = 0; t < leaves.size(); ++t) {
    Tensor& x = leaves[t];
    const std::vector<double> analytic = x.grad_vector();
    for (std::size_t i = 0; i < x.numel(); ++i) {
      if (!std::isfinite(analytic[i])) non_finite("analytic gradient", t, i);
      const double original = x.at(i);
      const double step = eps * std::max(1.0, std::abs(original));

      x.set(i, original + step);
      const double up_point = x.at(i);
      const double f_up = evaluate(f, leaves);
      x.set(i, original - step);
      const double down_point = x.at(i);
      const double f_down = evaluate(f, leaves);
      x.set(i, original);
      if (!std::isfinite(f_up) || !std::isfinite(f_down)) {
        non_finite("perturbed function value", t, i);
      }

      // Differences use the stored (possibly rounded) perturbed coordinates.
      const double numeric = (f_up - f_down) / (up_point - down_point);
      const double denom = std::max({1.0, std::abs(analytic[i]), std::abs(numeric)});
      const double err = std::abs(analytic[i] - numeric) / denom;
      ++report.entries_checked;
      if (err > report.max_rel_error || report.entries_checked == 1) {
        report.max_rel_error = std::max(err, report.max_rel_error);
        report.worst_input = t;
        report.worst_index = i;
        report.analytic = analytic[i];
        report.numeric = numeric;
      }
    }
  }
  return report;
}

double grad_check(const ScalarFunction& f, const std::vector<Tensor>& inputs, double eps) {
  return grad_check_report(f, inputs, eps).max_rel_error;
}

}  // namespace cxhg
