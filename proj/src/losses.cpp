#include "cxhg/losses.hpp"

#include <algorithm>
#include <cmath>

#include "cxhg/encoding.hpp"
#include "cxhg/error.hpp"
#include "cxhg/ops.hpp"

namespace cxhg {

using detail::Buffer;

Tensor ce_loss(const Tensor& logits, const Labels& labels) {
  if (logits.rank() != 4 || logits.dim(0) != labels.batch || logits.dim(2) != labels.height ||
      logits.dim(3) != labels.width) {
    throw Error(ErrorCode::shape, "ce_loss: logits " + shape_str(logits.shape()) +
                                      " vs labels (" + std::to_string(labels.batch) + ", " +
                                      std::to_string(labels.height) + ", " +
                                      std::to_string(labels.width) + ")");
  }
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  const std::size_t plane = labels.pixels_per_sample();
  std::size_t valid = 0;
  for (auto id : labels.ids) {
    if (id == kIgnoreIndex) continue;
    if (id >= classes) {
      throw Error(ErrorCode::value, "ce_loss: class id " + std::to_string(id) +
                                        " out of range for " + std::to_string(classes) +
                                        " classes");
    }
    ++valid;
  }

  return dispatch(logits.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto z = logits.values<T>();
    auto probs = std::make_shared<std::vector<T>>(z.size());
    double total = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      const T* zb = z.data() + b * classes * plane;
      T* pb = probs->data() + b * classes * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        const std::uint8_t id = labels.ids[b * plane + i];
        if (id == kIgnoreIndex) continue;
        double mx = zb[i];
        for (std::size_t c = 1; c < classes; ++c) mx = std::max(mx, double(zb[c * plane + i]));
        double denom = 0.0;
        for (std::size_t c = 0; c < classes; ++c) denom += std::exp(zb[c * plane + i] - mx);
        for (std::size_t c = 0; c < classes; ++c) {
          pb[c * plane + i] = static_cast<T>(std::exp(zb[c * plane + i] - mx) / denom);
        }
        total += std::log(denom) - (zb[id * plane + i] - mx);
      }
    }
    const double scale = valid ? 1.0 / static_cast<double>(valid) : 0.0;
    Buffer out = Buffer::zeros(logits.dtype(), 1);
    out.as<T>()[0] = static_cast<T>(total * scale);

    auto ids = std::make_shared<const std::vector<std::uint8_t>>(labels.ids);
    auto backward = [=](const Buffer& gout, std::span<Buffer* const> gin) {
      if (!gin[0]) return;
      const double g = gout.as<T>()[0] * scale;
      auto d = gin[0]->as<T>();
      for (std::size_t b = 0; b < batch; ++b) {
        const T* pb = probs->data() + b * classes * plane;
        T* db = d.data() + b * classes * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          const std::uint8_t id = (*ids)[b * plane + i];
          if (id == kIgnoreIndex) continue;
          for (std::size_t c = 0; c < classes; ++c) {
            const double onehot = c == id ? 1.0 : 0.0;
            db[c * plane + i] += static_cast<T>(g * (pb[c * plane + i] - onehot));
          }
        }
      }
    };
    return make_result({}, std::move(out), "ce_loss", {logits}, backward);
  });
}

Tensor bce_loss(const Tensor& probs, const Tensor& targets) {
  if (probs.shape() != targets.shape()) {
    throw Error(ErrorCode::shape, "bce_loss: probs " + shape_str(probs.shape()) +
                                      " vs targets " + shape_str(targets.shape()));
  }
  if (probs.dtype() != targets.dtype()) throw Error(ErrorCode::value, "bce_loss: mixed dtypes");
  const std::size_t n = probs.numel();
  return dispatch(probs.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto p = probs.values<T>();
    auto t = targets.values<T>();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double pc = std::clamp<double>(p[i], kProbabilityClamp, 1.0 - kProbabilityClamp);
      total -= t[i] * std::log(pc) + (1.0 - t[i]) * std::log(1.0 - pc);
    }
    Buffer out = Buffer::zeros(probs.dtype(), 1);
    out.as<T>()[0] = static_cast<T>(total / static_cast<double>(n));
    auto backward = [=](const Buffer& gout, std::span<Buffer* const> gin) {
      if (!gin[0]) return;
      const double g = gout.as<T>()[0] / static_cast<double>(n);
      auto p = probs.values<T>();
      auto t = targets.values<T>();
      auto d = gin[0]->as<T>();
      for (std::size_t i = 0; i < n; ++i) {
        const double pv = p[i];
        if (pv < kProbabilityClamp || pv > 1.0 - kProbabilityClamp) continue;
        d[i] += static_cast<T>(g * (-t[i] / pv + (1.0 - t[i]) / (1.0 - pv)));
      }
    };
    return make_result({}, std::move(out), "bce_loss", {probs, targets}, backward);
  });
}

LossTerms total_loss(const NetworkOutput& out, const Labels& labels, LossWeights weights) {
  if (!std::isfinite(weights.se_weight) || weights.se_weight < 0.0) {
    throw Error(ErrorCode::value, "se_weight must be finite and non-negative");
  }
  LossTerms terms;
  Tensor ce;
  for (const auto& logits : out.per_module_logits) {
    Tensor term = ce_loss(logits, labels);
    ce = ce.defined() ? add(ce, term) : term;
    ++terms.ce_terms;
  }
  terms.ce = ce.item();
  terms.total = ce;
  if (weights.se_weight > 0.0 && !out.se_probs.empty()) {
    const std::size_t classes = out.se_probs.front().dim(1);
    Tensor targets = presence_targets(labels, classes, out.se_probs.front().dtype());
    Tensor se;
    for (const auto& probs : out.se_probs) {
      Tensor term = bce_loss(probs, targets);
      se = se.defined() ? add(se, term) : term;
      ++terms.se_terms;
    }
    Tensor weighted = scale(se, weights.se_weight);
    terms.se = weighted.item();
    terms.total = add(ce, weighted);
  }
  return terms;
}

}  // namespace cxhg
