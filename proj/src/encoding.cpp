#include "cxhg/encoding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cxhg/error.hpp"
#include "cxhg/ops.hpp"

namespace cxhg {

using detail::Buffer;

EncodingCodebook::EncodingCodebook(std::size_t num_codewords, std::size_t channels,
                                   SplitMix64& rng) {
  codewords = uniform_tensor({num_codewords, channels},
                             1.0 / std::sqrt(static_cast<double>(num_codewords)), rng);
  std::vector<float> s(num_codewords);
  for (auto& v : s) v = static_cast<float>(rng.uniform());
  smoothing = Tensor::from_vector({num_codewords}, std::move(s));
  codewords.set_requires_grad(true);
  smoothing.set_requires_grad(true);
}

void EncodingCodebook::visit_parameters(const std::string& prefix, const TensorVisitor& visit) {
  visit(prefix + ".codewords", codewords);
  visit(prefix + ".smoothing", smoothing);
}

EncodingHeads::EncodingHeads(std::size_t channels, std::size_t num_classes, SplitMix64& rng)
    : attention(channels, channels, rng), presence(channels, num_classes, rng) {}

void EncodingHeads::visit_parameters(const std::string& prefix, const TensorVisitor& visit) {
  attention.visit_parameters(prefix + ".attention", visit);
  presence.visit_parameters(prefix + ".presence", visit);
}

namespace {

void check_encoding_shapes(const Tensor& features, const Tensor& codewords,
                           const Tensor& smoothing) {
  if (features.rank() != 4) {
    throw Error(ErrorCode::shape, "encode: expected (B, C, H, W), got " +
                                      shape_str(features.shape()));
  }
  if (codewords.rank() != 2 || smoothing.rank() != 1 ||
      smoothing.dim(0) != codewords.dim(0)) {
    throw Error(ErrorCode::shape, "encode: bad codebook " + shape_str(codewords.shape()) +
                                      " / " + shape_str(smoothing.shape()));
  }
  if (features.dim(1) != codewords.dim(1)) {
    throw Error(ErrorCode::shape, "encode: features have " + std::to_string(features.dim(1)) +
                                      " channels, codebook has " +
                                      std::to_string(codewords.dim(1)));
  }
  if (features.dtype() != codewords.dtype() || features.dtype() != smoothing.dtype()) {
    throw Error(ErrorCode::value, "encode: mixed dtypes");
  }
}

// Per-position scratch: residuals r (K x C), squared norms q (K), weights w (K).
struct PositionScratch {
  std::vector<double> r, q, w;
  PositionScratch(std::size_t k, std::size_t c) : r(k * c), q(k), w(k) {}
};

template <class T>
void assign_position(const T* x, std::size_t stride, std::span<const T> d,
                     std::span<const T> s, std::size_t k_count, std::size_t c_count,
                     PositionScratch& p) {
  double max_logit = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < k_count; ++k) {
    double q = 0.0;
    for (std::size_t c = 0; c < c_count; ++c) {
      const double r = static_cast<double>(x[c * stride]) - d[k * c_count + c];
      p.r[k * c_count + c] = r;
      q += r * r;
    }
    p.q[k] = q;
    p.w[k] = -static_cast<double>(s[k]) * q;
    max_logit = std::max(max_logit, p.w[k]);
  }
  double z = 0.0;
  for (std::size_t k = 0; k < k_count; ++k) {
    p.w[k] = std::exp(p.w[k] - max_logit);
    z += p.w[k];
  }
  for (std::size_t k = 0; k < k_count; ++k) p.w[k] /= z;
}

}  // namespace

Tensor residual_encoding(const Tensor& features, const Tensor& codewords,
                         const Tensor& smoothing) {
  check_encoding_shapes(features, codewords, smoothing);
  const std::size_t batch = features.dim(0), channels = features.dim(1);
  const std::size_t positions = features.dim(2) * features.dim(3);
  const std::size_t k_count = codewords.dim(0);

  return dispatch(features.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto x = features.values<T>();
    auto d = codewords.values<T>();
    auto s = smoothing.values<T>();
    std::vector<double> acc(batch * k_count * channels, 0.0);
    PositionScratch p(k_count, channels);
    for (std::size_t b = 0; b < batch; ++b) {
      const T* xb = x.data() + b * channels * positions;
      double* eb = acc.data() + b * k_count * channels;
      for (std::size_t i = 0; i < positions; ++i) {
        assign_position<T>(xb + i, positions, d, s, k_count, channels, p);
        for (std::size_t kc = 0; kc < k_count * channels; ++kc) {
          eb[kc] += p.w[kc / channels] * p.r[kc];
        }
      }
    }
    Buffer out = Buffer::zeros(features.dtype(), acc.size());
    auto o = out.as<T>();
    for (std::size_t i = 0; i < acc.size(); ++i) o[i] = static_cast<T>(acc[i]);

    auto backward = [=](const Buffer& gout, std::span<Buffer* const> gin) {
      auto g = gout.as<T>();
      auto x = features.values<T>();
      auto d = codewords.values<T>();
      auto s = smoothing.values<T>();
      std::vector<double> dd(k_count * channels, 0.0), ds(k_count, 0.0);
      std::vector<double> dr(k_count * channels), alpha(k_count);
      PositionScratch p(k_count, channels);
      for (std::size_t b = 0; b < batch; ++b) {
        const T* xb = x.data() + b * channels * positions;
        const T* gb = g.data() + b * k_count * channels;
        for (std::size_t i = 0; i < positions; ++i) {
          assign_position<T>(xb + i, positions, d, s, k_count, channels, p);
          // dL/dw_ik = G_k . r_ik, then through the softmax.
          double mean_g = 0.0;
          for (std::size_t k = 0; k < k_count; ++k) {
            double gk = 0.0;
            for (std::size_t c = 0; c < channels; ++c) {
              gk += gb[k * channels + c] * p.r[k * channels + c];
            }
            alpha[k] = gk;
            mean_g += p.w[k] * gk;
          }
          for (std::size_t k = 0; k < k_count; ++k) {
            alpha[k] = p.w[k] * (alpha[k] - mean_g);  // dL/d(logit_k)
            ds[k] -= alpha[k] * p.q[k];
            const double radial = -2.0 * alpha[k] * s[k];
            for (std::size_t c = 0; c < channels; ++c) {
              const std::size_t kc = k * channels + c;
              dr[kc] = p.w[k] * gb[kc] + radial * p.r[kc];
              dd[kc] -= dr[kc];
            }
          }
          if (gin[0]) {
            T* dx = gin[0]->as<T>().data() + b * channels * positions + i;
            for (std::size_t c = 0; c < channels; ++c) {
              double sum = 0.0;
              for (std::size_t k = 0; k < k_count; ++k) sum += dr[k * channels + c];
              dx[c * positions] += static_cast<T>(sum);
            }
          }
        }
      }
      if (gin[1]) {
        auto t = gin[1]->as<T>();
        for (std::size_t i = 0; i < dd.size(); ++i) t[i] += static_cast<T>(dd[i]);
      }
      if (gin[2]) {
        auto t = gin[2]->as<T>();
        for (std::size_t k = 0; k < k_count; ++k) t[k] += static_cast<T>(ds[k]);
      }
    };
    return make_result({batch, k_count, channels}, std::move(out), "residual_encoding",
                       {features, codewords, smoothing}, backward);
  });
}

EncodedSemantics encode(const Tensor& features, const EncodingCodebook& codebook) {
  EncodedSemantics enc;
  enc.residual_encoders = residual_encoding(features, codebook.codewords, codebook.smoothing);
  enc.aggregate = reduce(ReduceKind::sum, relu(enc.residual_encoders), {1});
  return enc;
}

Tensor soft_assignment_weights(const Tensor& features, const EncodingCodebook& codebook) {
  check_encoding_shapes(features, codebook.codewords, codebook.smoothing);
  const std::size_t batch = features.dim(0), channels = features.dim(1);
  const std::size_t positions = features.dim(2) * features.dim(3);
  const std::size_t k_count = codebook.num_codewords();
  return dispatch(features.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto x = features.values<T>();
    std::vector<double> w(batch * positions * k_count);
    PositionScratch p(k_count, channels);
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t i = 0; i < positions; ++i) {
        assign_position<T>(x.data() + b * channels * positions + i, positions,
                           codebook.codewords.values<T>(), codebook.smoothing.values<T>(),
                           k_count, channels, p);
        std::copy(p.w.begin(), p.w.end(), w.begin() + (b * positions + i) * k_count);
      }
    }
    return Tensor::from_vector({batch, positions, k_count}, std::move(w));
  });
}

Tensor scaling_factors(const EncodedSemantics& enc, const EncodingHeads& heads) {
  return sigmoid(heads.attention.forward(enc.aggregate));
}

Tensor attention_scale(const Tensor& features, const EncodedSemantics& enc,
                       const EncodingHeads& heads) {
  if (features.rank() != 4 || enc.aggregate.rank() != 2 ||
      enc.aggregate.dim(0) != features.dim(0) || enc.aggregate.dim(1) != features.dim(1)) {
    throw Error(ErrorCode::shape, "attention_scale: features " + shape_str(features.shape()) +
                                      " vs encoded " + shape_str(enc.aggregate.shape()));
  }
  Tensor gamma = scaling_factors(enc, heads);
  return mul(features, reshape(gamma, {features.dim(0), features.dim(1), 1, 1}));
}

Tensor presence_logits(const EncodedSemantics& enc, const EncodingHeads& heads) {
  return sigmoid(heads.presence.forward(enc.aggregate));
}

Tensor presence_targets(const Labels& labels, std::size_t num_classes, DType dtype) {
  std::vector<double> t(labels.batch * num_classes, 0.0);
  const std::size_t per = labels.pixels_per_sample();
  for (std::size_t b = 0; b < labels.batch; ++b) {
    for (std::size_t i = 0; i < per; ++i) {
      const std::uint8_t id = labels.ids[b * per + i];
      if (id == kIgnoreIndex) continue;
      if (id >= num_classes) {
        throw Error(ErrorCode::value, "presence_targets: label " + std::to_string(id) +
                                          " >= num_classes " + std::to_string(num_classes));
      }
      t[b * num_classes + id] = 1.0;
    }
  }
  Tensor out = Tensor::from_vector({labels.batch, num_classes}, std::move(t));
  return dtype == DType::f64 ? out : out.to(DType::f32);
}

}  // namespace cxhg
