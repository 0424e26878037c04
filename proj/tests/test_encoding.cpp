#include <gtest/gtest.h>

#include <cmath>

#include "cxhg/encoding.hpp"
#include "cxhg/error.hpp"
#include "cxhg/gradcheck.hpp"
#include "cxhg/hourglass.hpp"
#include "cxhg/losses.hpp"
#include "cxhg/ops.hpp"
#include "cxhg/optim.hpp"
#include "cxhg/rng.hpp"
#include "cxhg/verify/oracles.hpp"
#include "cxhg/verify/suites.hpp"

using namespace cxhg;

namespace {

Tensor random_tensor(Shape shape, SplitMix64& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor::from_vector(std::move(shape), std::move(v));
}

EncodingCodebook codebook_of(Tensor codewords, Tensor smoothing) {
  EncodingCodebook cb;
  cb.codewords = std::move(codewords);
  cb.smoothing = std::move(smoothing);
  return cb;
}

EncodingHeads heads_of(std::size_t channels, std::size_t classes, DType dtype = DType::f64) {
  EncodingHeads h;
  h.attention.weight = Tensor::zeros({channels, channels}, dtype);
  h.attention.bias = Tensor::zeros({channels}, dtype);
  h.presence.weight = Tensor::zeros({channels, classes}, dtype);
  h.presence.bias = Tensor::zeros({classes}, dtype);
  return h;
}

}  // namespace

TEST(Encode, SingleCodewordSumsResiduals) {
  // (B=1, C=2, H=1, W=2): x_1 = (1, 0), x_2 = (0, 1)
  Tensor x = Tensor::from_list({1, 2, 1, 2}, {1, 0, 0, 1}, DType::f64);
  auto cb = codebook_of(Tensor::zeros({1, 2}, DType::f64), Tensor::full({1}, 0.7, DType::f64));
  EncodedSemantics enc = encode(x, cb);
  EXPECT_EQ(enc.residual_encoders.shape(), (Shape{1, 1, 2}));
  EXPECT_EQ(enc.residual_encoders.to_vector(), (std::vector<double>{1, 1}));
  EXPECT_EQ(enc.aggregate.to_vector(), (std::vector<double>{1, 1}));
}

TEST(Encode, ZeroResidualsGiveZero) {
  Tensor x = Tensor::from_list({1, 2, 1, 3}, {0.5, 0.5, 0.5, -2, -2, -2}, DType::f64);
  auto cb = codebook_of(Tensor::from_list({1, 2}, {0.5, -2}, DType::f64), Tensor::full({1}, 0.3, DType::f64));
  EncodedSemantics enc = encode(x, cb);
  for (double v : enc.residual_encoders.to_vector()) EXPECT_EQ(v, 0.0);
  for (double v : enc.aggregate.to_vector()) EXPECT_EQ(v, 0.0);
}

TEST(Encode, ZeroSmoothingGivesUniformWeights) {
  SplitMix64 rng(1);
  const std::size_t K = 3, C = 2, N = 4;
  Tensor x = random_tensor({1, C, 1, N}, rng);
  Tensor d = random_tensor({K, C}, rng);
  auto cb = codebook_of(d, Tensor::zeros({K}, DType::f64));
  for (double w : soft_assignment_weights(x, cb).to_vector()) EXPECT_NEAR(w, 1.0 / K, 1e-12);
  const auto E = encode(x, cb).residual_encoders.to_vector();
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t c = 0; c < C; ++c) {
      double s = 0;
      for (std::size_t i = 0; i < N; ++i) s += x.at(c * N + i) - d.at(k * C + c);
      EXPECT_NEAR(E[k * C + c], s / K, 1e-12);
    }
  }
}

TEST(Encode, MatchesScalarOracle) {
  SplitMix64 rng(2);
  const std::size_t B = 1, C = 2, N = 3, K = 2;
  Tensor x = random_tensor({B, C, 1, N}, rng, -2, 2);
  Tensor d = random_tensor({K, C}, rng);
  Tensor s = random_tensor({K}, rng, 0, 1);
  const auto got = encode(x, codebook_of(d, s));
  const auto want = oracle::encode(x.to_vector(), B, C, N, d.to_vector(), s.to_vector(), K);
  const auto E = got.residual_encoders.to_vector();
  for (std::size_t i = 0; i < E.size(); ++i) {
    EXPECT_LE(std::abs(E[i] - want.residual_encoders[i]),
              1e-6 * std::max(1e-8, std::abs(want.residual_encoders[i])));
  }
  const auto e = got.aggregate.to_vector();
  for (std::size_t i = 0; i < e.size(); ++i) {
    EXPECT_LE(std::abs(e[i] - want.aggregate[i]), 1e-6 * std::max(1e-8, std::abs(want.aggregate[i])));
  }
}

TEST(Encode, AggregateIsSumOfReluAndNonNegative) {
  SplitMix64 rng(3);
  Tensor x = random_tensor({2, 3, 2, 2}, rng, -3, 3);
  auto cb = codebook_of(random_tensor({4, 3}, rng), random_tensor({4}, rng, 0, 1));
  const auto enc = encode(x, cb);
  const auto E = enc.residual_encoders.to_vector();
  const auto e = enc.aggregate.to_vector();
  for (std::size_t b = 0; b < 2; ++b) {
    for (std::size_t c = 0; c < 3; ++c) {
      double s = 0;
      for (std::size_t k = 0; k < 4; ++k) s += std::max(0.0, E[(b * 4 + k) * 3 + c]);
      EXPECT_NEAR(e[b * 3 + c], s, 1e-12);
      EXPECT_GE(e[b * 3 + c], 0.0);
    }
  }
}

TEST(Encode, WeightsSumToOnePerPosition) {
  SplitMix64 rng(4);
  Tensor x = random_tensor({2, 4, 3, 3}, rng, -5, 5);
  auto cb = codebook_of(random_tensor({6, 4}, rng), random_tensor({6}, rng, 0, 1));
  const Tensor w = soft_assignment_weights(x, cb);
  ASSERT_EQ(w.shape(), (Shape{2, 9, 6}));
  const auto v = w.to_vector();
  for (std::size_t i = 0; i < 18; ++i) {
    double s = 0;
    for (std::size_t k = 0; k < 6; ++k) s += v[i * 6 + k];
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
}

TEST(Encode, LargeResidualsStayFinite) {
  Tensor x = Tensor::from_list({1, 1, 1, 2}, {1e4, -1e4}, DType::f32);
  auto cb = codebook_of(Tensor::from_list({2, 1}, {0, 1}), Tensor::from_list({2}, {1, 1}));
  for (double v : encode(x, cb).residual_encoders.to_vector()) EXPECT_TRUE(std::isfinite(v));
}

TEST(Encode, PermutationInvariantOverPositions) {
  SplitMix64 rng(5);
  const std::size_t C = 3, N = 8;
  Tensor x = random_tensor({1, C, 1, N}, rng);
  auto cb = codebook_of(random_tensor({4, C}, rng), random_tensor({4}, rng, 0, 1));
  std::vector<std::size_t> perm(N);
  for (std::size_t i = 0; i < N; ++i) perm[i] = i;
  shuffle(perm, rng);
  std::vector<double> shuffled(C * N);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t i = 0; i < N; ++i) shuffled[c * N + i] = x.at(c * N + perm[i]);
  const auto a = encode(x, cb).residual_encoders.to_vector();
  const auto b = encode(Tensor::from_vector({1, C, 2, N / 2}, shuffled), cb).residual_encoders.to_vector();
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-6);
}

TEST(Encode, RejectsChannelMismatch) {
  auto cb = codebook_of(Tensor::zeros({2, 3}), Tensor::zeros({2}));
  EXPECT_THROW(encode(Tensor::zeros({1, 4, 2, 2}), cb), Error);
}

TEST(Attention, ZeroHeadHalvesFeatures) {
  SplitMix64 rng(6);
  Tensor x = random_tensor({2, 3, 2, 2}, rng);
  auto cb = codebook_of(random_tensor({2, 3}, rng), random_tensor({2}, rng, 0, 1));
  const auto enc = encode(x, cb);
  const auto y = attention_scale(x, enc, heads_of(3, 4)).to_vector();
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], x.at(i) / 2, 1e-15);
}

TEST(Attention, SaturatedBiasPassesFeatures) {
  SplitMix64 rng(7);
  Tensor x = random_tensor({1, 3, 2, 2}, rng);
  auto cb = codebook_of(random_tensor({2, 3}, rng), random_tensor({2}, rng, 0, 1));
  auto heads = heads_of(3, 2);
  heads.attention.bias = Tensor::full({3}, 20.0, DType::f64);
  const auto y = attention_scale(x, encode(x, cb), heads).to_vector();
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_LT(std::abs(y[i] - x.at(i)), 1e-6 * std::abs(x.at(i)));
}

TEST(Attention, HandSetAggregateMatchesPerChannelMultiply) {
  SplitMix64 rng(8);
  Tensor x = random_tensor({1, 2, 2, 2}, rng);
  EncodedSemantics enc;
  enc.aggregate = Tensor::from_list({1, 2}, {0.3, 1.7}, DType::f64);
  auto heads = heads_of(2, 2);
  heads.attention.weight = Tensor::from_list({2, 2}, {1, 0, 0, 1}, DType::f64);
  const auto y = attention_scale(x, enc, heads).to_vector();
  const double g[2] = {1 / (1 + std::exp(-0.3)), 1 / (1 + std::exp(-1.7))};
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(y[c * 4 + i], x.at(c * 4 + i) * g[c], 1e-12);
  // dividing by gamma recovers the input
  const auto gamma = scaling_factors(enc, heads).to_vector();
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(y[c * 4 + i] / gamma[c], x.at(c * 4 + i), 1e-12);
}

TEST(Presence, ZeroHeadGivesHalf) {
  EncodedSemantics enc;
  enc.aggregate = Tensor::from_list({2, 3}, {1, 2, 3, 4, 5, 6}, DType::f64);
  const Tensor p = presence_logits(enc, heads_of(3, 5));
  EXPECT_EQ(p.shape(), (Shape{2, 5}));
  for (double v : p.to_vector()) EXPECT_EQ(v, 0.5);
}

TEST(Presence, MatchesMatmulSigmoidOracle) {
  SplitMix64 rng(9);
  EncodedSemantics enc;
  enc.aggregate = random_tensor({2, 3}, rng, 0, 2);
  auto heads = heads_of(3, 4);
  heads.presence.weight = random_tensor({3, 4}, rng);
  heads.presence.bias = random_tensor({4}, rng);
  const auto got = presence_logits(enc, heads).to_vector();
  const auto z = oracle::matmul(enc.aggregate.to_vector(), heads.presence.weight.to_vector(), 2, 3, 4);
  for (std::size_t i = 0; i < 8; ++i) {
    const double p = 1 / (1 + std::exp(-(z[i] + heads.presence.bias.at(i % 4))));
    EXPECT_NEAR(got[i], p, 1e-12);
    EXPECT_GT(got[i], 0.0);
    EXPECT_LT(got[i], 1.0);
  }
}

TEST(PresenceTargets, Examples) {
  Labels l(1, 2, 2, 0);
  l.ids = {0, 2, 2, kIgnoreIndex};
  EXPECT_EQ(presence_targets(l, 4).to_vector(), (std::vector<double>{1, 0, 1, 0}));
  Labels ignored(2, 2, 2, kIgnoreIndex);
  for (double v : presence_targets(ignored, 3).to_vector()) EXPECT_EQ(v, 0.0);
  Labels bad(1, 1, 1, 7);
  EXPECT_THROW(presence_targets(bad, 4), Error);
}

TEST(PresenceTargets, MatchesScan) {
  SplitMix64 rng(10);
  Labels l(3, 4, 4);
  for (auto& id : l.ids) id = rng.below(10) == 0 ? kIgnoreIndex : static_cast<std::uint8_t>(rng.below(5));
  const auto got = presence_targets(l, 6).to_vector();
  for (std::size_t b = 0; b < 3; ++b) {
    for (std::size_t d = 0; d < 6; ++d) {
      bool seen = false;
      for (std::size_t i = 0; i < 16; ++i) seen |= l.ids[b * 16 + i] == d;
      EXPECT_EQ(got[b * 6 + d], seen ? 1.0 : 0.0);
    }
  }
}

TEST(EncodingGradients, FullChainPassesGradCheck) {
  SplitMix64 rng(11);
  Tensor x = random_tensor({2, 3, 2, 2}, rng);
  Tensor d = random_tensor({2, 3}, rng), s = random_tensor({2}, rng, 0.1, 1);
  Tensor aw = random_tensor({3, 3}, rng), ab = random_tensor({3}, rng);
  Tensor pw = random_tensor({3, 2}, rng), pb = random_tensor({2}, rng);
  Tensor mix = random_tensor({2, 3, 2, 2}, rng);
  const double err = grad_check(
      [&](const std::vector<Tensor>& in) {
        auto cb = codebook_of(in[1], in[2]);
        EncodingHeads h;
        h.attention.weight = in[3];
        h.attention.bias = in[4];
        h.presence.weight = in[5];
        h.presence.bias = in[6];
        const auto enc = encode(in[0], cb);
        return add(sum(mul(attention_scale(in[0], enc, h), mix)), sum(square(presence_logits(enc, h))));
      },
      {x, d, s, aw, ab, pw, pb}, verify::kGradStep);
  EXPECT_LT(err, 1e-4);
}

TEST(EncodingOracle, SuitePassesAndSignFlipFails) {
  for (const auto& r : verify::check_encode_oracle(encode, 20, 1)) EXPECT_TRUE(r.passed) << verify::format_result(r);
  const auto broken = verify::check_encode_oracle(verify::sign_flipped_encode, 20, 1);
  EXPECT_FALSE(broken.front().passed);
}

TEST(Codebook, SharedByBothLayersOfAModule) {
  HourglassConfig cfg = verify::tiny_config();
  cfg.num_modules = 1;
  HourglassNetwork net(cfg, 3);
  Tensor images = Tensor::zeros({2, cfg.input_channels, cfg.patch_size, cfg.patch_size});
  SplitMix64 rng(4);
  for (std::size_t i = 0; i < images.numel(); ++i) images.set(i, rng.uniform());
  Labels labels(2, cfg.patch_size, cfg.patch_size);
  for (auto& id : labels.ids) id = static_cast<std::uint8_t>(rng.below(cfg.num_classes));

  NetworkOutput out = net.forward(images, Mode::train);
  ASSERT_EQ(out.se_probs.size(), 2u);
  // loss from the decoder-path layer only
  Tensor loss = bce_loss(out.se_probs[1], presence_targets(labels, cfg.num_classes));
  backward(loss);
  const auto before = net.module(0).codebook().codewords.to_vector();
  ASSERT_TRUE(net.module(0).codebook().codewords.has_grad());
  NamedTensors params = net.named_parameters();
  AdamState adam;
  adam_step(params, adam, 1e-2);
  EXPECT_NE(net.module(0).codebook().codewords.to_vector(), before);

  // the encoder-path layer sees the same storage
  std::size_t codeword_tensors = 0;
  net.visit_parameters([&](const std::string& name, Tensor& t) {
    if (name.find("codewords") != std::string::npos) {
      ++codeword_tensors;
      EXPECT_EQ(t.id(), net.module(0).codebook().codewords.id());
    }
  });
  EXPECT_EQ(codeword_tensors, 1u);
}
