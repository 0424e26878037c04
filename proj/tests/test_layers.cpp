#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "cxhg/error.hpp"
#include "cxhg/gradcheck.hpp"
#include "cxhg/layers.hpp"
#include "cxhg/ops.hpp"
#include "cxhg/rng.hpp"
#include "cxhg/verify/oracles.hpp"

using namespace cxhg;

namespace {

Tensor random_tensor(Shape shape, SplitMix64& rng, DType dtype = DType::f64) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return Tensor::from_vector(std::move(shape), std::move(v)).to(dtype);
}

void fill(Tensor& t, double value) {
  for (std::size_t i = 0; i < t.numel(); ++i) t.set(i, value);
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

// scalar half-pixel bilinear interpolation of one plane
std::vector<double> upsample_oracle(const std::vector<double>& in, std::size_t h, std::size_t w,
                                    std::size_t f) {
  std::vector<double> out(h * f * w * f);
  auto src = [](std::size_t d, std::size_t f, std::size_t n) {
    double s = (static_cast<double>(d) + 0.5) / static_cast<double>(f) - 0.5;
    return std::clamp(s, 0.0, static_cast<double>(n - 1));
  };
  for (std::size_t y = 0; y < h * f; ++y) {
    for (std::size_t x = 0; x < w * f; ++x) {
      const double sy = src(y, f, h), sx = src(x, f, w);
      const auto y0 = static_cast<std::size_t>(std::floor(sy)), x0 = static_cast<std::size_t>(std::floor(sx));
      const std::size_t y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
      const double ty = sy - y0, tx = sx - x0;
      out[y * w * f + x] = (1 - ty) * ((1 - tx) * in[y0 * w + x0] + tx * in[y0 * w + x1]) +
                           ty * ((1 - tx) * in[y1 * w + x0] + tx * in[y1 * w + x1]);
    }
  }
  return out;
}

}  // namespace

TEST(Conv2d, OneByOneIdentity) {
  SplitMix64 rng(1);
  Tensor x = random_tensor({2, 1, 4, 4}, rng, DType::f32);
  Tensor y = conv2d(x, Tensor::full({1, 1, 1, 1}, 1.0), Tensor::zeros({1}), {1, 0});
  EXPECT_EQ(y.to_vector(), x.to_vector());
}

TEST(Conv2d, OnesKernelSpreadsHotPixel) {
  Tensor x = Tensor::zeros({1, 1, 5, 5});
  x.set(2 * 5 + 2, 1.0);
  Tensor y = conv2d(x, Tensor::full({1, 1, 3, 3}, 1.0), Tensor::zeros({1}), {1, 1});
  ASSERT_EQ(y.shape(), (Shape{1, 1, 5, 5}));
  for (std::size_t r = 0; r < 5; ++r) {
    for (std::size_t c = 0; c < 5; ++c) {
      const bool inside = r >= 1 && r <= 3 && c >= 1 && c <= 3;
      EXPECT_EQ(y.at(r * 5 + c), inside ? 1.0 : 0.0) << r << "," << c;
    }
  }
}

TEST(Conv2d, StridedMatchesLoopOracle) {
  SplitMix64 rng(2);
  Tensor x = random_tensor({2, 3, 8, 8}, rng, DType::f32);
  Tensor w = random_tensor({4, 3, 4, 4}, rng, DType::f32);
  Tensor b = random_tensor({4}, rng, DType::f32);
  Tensor y = conv2d(x, w, b, {2, 1});
  ASSERT_EQ(y.shape(), (Shape{2, 4, 4, 4}));
  const auto want = oracle::conv2d(x.to_vector(), 2, 3, 8, 8, w.to_vector(), b.to_vector(), 4, 4, 2, 1);
  const auto got = y.to_vector();
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_LT(rel(got[i], want[i]), 1e-5);
}

TEST(Conv2d, FiftyRandomGeometries) {
  SplitMix64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = 1 + 2 * rng.below(3);
    const std::size_t stride = 1 + rng.below(2);
    const std::size_t pad = rng.below(k / 2 + 1);
    const std::size_t ci = 1 + rng.below(3), co = 1 + rng.below(3), b = 1 + rng.below(2);
    const std::size_t h = k + rng.below(6);
    const std::size_t w = k + rng.below(6);
    if ((h + 2 * pad - k) % stride != 0 || (w + 2 * pad - k) % stride != 0) {
      --trial;
      continue;
    }
    Tensor x = random_tensor({b, ci, h, w}, rng);
    Tensor wt = random_tensor({co, ci, k, k}, rng);
    Tensor bias = random_tensor({co}, rng);
    const auto got = conv2d(x, wt, bias, {stride, pad}).to_vector();
    const auto want = oracle::conv2d(x.to_vector(), b, ci, h, w, wt.to_vector(), bias.to_vector(), co, k,
                                     stride, pad);
    ASSERT_EQ(got.size(), want.size()) << "trial " << trial;
    for (std::size_t i = 0; i < got.size(); ++i) ASSERT_LT(rel(got[i], want[i]), 1e-9) << "trial " << trial;
  }
}

TEST(Conv2d, RejectsNonIntegerGeometry) {
  try {
    conv2d(Tensor::zeros({1, 1, 4, 4}), Tensor::zeros({1, 1, 3, 3}), Tensor::zeros({1}), {2, 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::shape);
  }
  EXPECT_THROW(conv2d(Tensor::zeros({1, 2, 4, 4}), Tensor::zeros({1, 1, 3, 3}), Tensor::zeros({1}), {1, 1}),
               Error);
}

TEST(MaxPool, Example) {
  EXPECT_EQ(max_pool2d(Tensor::from_list({1, 1, 2, 2}, {1, 2, 3, 4})).to_vector(), (std::vector<double>{4}));
}

TEST(MaxPool, ConstantInputRoutesToFirstElement) {
  Tensor x = Tensor::full({1, 1, 4, 4}, 3.0);
  x.set_requires_grad(true);
  Tensor y = max_pool2d(x);
  EXPECT_EQ(y.to_vector(), (std::vector<double>{3, 3, 3, 3}));
  backward(sum(y));
  const auto g = x.grad_vector();
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t c = 0; c < 4; ++c) {
      EXPECT_EQ(g[r * 4 + c], (r % 2 == 0 && c % 2 == 0) ? 1.0 : 0.0);
    }
  }
}

TEST(MaxPool, MatchesWindowScan) {
  SplitMix64 rng(4);
  Tensor x = random_tensor({1, 1, 4, 4}, rng);
  const auto v = x.to_vector();
  const auto got = max_pool2d(x).to_vector();
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t c = 0; c < 2; ++c) {
      double m = -1e300;
      for (std::size_t dy = 0; dy < 2; ++dy)
        for (std::size_t dx = 0; dx < 2; ++dx) m = std::max(m, v[(2 * r + dy) * 4 + 2 * c + dx]);
      EXPECT_EQ(got[r * 2 + c], m);
    }
  }
}

TEST(MaxPool, RejectsOddExtent) { EXPECT_THROW(max_pool2d(Tensor::zeros({1, 1, 3, 4})), Error); }

TEST(Upsample, FactorOneIsIdentity) {
  SplitMix64 rng(5);
  Tensor x = random_tensor({1, 2, 3, 3}, rng);
  EXPECT_EQ(bilinear_upsample(x, 1).to_vector(), x.to_vector());
}

TEST(Upsample, ConstantStaysConstant) {
  const auto v = bilinear_upsample(Tensor::full({1, 1, 3, 3}, 7.0), 2).to_vector();
  for (double x : v) EXPECT_EQ(x, 7.0);
}

TEST(Upsample, MatchesHalfPixelOracle) {
  const auto got = bilinear_upsample(Tensor::from_list({1, 1, 2, 2}, {0, 1, 2, 3}, DType::f64), 2).to_vector();
  const auto want = upsample_oracle({0, 1, 2, 3}, 2, 2, 2);
  ASSERT_EQ(got.size(), 16u);
  for (std::size_t i = 0; i < 16; ++i) EXPECT_NEAR(got[i], want[i], 1e-6);
}

TEST(Upsample, IsLinear) {
  SplitMix64 rng(6);
  for (std::size_t f : {2, 3, 4}) {
    Tensor x = random_tensor({2, 2, 3, 5}, rng), y = random_tensor({2, 2, 3, 5}, rng);
    const double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2);
    const auto lhs = bilinear_upsample(add(scale(x, a), scale(y, b)), f).to_vector();
    const auto rhs = add(scale(bilinear_upsample(x, f), a), scale(bilinear_upsample(y, f), b)).to_vector();
    for (std::size_t i = 0; i < lhs.size(); ++i) EXPECT_NEAR(lhs[i], rhs[i], 1e-5);
  }
}

TEST(BatchNorm, ConstantChannelGivesBeta) {
  BatchNorm2d bn(2);
  bn.state.beta.set(0, 0.25);
  bn.state.beta.set(1, -1.5);
  Tensor x = Tensor::zeros({2, 2, 3, 3});
  for (std::size_t i = 0; i < x.numel(); ++i) x.set(i, (i / 9) % 2 == 0 ? 4.0 : -2.0);
  const auto y = bn.forward(x, Mode::train).to_vector();
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], (i / 9) % 2 == 0 ? 0.25 : -1.5, 1e-6);
}

TEST(BatchNorm, TrainOutputIsStandardized) {
  SplitMix64 rng(7);
  BatchNorm2d bn(3);
  Tensor x = random_tensor({4, 3, 5, 5}, rng, DType::f32);
  x = add(scale(x, 3.0), Tensor::full({1}, 2.0));
  const auto y = bn.forward(x, Mode::train).to_vector();
  for (std::size_t c = 0; c < 3; ++c) {
    double s = 0, s2 = 0;
    std::size_t n = 0;
    for (std::size_t b = 0; b < 4; ++b) {
      for (std::size_t i = 0; i < 25; ++i) {
        const double v = y[(b * 3 + c) * 25 + i];
        s += v;
        s2 += v * v;
        ++n;
      }
    }
    const double m = s / n;
    EXPECT_NEAR(m, 0.0, 1e-4);
    EXPECT_NEAR(s2 / n - m * m, 1.0, 1e-4);
  }
}

TEST(BatchNorm, RunningMeanIsTwoStepAverage) {
  BatchNorm2d bn(1);
  Tensor a = Tensor::from_list({1, 1, 1, 2}, {1, 3});
  Tensor b = Tensor::from_list({1, 1, 1, 2}, {5, 9});
  bn.forward(a, Mode::train);
  bn.forward(b, Mode::train);
  const double m1 = 2.0, m2 = 7.0, v1 = 1.0, v2 = 4.0;
  EXPECT_NEAR(bn.state.running_mean.item(), 0.9 * (0.9 * 0.0 + 0.1 * m1) + 0.1 * m2, 1e-6);
  EXPECT_NEAR(bn.state.running_var.item(), 0.9 * (0.9 * 1.0 + 0.1 * v1) + 0.1 * v2, 1e-6);
}

TEST(BatchNorm, EvalUsesRunningStatsAndRejectsUntrained) {
  BatchNorm2d bn(1);
  EXPECT_THROW(bn.forward(Tensor::zeros({1, 1, 2, 2}), Mode::eval), Error);
  bn.forward(Tensor::from_list({1, 1, 1, 2}, {1, 3}), Mode::train);
  const double mean = bn.state.running_mean.item(), var = bn.state.running_var.item();
  const auto before = bn.state.running_mean.to_vector();
  const auto y = bn.forward(Tensor::from_list({1, 1, 1, 2}, {0, 10}), Mode::eval).to_vector();
  EXPECT_NEAR(y[1], (10 - mean) / std::sqrt(var + 1e-5), 1e-4);
  EXPECT_EQ(bn.state.running_mean.to_vector(), before);
}

TEST(BatchNorm, RunningVarianceStaysNonNegative) {
  SplitMix64 rng(8);
  BatchNorm2d bn(2);
  for (int i = 0; i < 20; ++i) {
    bn.forward(random_tensor({2, 2, 2, 2}, rng, DType::f32), Mode::train);
    for (double v : bn.state.running_var.to_vector()) EXPECT_GE(v, 0.0);
  }
}

TEST(ResidualBlock, ZeroMainPathLeavesSkip) {
  SplitMix64 rng(9);
  ResidualBlock same(4, 4, rng);
  same.visit_parameters("b", [](const std::string& name, Tensor& t) {
    if (ends_with(name, ".weight") || ends_with(name, ".bias")) fill(t, 0.0);
  });
  Tensor x = random_tensor({2, 4, 4, 4}, rng, DType::f32);
  EXPECT_EQ(same.forward(x, Mode::train).to_vector(), x.to_vector());

  ResidualBlock projected(3, 6, rng);
  Tensor skip_w, skip_b;
  projected.visit_parameters("b", [&](const std::string& name, Tensor& t) {
    if (name == "b.skip.weight") skip_w = t;
    else if (name == "b.skip.bias") skip_b = t;
    else if (ends_with(name, ".weight") || ends_with(name, ".bias")) fill(t, 0.0);
  });
  ASSERT_TRUE(skip_w.defined());
  Tensor xp = random_tensor({2, 3, 4, 4}, rng, DType::f32);
  const auto got = projected.forward(xp, Mode::train).to_vector();
  const auto want = conv2d(xp, skip_w, skip_b, {1, 0}).to_vector();
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-6);
}

TEST(ResidualBlock, PreservesSpatialExtent) {
  SplitMix64 rng(10);
  for (auto [ci, co, h, w] : std::vector<std::array<std::size_t, 4>>{{2, 4, 3, 5}, {4, 4, 8, 8}, {6, 2, 1, 7}}) {
    ResidualBlock block(ci, co, rng);
    EXPECT_EQ(block.forward(random_tensor({2, ci, h, w}, rng, DType::f32), Mode::train).shape(),
              (Shape{2, co, h, w}));
  }
}

TEST(ResidualBlock, RejectsOddWidth) {
  SplitMix64 rng(11);
  EXPECT_THROW(ResidualBlock(4, 5, rng), Error);
}

TEST(FullyConnected, Examples) {
  Tensor x = Tensor::from_list({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor b = Tensor::from_list({2}, {0.5, -1});
  EXPECT_EQ(fully_connected(x, Tensor::zeros({3, 2}), b).to_vector(), (std::vector<double>{0.5, -1, 0.5, -1}));
  Tensor eye = Tensor::from_list({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  EXPECT_EQ(fully_connected(x, eye, Tensor::zeros({3})).to_vector(), x.to_vector());
  EXPECT_THROW(fully_connected(x, Tensor::zeros({2, 2}), b), Error);
}

TEST(FullyConnected, MatchesMatmulOracle) {
  SplitMix64 rng(12);
  Tensor x = random_tensor({3, 4}, rng), w = random_tensor({4, 5}, rng), b = random_tensor({5}, rng);
  const auto got = fully_connected(x, w, b).to_vector();
  auto want = oracle::matmul(x.to_vector(), w.to_vector(), 3, 4, 5);
  for (std::size_t i = 0; i < want.size(); ++i) want[i] += b.at(i % 5);
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
}

TEST(LayerGradients, AllLayersPassGradCheck) {
  SplitMix64 rng(13);
  Tensor x = random_tensor({2, 2, 5, 5}, rng);
  Tensor w = random_tensor({3, 2, 3, 3}, rng), b = random_tensor({3}, rng);
  EXPECT_LT(grad_check([](const std::vector<Tensor>& in) {
              return sum(square(conv2d(in[0], in[1], in[2], {2, 1})));
            }, {x, w, b}, 1e-7), 1e-4);
  // distinct values keep the pooling windows free of ties
  Tensor p = random_tensor({1, 2, 4, 4}, rng);
  EXPECT_LT(grad_check([](const std::vector<Tensor>& in) { return sum(square(max_pool2d(in[0]))); }, {p}, 1e-7),
            1e-4);
  Tensor u = random_tensor({1, 2, 3, 3}, rng);
  EXPECT_LT(grad_check([](const std::vector<Tensor>& in) { return sum(square(bilinear_upsample(in[0], 2))); },
                       {u}, 1e-7),
            1e-4);
  Tensor fx = random_tensor({3, 4}, rng), fw = random_tensor({4, 2}, rng), fb = random_tensor({2}, rng);
  EXPECT_LT(grad_check([](const std::vector<Tensor>& in) {
              return sum(square(fully_connected(in[0], in[1], in[2])));
            }, {fx, fw, fb}, 1e-7), 1e-4);
  BatchNormState st;
  st.gamma = random_tensor({2}, rng);
  st.beta = random_tensor({2}, rng);
  st.running_mean = Tensor::zeros({2}, DType::f64);
  st.running_var = Tensor::full({2}, 1.0, DType::f64);
  st.tracked = Tensor::zeros({1}, DType::f64);
  Tensor bx = random_tensor({2, 2, 3, 3}, rng);
  Tensor wsum = random_tensor({2, 2, 3, 3}, rng);
  EXPECT_LT(grad_check([&](const std::vector<Tensor>& in) {
              BatchNormState s = st;
              s.gamma = in[1];
              s.beta = in[2];
              return sum(mul(batch_norm(in[0], s, Mode::train), wsum));
            }, {bx, st.gamma, st.beta}, 1e-7), 1e-4);
}
