// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <fmt/format.h>

#include <chrono>
#include <cstring>
#include <functional>

#include "cxhg/hourglass.hpp"
#include "cxhg/ops.hpp"
#include "cxhg/optim.hpp"
#include "cxhg/patches.hpp"
#include "cxhg/synth.hpp"
#include "cxhg/trainer.hpp"
#include "cxhg/verify/oracles.hpp"
#include "cxhg/verify/suites.hpp"

using namespace cxhg;

namespace {

// tolerances and budgets
constexpr std::size_t kEncodeInstances = 100;
constexpr double kEncodeBudgetSeconds = 10.0;
constexpr double kGradBudgetSeconds = 300.0;
constexpr double kLrTolerance = 1e-12;
constexpr std::size_t kLrSamples = 100;
constexpr double kMinPixAcc = 0.85;
constexpr double kMinMiou = 0.55;
constexpr int kSeeds = 4;
constexpr int kSeedsRequired = 3;
constexpr double kTrainBudgetSeconds = 1800.0;
constexpr std::size_t kMetricPairs = 200;

struct Outcome {
  bool passed = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string failures_of(const std::vector<verify::CheckResult>& results, bool& ok) {
  std::string worst;
  for (const auto& r : results) {
    if (!r.passed) {
      ok = false;
      worst += (worst.empty() ? "" : "; ") + verify::format_result(r);
    }
  }
  return worst;
}

bool same_bits(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape() || a.dtype() != b.dtype()) return false;
  return dispatch(a.dtype(), [&](auto tag) {
    using T = decltype(tag);
    return std::memcmp(a.values<T>().data(), b.values<T>().data(), a.values<T>().size_bytes()) == 0;
  });
}

// The desk-scale setup: 8 synthetic 256x256 tiles, 5 channels, 6 classes, patch 64.
HourglassConfig desk_architecture() {
  HourglassConfig c;
  c.num_modules = 2;
  c.depth = 4;
  c.widths = {16, 16, 32, 32};
  c.stem_width = 16;
  c.num_classes = 6;
  c.input_channels = 5;
  c.patch_size = 64;
  c.num_codewords = 8;
  c.encoding_divisor = 8;
  return c;
}

TrainConfig desk_training(std::uint64_t seed) {
  TrainConfig t;
  t.epochs_phase1 = 20;
  t.epochs_phase2 = 20;
  t.batch = 8;
  t.base_lr = 2e-3;
  t.seed = seed;
  return t;
}

DataSplit desk_data(std::uint64_t seed) {
  SceneSpec spec;
  std::vector<Tile> tiles;
  for (std::size_t i = 0; i < 8; ++i) {
    auto [img, lab] = synth_generate(spec, derive_seed(seed, i));
    tiles.push_back({tile_id(i), std::move(img), std::move(lab)});
  }
  return prepare_split(tiles, 64, seed);
}

Outcome encode_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto results = verify::check_encode_oracle(encode, kEncodeInstances, 2024);
  const double secs = seconds_since(t0);
  bool ok = secs < kEncodeBudgetSeconds;
  std::string bad = failures_of(results, ok);
  std::string detail = fmt::format("{} instances, {} = {:.3g}, weight sum err = {:.3g}, {:.2f}s",
                                   kEncodeInstances, "max rel err", results[0].error, results[1].error, secs);
  if (!bad.empty()) detail += "; " + bad;
  return {ok, detail};
}

Outcome gradient_integrity() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto results = verify::gradcheck_suite();
  const double secs = seconds_since(t0);
  bool ok = secs < kGradBudgetSeconds;
  double worst = 0.0;
  for (const auto& r : results) worst = std::max(worst, r.error);
  std::string bad = failures_of(results, ok);
  std::string detail = fmt::format("{} checks, worst rel err {:.3g} < {:g}, {:.1f}s", results.size(), worst,
                                   verify::kGradTolerance, secs);
  if (!bad.empty()) detail += "; " + bad;
  return {ok, detail};
}

Outcome architecture_arithmetic() {
  HourglassConfig full;  // 4 modules, widths 128,128,256,256, patch 256
  HourglassNetwork net(full, 1);
  SplitMix64 rng(3);
  std::vector<float> pixels(full.input_channels * full.patch_size * full.patch_size);
  for (auto& v : pixels) v = static_cast<float>(rng.uniform());
  NoGradGuard guard;
  const NetworkOutput out = net.forward(
      Tensor::from_vector({1, full.input_channels, full.patch_size, full.patch_size}, std::move(pixels)),
      Mode::train);
  Tensor sum_of_maps = out.per_module_logits.at(0);
  for (std::size_t m = 1; m < out.per_module_logits.size(); ++m) sum_of_maps = add(sum_of_maps, out.per_module_logits[m]);
  const bool exact = same_bits(out.fused_logits, sum_of_maps);
  const bool ok = out.per_module_logits.size() == 4 && out.se_probs.size() == 8 && exact;
  return {ok, fmt::format("{} predictions, {} SE vectors, fused == sum bitwise: {}", out.per_module_logits.size(),
                          out.se_probs.size(), exact ? "yes" : "no")};
}

Outcome pipeline_counts() {
  const auto r = verify::check_pipeline_counts();
  const std::uint64_t per_tile = oracle::patch_count(6000, 6000, 256);
  const bool ok = r.passed && per_tile * 24 == 13824;
  return {ok, r.detail};
}

Outcome lr_schedule() {
  const auto r = verify::check_poly_lr(kLrSamples);
  const LrSchedule s{1e-4, 0.95, 4000};
  const bool ends = poly_lr(s, 0) == 0.0001 && poly_lr(s, s.total_iter) == 0.0;
  return {r.passed && ends && r.error <= kLrTolerance,
          fmt::format("lr(0) = {:g}, lr(total) = {:g}, {} samples max err {:.3g}", poly_lr(s, 0),
                      poly_lr(s, s.total_iter), kLrSamples, r.error)};
}

Outcome desk_training_run() {
  const auto t0 = std::chrono::steady_clock::now();
  int good = 0;
  std::string seeds;
  for (int seed = 0; seed < kSeeds; ++seed) {
    const DataSplit data = desk_data(static_cast<std::uint64_t>(seed));
    HourglassNetwork net(desk_architecture(), static_cast<std::uint64_t>(seed));
    const TrainingReport report = train(net, data, desk_training(static_cast<std::uint64_t>(seed)));
    const auto p1 = report.last_of_phase(1);
    const auto p2 = report.last_of_phase(2);
    const bool ok = p1 && p2 && p2->val_pixacc >= kMinPixAcc && p2->val_miou >= kMinMiou &&
                    p2->val_miou > p1->val_miou;
    good += ok;
    seeds += fmt::format("{}seed {}: pixAcc {:.4f} mIoU {:.4f} (phase 1 mIoU {:.4f}) {}", seeds.empty() ? "" : "; ",
                         seed, p2 ? p2->val_pixacc : 0.0, p2 ? p2->val_miou : 0.0, p1 ? p1->val_miou : 0.0,
                         ok ? "ok" : "miss");
  }
  const double secs = seconds_since(t0);
  return {good >= kSeedsRequired && secs < kTrainBudgetSeconds,
          fmt::format("{}/{} seeds; {}; {:.0f}s", good, kSeeds, seeds, secs)};
}

Outcome determinism_and_persistence() {
  const DataSplit data = desk_data(11);
  TrainConfig tc = desk_training(11);
  tc.epochs_phase1 = 1;
  tc.epochs_phase2 = 1;
  auto run = [&] {
    HourglassNetwork net(desk_architecture(), 11);
    return training_csv(train(net, data, tc));
  };
  const std::string first = run(), second = run();
  const bool csv_same = first == second;

  bool ok = csv_same;
  std::string bad = failures_of(verify::roundtrip_suite(), ok);
  std::string detail = fmt::format("training CSV ({} bytes) identical: {}; CXRS/CXLB/CXHG/eval round trips {}",
                                   first.size(), csv_same ? "yes" : "no", bad.empty() ? "exact" : bad);
  return {ok, detail};
}

Outcome metric_correctness() {
  const auto r = verify::check_metrics_bruteforce(kMetricPairs, 8);
  return {r.passed, r.detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"1 encoding oracle", encode_oracle},
      {"2 gradient integrity", gradient_integrity},
      {"3 architecture arithmetic", architecture_arithmetic},
      {"4 pipeline counts", pipeline_counts},
      {"5 lr schedule", lr_schedule},
      {"6 desk-scale training", desk_training_run},
      {"7 determinism and persistence", determinism_and_persistence},
      {"8 metric correctness", metric_correctness},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.passed;
    fmt::print("{} criterion {}: {}\n", o.passed ? "PASS" : "FAIL", name, o.detail);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
