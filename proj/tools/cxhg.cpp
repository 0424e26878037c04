// cxhg: dataset generation, training, evaluation, prediction and self-checks.
//
// Exit codes: 0 success, 1 verification failure, 2 usage/config/data error,
// 3 numerical failure.

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdio>
#include <filesystem>
#include <iostream>

#include "cxhg/checkpoint.hpp"
#include "cxhg/config.hpp"
#include "cxhg/dataset.hpp"
#include "cxhg/error.hpp"
#include "cxhg/render.hpp"
#include "cxhg/trainer.hpp"
#include "cxhg/verify/suites.hpp"

namespace {

using namespace cxhg;

enum Exit { kOk = 0, kVerifyFailed = 1, kUsage = 2, kNumeric = 3 };

struct GenDataArgs {
  std::string out;
  std::size_t tiles = 0;
  std::uint32_t width = 256;
  std::uint32_t height = 256;
  std::uint64_t seed = 0;
  std::size_t classes = 6;
  std::size_t channels = 5;
  double noise_sigma = SceneSpec{}.noise_sigma;
  double rare_class_rate = SceneSpec{}.rare_class_rate;
  std::vector<double> densities;
};

int gen_data(const GenDataArgs& a) {
  if (a.tiles == 0) throw Error(ErrorCode::config, "--tiles must be >= 1");
  SceneSpec spec;
  spec.num_classes = a.classes;
  spec.channels = a.channels;
  spec.width = a.width;
  spec.height = a.height;
  spec.noise_sigma = a.noise_sigma;
  spec.rare_class_rate = a.rare_class_rate;
  if (!a.densities.empty()) {
    spec.densities = a.densities;
  } else if (spec.densities.size() < spec.num_classes) {
    spec.densities.resize(spec.num_classes, 4.0);
  }
  const auto census = generate_dataset(a.out, spec, a.tiles, a.seed);
  std::uint64_t total = 0;
  for (auto c : census) total += c;
  std::cout << "class,pixels,fraction\n";
  for (std::size_t c = 0; c < census.size(); ++c) {
    std::cout << fmt::format("{},{},{:.6f}\n", c, census[c],
                             static_cast<double>(census[c]) / static_cast<double>(total));
  }
  return kOk;
}

int train_cmd(const std::string& config_path, const std::string& out, const std::string& resume) {
  const RunConfig cfg = load_run_config(config_path);
  const auto tiles = load_dataset(cfg.dataset_dir);
  const DataSplit data = prepare_split(tiles, cfg.arch.patch_size, cfg.train.seed);
  HourglassNetwork net(cfg.arch, cfg.train.seed);

  TrainOutputs outputs;
  outputs.dir = out;
  if (!resume.empty()) {
    AdamState adam;
    const Checkpoint ckpt = read_checkpoint(resume);
    load_checkpoint(ckpt, net, &adam);
    outputs.resume_step = ckpt.step;
    if (ckpt.find("adam.t")) outputs.resume_adam = adam;
    std::cerr << fmt::format("resuming at step {}\n", ckpt.step);
  }
  std::cerr << fmt::format("{} training / {} validation patches\n", data.train.size(),
                           data.val.size());
  outputs.on_epoch = [](const EpochRecord& r) {
    std::cerr << fmt::format("phase {} epoch {:3d}  iter {:6d}  val pixAcc {:.4f}  mIoU {:.4f}\n",
                             r.phase, r.epoch, r.iter, r.val_pixacc, r.val_miou);
  };
  train(net, data, cfg.train, outputs);
  return kOk;
}

int eval_cmd(const std::string& config_path, const std::string& ckpt_path, const std::string& data_dir,
             bool bypass) {
  const RunConfig cfg = load_run_config(config_path);
  HourglassNetwork net(cfg.arch, cfg.train.seed);
  load_checkpoint(read_checkpoint(ckpt_path), net, nullptr);
  std::vector<SegmentationSample> samples;
  for (const auto& t : load_dataset(data_dir)) {
    auto p = extract_patches(t.image, t.labels, cfg.arch.patch_size);
    std::move(p.begin(), p.end(), std::back_inserter(samples));
  }
  const Validation v = evaluate(net, samples, bypass ? EncodingUse::bypassed : EncodingUse::enabled,
                                8, cfg.train.absent);
  std::cout << metrics_csv(v.confusion, cfg.train.absent);
  return kOk;
}

int predict_cmd(const std::string& config_path, const std::string& ckpt_path, const std::string& in,
                const std::string& out, bool bypass) {
  const RunConfig cfg = load_run_config(config_path);
  HourglassNetwork net(cfg.arch, cfg.train.seed);
  load_checkpoint(read_checkpoint(ckpt_path), net, nullptr);
  const LabelMap pred = predict_tile(net, read_raster(in),
                                     bypass ? EncodingUse::bypassed : EncodingUse::enabled);
  write_ppm(pred, out);
  return kOk;
}

int verify_cmd(const std::string& suite) {
  std::vector<verify::CheckResult> results;
  auto append = [&](std::vector<verify::CheckResult> r) {
    for (auto& x : r) {
      std::cout << verify::format_result(x) << "\n" << std::flush;
      results.push_back(std::move(x));
    }
  };
  if (suite == "oracle" || suite == "all") append(verify::oracle_suite());
  if (suite == "roundtrip" || suite == "all") append(verify::roundtrip_suite());
  if (suite == "gradcheck" || suite == "all") append(verify::gradcheck_suite());
  std::size_t failed = 0;
  for (const auto& r : results) failed += !r.passed;
  std::cout << fmt::format("{} checks, {} failed\n", results.size(), failed);
  if (failed) {
    std::cout << "failures:\n";
    for (const auto& r : results) {
      if (!r.passed) std::cout << "  " << r.name << "\n";
    }
    return kVerifyFailed;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contextual hourglass segmentation: data, training, evaluation"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Write a synthetic dataset");
  gen_cmd->add_option("--out", gen.out, "Dataset directory")->required();
  gen_cmd->add_option("--tiles", gen.tiles, "Number of tiles")->required();
  gen_cmd->add_option("--width", gen.width, "Tile width")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--height", gen.height, "Tile height")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--seed", gen.seed, "Seed");
  gen_cmd->add_option("--classes", gen.classes, "Number of classes")->check(CLI::Range(1, 255));
  gen_cmd->add_option("--channels", gen.channels, "Image channels")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--noise-sigma", gen.noise_sigma, "Gaussian noise std")->check(CLI::NonNegativeNumber);
  gen_cmd->add_option("--rare-class-rate", gen.rare_class_rate, "Small-object density multiplier")
      ->check(CLI::NonNegativeNumber);
  gen_cmd->add_option("--densities", gen.densities, "Objects per 256x256, one per class")->delimiter(',');

  std::string config, out, resume, ckpt, data, in, suite = "all";
  bool bypass = false;
  auto* train_sub = app.add_subcommand("train", "Two-phase training");
  train_sub->add_option("--config", config, "Run config (key = value)")->required();
  train_sub->add_option("--out", out, "Output directory")->required();
  train_sub->add_option("--resume", resume, "Checkpoint to resume from");

  auto* eval_sub = app.add_subcommand("eval", "Metrics CSV over every patch of a dataset");
  eval_sub->add_option("--config", config)->required();
  eval_sub->add_option("--ckpt", ckpt)->required();
  eval_sub->add_option("--data", data)->required();
  eval_sub->add_flag("--bypass-encoding", bypass, "Run without encoding layers (phase-1 weights)");

  auto* predict_sub = app.add_subcommand("predict", "Colorized prediction of one tile (P6 PPM)");
  predict_sub->add_option("--config", config)->required();
  predict_sub->add_option("--ckpt", ckpt)->required();
  predict_sub->add_option("--in", in, "CXRS tile")->required();
  predict_sub->add_option("--out", out, "PPM path")->required();
  predict_sub->add_flag("--bypass-encoding", bypass);

  auto* verify_sub = app.add_subcommand("verify", "Gradient checks, oracle comparisons, round trips");
  verify_sub->add_option("--suite", suite)->check(CLI::IsMember({"gradcheck", "oracle", "roundtrip", "all"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*gen_cmd) return gen_data(gen);
    if (*train_sub) return train_cmd(config, out, resume);
    if (*eval_sub) return eval_cmd(config, ckpt, data, bypass);
    if (*predict_sub) return predict_cmd(config, ckpt, in, out, bypass);
    if (*verify_sub) return verify_cmd(suite);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::numeric ? kNumeric : kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kOk;
}
