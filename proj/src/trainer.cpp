#include "cxhg/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

#include "cxhg/augment.hpp"
#include "cxhg/checkpoint.hpp"
#include "cxhg/error.hpp"
#include "cxhg/ops.hpp"
#include "cxhg/optim.hpp"
#include "cxhg/rng.hpp"

namespace cxhg {

namespace fs = std::filesystem;

namespace {

std::uint64_t epoch_stream(int phase, std::size_t epoch) {
  return (static_cast<std::uint64_t>(phase) << 32) | epoch;
}

NamedTensors trainable(HourglassNetwork& net, int phase) {
  NamedTensors out;
  for (auto& [name, t] : net.named_parameters()) {
    if (phase == 1 && is_encoding_parameter(name)) continue;
    out.emplace_back(name, t);
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
}

// rows of an earlier log up to and including `step`, header excluded
std::string kept_log_rows(const fs::path& path, std::uint64_t step) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return {};
  std::string kept, line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (line.empty()) continue;
    const std::uint64_t iter = std::stoull(line.substr(0, line.find(',')));
    if (iter <= step) kept += line + "\n";
  }
  return kept;
}

}  // namespace

std::optional<EpochRecord> TrainingReport::last_of_phase(int phase) const {
  std::optional<EpochRecord> last;
  for (const auto& e : epochs) {
    if (e.phase == phase) last = e;
  }
  return last;
}

std::string format_row(const IterationRecord& r) {
  return fmt::format("{},{},{},{:.9g},{:.9g},{:.9g},{:.9g},,\n", r.iter, r.epoch, r.phase, r.lr,
                     r.loss_total, r.loss_ce, r.loss_se);
}

std::string format_row(const EpochRecord& r) {
  return fmt::format("{},{},{},,,,,{:.6f},{:.6f}\n", r.iter, r.epoch, r.phase, r.val_pixacc,
                     r.val_miou);
}

std::string training_csv(const TrainingReport& report) {
  std::string out = std::string(kTrainLogHeader) + "\n";
  std::size_t e = 0;
  for (const auto& it : report.iterations) {
    while (e < report.epochs.size() && report.epochs[e].iter < it.iter) out += format_row(report.epochs[e++]);
    out += format_row(it);
  }
  while (e < report.epochs.size()) out += format_row(report.epochs[e++]);
  return out;
}

Validation evaluate(HourglassNetwork& net, const std::vector<SegmentationSample>& samples,
                    EncodingUse use, std::size_t batch, AbsentClassPolicy absent) {
  if (samples.empty()) throw Error(ErrorCode::value, "evaluate: no samples");
  if (batch == 0) batch = 1;
  NoGradGuard no_grad;
  Validation v;
  v.confusion = ConfusionMatrix(net.config().num_classes);
  const DType dtype = net.named_parameters().front().second.dtype();
  for (std::size_t start = 0; start < samples.size(); start += batch) {
    std::vector<std::size_t> idx(std::min(batch, samples.size() - start));
    std::iota(idx.begin(), idx.end(), start);
    auto [images, labels] = make_batch(samples, idx, dtype);
    const auto out = net.forward(images, Mode::eval, use);
    v.confusion.update(predict_labels(out.fused_logits), labels);
  }
  v.pixacc = pix_acc(v.confusion);
  v.miou = mean_iou(v.confusion, absent);
  return v;
}

LabelMap predict_tile(HourglassNetwork& net, const RasterImage& image, EncodingUse use,
                      std::size_t batch) {
  const std::size_t patch = net.config().patch_size;
  if (image.channels != net.config().input_channels) {
    throw Error(ErrorCode::shape, fmt::format("tile has {} channels, network expects {}",
                                              image.channels, net.config().input_channels));
  }
  const auto samples = extract_patches(
      image, LabelMap::filled(image.width, image.height, kIgnoreIndex), patch);
  NoGradGuard no_grad;
  const DType dtype = net.named_parameters().front().second.dtype();
  std::vector<LabelMap> predicted;
  for (std::size_t start = 0; start < samples.size(); start += batch) {
    std::vector<std::size_t> idx(std::min(batch, samples.size() - start));
    std::iota(idx.begin(), idx.end(), start);
    const Labels pred = predict_labels(
        net.forward(make_batch(samples, idx, dtype).first, Mode::eval, use).fused_logits);
    for (std::size_t b = 0; b < idx.size(); ++b) {
      LabelMap m = LabelMap::filled(static_cast<std::uint32_t>(patch),
                                    static_cast<std::uint32_t>(patch), 0);
      std::copy_n(pred.ids.begin() + b * patch * patch, patch * patch, m.data.begin());
      predicted.push_back(std::move(m));
    }
  }
  return stitch_labels(predicted, image.width, image.height);
}

DataSplit prepare_split(const std::vector<Tile>& tiles, std::size_t patch, std::uint64_t seed,
                        Ratio ratio) {
  std::vector<SegmentationSample> all;
  for (const auto& t : tiles) {
    auto p = extract_patches(t.image, t.labels, patch);
    std::move(p.begin(), p.end(), std::back_inserter(all));
  }
  auto [train, val] = split(all, ratio, seed);
  return {std::move(train), std::move(val)};
}

std::size_t iterations_per_epoch(std::size_t samples, std::size_t batch) {
  if (batch == 0) throw Error(ErrorCode::config, "batch must be >= 1");
  if (samples < batch) {
    throw Error(ErrorCode::config, fmt::format("dataset of {} samples is smaller than one batch ({})",
                                               samples, batch));
  }
  return samples / batch;
}

TrainingReport train(HourglassNetwork& net, const DataSplit& data, const TrainConfig& config,
                     const TrainOutputs& outputs) {
  if (data.val.empty()) throw Error(ErrorCode::config, "validation set is empty");
  const std::size_t ipe = iterations_per_epoch(data.train.size(), config.batch);
  const std::size_t micro =
      config.micro_batch == 0 ? config.batch : std::min(config.micro_batch, config.batch);
  const std::size_t patch = net.config().patch_size;
  const DType dtype = net.named_parameters().front().second.dtype();
  const std::uint64_t resume = outputs.resume_step;
  const std::uint64_t total_steps = (config.epochs_phase1 + config.epochs_phase2) * ipe;
  if (resume > total_steps) {
    throw Error(ErrorCode::config,
                fmt::format("resume step {} is past the end of training ({})", resume, total_steps));
  }

  const bool persist = !outputs.dir.empty();
  const fs::path dir(outputs.dir);
  std::string log_prefix;
  if (persist) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::io, "cannot create " + outputs.dir + ": " + ec.message());
    if (resume > 0) log_prefix = kept_log_rows(dir / "train_log.csv", resume);
  }

  TrainingReport report;
  auto flush_log = [&] {
    if (!persist) return;
    std::string csv = training_csv(report);
    csv.insert(std::string(kTrainLogHeader).size() + 1, log_prefix);
    write_text(dir / "train_log.csv", csv);
  };

  std::uint64_t step = resume;
  for (int phase = 1; phase <= 2; ++phase) {
    const std::size_t epochs = phase == 1 ? config.epochs_phase1 : config.epochs_phase2;
    const std::uint64_t phase_start = phase == 1 ? 0 : config.epochs_phase1 * ipe;
    const std::uint64_t phase_end = phase_start + epochs * ipe;
    if (epochs == 0 || resume >= phase_end) continue;

    const EncodingUse use = phase == 1 ? EncodingUse::bypassed : EncodingUse::enabled;
    LossWeights weights = config.weights;
    if (phase == 1) weights.se_weight = 0.0;
    const LrSchedule schedule{config.base_lr, config.power, epochs * ipe};
    AdamState adam;
    if (resume > phase_start && outputs.resume_adam) adam = *outputs.resume_adam;

    for (std::size_t e = 0; e < epochs; ++e) {
      const std::uint64_t epoch_start = phase_start + e * ipe;
      if (resume >= epoch_start + ipe) continue;
      std::vector<std::size_t> order(data.train.size());
      std::iota(order.begin(), order.end(), 0);
      SplitMix64 shuffler(derive_seed(config.seed, 2 * epoch_stream(phase, e + 1)));
      shuffle(order, shuffler);
      const std::uint64_t aug_seed = derive_seed(config.seed, 2 * epoch_stream(phase, e + 1) + 1);

      for (std::size_t it = 0; it < ipe; ++it) {
        if (epoch_start + it < resume) continue;
        const double lr = poly_lr(schedule, epoch_start + it - phase_start);
        net.zero_grad();
        IterationRecord rec{epoch_start + it + 1, e + 1, phase, lr, 0.0, 0.0, 0.0};
        for (std::size_t m0 = 0; m0 < config.batch; m0 += micro) {
          const std::size_t count = std::min(micro, config.batch - m0);
          std::vector<SegmentationSample> chunk;
          for (std::size_t k = 0; k < count; ++k) {
            const std::size_t idx = order[it * config.batch + m0 + k];
            chunk.push_back(config.augment
                                ? augment(data.train[idx], derive_seed(aug_seed, idx), patch)
                                : data.train[idx]);
          }
          std::vector<std::size_t> local(count);
          std::iota(local.begin(), local.end(), 0);
          auto [images, labels] = make_batch(chunk, local, dtype);
          const auto out = net.forward(images, Mode::train, use);
          LossTerms terms = total_loss(out, labels, weights);
          const double share = static_cast<double>(count) / static_cast<double>(config.batch);
          const double value = terms.total.item();
          if (!std::isfinite(value)) {
            throw Error(ErrorCode::numeric,
                        fmt::format("non-finite loss at iteration {} (phase {}, epoch {})",
                                    rec.iter, phase, e + 1));
          }
          rec.loss_total += share * value;
          rec.loss_ce += share * terms.ce;
          rec.loss_se += share * terms.se;
          backward(share == 1.0 ? terms.total : scale(terms.total, share));
        }
        auto params = trainable(net, phase);
        adam_step(params, adam, lr);
        step = rec.iter;
        report.iterations.push_back(rec);
        if (outputs.on_iteration) outputs.on_iteration(rec);
      }

      const Validation v = evaluate(net, data.val, use, 8, config.absent);
      EpochRecord er{step, e + 1, phase, v.pixacc, v.miou};
      report.epochs.push_back(er);
      if (outputs.on_epoch) outputs.on_epoch(er);
      if (persist) {
        write_checkpoint((dir / "last.ckpt").string(), make_checkpoint(net, &adam, step));
        flush_log();
      }
    }
    if (persist && phase == 1) {
      write_checkpoint((dir / "phase1.ckpt").string(),
                       make_checkpoint(net, nullptr, step, /*include_encoding=*/false));
    }
  }
  if (persist) {
    write_checkpoint((dir / "final.ckpt").string(), make_checkpoint(net, nullptr, step));
    flush_log();
  }
  return report;
}

}  // namespace cxhg
