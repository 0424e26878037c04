#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cxhg/dataset.hpp"
#include "cxhg/hourglass.hpp"
#include "cxhg/losses.hpp"
#include "cxhg/metrics.hpp"
#include "cxhg/optim.hpp"
#include "cxhg/patches.hpp"

namespace cxhg {

struct TrainConfig {
  std::size_t epochs_phase1 = 20;
  std::size_t epochs_phase2 = 20;
  std::size_t batch = 16;
  /// Samples per forward pass; gradients of the micro-batches are accumulated
  /// into one optimizer step. 0 means the whole batch at once.
  std::size_t micro_batch = 0;
  double base_lr = 1e-4;
  double power = 0.95;
  LossWeights weights;
  std::uint64_t seed = 0;
  bool augment = true;
  AbsentClassPolicy absent = AbsentClassPolicy::exclude;
};

struct IterationRecord {
  std::uint64_t iter = 0;  // global, 1-based, counts both phases
  std::size_t epoch = 0;   // 1-based within the phase
  int phase = 1;
  double lr = 0.0;
  double loss_total = 0.0;
  double loss_ce = 0.0;
  double loss_se = 0.0;
};

struct EpochRecord {
  std::uint64_t iter = 0;
  std::size_t epoch = 0;
  int phase = 1;
  double val_pixacc = 0.0;
  double val_miou = 0.0;
};

struct TrainingReport {
  std::vector<IterationRecord> iterations;
  std::vector<EpochRecord> epochs;
  std::optional<EpochRecord> last_of_phase(int phase) const;
};

inline constexpr const char* kTrainLogHeader =
    "iter,epoch,phase,lr,loss_total,loss_ce,loss_se,val_pixacc,val_miou";

std::string format_row(const IterationRecord& r);
std::string format_row(const EpochRecord& r);
/// Header plus every row, iterations and epoch summaries interleaved by iter.
std::string training_csv(const TrainingReport& report);

struct Validation {
  double pixacc = 0.0;
  double miou = 0.0;
  ConfusionMatrix confusion{1};
};

/// Eval-mode inference over `samples`, fused logits argmax.
Validation evaluate(HourglassNetwork& net, const std::vector<SegmentationSample>& samples,
                    EncodingUse use, std::size_t batch = 8,
                    AbsentClassPolicy absent = AbsentClassPolicy::exclude);

/// Tiles `image` into patch-sized windows, predicts each in eval mode and
/// stitches the fused-logit argmax back to the tile extent.
LabelMap predict_tile(HourglassNetwork& net, const RasterImage& image, EncodingUse use,
                      std::size_t batch = 8);

struct DataSplit {
  std::vector<SegmentationSample> train;
  std::vector<SegmentationSample> val;
};

/// Tiles cut into patches (tile order, then row-major) and split 9:1.
DataSplit prepare_split(const std::vector<Tile>& tiles, std::size_t patch, std::uint64_t seed,
                        Ratio ratio = {});

std::size_t iterations_per_epoch(std::size_t samples, std::size_t batch);

/// Where training writes phase1.ckpt, last.ckpt, final.ckpt and
/// train_log.csv; empty keeps everything in memory.
struct TrainOutputs {
  std::string dir;
  /// Global step to resume from (read from a checkpoint already loaded into
  /// the network); 0 starts fresh.
  std::uint64_t resume_step = 0;
  std::optional<AdamState> resume_adam;
  std::function<void(const IterationRecord&)> on_iteration;
  std::function<void(const EpochRecord&)> on_epoch;
};

/// Phase 1 bypasses the encoding layers, forces the SE weight to 0 and only
/// optimizes non-encoding parameters; phase 2 trains everything starting from
/// the phase-1 weights. Each phase has its own poly schedule and a fresh Adam
/// state. Throws Error(numeric) naming the iteration on a non-finite loss.
TrainingReport train(HourglassNetwork& net, const DataSplit& data, const TrainConfig& config,
                     const TrainOutputs& outputs = {});

}  // namespace cxhg
