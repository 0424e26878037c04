#include "cxhg/metrics.hpp"

#include <fmt/format.h>

#include <numeric>

#include "cxhg/error.hpp"

namespace cxhg {

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes)
    : classes_(num_classes), counts_(num_classes * num_classes, 0) {
  if (num_classes == 0) throw Error(ErrorCode::value, "confusion matrix needs >= 1 class");
}

void ConfusionMatrix::update(const Labels& prediction, const Labels& truth) {
  if (prediction.ids.size() != truth.ids.size() || prediction.batch != truth.batch ||
      prediction.height != truth.height || prediction.width != truth.width) {
    throw Error(ErrorCode::shape, "confusion_update: prediction and truth shapes differ");
  }
  for (std::size_t i = 0; i < truth.ids.size(); ++i) {
    const auto t = truth.ids[i];
    if (t == kIgnoreIndex) continue;
    if (t >= classes_ || prediction.ids[i] >= classes_) {
      throw Error(ErrorCode::value,
                  fmt::format("confusion_update: class id out of range at pixel {} "
                              "(truth {}, prediction {}, classes {})",
                              i, t, prediction.ids[i], classes_));
    }
  }
  for (std::size_t i = 0; i < truth.ids.size(); ++i) {
    const auto t = truth.ids[i];
    if (t == kIgnoreIndex) continue;
    ++counts_[t * classes_ + prediction.ids[i]];
  }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.classes_ != classes_) {
    throw Error(ErrorCode::shape, "confusion merge: class counts differ");
  }
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

std::uint64_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t truth) const {
  std::uint64_t s = 0;
  for (std::size_t p = 0; p < classes_; ++p) s += count(truth, p);
  return s;
}

std::uint64_t ConfusionMatrix::column_sum(std::size_t prediction) const {
  std::uint64_t s = 0;
  for (std::size_t t = 0; t < classes_; ++t) s += count(t, prediction);
  return s;
}

double pix_acc(const ConfusionMatrix& cm) {
  const std::uint64_t total = cm.total();
  if (total == 0) throw Error(ErrorCode::value, "pix_acc: empty confusion matrix");
  std::uint64_t diag = 0;
  for (std::size_t c = 0; c < cm.num_classes(); ++c) diag += cm.count(c, c);
  return static_cast<double>(diag) / static_cast<double>(total);
}

std::vector<std::optional<double>> class_iou(const ConfusionMatrix& cm) {
  std::vector<std::optional<double>> out(cm.num_classes());
  for (std::size_t c = 0; c < cm.num_classes(); ++c) {
    const std::uint64_t inter = cm.count(c, c);
    const std::uint64_t uni = cm.row_sum(c) + cm.column_sum(c) - inter;
    if (uni > 0) out[c] = static_cast<double>(inter) / static_cast<double>(uni);
  }
  return out;
}

double mean_iou(const ConfusionMatrix& cm, AbsentClassPolicy policy) {
  if (cm.total() == 0) throw Error(ErrorCode::value, "mean_iou: empty confusion matrix");
  double sum = 0.0;
  std::size_t included = 0;
  for (const auto& iou : class_iou(cm)) {
    if (iou) {
      sum += *iou;
      ++included;
    } else if (policy == AbsentClassPolicy::count_as_zero) {
      ++included;
    }
  }
  if (included == 0) throw Error(ErrorCode::value, "mean_iou: every class excluded");
  return sum / static_cast<double>(included);
}

std::string metrics_csv(const ConfusionMatrix& cm, AbsentClassPolicy policy) {
  std::string out;
  const auto ious = class_iou(cm);
  for (std::size_t c = 0; c < ious.size(); ++c) {
    if (ious[c]) {
      out += fmt::format("{},{:.6f}\n", c, *ious[c]);
    } else {
      out += fmt::format("{},nan\n", c);
    }
  }
  out += fmt::format("pixacc,{:.6f}\n", pix_acc(cm));
  out += fmt::format("miou,{:.6f}\n", mean_iou(cm, policy));
  return out;
}

}  // namespace cxhg
