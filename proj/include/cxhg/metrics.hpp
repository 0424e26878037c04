#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cxhg/labels.hpp"

namespace cxhg {

/// counts[truth][prediction] over non-ignored pixels.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t num_classes);

  /// Tallies every pixel whose truth is not kIgnoreIndex. Class ids at or
  /// beyond num_classes are rejected before anything is counted.
  void update(const Labels& prediction, const Labels& truth);
  void merge(const ConfusionMatrix& other);

  std::size_t num_classes() const { return classes_; }
  std::uint64_t count(std::size_t truth, std::size_t prediction) const {
    return counts_[truth * classes_ + prediction];
  }
  std::uint64_t total() const;
  std::uint64_t row_sum(std::size_t truth) const;
  std::uint64_t column_sum(std::size_t prediction) const;

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::size_t classes_;
  std::vector<std::uint64_t> counts_;
};

/// Classes whose IoU denominator is zero (absent from truth and prediction)
/// are excluded from the mean by default.
enum class AbsentClassPolicy { exclude, count_as_zero };

double pix_acc(const ConfusionMatrix& cm);

/// IoU per class; nullopt where the class is absent from truth and prediction.
std::vector<std::optional<double>> class_iou(const ConfusionMatrix& cm);

double mean_iou(const ConfusionMatrix& cm, AbsentClassPolicy policy = AbsentClassPolicy::exclude);

/// `class,iou` rows (one per class, "nan" for absent classes), then
/// `pixacc,<v>` and `miou,<v>`.
std::string metrics_csv(const ConfusionMatrix& cm,
                        AbsentClassPolicy policy = AbsentClassPolicy::exclude);

}  // namespace cxhg
