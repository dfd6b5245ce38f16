#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

namespace fanet {

/// Rows are ground truth, columns are predictions.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t num_classes);
  ConfusionMatrix(std::size_t num_classes, std::vector<std::uint64_t> counts);

  /// Pixels whose truth equals ignore_index are skipped. Other ids must be
  /// below num_classes (ValidationError otherwise).
  void add(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> truth,
           int ignore_index);

  std::size_t num_classes() const { return k_; }
  std::uint64_t at(std::size_t truth, std::size_t predicted) const { return counts_[truth * k_ + predicted]; }
  std::uint64_t total() const;

 private:
  std::size_t k_;
  std::vector<std::uint64_t> counts_;
};

struct MetricsReport {
  std::vector<std::vector<std::uint64_t>> confusion;
  /// Empty for classes absent from both truth and prediction.
  std::vector<std::optional<double>> per_class_iou;
  double miou = 0.0;
  double pixel_acc = 0.0;
  std::size_t iters_seen = 0;
};

/// IoU_k = TP / (TP + FP + FN); classes with TP + FP + FN = 0 are excluded
/// from the mean. Pixel accuracy = trace / total.
MetricsReport metrics_from_confusion(const ConfusionMatrix& cm, std::size_t iters_seen = 0);

nlohmann::json metrics_to_json(const MetricsReport& report);
MetricsReport metrics_from_json(const nlohmann::json& j);

}  // namespace fanet
