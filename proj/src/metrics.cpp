#include "fanet/metrics.hpp"

#include <string>

#include "fanet/error.hpp"

namespace fanet {

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes)
    : k_(num_classes), counts_(num_classes * num_classes, 0) {}

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes, std::vector<std::uint64_t> counts)
    : k_(num_classes), counts_(std::move(counts)) {
  if (counts_.size() != k_ * k_) throw DimensionError("confusion matrix must be num_classes^2");
}

void ConfusionMatrix::add(std::span<const std::uint8_t> predicted,
                          std::span<const std::uint8_t> truth, int ignore_index) {
  if (predicted.size() != truth.size()) {
    throw DimensionError("confusion: prediction and truth sizes differ");
  }
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (static_cast<int>(truth[i]) == ignore_index) continue;
    if (truth[i] >= k_ || predicted[i] >= k_) {
      throw ValidationError("confusion: class id out of range at pixel " + std::to_string(i));
    }
    ++counts_[truth[i] * k_ + predicted[i]];
  }
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t t = 0;
  for (auto c : counts_) t += c;
  return t;
}

MetricsReport metrics_from_confusion(const ConfusionMatrix& cm, std::size_t iters_seen) {
  const std::size_t k = cm.num_classes();
  MetricsReport r;
  r.iters_seen = iters_seen;
  r.confusion.assign(k, std::vector<std::uint64_t>(k));
  std::uint64_t trace = 0, total = 0;
  std::vector<std::uint64_t> row(k, 0), col(k, 0);
  for (std::size_t t = 0; t < k; ++t) {
    for (std::size_t p = 0; p < k; ++p) {
      const auto c = cm.at(t, p);
      r.confusion[t][p] = c;
      row[t] += c;
      col[p] += c;
      total += c;
      if (t == p) trace += c;
    }
  }
  double iou_sum = 0.0;
  std::size_t valid = 0;
  for (std::size_t c = 0; c < k; ++c) {
    const std::uint64_t tp = cm.at(c, c);
    const std::uint64_t denom = row[c] + col[c] - tp;
    if (denom == 0) {
      r.per_class_iou.emplace_back();
      continue;
    }
    const double iou = static_cast<double>(tp) / static_cast<double>(denom);
    r.per_class_iou.emplace_back(iou);
    iou_sum += iou;
    ++valid;
  }
  r.miou = valid ? iou_sum / static_cast<double>(valid) : 0.0;
  r.pixel_acc = total ? static_cast<double>(trace) / static_cast<double>(total) : 0.0;
  return r;
}

nlohmann::json metrics_to_json(const MetricsReport& report) {
  nlohmann::json iou = nlohmann::json::array();
  for (const auto& v : report.per_class_iou) iou.push_back(v ? nlohmann::json(*v) : nlohmann::json());
  return {{"confusion", report.confusion},
          {"per_class_iou", iou},
          {"miou", report.miou},
          {"pixel_acc", report.pixel_acc},
          {"iters_seen", report.iters_seen}};
}

MetricsReport metrics_from_json(const nlohmann::json& j) {
  MetricsReport r;
  r.confusion = j.at("confusion").get<std::vector<std::vector<std::uint64_t>>>();
  for (const auto& v : j.at("per_class_iou")) {
    r.per_class_iou.push_back(v.is_null() ? std::optional<double>() : v.get<double>());
  }
  r.miou = j.at("miou").get<double>();
  r.pixel_acc = j.at("pixel_acc").get<double>();
  r.iters_seen = j.at("iters_seen").get<std::size_t>();
  return r;
}

}  // namespace fanet
