#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fanet/metrics.hpp"
#include "fanet/optim.hpp"
#include "fanet/seg_head.hpp"
#include "fanet/synth.hpp"

namespace fanet {

/// HWC image in [0, 1] to a 1 x C x H x W tensor with values 2v - 1.
Tensor<float> image_to_tensor(const Image& image);

struct LossRecord {
  std::size_t iter = 0;
  double lr = 0.0;
  double loss = 0.0;
};

/// "iter,lr,loss" with a header row; fixed formatting so reruns are byte-identical.
std::string loss_csv(const std::vector<LossRecord>& curve);

struct TrainResult {
  std::vector<LossRecord> curve;
};

/// Deterministic training: seeded shuffle, random crop and horizontal flip,
/// cross-entropy, poly LR, AdamW. If `out_dir` is given, writes loss.csv,
/// model.fant and checkpoint_<iter>.fant every eval_interval iterations.
/// A non-finite loss or gradient aborts with NumericalError after saving
/// last_good.fant (parameters before the failing iteration).
TrainResult train(SegModel<float>& model, const std::vector<LabeledImage>& data,
                  const TrainConfig& config, int ignore_index = 255,
                  const std::optional<std::filesystem::path>& out_dir = std::nullopt);

/// Full-image inference with lowest-id argmax and confusion accumulation.
/// Predicted masks are returned through `predictions` when non-null.
MetricsReport evaluate(const SegModel<float>& model, const std::vector<LabeledImage>& split,
                       int ignore_index = 255,
                       std::vector<LabelMap>* predictions = nullptr);

/// One row of the SCM / FRM ablation grid.
struct AblationVariant {
  std::string name;
  bool scm = true;
  bool frm_high = true;
  bool frm_low = true;
};

/// baseline, +scm, +frm_high, +frm_low, +frm_both, full (in that order).
std::vector<AblationVariant> standard_ablation_grid();

struct AblationRow {
  std::string config;
  double miou_mean = 0.0;
  double miou_std = 0.0;
  double pixacc_mean = 0.0;
  double pixacc_std = 0.0;
  std::vector<MetricsReport> runs;  // one per seed
};

struct AblationSetup {
  FANetConfig model;
  HeadConfig head;
  TrainConfig train;
  std::vector<std::uint64_t> seeds{0, 1, 2};
  std::size_t threads = 1;
};

/// Trains and evaluates every variant for every seed (seed drives both
/// initialization and data order). Std is the sample standard deviation
/// (0 for one seed). Independent runs may execute on `threads` workers;
/// results do not depend on the thread count.
std::vector<AblationRow> run_ablation(const std::vector<AblationVariant>& grid,
                                      const AblationSetup& setup,
                                      const std::vector<LabeledImage>& train_split,
                                      const std::vector<LabeledImage>& val_split);

/// config,miou_mean,miou_std,pixacc_mean,pixacc_std
std::string ablation_csv(const std::vector<AblationRow>& rows);

}  // namespace fanet
