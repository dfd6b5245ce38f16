#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fanet/module.hpp"

namespace fanet {

struct TrainConfig {
  double base_lr = 9e-5;
  std::size_t max_iters = 2000;
  double poly_power = 1.0;
  std::size_t batch_size = 2;
  std::size_t crop = 64;
  double weight_decay = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 0;
  std::size_t eval_interval = 500;  // 0 disables intermediate checkpoints

  void validate() const;
};

/// base_lr * (1 - iter / max_iters)^poly_power
double poly_lr(std::size_t iter, const TrainConfig& config);

/// One decoupled-weight-decay Adam update on flat buffers. `step` is the
/// 1-based update count used for bias correction.
template <typename T>
void adamw_update(std::span<T> params, std::span<const T> grads, std::span<T> m, std::span<T> v,
                  std::uint64_t step, double lr, const TrainConfig& config);

/// AdamW over a parameter list. Moment buffers are created on the first
/// step in list order; parameters without a gradient are treated as g = 0,
/// parameters that do not require grad are skipped.
template <typename T>
class AdamW {
 public:
  explicit AdamW(const TrainConfig& config) : config_(config) {}

  /// Throws NumericalError naming the parameter if any gradient is
  /// non-finite; no parameter is modified in that case.
  void step(const ParamList<T>& params, double lr);

  std::uint64_t steps() const { return step_; }

 private:
  TrainConfig config_;
  std::vector<std::vector<T>> m_;
  std::vector<std::vector<T>> v_;
  std::uint64_t step_ = 0;
};

extern template class AdamW<float>;
extern template class AdamW<double>;

}  // namespace fanet
