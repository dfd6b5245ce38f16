#include "fanet/optim.hpp"

#include <cmath>
#include <string>

#include "fanet/error.hpp"

namespace fanet {

void TrainConfig::validate() const {
  if (!(base_lr >= 0.0)) throw ValidationError("base_lr must be >= 0");
  if (max_iters == 0) throw ValidationError("max_iters must be >= 1");
  if (!(poly_power >= 0.0)) throw ValidationError("poly_power must be >= 0");
  if (batch_size == 0) throw ValidationError("batch_size must be >= 1");
  if (crop == 0 || crop % 32 != 0) throw ValidationError("crop must be a positive multiple of 32");
  if (!(weight_decay >= 0.0)) throw ValidationError("weight_decay must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    throw ValidationError("betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw ValidationError("eps must be > 0");
}

double poly_lr(std::size_t iter, const TrainConfig& config) {
  if (iter > config.max_iters) {
    throw ValidationError("poly_lr: iteration " + std::to_string(iter) + " beyond max_iters " +
                          std::to_string(config.max_iters));
  }
  const double frac = 1.0 - static_cast<double>(iter) / static_cast<double>(config.max_iters);
  return config.base_lr * std::pow(frac, config.poly_power);
}

template <typename T>
void adamw_update(std::span<T> params, std::span<const T> grads, std::span<T> m, std::span<T> v,
                  std::uint64_t step, double lr, const TrainConfig& config) {
  const double b1 = config.beta1, b2 = config.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(step));
  const double decay = lr * config.weight_decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads.empty() ? 0.0 : static_cast<double>(grads[i]);
    double p = static_cast<double>(params[i]);
    p -= decay * p;
    const double mi = b1 * static_cast<double>(m[i]) + (1.0 - b1) * g;
    const double vi = b2 * static_cast<double>(v[i]) + (1.0 - b2) * g * g;
    m[i] = static_cast<T>(mi);
    v[i] = static_cast<T>(vi);
    const double m_hat = mi / bc1;
    const double v_hat = vi / bc2;
    p -= lr * m_hat / (std::sqrt(v_hat) + config.eps);
    params[i] = static_cast<T>(p);
  }
}

template <typename T>
void AdamW<T>::step(const ParamList<T>& params, double lr) {
  if (m_.empty()) {
    for (const auto& [name, p] : params) {
      m_.emplace_back(p.numel(), T(0));
      v_.emplace_back(p.numel(), T(0));
    }
  }
  if (m_.size() != params.size()) {
    throw DimensionError("AdamW: parameter list changed size between steps");
  }
  for (const auto& [name, p] : params) {
    if (!p.has_grad()) continue;
    for (const T g : p.grad()) {
      if (!std::isfinite(static_cast<double>(g))) {
        throw NumericalError("non-finite gradient in parameter " + name);
      }
    }
  }
  ++step_;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor<T> p = params[k].second;
    if (!p.requires_grad()) continue;
    if (m_[k].size() != p.numel()) {
      throw DimensionError("AdamW: state size mismatch for " + params[k].first);
    }
    std::span<const T> g;
    if (p.has_grad()) g = p.grad();
    adamw_update<T>(p.data(), g, m_[k], v_[k], step_, lr, config_);
  }
}

template void adamw_update<float>(std::span<float>, std::span<const float>, std::span<float>,
                                  std::span<float>, std::uint64_t, double, const TrainConfig&);
template void adamw_update<double>(std::span<double>, std::span<const double>, std::span<double>,
                                   std::span<double>, std::uint64_t, double, const TrainConfig&);
template class AdamW<float>;
template class AdamW<double>;

}  // namespace fanet
