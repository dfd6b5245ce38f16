#pragma once

#include <string>
#include <utility>
#include <vector>

#include "fanet/conv.hpp"
#include "fanet/rng.hpp"
#include "fanet/tensor.hpp"

namespace fanet {

/// Named parameters in registration order. The order fixes checkpoint
/// layout and optimizer traversal.
template <typename T>
using ParamList = std::vector<std::pair<std::string, Tensor<T>>>;

inline constexpr double kInitStd = 0.02;

template <typename T>
void init_conv(ConvSpec<T>& conv, Rng& rng, bool zero_weight = false) {
  for (auto& w : conv.weight.data()) w = zero_weight ? T(0) : static_cast<T>(rng.trunc_normal(kInitStd));
  if (conv.bias.defined()) {
    for (auto& b : conv.bias.data()) b = T(0);
  }
}

template <typename T>
void register_conv(ParamList<T>& params, const std::string& prefix, const ConvSpec<T>& conv) {
  params.emplace_back(prefix + ".weight", conv.weight);
  if (conv.bias.defined()) params.emplace_back(prefix + ".bias", conv.bias);
}

/// Per-channel affine pair for layer_norm, gamma = 1 and beta = 0.
template <typename T>
struct NormParams {
  Tensor<T> gamma;
  Tensor<T> beta;

  static NormParams create(std::size_t channels) {
    NormParams n{Tensor<T>(Shape{channels}, T(1)), Tensor<T>(Shape{channels}, T(0))};
    n.gamma.set_requires_grad(true);
    n.beta.set_requires_grad(true);
    return n;
  }

  void register_in(ParamList<T>& params, const std::string& prefix) const {
    params.emplace_back(prefix + ".gamma", gamma);
    params.emplace_back(prefix + ".beta", beta);
  }
};

}  // namespace fanet
