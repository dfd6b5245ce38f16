#pragma once

#include <cstddef>

#include "fanet/tensor.hpp"

namespace fanet {

/// Convolution hyperparameters plus learned weight
/// (out x in/groups x kh x kw) and optional bias (out). Zero padding.
template <typename T>
struct ConvSpec {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel_h = 1;
  std::size_t kernel_w = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t groups = 1;
  Tensor<T> weight;
  Tensor<T> bias;  // undefined when the conv has no bias

  /// Allocates zeroed parameters that take gradients.
  static ConvSpec create(std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride,
                         std::size_t padding, std::size_t groups, bool with_bias = true);

  static ConvSpec depthwise(std::size_t channels, std::size_t kernel, std::size_t stride = 1) {
    return create(channels, channels, kernel, stride, kernel / 2, channels);
  }
  static ConvSpec pointwise(std::size_t in, std::size_t out) { return create(in, out, 1, 1, 0, 1); }

  bool is_depthwise() const { return groups == in_channels && out_channels == in_channels; }
  void validate() const;
};

/// Output extent floor((in + 2 pad - k) / stride) + 1, or 0 if the kernel
/// does not fit.
std::size_t conv_out_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                            std::size_t padding);

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const ConvSpec<T>& spec);

extern template struct ConvSpec<float>;
extern template struct ConvSpec<double>;

}  // namespace fanet
