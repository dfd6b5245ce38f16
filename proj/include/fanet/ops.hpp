#pragma once

#include <cstddef>
#include <vector>

#include "fanet/tensor.hpp"

namespace fanet {

/// Differentiable operators over Tensor. Elementwise ops require identical
/// shapes (no broadcasting). Spatial ops expect NCHW.

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
/// Hadamard product.
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> scale(const Tensor<T>& x, T s);

/// x * Phi(x) with the exact Gaussian CDF.
template <typename T>
Tensor<T> gelu(const Tensor<T>& x);

/// Scalar (rank-0) reductions.
template <typename T>
Tensor<T> sum(const Tensor<T>& x);
template <typename T>
Tensor<T> mean(const Tensor<T>& x);

/// Sum of x * w with a constant weight tensor `w` of the same shape.
template <typename T>
Tensor<T> weighted_sum(const Tensor<T>& x, const Tensor<T>& w);

template <typename T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& xs);
template <typename T>
Tensor<T> slice_channels(const Tensor<T>& x, std::size_t begin, std::size_t count);

/// Half-pixel-centre bilinear resampling with edge clamping.
template <typename T>
Tensor<T> bilinear_resize(const Tensor<T>& x, std::size_t out_h, std::size_t out_w);

inline constexpr double kLayerNormEps = 1e-6;

/// Normalizes across channels at every (n, h, w) position.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     T eps = T(kLayerNormEps));

/// Bin i covers [floor(i*in/out), ceil((i+1)*in/out)). Works for out > in
/// too, in which case bins repeat input cells.
template <typename T>
Tensor<T> adaptive_avg_pool(const Tensor<T>& x, std::size_t out_h, std::size_t out_w);

/// Throws DimensionError unless x is rank 4.
template <typename T>
void require_nchw(const Tensor<T>& x, const char* what);

}  // namespace fanet
