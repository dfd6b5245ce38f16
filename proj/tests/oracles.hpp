#pragma once

// Independent reference implementations used only by tests.

#include <cmath>
#include <vector>

#include "fanet/conv.hpp"
#include "fanet/rng.hpp"
#include "fanet/tensor.hpp"

namespace fanet::oracle {

/// Direct nested-loop convolution with zero padding.
inline std::vector<double> direct_conv(const Tensor<double>& x, const ConvSpec<double>& s) {
  const std::size_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t ho = (h + 2 * s.padding - s.kernel_h) / s.stride + 1;
  const std::size_t wo = (w + 2 * s.padding - s.kernel_w) / s.stride + 1;
  const std::size_t cin_g = cin / s.groups, cout_g = s.out_channels / s.groups;
  std::vector<double> out(n * s.out_channels * ho * wo, 0.0);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t o = 0; o < s.out_channels; ++o)
      for (std::size_t oy = 0; oy < ho; ++oy)
        for (std::size_t ox = 0; ox < wo; ++ox) {
          const std::size_t g = o / cout_g;
          double acc = s.bias.defined() ? s.bias.data()[o] : 0.0;
          for (std::size_t c = 0; c < cin_g; ++c)
            for (std::size_t ky = 0; ky < s.kernel_h; ++ky)
              for (std::size_t kx = 0; kx < s.kernel_w; ++kx) {
                const long iy = static_cast<long>(oy * s.stride + ky) - static_cast<long>(s.padding);
                const long ix = static_cast<long>(ox * s.stride + kx) - static_cast<long>(s.padding);
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(w)) continue;
                acc += s.weight.at(o, c, ky, kx) * x.at(b, g * cin_g + c, iy, ix);
              }
          out[((b * s.out_channels + o) * ho + oy) * wo + ox] = acc;
        }
  return out;
}

template <typename T>
void fill_uniform(Tensor<T>& t, Rng& rng, double lo = -1.0, double hi = 1.0) {
  for (auto& v : t.data()) v = static_cast<T>(rng.uniform(lo, hi));
}

template <typename T>
Tensor<T> random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Tensor<T> t(std::move(shape));
  Rng rng(seed);
  fill_uniform(t, rng, lo, hi);
  return t;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// Standard normal CDF via the error function.
inline double normal_cdf(double v) { return 0.5 * (1.0 + std::erf(v / std::sqrt(2.0))); }

}  // namespace fanet::oracle
