#pragma once

#include "fanet/image.hpp"

namespace fanet {

/// Classical spatial-domain enhancement: Laplacian sharpening and a
/// sigmoid contrast stretch. Colour images are processed per channel.
struct EnhanceParams {
  double c = 1.0;      // Laplacian centre coefficient
  double alpha = 4.0;  // contrast slope
  double beta = 0.5;   // contrast midpoint, in [0, 1]
  double gamma = 2.0;  // enhancement strength; 0 disables the contrast term

  void validate() const;
};

/// g = f - c * lap(f), 4-neighbour stencil, replicate borders, not clamped.
Image sharpen(const Image& f, double c);

/// m(v) = gamma * (sigmoid(alpha * (v - beta)) - 0.5)
double contrast_map(double v, double alpha, double beta, double gamma);
Image contrast_map(const Image& f, const EnhanceParams& p);

/// q = f * m(f), pointwise.
Image contrast_enhance(const Image& f, const EnhanceParams& p);

/// sharpen(f) + contrast_enhance(f) without clamping.
Image enhance_sum(const Image& f, const EnhanceParams& p);
/// enhance_sum clamped to [0, 1].
Image enhance_combine(const Image& f, const EnhanceParams& p);

}  // namespace fanet
