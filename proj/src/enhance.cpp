#include "fanet/enhance.hpp"

#include <algorithm>
#include <cmath>

#include "fanet/error.hpp"

namespace fanet {

void EnhanceParams::validate() const {
  if (!(alpha > 0.0)) throw ValidationError("enhance: alpha must be > 0");
  if (!(gamma >= 0.0)) throw ValidationError("enhance: gamma must be >= 0");
  if (!(beta >= 0.0 && beta <= 1.0)) throw ValidationError("enhance: beta must lie in [0, 1]");
  if (!(c >= 0.0)) throw ValidationError("enhance: c must be >= 0");
}

Image sharpen(const Image& f, double c) {
  if (f.empty()) throw DimensionError("sharpen: empty image");
  Image g = f;
  const std::size_t h = f.height, w = f.width;
  for (std::size_t y = 0; y < h; ++y) {
    const std::size_t up = y == 0 ? 0 : y - 1, down = y + 1 == h ? y : y + 1;
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t left = x == 0 ? 0 : x - 1, right = x + 1 == w ? x : x + 1;
      for (std::size_t ch = 0; ch < f.channels; ++ch) {
        const double v = f.at(y, x, ch);
        // Differences first so a flat neighbourhood gives exactly zero.
        const double lap = (f.at(up, x, ch) - v) + (f.at(down, x, ch) - v) +
                           (f.at(y, left, ch) - v) + (f.at(y, right, ch) - v);
        g.at(y, x, ch) = v - c * lap;
      }
    }
  }
  return g;
}

double contrast_map(double v, double alpha, double beta, double gamma) {
  return gamma * (1.0 / (1.0 + std::exp(-alpha * (v - beta))) - 0.5);
}

Image contrast_map(const Image& f, const EnhanceParams& p) {
  Image m = f;
  for (auto& v : m.pixels) v = contrast_map(v, p.alpha, p.beta, p.gamma);
  return m;
}

Image contrast_enhance(const Image& f, const EnhanceParams& p) {
  Image q = f;
  for (auto& v : q.pixels) v = v * contrast_map(v, p.alpha, p.beta, p.gamma);
  return q;
}

Image enhance_sum(const Image& f, const EnhanceParams& p) {
  p.validate();
  Image out = sharpen(f, p.c);
  const Image q = contrast_enhance(f, p);
  for (std::size_t i = 0; i < out.pixels.size(); ++i) out.pixels[i] += q.pixels[i];
  return out;
}

Image enhance_combine(const Image& f, const EnhanceParams& p) {
  Image out = enhance_sum(f, p);
  for (auto& v : out.pixels) v = std::clamp(v, 0.0, 1.0);
  return out;
}

}  // namespace fanet
