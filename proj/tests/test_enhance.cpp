#include <gtest/gtest.h>

#include <cmath>

#include "fanet/enhance.hpp"
#include "fanet/error.hpp"
#include "fanet/rng.hpp"

namespace fanet {
namespace {

Image random_image(std::size_t h, std::size_t w, std::size_t c, std::uint64_t seed) {
  Image img(h, w, c);
  Rng rng(seed);
  for (auto& v : img.pixels) v = rng.uniform();
  return img;
}

// Stencil oracle: explicit kernel [[0,1,0],[1,-4,1],[0,1,0]] with clamped reads.
double lap_oracle(const Image& f, std::size_t y, std::size_t x, std::size_t c) {
  auto px = [&](long yy, long xx) {
    yy = std::clamp(yy, 0L, static_cast<long>(f.height) - 1);
    xx = std::clamp(xx, 0L, static_cast<long>(f.width) - 1);
    return f.at(yy, xx, c);
  };
  const long yy = static_cast<long>(y), xx = static_cast<long>(x);
  static constexpr int k[3][3] = {{0, 1, 0}, {1, -4, 1}, {0, 1, 0}};
  double acc = 0.0;
  for (int dy = -1; dy <= 1; ++dy)
    for (int dx = -1; dx <= 1; ++dx) acc += k[dy + 1][dx + 1] * px(yy + dy, xx + dx);
  return acc;
}

double m_oracle(double v, double a, double b, double g) { return g * (1.0 / (1.0 + std::exp(-a * (v - b))) - 0.5); }

TEST(Sharpen, ConstantImageUnchanged) {
  const Image f(6, 5, 1, 0.37);
  for (double c : {0.0, 1.0, 3.5}) {
    const auto g = sharpen(f, c);
    for (std::size_t i = 0; i < f.pixels.size(); ++i) EXPECT_EQ(g.pixels[i], 0.37);
  }
}

TEST(Sharpen, ImpulseResponse) {
  Image f(7, 7, 1, 0.0);
  f.at(3, 3) = 1.0;
  const auto g = sharpen(f, 1.0);
  for (std::size_t y = 0; y < 7; ++y)
    for (std::size_t x = 0; x < 7; ++x) {
      const int d = std::abs(static_cast<int>(y) - 3) + std::abs(static_cast<int>(x) - 3);
      const double expected = d == 0 ? 5.0 : (d == 1 ? -1.0 : 0.0);
      EXPECT_EQ(g.at(y, x), expected) << y << "," << x;
    }
}

TEST(Sharpen, ZeroCoefficientIsIdentity) {
  const auto f = random_image(5, 9, 3, 1);
  const auto g = sharpen(f, 0.0);
  EXPECT_EQ(g.pixels, f.pixels);
}

TEST(Sharpen, MatchesStencilOracleWithReplicateBorders) {
  const auto f = random_image(6, 7, 3, 2);
  const auto g = sharpen(f, 1.3);
  for (std::size_t y = 0; y < 6; ++y)
    for (std::size_t x = 0; x < 7; ++x)
      for (std::size_t c = 0; c < 3; ++c)
        EXPECT_NEAR(g.at(y, x, c), f.at(y, x, c) - 1.3 * lap_oracle(f, y, x, c), 1e-12);
}

TEST(Sharpen, Linearity) {
  const auto f1 = random_image(8, 8, 1, 3), f2 = random_image(8, 8, 1, 4);
  const double a = 0.7, b = -1.9;
  Image mix(8, 8, 1);
  for (std::size_t i = 0; i < mix.pixels.size(); ++i) mix.pixels[i] = a * f1.pixels[i] + b * f2.pixels[i];
  const auto lhs = sharpen(mix, 1.0);
  const auto s1 = sharpen(f1, 1.0), s2 = sharpen(f2, 1.0);
  for (std::size_t i = 0; i < mix.pixels.size(); ++i)
    EXPECT_NEAR(lhs.pixels[i], a * s1.pixels[i] + b * s2.pixels[i], 1e-12);
}

TEST(Sharpen, EmptyImageRejected) { EXPECT_THROW(sharpen(Image{}, 1.0), DimensionError); }

TEST(ContrastMap, ZeroAtMidpointAndLimits) {
  for (double a : {0.5, 4.0, 20.0})
    for (double g : {0.1, 2.0}) EXPECT_EQ(contrast_map(0.3, a, 0.3, g), 0.0);
  EXPECT_NEAR(contrast_map(1e6, 4.0, 0.5, 2.0), 1.0, 1e-12);
  EXPECT_NEAR(contrast_map(-1e6, 4.0, 0.5, 2.0), -1.0, 1e-12);
}

TEST(ContrastMap, ScalarExample) {
  EXPECT_NEAR(contrast_map(0.75, 4.0, 0.5, 2.0), m_oracle(0.75, 4.0, 0.5, 2.0), 1e-15);
  EXPECT_NEAR(contrast_map(0.75, 4.0, 0.5, 2.0), 0.4621, 1e-4);
}

TEST(ContrastMap, MonotoneAndOddAboutMidpoint) {
  double prev = -std::numeric_limits<double>::infinity();
  for (int i = 0; i <= 200; ++i) {
    const double v = -0.5 + i * 0.01;
    const double m = contrast_map(v, 4.0, 0.4, 2.0);
    EXPECT_GE(m, prev);
    prev = m;
  }
  for (double d : {0.01, 0.2, 0.6}) EXPECT_NEAR(contrast_map(0.4 + d, 4.0, 0.4, 2.0), -contrast_map(0.4 - d, 4.0, 0.4, 2.0), 1e-12);
}

TEST(ContrastEnhance, NeutralInputsGiveZero) {
  const EnhanceParams p;
  const auto at_beta = contrast_enhance(Image(4, 4, 1, p.beta), p);
  for (double v : at_beta.pixels) EXPECT_EQ(v, 0.0);
  const auto zeros = contrast_enhance(Image(4, 4, 3, 0.0), p);
  for (double v : zeros.pixels) EXPECT_EQ(v, 0.0);
}

TEST(ContrastEnhance, TwoPixelExample) {
  Image f(1, 2, 1);
  f.pixels = {0.25, 0.75};
  const auto q = contrast_enhance(f, EnhanceParams{});
  EXPECT_NEAR(q.pixels[0], 0.25 * m_oracle(0.25, 4, 0.5, 2), 1e-15);
  EXPECT_NEAR(q.pixels[1], 0.75 * m_oracle(0.75, 4, 0.5, 2), 1e-15);
  EXPECT_NEAR(q.pixels[0], -0.1155, 1e-4);
  EXPECT_NEAR(q.pixels[1], 0.3466, 1e-4);
}

TEST(EnhanceCombine, ConstantAtBetaIsUnchanged) {
  const EnhanceParams p;
  const Image f(5, 5, 3, p.beta);
  EXPECT_EQ(enhance_combine(f, p).pixels, f.pixels);
}

TEST(EnhanceCombine, AllDisabledIsIdentity) {
  EnhanceParams p;
  p.c = 0.0;
  p.gamma = 0.0;
  const auto f = random_image(9, 7, 3, 5);
  const auto out = enhance_combine(f, p);
  for (std::size_t i = 0; i < f.pixels.size(); ++i) EXPECT_NEAR(out.pixels[i], f.pixels[i], 1e-12);
}

TEST(EnhanceCombine, CompositionalOracle) {
  const EnhanceParams p;
  const auto f = random_image(8, 8, 1, 6);
  const auto sum = enhance_sum(f, p);
  const auto clamped = enhance_combine(f, p);
  for (std::size_t y = 0; y < 8; ++y)
    for (std::size_t x = 0; x < 8; ++x) {
      const double v = f.at(y, x);
      const double expected = (v - p.c * lap_oracle(f, y, x, 0)) + v * m_oracle(v, p.alpha, p.beta, p.gamma);
      EXPECT_NEAR(sum.at(y, x), expected, 1e-12);
      EXPECT_NEAR(clamped.at(y, x), std::clamp(expected, 0.0, 1.0), 1e-12);
    }
}

TEST(EnhanceParamsValidate, RejectsOutOfRange) {
  EnhanceParams p;
  EXPECT_NO_THROW(p.validate());
  p.alpha = 0.0;
  EXPECT_THROW(p.validate(), ValidationError);
  p = {};
  p.beta = 1.5;
  EXPECT_THROW(p.validate(), ValidationError);
  p = {};
  p.c = -1.0;
  EXPECT_THROW(p.validate(), ValidationError);
  p = {};
  p.gamma = -0.1;
  EXPECT_THROW(p.validate(), ValidationError);
}

}  // namespace
}  // namespace fanet
