#include "fanet/grad_suites.hpp"

#include <cmath>
#include <functional>

#include "fanet/backbone.hpp"
#include "fanet/conv.hpp"
#include "fanet/error.hpp"
#include "fanet/grad_check.hpp"
#include "fanet/ops.hpp"
#include "fanet/seg_head.hpp"

namespace fanet {
namespace {

constexpr double kStep = 1e-5;

Tensor<double> uniform_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(std::move(shape));
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

void randomize(ConvSpec<double>& conv, Rng& rng, double scale) {
  if (!conv.weight.defined()) return;
  for (auto& w : conv.weight.data()) w = rng.uniform(-scale, scale);
  if (conv.bias.defined()) {
    for (auto& b : conv.bias.data()) b = rng.uniform(-scale, scale);
  }
}

struct Suite {
  std::vector<GradSuiteEntry> entries;

  void check(const std::string& name, const ScalarFn& f, const Tensor<double>& x) {
    const auto r = grad_check(f, x, kStep);
    entries.push_back({name, r.max_relative_error, x.numel()});
  }
};

// Projects a tensor output onto fixed random weights so no gradient
// coordinate is trivially zero.
ScalarFn projected(std::function<Tensor<double>(const Tensor<double>&)> op, const Shape& out_shape,
                   Rng& rng) {
  auto w = uniform_tensor(out_shape, rng);
  return [op = std::move(op), w](const Tensor<double>& t) { return weighted_sum(op(t), w); };
}

}  // namespace

std::vector<GradSuiteEntry> gradcheck_ops() {
  Rng rng(0x6f7073);
  Suite s;
  const Shape shape{2, 3, 5, 4};
  const auto x = uniform_tensor(shape, rng);
  const auto other = uniform_tensor(shape, rng);

  s.check("add", projected([&](const Tensor<double>& t) { return add(t, other); }, shape, rng), x);
  s.check("sub", projected([&](const Tensor<double>& t) { return sub(other, t); }, shape, rng), x);
  s.check("mul", projected([&](const Tensor<double>& t) { return mul(t, other); }, shape, rng), x);
  s.check("mul_self", projected([](const Tensor<double>& t) { return mul(t, t); }, shape, rng), x);
  s.check("scale", projected([](const Tensor<double>& t) { return scale(t, -1.75); }, shape, rng), x);
  s.check("gelu", projected([](const Tensor<double>& t) { return gelu(t); }, shape, rng), x);
  s.check("sum", [](const Tensor<double>& t) { return sum(t); }, x);
  s.check("mean", [](const Tensor<double>& t) { return mean(t); }, x);
  s.check("concat_channels",
          projected([&](const Tensor<double>& t) { return concat_channels<double>({other, t}); },
                    Shape{2, 6, 5, 4}, rng),
          x);
  s.check("slice_channels",
          projected([](const Tensor<double>& t) { return slice_channels(t, 1, 2); }, Shape{2, 2, 5, 4}, rng),
          x);

  const auto gamma = uniform_tensor(Shape{3}, rng, 0.5, 1.5);
  const auto beta = uniform_tensor(Shape{3}, rng);
  s.check("layer_norm.input",
          projected([&](const Tensor<double>& t) { return layer_norm(t, gamma, beta); }, shape, rng), x);
  s.check("layer_norm.gamma",
          projected([&](const Tensor<double>& g) { return layer_norm(x, g, beta); }, shape, rng), gamma);
  s.check("layer_norm.beta",
          projected([&](const Tensor<double>& b) { return layer_norm(x, gamma, b); }, shape, rng), beta);

  s.check("bilinear_resize.up",
          projected([](const Tensor<double>& t) { return bilinear_resize(t, 9, 7); }, Shape{2, 3, 9, 7}, rng), x);
  s.check("bilinear_resize.down",
          projected([](const Tensor<double>& t) { return bilinear_resize(t, 2, 3); }, Shape{2, 3, 2, 3}, rng), x);
  s.check("adaptive_avg_pool",
          projected([](const Tensor<double>& t) { return adaptive_avg_pool(t, 2, 3); }, Shape{2, 3, 2, 3}, rng), x);
  s.check("adaptive_avg_pool.expand",
          projected([](const Tensor<double>& t) { return adaptive_avg_pool(t, 6, 6); }, Shape{2, 3, 6, 6}, rng), x);

  struct ConvCase {
    const char* name;
    std::size_t out, k, stride, pad, groups;
  };
  for (const ConvCase& c : {ConvCase{"conv2d.3x3", 6, 3, 1, 1, 1}, ConvCase{"conv2d.5x5_s2", 4, 5, 2, 2, 1},
                            ConvCase{"conv2d.1x1", 5, 1, 1, 0, 1}, ConvCase{"conv2d.depthwise_s2", 3, 3, 2, 1, 3}}) {
    auto conv = ConvSpec<double>::create(3, c.out, c.k, c.stride, c.pad, c.groups);
    randomize(conv, rng, 1.0);
    const std::size_t ho = conv_out_extent(5, c.k, c.stride, c.pad);
    const std::size_t wo = conv_out_extent(4, c.k, c.stride, c.pad);
    const Shape out{2, c.out, ho, wo};
    s.check(std::string(c.name) + ".input",
            projected([conv](const Tensor<double>& t) { return conv2d(t, conv); }, out, rng), x);
    s.check(std::string(c.name) + ".weight",
            projected(
                [conv, x](const Tensor<double>& w) {
                  auto cc = conv;
                  cc.weight = w;
                  return conv2d(x, cc);
                },
                out, rng),
            conv.weight.detach());
    s.check(std::string(c.name) + ".bias",
            projected(
                [conv, x](const Tensor<double>& b) {
                  auto cc = conv;
                  cc.bias = b;
                  return conv2d(x, cc);
                },
                out, rng),
            conv.bias.detach());
  }

  std::vector<std::uint8_t> targets(2 * 5 * 4);
  for (auto& t : targets) t = static_cast<std::uint8_t>(rng.below(3));
  targets[3] = 255;
  s.check("cross_entropy", [targets](const Tensor<double>& z) { return cross_entropy_loss(z, targets, 255); },
          x);
  return s.entries;
}

std::vector<GradSuiteEntry> gradcheck_block() {
  Rng rng(0x626c6b);
  Suite s;
  const auto x = uniform_tensor(Shape{1, 8, 6, 6}, rng);

  auto dw3 = ConvSpec<double>::depthwise(8, 3);
  randomize(dw3, rng, 0.5);
  s.check("ce", projected([dw3](const Tensor<double>& t) { return ce_forward(t, dw3); }, x.shape(), rng), x);
  auto dw7 = ConvSpec<double>::depthwise(8, 7);
  randomize(dw7, rng, 0.5);
  s.check("scm", projected([dw7](const Tensor<double>& t) { return scm_forward(t, dw7); }, x.shape(), rng), x);

  for (auto [name, high, low] : {std::tuple{"frm.high", true, false}, std::tuple{"frm.low", false, true},
                                 std::tuple{"frm.both", true, true}}) {
    auto frm = FRMState<double>::create(8, high, low);
    for (auto* c : {&frm.down, &frm.dw_r, &frm.dw_s, &frm.proj}) randomize(*c, rng, 0.5);
    s.check(name, projected([frm](const Tensor<double>& t) { return frm_forward(t, frm); }, x.shape(), rng), x);
  }

  InitOptions init;
  init.zero_init_residual = false;
  for (int mask = 0; mask < 8; ++mask) {
    FANetConfig cfg;
    cfg.scm_enabled = mask & 1;
    cfg.frm_high_freq = mask & 2;
    cfg.frm_low_freq = mask & 4;
    AFEBlock<double> block(8, cfg, rng, init);
    ParamList<double> params;
    block.register_in(params, "block");
    for (auto& [pname, p] : params) {
      if (pname.ends_with(".weight") || pname.ends_with(".bias")) {
        for (auto& v : p.data()) v = rng.uniform(-0.5, 0.5);
      }
    }
    std::string name = "afe_block";
    name += cfg.scm_enabled ? "+scm" : "";
    name += cfg.frm_high_freq ? "+high" : "";
    name += cfg.frm_low_freq ? "+low" : "";
    s.check(name, projected([&block](const Tensor<double>& t) { return block.forward(t); }, x.shape(), rng), x);
  }
  return s.entries;
}

std::vector<GradSuiteEntry> gradcheck_model() {
  FANetConfig cfg;
  cfg.stage_depths = {1, 1, 1, 1};
  InitOptions init;
  init.zero_init_residual = false;
  const SegModel<double> model(cfg, HeadConfig{}, 0x6d6f64, init);
  // He-uniform weights and perturbed norms so every path carries signal.
  Rng wr(0x77);
  for (auto& [name, p] : model.parameters()) {
    if (name.ends_with(".weight")) {
      const double a = std::sqrt(6.0 / static_cast<double>(p.numel() / p.dim(0)));
      for (auto& v : p.data()) v = wr.uniform(-a, a);
    } else if (name.ends_with(".gamma")) {
      for (auto& v : p.data()) v = wr.uniform(0.5, 1.5);
    } else {
      for (auto& v : p.data()) v = wr.uniform(-0.1, 0.1);
    }
  }
  // A low-contrast input keeps input gradients well above the
  // finite-difference noise floor (about 1e-10 absolute at h = 1e-5).
  Rng rng(0x696d67);
  const auto x = uniform_tensor(Shape{1, 3, 32, 32}, rng, -0.1, 0.1);
  std::vector<std::uint8_t> targets(32 * 32);
  for (auto& t : targets) t = static_cast<std::uint8_t>(rng.below(cfg.num_classes));
  Suite s;
  s.check("model", [&](const Tensor<double>& t) { return cross_entropy_loss(model.forward(t), targets, 255); },
          x);
  return s.entries;
}

std::vector<GradSuiteEntry> gradcheck_scope(const std::string& scope) {
  if (scope == "ops") return gradcheck_ops();
  if (scope == "block") return gradcheck_block();
  if (scope == "model") return gradcheck_model();
  throw ValidationError("unknown gradcheck scope '" + scope + "' (expected ops, block or model)");
}

}  // namespace fanet
