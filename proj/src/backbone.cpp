#include "fanet/backbone.hpp"

#include <string>

#include "fanet/error.hpp"
#include "fanet/ops.hpp"

namespace fanet {

void FANetConfig::validate() const {
  for (std::size_t i = 0; i < 4; ++i) {
    if (stage_channels[i] == 0 || stage_channels[i] % 2 != 0) {
      throw ConfigError("stage_channels[" + std::to_string(i) + "] = " +
                        std::to_string(stage_channels[i]) + " must be positive and even");
    }
    if (stage_depths[i] == 0) {
      throw ConfigError("stage_depths[" + std::to_string(i) + "] must be >= 1");
    }
  }
  if (mlp_ratio == 0) throw ConfigError("mlp_ratio must be >= 1");
  if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
  if (in_channels == 0) throw ConfigError("in_channels must be >= 1");
}

template <typename T>
Tensor<T> ce_forward(const Tensor<T>& x, const ConvSpec<T>& dw3) {
  return add(x, conv2d(x, dw3));
}

template <typename T>
Tensor<T> scm_forward(const Tensor<T>& x, const ConvSpec<T>& dw7) {
  return conv2d(x, dw7);
}

template <typename T>
FRMState<T> FRMState<T>::create(std::size_t channels, bool high, bool low) {
  if (!high && !low) {
    throw ConfigError("FRM needs at least one of the high/low frequency branches");
  }
  FRMState s;
  s.high = high;
  s.low = low;
  s.down = ConvSpec<T>::depthwise(channels, 3, 2);
  if (high) s.dw_r = ConvSpec<T>::depthwise(channels, 3);
  if (low) s.dw_s = ConvSpec<T>::depthwise(channels, 3);
  s.proj = ConvSpec<T>::pointwise(channels * ((high ? 1 : 0) + (low ? 1 : 0)), channels);
  return s;
}

template <typename T>
void FRMState<T>::init(Rng& rng) {
  init_conv(down, rng);
  if (high) init_conv(dw_r, rng);
  if (low) init_conv(dw_s, rng);
  init_conv(proj, rng);
}

template <typename T>
void FRMState<T>::register_in(ParamList<T>& params, const std::string& prefix) const {
  register_conv(params, prefix + ".down", down);
  if (high) register_conv(params, prefix + ".dw_r", dw_r);
  if (low) register_conv(params, prefix + ".dw_s", dw_s);
  register_conv(params, prefix + ".proj", proj);
}

template <typename T>
Tensor<T> frm_forward(const Tensor<T>& f, const FRMState<T>& state, FRMTrace<T>* trace) {
  if (!state.high && !state.low) {
    throw ConfigError("frm_forward: both frequency branches are disabled");
  }
  require_nchw(f, "frm_forward");
  const Tensor<T> p = conv2d(f, state.down);
  const Tensor<T> q = bilinear_resize(p, f.dim(2), f.dim(3));
  std::vector<Tensor<T>> branches;
  Tensor<T> r, s;
  if (state.high) {
    r = sub(f, q);
    branches.push_back(conv2d(r, state.dw_r));
  }
  if (state.low) {
    s = mul(f, q);
    branches.push_back(conv2d(s, state.dw_s));
  }
  const Tensor<T> t = branches.size() == 1 ? branches.front() : concat_channels(branches);
  Tensor<T> out = conv2d(t, state.proj);
  if (trace) *trace = {f, p, q, r, s, t, out};
  return out;
}

template <typename T>
void freeze_box_filter(FRMState<T>& state) {
  auto& w = state.down.weight;
  w = Tensor<T>(w.shape(), T(0));
  const std::size_t c = w.dim(0);
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t ky = 1; ky <= 2; ++ky) {
      for (std::size_t kx = 1; kx <= 2; ++kx) w.at(ch, 0, ky, kx) = T(0.25);
    }
  }
  if (state.down.bias.defined()) state.down.bias = Tensor<T>(state.down.bias.shape(), T(0));
}

template <typename T>
AFEBlock<T>::AFEBlock(std::size_t channels, const FANetConfig& config, Rng& rng,
                      const InitOptions& init)
    : channels_(channels) {
  if (channels == 0 || channels % 2 != 0) {
    throw ConfigError("AFE block needs an even channel count, got " + std::to_string(channels));
  }
  const std::size_t half = channels / 2;
  if (config.any_mixer()) {
    norm1 = NormParams<T>::create(channels);
    ce = ConvSpec<T>::depthwise(channels, 3);
    init_conv(*ce, rng);
    squeeze = ConvSpec<T>::pointwise(channels, half);
    init_conv(*squeeze, rng);
    std::size_t branch_width = 0;
    if (config.scm_enabled) {
      scm = ConvSpec<T>::depthwise(half, 7);
      init_conv(*scm, rng);
      branch_width += half;
    }
    if (config.frm_enabled()) {
      frm = FRMState<T>::create(half, config.frm_high_freq, config.frm_low_freq);
      frm->init(rng);
      branch_width += half;
    }
    fuse = ConvSpec<T>::pointwise(branch_width, channels);
    init_conv(*fuse, rng, init.zero_init_residual);
  }
  norm2 = NormParams<T>::create(channels);
  const std::size_t hidden = channels * config.mlp_ratio;
  fc1 = ConvSpec<T>::pointwise(channels, hidden);
  init_conv(fc1, rng);
  mlp_dw = ConvSpec<T>::depthwise(hidden, 3);
  init_conv(mlp_dw, rng);
  fc2 = ConvSpec<T>::pointwise(hidden, channels);
  init_conv(fc2, rng, init.zero_init_residual);
}

template <typename T>
Tensor<T> AFEBlock<T>::forward(const Tensor<T>& x, FRMTrace<T>* trace) const {
  require_nchw(x, "afe_forward");
  if (x.dim(1) != channels_) {
    throw DimensionError("afe_forward: channel axis (1) has extent " + std::to_string(x.dim(1)) +
                         ", block expects " + std::to_string(channels_));
  }
  Tensor<T> h = x;
  if (norm1) {
    Tensor<T> y = layer_norm(x, norm1->gamma, norm1->beta);
    y = ce_forward(y, *ce);
    y = conv2d(y, *squeeze);
    std::vector<Tensor<T>> branches;
    if (scm) branches.push_back(scm_forward(y, *scm));
    if (frm) branches.push_back(frm_forward(y, *frm, trace));
    const Tensor<T> mixed = branches.size() == 1 ? branches.front() : concat_channels(branches);
    h = add(x, conv2d(mixed, *fuse));
  }
  Tensor<T> m = layer_norm(h, norm2.gamma, norm2.beta);
  m = gelu(conv2d(m, fc1));
  m = gelu(conv2d(m, mlp_dw));
  m = conv2d(m, fc2);
  return add(h, m);
}

template <typename T>
void AFEBlock<T>::register_in(ParamList<T>& params, const std::string& prefix) const {
  if (norm1) {
    norm1->register_in(params, prefix + ".ln1");
    register_conv(params, prefix + ".ce", *ce);
    register_conv(params, prefix + ".squeeze", *squeeze);
    if (scm) register_conv(params, prefix + ".scm", *scm);
    if (frm) frm->register_in(params, prefix + ".frm");
    register_conv(params, prefix + ".fuse", *fuse);
  }
  norm2.register_in(params, prefix + ".ln2");
  register_conv(params, prefix + ".mlp.fc1", fc1);
  register_conv(params, prefix + ".mlp.dw", mlp_dw);
  register_conv(params, prefix + ".mlp.fc2", fc2);
}

template <typename T>
Backbone<T>::Backbone(const FANetConfig& config, Rng& rng, const InitOptions& init)
    : config_(config) {
  config_.validate();
  const auto& ch = config_.stage_channels;
  stem_ = ConvSpec<T>::create(config_.in_channels, ch[0], 5, 4, 2, 1);
  init_conv(stem_, rng);
  for (std::size_t s = 0; s < 4; ++s) {
    if (s > 0) {
      downsample_[s - 1] = ConvSpec<T>::create(ch[s - 1], ch[s], 3, 2, 1, 1);
      init_conv(downsample_[s - 1], rng);
    }
    for (std::size_t b = 0; b < config_.stage_depths[s]; ++b) {
      stages_[s].emplace_back(ch[s], config_, rng, init);
    }
  }
}

template <typename T>
std::array<Tensor<T>, 4> Backbone<T>::forward(const Tensor<T>& image, Tap* tap) const {
  require_nchw(image, "backbone_forward");
  if (image.dim(1) != config_.in_channels) {
    throw DimensionError("backbone_forward: channel axis (1) has extent " +
                         std::to_string(image.dim(1)) + ", expected " +
                         std::to_string(config_.in_channels));
  }
  if (image.dim(2) % 32 != 0) {
    throw DimensionError("backbone_forward: height axis (2) extent " + std::to_string(image.dim(2)) +
                         " is not divisible by 32");
  }
  if (image.dim(3) % 32 != 0) {
    throw DimensionError("backbone_forward: width axis (3) extent " + std::to_string(image.dim(3)) +
                         " is not divisible by 32");
  }
  std::array<Tensor<T>, 4> out;
  Tensor<T> x = conv2d(image, stem_);
  for (std::size_t s = 0; s < 4; ++s) {
    if (s > 0) x = conv2d(x, downsample_[s - 1]);
    for (std::size_t b = 0; b < stages_[s].size(); ++b) {
      FRMTrace<T>* trace = nullptr;
      if (tap && !tap->captured && tap->stage == s + 1 && stages_[s][b].has_frm()) {
        trace = &tap->trace;
        tap->captured = true;
      }
      x = stages_[s][b].forward(x, trace);
    }
    out[s] = x;
  }
  return out;
}

template <typename T>
void Backbone<T>::register_in(ParamList<T>& params) const {
  register_conv(params, "stem", stem_);
  for (std::size_t s = 0; s < 4; ++s) {
    const std::string stage = "stage" + std::to_string(s + 1);
    if (s > 0) register_conv(params, stage + ".downsample", downsample_[s - 1]);
    for (std::size_t b = 0; b < stages_[s].size(); ++b) {
      stages_[s][b].register_in(params, stage + ".block" + std::to_string(b));
    }
  }
}

#define FANET_INSTANTIATE(T)                                                              \
  template Tensor<T> ce_forward<T>(const Tensor<T>&, const ConvSpec<T>&);                \
  template Tensor<T> scm_forward<T>(const Tensor<T>&, const ConvSpec<T>&);               \
  template struct FRMState<T>;                                                           \
  template Tensor<T> frm_forward<T>(const Tensor<T>&, const FRMState<T>&, FRMTrace<T>*); \
  template void freeze_box_filter<T>(FRMState<T>&);                                      \
  template class AFEBlock<T>;                                                            \
  template class Backbone<T>;

FANET_INSTANTIATE(float)
FANET_INSTANTIATE(double)

#undef FANET_INSTANTIATE

}  // namespace fanet
