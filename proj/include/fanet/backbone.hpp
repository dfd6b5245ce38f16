#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "fanet/conv.hpp"
#include "fanet/module.hpp"
#include "fanet/tensor.hpp"

namespace fanet {

/// Encoder configuration. The three toggles select the ablation variant:
/// all off is the CE + ConvMLP baseline, all on is the full model.
struct FANetConfig {
  std::array<std::size_t, 4> stage_channels{32, 64, 128, 256};
  std::array<std::size_t, 4> stage_depths{1, 1, 2, 1};
  std::size_t mlp_ratio = 4;
  bool scm_enabled = true;
  bool frm_high_freq = true;
  bool frm_low_freq = true;
  std::size_t num_classes = 5;
  std::size_t in_channels = 3;

  bool frm_enabled() const { return frm_high_freq || frm_low_freq; }
  bool any_mixer() const { return scm_enabled || frm_enabled(); }
  void validate() const;
};

struct InitOptions {
  /// Zero the last projection of each residual branch so blocks start as identity.
  bool zero_init_residual = true;
  bool zero_init_classifier = false;
};

/// Convolutional embedding: x + depthwise3x3(x).
template <typename T>
Tensor<T> ce_forward(const Tensor<T>& x, const ConvSpec<T>& dw3);

/// Spatial context: depthwise 7x7, stride 1, padding 3.
template <typename T>
Tensor<T> scm_forward(const Tensor<T>& x, const ConvSpec<T>& dw7);

/// Feature refinement state over C channels.
template <typename T>
struct FRMState {
  ConvSpec<T> down;  // depthwise 3x3, stride 2, pad 1
  ConvSpec<T> dw_r;  // depthwise 3x3 on the high-frequency residual R
  ConvSpec<T> dw_s;  // depthwise 3x3 on the low-frequency product S
  ConvSpec<T> proj;  // 1x1, (enabled branches * C) -> C
  bool high = true;
  bool low = true;

  static FRMState create(std::size_t channels, bool high, bool low);
  std::size_t channels() const { return down.in_channels; }
  void init(Rng& rng);
  void register_in(ParamList<T>& params, const std::string& prefix) const;
};

/// Intermediates of one FRM evaluation, captured on request.
template <typename T>
struct FRMTrace {
  Tensor<T> f, p, q, r, s, t, out;
};

/// P = down(F); Q = resize(P, H, W); R = F - Q; S = F * Q;
/// T = concat(dw_r(R), dw_s(S)) over enabled branches; out = proj(T).
template <typename T>
Tensor<T> frm_forward(const Tensor<T>& f, const FRMState<T>& state, FRMTrace<T>* trace = nullptr);

/// Replaces `down` with a fixed 2x2 box average (taps at kernel rows/cols
/// 1..2, value 1/4) and zero bias; the frozen weights take no gradient.
template <typename T>
void freeze_box_filter(FRMState<T>& state);

/// One adaptive feature enhancement block over C channels:
///   y = CE(LN(x)); y = squeeze(y) to C/2; branches = [SCM(y)], [FRM(y)]
///   x' = x + fuse(concat(branches))        (mixer omitted for the baseline)
///   out = x' + fc2(gelu(dw(gelu(fc1(LN(x'))))))
template <typename T>
class AFEBlock {
 public:
  AFEBlock(std::size_t channels, const FANetConfig& config, Rng& rng, const InitOptions& init);

  Tensor<T> forward(const Tensor<T>& x, FRMTrace<T>* trace = nullptr) const;
  void register_in(ParamList<T>& params, const std::string& prefix) const;

  std::size_t channels() const { return channels_; }
  bool has_frm() const { return frm.has_value(); }

  // Mixer half; absent in the baseline configuration.
  std::optional<NormParams<T>> norm1;
  std::optional<ConvSpec<T>> ce;
  std::optional<ConvSpec<T>> squeeze;
  std::optional<ConvSpec<T>> scm;
  std::optional<FRMState<T>> frm;
  std::optional<ConvSpec<T>> fuse;
  // ConvMLP half.
  NormParams<T> norm2;
  ConvSpec<T> fc1;
  ConvSpec<T> mlp_dw;
  ConvSpec<T> fc2;

 private:
  std::size_t channels_;
};

using FeaturePyramid = std::array<std::size_t, 4>;

/// Stem (5x5 stride 4) -> stage 1 -> [3x3 stride 2 downsample -> stage i]
/// for i = 2..4, producing S1..S4 at strides 4, 8, 16, 32.
template <typename T>
class Backbone {
 public:
  Backbone(const FANetConfig& config, Rng& rng, const InitOptions& init = {});

  /// Optional capture of the first block's FRM in `trace_stage` (1-based).
  struct Tap {
    std::size_t stage = 3;
    FRMTrace<T> trace;
    bool captured = false;
  };

  std::array<Tensor<T>, 4> forward(const Tensor<T>& image, Tap* tap = nullptr) const;
  void register_in(ParamList<T>& params) const;

  const FANetConfig& config() const { return config_; }
  const std::vector<AFEBlock<T>>& stage(std::size_t i) const { return stages_.at(i); }
  std::vector<AFEBlock<T>>& stage(std::size_t i) { return stages_.at(i); }

 private:
  FANetConfig config_;
  ConvSpec<T> stem_;
  std::array<ConvSpec<T>, 3> downsample_;
  std::array<std::vector<AFEBlock<T>>, 4> stages_;
};

extern template class AFEBlock<float>;
extern template class AFEBlock<double>;
extern template class Backbone<float>;
extern template class Backbone<double>;

}  // namespace fanet
