#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fanet/backbone.hpp"
#include "fanet/checkpoint.hpp"
#include "fanet/conv.hpp"
#include "fanet/module.hpp"

namespace fanet {

struct HeadConfig {
  std::size_t fpn_channels = 128;
  std::vector<std::size_t> ppm_bins{1, 2, 3, 6};
  std::size_t num_classes = 5;
  int ignore_index = 255;

  void validate() const;
};

/// conv (no bias) -> channel LayerNorm -> GELU, the head's basic unit.
template <typename T>
struct ConvNormAct {
  ConvSpec<T> conv;
  NormParams<T> norm;

  static ConvNormAct create(std::size_t in, std::size_t out, std::size_t kernel, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x) const;
  void register_in(ParamList<T>& params, const std::string& prefix) const;
};

/// Reduced UperNet decoder: pyramid pooling on S4, top-down lateral
/// fusion over S1..S3, multi-level fuse and a 1x1 classifier. Every conv
/// except the classifier is a ConvNormAct unit.
template <typename T>
class SegHead {
 public:
  SegHead(const HeadConfig& config, const std::array<std::size_t, 4>& in_channels, Rng& rng,
          const InitOptions& init = {});

  /// Pooled branches per bin, concatenated with S4, fused by a 3x3 conv.
  /// `concat_width` (optional) receives the channel count before the fuse.
  Tensor<T> ppm_forward(const Tensor<T>& s4, std::size_t* concat_width = nullptr) const;

  /// Logits at the pyramid's stride-4 resolution times 4.
  Tensor<T> forward(const std::array<Tensor<T>, 4>& features) const;

  void register_in(ParamList<T>& params) const;
  const HeadConfig& config() const { return config_; }

  ConvSpec<T>& classifier() { return classifier_; }

 private:
  HeadConfig config_;
  std::array<ConvNormAct<T>, 3> laterals_;
  std::vector<ConvNormAct<T>> ppm_bins_;
  ConvNormAct<T> ppm_fuse_;
  std::array<ConvNormAct<T>, 3> fpn_convs_;
  ConvNormAct<T> fuse_;
  ConvSpec<T> classifier_;
};

/// Mean over non-ignored pixels of -log softmax(logits)[target]. Targets
/// are N*H*W class ids; returns 0 with an all-zero gradient when every
/// pixel is ignored. Out-of-range ids raise ValidationError.
template <typename T>
Tensor<T> cross_entropy_loss(const Tensor<T>& logits, std::span<const std::uint8_t> targets,
                             int ignore_index);

/// Per-pixel argmax over the class axis; ties go to the lowest class id.
template <typename T>
std::vector<std::uint8_t> argmax_classes(const Tensor<T>& logits);

/// Backbone plus head.
template <typename T>
class SegModel {
 public:
  SegModel(const FANetConfig& model, const HeadConfig& head, std::uint64_t seed,
           const InitOptions& init = {});

  Tensor<T> forward(const Tensor<T>& image, typename Backbone<T>::Tap* tap = nullptr) const;

  ParamList<T> parameters() const;
  std::size_t parameter_count() const;

  NamedTensors state_dict() const;
  /// Copies values by name; every model parameter must be present with the
  /// same shape, and the checkpoint may not contain unknown names.
  void load_state_dict(const NamedTensors& tensors);

  void zero_grad();

  Backbone<T>& backbone() { return backbone_; }
  const Backbone<T>& backbone() const { return backbone_; }
  SegHead<T>& head() { return head_; }
  const SegHead<T>& head() const { return head_; }
  const FANetConfig& config() const { return backbone_.config(); }

 private:
  Rng rng_;
  Backbone<T> backbone_;
  SegHead<T> head_;
};

extern template class SegHead<float>;
extern template class SegHead<double>;
extern template class SegModel<float>;
extern template class SegModel<double>;

}  // namespace fanet
