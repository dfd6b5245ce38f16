#include "fanet/seg_head.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "fanet/error.hpp"
#include "fanet/ops.hpp"

namespace fanet {

void HeadConfig::validate() const {
  if (fpn_channels == 0) throw ConfigError("fpn_channels must be >= 1");
  if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
  if (ppm_bins.empty()) throw ConfigError("ppm_bins must not be empty");
  for (std::size_t i = 0; i < ppm_bins.size(); ++i) {
    if (ppm_bins[i] == 0) throw ConfigError("ppm_bins entries must be >= 1");
    if (i > 0 && ppm_bins[i] <= ppm_bins[i - 1]) {
      throw ConfigError("ppm_bins must be strictly increasing");
    }
  }
}

template <typename T>
ConvNormAct<T> ConvNormAct<T>::create(std::size_t in, std::size_t out, std::size_t kernel, Rng& rng) {
  ConvNormAct u{ConvSpec<T>::create(in, out, kernel, 1, kernel / 2, 1, false), NormParams<T>::create(out)};
  init_conv(u.conv, rng);
  return u;
}

template <typename T>
Tensor<T> ConvNormAct<T>::forward(const Tensor<T>& x) const {
  return gelu(layer_norm(conv2d(x, conv), norm.gamma, norm.beta));
}

template <typename T>
void ConvNormAct<T>::register_in(ParamList<T>& params, const std::string& prefix) const {
  register_conv(params, prefix + ".conv", conv);
  norm.register_in(params, prefix + ".norm");
}

template <typename T>
SegHead<T>::SegHead(const HeadConfig& config, const std::array<std::size_t, 4>& in_channels,
                    Rng& rng, const InitOptions& init)
    : config_(config) {
  config_.validate();
  const std::size_t f = config_.fpn_channels;
  for (std::size_t i = 0; i < 3; ++i) laterals_[i] = ConvNormAct<T>::create(in_channels[i], f, 1, rng);
  for (std::size_t b = 0; b < config_.ppm_bins.size(); ++b) {
    ppm_bins_.push_back(ConvNormAct<T>::create(in_channels[3], f, 1, rng));
  }
  ppm_fuse_ = ConvNormAct<T>::create(in_channels[3] + config_.ppm_bins.size() * f, f, 3, rng);
  for (auto& c : fpn_convs_) c = ConvNormAct<T>::create(f, f, 3, rng);
  fuse_ = ConvNormAct<T>::create(4 * f, f, 3, rng);
  classifier_ = ConvSpec<T>::pointwise(f, config_.num_classes);
  init_conv(classifier_, rng, init.zero_init_classifier);
}

template <typename T>
Tensor<T> SegHead<T>::ppm_forward(const Tensor<T>& s4, std::size_t* concat_width) const {
  require_nchw(s4, "ppm_forward");
  const std::size_t h = s4.dim(2), w = s4.dim(3);
  std::vector<Tensor<T>> parts{s4};
  for (std::size_t b = 0; b < ppm_bins_.size(); ++b) {
    const std::size_t bins = config_.ppm_bins[b];
    Tensor<T> pooled = adaptive_avg_pool(s4, bins, bins);
    pooled = ppm_bins_[b].forward(pooled);
    parts.push_back(bilinear_resize(pooled, h, w));
  }
  const Tensor<T> cat = concat_channels(parts);
  if (concat_width) *concat_width = cat.dim(1);
  return ppm_fuse_.forward(cat);
}

template <typename T>
Tensor<T> SegHead<T>::forward(const std::array<Tensor<T>, 4>& features) const {
  for (std::size_t i = 0; i < 4; ++i) require_nchw(features[i], "head_forward");
  for (std::size_t i = 1; i < 4; ++i) {
    const auto& fine = features[i - 1];
    const auto& coarse = features[i];
    if (fine.dim(0) != coarse.dim(0) || fine.dim(2) != 2 * coarse.dim(2) ||
        fine.dim(3) != 2 * coarse.dim(3)) {
      throw DimensionError("head_forward: level S" + std::to_string(i + 1) + " has shape " +
                           shape_str(coarse.shape()) + ", inconsistent with S" +
                           std::to_string(i) + " shape " + shape_str(fine.shape()));
    }
  }
  std::array<Tensor<T>, 4> levels;
  for (std::size_t i = 0; i < 3; ++i) levels[i] = laterals_[i].forward(features[i]);
  levels[3] = ppm_forward(features[3]);
  for (std::size_t i = 3; i-- > 0;) {
    levels[i] = add(levels[i], bilinear_resize(levels[i + 1], levels[i].dim(2), levels[i].dim(3)));
  }
  const std::size_t h1 = levels[0].dim(2), w1 = levels[0].dim(3);
  std::vector<Tensor<T>> outs;
  for (std::size_t i = 0; i < 3; ++i) {
    Tensor<T> o = fpn_convs_[i].forward(levels[i]);
    outs.push_back(i == 0 ? o : bilinear_resize(o, h1, w1));
  }
  outs.push_back(bilinear_resize(levels[3], h1, w1));
  Tensor<T> fused = fuse_.forward(concat_channels(outs));
  Tensor<T> logits = conv2d(fused, classifier_);
  return bilinear_resize(logits, 4 * h1, 4 * w1);
}

template <typename T>
void SegHead<T>::register_in(ParamList<T>& params) const {
  for (std::size_t i = 0; i < 3; ++i) laterals_[i].register_in(params, "head.lateral" + std::to_string(i + 1));
  for (std::size_t b = 0; b < ppm_bins_.size(); ++b) {
    ppm_bins_[b].register_in(params, "head.ppm.bin" + std::to_string(config_.ppm_bins[b]));
  }
  ppm_fuse_.register_in(params, "head.ppm.fuse");
  for (std::size_t i = 0; i < 3; ++i) fpn_convs_[i].register_in(params, "head.fpn" + std::to_string(i + 1));
  fuse_.register_in(params, "head.fuse");
  register_conv(params, "head.classifier", classifier_);
}

template <typename T>
Tensor<T> cross_entropy_loss(const Tensor<T>& logits, std::span<const std::uint8_t> targets,
                             int ignore_index) {
  require_nchw(logits, "cross_entropy_loss");
  const std::size_t n = logits.dim(0), k = logits.dim(1), hw = logits.dim(2) * logits.dim(3);
  if (targets.size() != n * hw) {
    throw DimensionError("cross_entropy_loss: " + std::to_string(targets.size()) +
                         " targets for logits of shape " + shape_str(logits.shape()));
  }
  std::size_t count = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const int t = targets[i];
    if (t == ignore_index) continue;
    if (t < 0 || static_cast<std::size_t>(t) >= k) {
      throw ValidationError("cross_entropy_loss: class id " + std::to_string(t) + " at pixel " +
                            std::to_string(i) + " outside [0, " + std::to_string(k) + ")");
    }
    ++count;
  }
  const auto lv = logits.data();
  // Softmax probabilities are kept for the backward pass.
  std::vector<T> probs(count ? logits.numel() : 0);
  T total = T(0);
  if (count) {
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t p = 0; p < hw; ++p) {
        const int t = targets[b * hw + p];
        const T* z = lv.data() + b * k * hw + p;
        T zmax = z[0];
        for (std::size_t c = 1; c < k; ++c) zmax = std::max(zmax, z[c * hw]);
        T denom = T(0);
        for (std::size_t c = 0; c < k; ++c) denom += std::exp(z[c * hw] - zmax);
        for (std::size_t c = 0; c < k; ++c) {
          probs[(b * k + c) * hw + p] = std::exp(z[c * hw] - zmax) / denom;
        }
        if (t == ignore_index) continue;
        total += -(z[static_cast<std::size_t>(t) * hw] - zmax - std::log(denom));
      }
    }
  }
  const T loss = count ? total / static_cast<T>(count) : T(0);
  std::vector<std::uint8_t> tcopy(targets.begin(), targets.end());
  auto ln = logits.node_ptr();
  return make_result<T>(
      Shape{}, {loss}, {&logits},
      [ln, probs = std::move(probs), tcopy = std::move(tcopy), n, k, hw, count,
       ignore_index](detail::TensorNode<T>& self) {
        ln->ensure_grad();
        if (count == 0) return;
        const T g = self.grad[0] / static_cast<T>(count);
        for (std::size_t b = 0; b < n; ++b) {
          for (std::size_t p = 0; p < hw; ++p) {
            const int t = tcopy[b * hw + p];
            if (t == ignore_index) continue;
            for (std::size_t c = 0; c < k; ++c) {
              const std::size_t i = (b * k + c) * hw + p;
              const T onehot = static_cast<int>(c) == t ? T(1) : T(0);
              ln->grad[i] += g * (probs[i] - onehot);
            }
          }
        }
      });
}

template <typename T>
std::vector<std::uint8_t> argmax_classes(const Tensor<T>& logits) {
  require_nchw(logits, "argmax_classes");
  const std::size_t n = logits.dim(0), k = logits.dim(1), hw = logits.dim(2) * logits.dim(3);
  std::vector<std::uint8_t> out(n * hw);
  const auto lv = logits.data();
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t p = 0; p < hw; ++p) {
      std::size_t best = 0;
      T best_v = lv[b * k * hw + p];
      for (std::size_t c = 1; c < k; ++c) {
        const T v = lv[(b * k + c) * hw + p];
        if (v > best_v) {
          best_v = v;
          best = c;
        }
      }
      out[b * hw + p] = static_cast<std::uint8_t>(best);
    }
  }
  return out;
}

template <typename T>
SegModel<T>::SegModel(const FANetConfig& model, const HeadConfig& head, std::uint64_t seed,
                      const InitOptions& init)
    : rng_(seed),
      backbone_(model, rng_, init),
      head_(head, model.stage_channels, rng_, init) {
  if (model.num_classes != head.num_classes) {
    throw ConfigError("model num_classes (" + std::to_string(model.num_classes) +
                      ") differs from head num_classes (" + std::to_string(head.num_classes) + ")");
  }
}

template <typename T>
Tensor<T> SegModel<T>::forward(const Tensor<T>& image, typename Backbone<T>::Tap* tap) const {
  return head_.forward(backbone_.forward(image, tap));
}

template <typename T>
ParamList<T> SegModel<T>::parameters() const {
  ParamList<T> params;
  backbone_.register_in(params);
  head_.register_in(params);
  return params;
}

template <typename T>
std::size_t SegModel<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : parameters()) n += t.numel();
  return n;
}

template <typename T>
NamedTensors SegModel<T>::state_dict() const {
  NamedTensors out;
  for (const auto& [name, t] : parameters()) out.emplace_back(name, cast<float>(t));
  return out;
}

template <typename T>
void SegModel<T>::load_state_dict(const NamedTensors& tensors) {
  std::map<std::string, const Tensor<float>*> by_name;
  for (const auto& [name, t] : tensors) by_name[name] = &t;
  auto params = parameters();
  for (auto& [name, p] : params) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw ValidationError("checkpoint is missing tensor " + name);
    if (it->second->shape() != p.shape()) {
      throw DimensionError("checkpoint tensor " + name + " has shape " +
                           shape_str(it->second->shape()) + ", model expects " +
                           shape_str(p.shape()));
    }
    auto src = it->second->data();
    auto dst = p.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(src[i]);
    by_name.erase(it);
  }
  if (!by_name.empty()) {
    throw ValidationError("checkpoint has tensor " + by_name.begin()->first +
                          " that this model configuration does not use");
  }
}

template <typename T>
void SegModel<T>::zero_grad() {
  for (auto& [name, p] : parameters()) p.zero_grad();
}

template struct ConvNormAct<float>;
template struct ConvNormAct<double>;
template class SegHead<float>;
template class SegHead<double>;
template class SegModel<float>;
template class SegModel<double>;
template Tensor<float> cross_entropy_loss<float>(const Tensor<float>&, std::span<const std::uint8_t>, int);
template Tensor<double> cross_entropy_loss<double>(const Tensor<double>&, std::span<const std::uint8_t>, int);
template std::vector<std::uint8_t> argmax_classes<float>(const Tensor<float>&);
template std::vector<std::uint8_t> argmax_classes<double>(const Tensor<double>&);

}  // namespace fanet
