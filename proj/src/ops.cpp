#include "fanet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "fanet/error.hpp"

namespace fanet {

namespace {

template <typename T>
using NodePtr = std::shared_ptr<detail::TensorNode<T>>;

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

struct AxisSample {
  std::size_t i0;
  std::size_t i1;
  double frac;
};

std::vector<AxisSample> half_pixel_samples(std::size_t in, std::size_t out) {
  std::vector<AxisSample> s(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t i = 0; i < out; ++i) {
    double src = (static_cast<double>(i) + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const auto i0 = static_cast<std::size_t>(std::floor(src));
    s[i] = {i0, std::min(i0 + 1, in - 1), src - static_cast<double>(i0)};
  }
  return s;
}

std::size_t bin_begin(std::size_t i, std::size_t in, std::size_t out) { return (i * in) / out; }
std::size_t bin_end(std::size_t i, std::size_t in, std::size_t out) {
  return ((i + 1) * in + out - 1) / out;
}

}  // namespace

template <typename T>
void require_nchw(const Tensor<T>& x, const char* what) {
  if (!x.defined() || x.rank() != 4) {
    throw DimensionError(std::string(what) + ": expected NCHW tensor, got " +
                         (x.defined() ? shape_str(x.shape()) : std::string("undefined")));
  }
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "add");
  std::vector<T> out(a.numel());
  auto av = a.data(), bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  NodePtr<T> an = a.node_ptr(), bn = b.node_ptr();
  return make_result<T>(a.shape(), std::move(out), {&a, &b}, [an, bn](detail::TensorNode<T>& self) {
    accumulate_grad<T>(*an, self.grad);
    accumulate_grad<T>(*bn, self.grad);
  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "sub");
  std::vector<T> out(a.numel());
  auto av = a.data(), bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  NodePtr<T> an = a.node_ptr(), bn = b.node_ptr();
  return make_result<T>(a.shape(), std::move(out), {&a, &b}, [an, bn](detail::TensorNode<T>& self) {
    accumulate_grad<T>(*an, self.grad);
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) bn->grad[i] -= self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "mul");
  std::vector<T> out(a.numel());
  auto av = a.data(), bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  NodePtr<T> an = a.node_ptr(), bn = b.node_ptr();
  return make_result<T>(a.shape(), std::move(out), {&a, &b}, [an, bn](detail::TensorNode<T>& self) {
    const auto n = self.grad.size();
    if (an->requires_grad) {
      an->ensure_grad();
      for (std::size_t i = 0; i < n; ++i) an->grad[i] += self.grad[i] * bn->data[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (std::size_t i = 0; i < n; ++i) bn->grad[i] += self.grad[i] * an->data[i];
    }
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T s) {
  std::vector<T> out(x.numel());
  auto xv = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * s;
  NodePtr<T> xn = x.node_ptr();
  return make_result<T>(x.shape(), std::move(out), {&x}, [xn, s](detail::TensorNode<T>& self) {
    xn->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) xn->grad[i] += self.grad[i] * s;
  });
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  std::vector<T> out(x.numel());
  auto xv = x.data();
  const T inv_sqrt2 = T(1) / std::sqrt(T(2));
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = T(0.5) * xv[i] * (T(1) + std::erf(xv[i] * inv_sqrt2));
  }
  NodePtr<T> xn = x.node_ptr();
  return make_result<T>(x.shape(), std::move(out), {&x}, [xn, inv_sqrt2](detail::TensorNode<T>& self) {
    xn->ensure_grad();
    const T inv_sqrt2pi = T(1) / std::sqrt(T(2) * std::numbers::pi_v<T>);
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const T v = xn->data[i];
      const T cdf = T(0.5) * (T(1) + std::erf(v * inv_sqrt2));
      const T pdf = inv_sqrt2pi * std::exp(T(-0.5) * v * v);
      xn->grad[i] += self.grad[i] * (cdf + v * pdf);
    }
  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T acc = T(0);
  for (const T v : x.data()) acc += v;
  NodePtr<T> xn = x.node_ptr();
  return make_result<T>(Shape{}, {acc}, {&x}, [xn](detail::TensorNode<T>& self) {
    xn->ensure_grad();
    const T g = self.grad[0];
    for (auto& v : xn->grad) v += g;
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  return scale(sum(x), T(1) / static_cast<T>(x.numel()));
}

template <typename T>
Tensor<T> weighted_sum(const Tensor<T>& x, const Tensor<T>& w) {
  require_same_shape(x, w, "weighted_sum");
  T acc = T(0);
  auto xv = x.data(), wv = w.data();
  for (std::size_t i = 0; i < xv.size(); ++i) acc += xv[i] * wv[i];
  NodePtr<T> xn = x.node_ptr(), wn = w.node_ptr();
  return make_result<T>(Shape{}, {acc}, {&x}, [xn, wn](detail::TensorNode<T>& self) {
    xn->ensure_grad();
    const T g = self.grad[0];
    for (std::size_t i = 0; i < xn->grad.size(); ++i) xn->grad[i] += g * wn->data[i];
  });
}

template <typename T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& xs) {
  if (xs.empty()) throw DimensionError("concat_channels: no inputs");
  for (const auto& x : xs) require_nchw(x, "concat_channels");
  const std::size_t n = xs[0].dim(0), h = xs[0].dim(2), w = xs[0].dim(3);
  std::size_t c_total = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const auto& x = xs[k];
    if (x.dim(0) != n || x.dim(2) != h || x.dim(3) != w) {
      throw DimensionError("concat_channels: input " + std::to_string(k) + " has shape " +
                           shape_str(x.shape()) + ", expected matching N, H, W with " +
                           shape_str(xs[0].shape()));
    }
    c_total += x.dim(1);
  }
  const std::size_t hw = h * w;
  std::vector<T> out(n * c_total * hw);
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& x : xs) {
    offsets.push_back(off);
    const std::size_t c = x.dim(1);
    auto xv = x.data();
    for (std::size_t b = 0; b < n; ++b) {
      std::copy_n(xv.data() + b * c * hw, c * hw, out.data() + (b * c_total + off) * hw);
    }
    off += c;
  }
  std::vector<const Tensor<T>*> inputs;
  std::vector<NodePtr<T>> nodes;
  for (const auto& x : xs) {
    inputs.push_back(&x);
    nodes.push_back(x.node_ptr());
  }
  return make_result<T>(
      Shape{n, c_total, h, w}, std::move(out), inputs,
      [nodes, offsets, n, c_total, hw](detail::TensorNode<T>& self) {
        for (std::size_t k = 0; k < nodes.size(); ++k) {
          auto& in = *nodes[k];
          if (!in.requires_grad) continue;
          in.ensure_grad();
          const std::size_t c = in.shape[1];
          for (std::size_t b = 0; b < n; ++b) {
            const T* src = self.grad.data() + (b * c_total + offsets[k]) * hw;
            T* dst = in.grad.data() + b * c * hw;
            for (std::size_t i = 0; i < c * hw; ++i) dst[i] += src[i];
          }
        }
      });
}

template <typename T>
Tensor<T> slice_channels(const Tensor<T>& x, std::size_t begin, std::size_t count) {
  require_nchw(x, "slice_channels");
  const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  if (begin + count > c || count == 0) {
    throw DimensionError("slice_channels: range [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") outside channel axis (1) of extent " +
                         std::to_string(c));
  }
  std::vector<T> out(n * count * hw);
  auto xv = x.data();
  for (std::size_t b = 0; b < n; ++b) {
    std::copy_n(xv.data() + (b * c + begin) * hw, count * hw, out.data() + b * count * hw);
  }
  NodePtr<T> xn = x.node_ptr();
  return make_result<T>(Shape{n, count, x.dim(2), x.dim(3)}, std::move(out), {&x},
                        [xn, n, c, hw, begin, count](detail::TensorNode<T>& self) {
                          xn->ensure_grad();
                          for (std::size_t b = 0; b < n; ++b) {
                            const T* src = self.grad.data() + b * count * hw;
                            T* dst = xn->grad.data() + (b * c + begin) * hw;
                            for (std::size_t i = 0; i < count * hw; ++i) dst[i] += src[i];
                          }
                        });
}

template <typename T>
Tensor<T> bilinear_resize(const Tensor<T>& x, std::size_t out_h, std::size_t out_w) {
  require_nchw(x, "bilinear_resize");
  if (out_h == 0 || out_w == 0) throw DimensionError("bilinear_resize: output extent must be >= 1");
  const std::size_t nc = x.dim(0) * x.dim(1), in_h = x.dim(2), in_w = x.dim(3);
  const auto ys = half_pixel_samples(in_h, out_h);
  const auto xs = half_pixel_samples(in_w, out_w);
  std::vector<T> out(nc * out_h * out_w);
  auto xv = x.data();
  for (std::size_t p = 0; p < nc; ++p) {
    const T* src = xv.data() + p * in_h * in_w;
    T* dst = out.data() + p * out_h * out_w;
    for (std::size_t i = 0; i < out_h; ++i) {
      const auto& sy = ys[i];
      const T ly = static_cast<T>(sy.frac);
      const T* r0 = src + sy.i0 * in_w;
      const T* r1 = src + sy.i1 * in_w;
      for (std::size_t j = 0; j < out_w; ++j) {
        const auto& sx = xs[j];
        const T lx = static_cast<T>(sx.frac);
        // Lerp form keeps constants exact.
        const T top = r0[sx.i0] + lx * (r0[sx.i1] - r0[sx.i0]);
        const T bot = r1[sx.i0] + lx * (r1[sx.i1] - r1[sx.i0]);
        dst[i * out_w + j] = top + ly * (bot - top);
      }
    }
  }
  Shape shape{x.dim(0), x.dim(1), out_h, out_w};
  NodePtr<T> xn = x.node_ptr();
  return make_result<T>(shape, std::move(out), {&x},
                        [xn, ys, xs, nc, in_h, in_w, out_h, out_w](detail::TensorNode<T>& self) {
                          xn->ensure_grad();
                          for (std::size_t p = 0; p < nc; ++p) {
                            T* gsrc = xn->grad.data() + p * in_h * in_w;
                            const T* g = self.grad.data() + p * out_h * out_w;
                            for (std::size_t i = 0; i < out_h; ++i) {
                              const auto& sy = ys[i];
                              const T ly = static_cast<T>(sy.frac);
                              T* r0 = gsrc + sy.i0 * in_w;
                              T* r1 = gsrc + sy.i1 * in_w;
                              for (std::size_t j = 0; j < out_w; ++j) {
                                const auto& sx = xs[j];
                                const T lx = static_cast<T>(sx.frac);
                                const T v = g[i * out_w + j];
                                const T top = v * (T(1) - ly);
                                const T bot = v * ly;
                                r0[sx.i0] += top * (T(1) - lx);
                                r0[sx.i1] += top * lx;
                                r1[sx.i0] += bot * (T(1) - lx);
                                r1[sx.i1] += bot * lx;
                              }
                            }
                          }
                        });
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps) {
  require_nchw(x, "layer_norm");
  const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  if (gamma.numel() != c || beta.numel() != c) {
    throw DimensionError("layer_norm: gamma/beta length must equal channel count " +
                         std::to_string(c));
  }
  std::vector<T> out(x.numel());
  std::vector<T> xhat(x.numel());
  std::vector<T> rstd(n * hw);
  auto xv = x.data(), gv = gamma.data(), bv = beta.data();
  std::vector<T> acc_mean(hw), acc_var(hw);
  for (std::size_t b = 0; b < n; ++b) {
    const T* xb = xv.data() + b * c * hw;
    std::fill(acc_mean.begin(), acc_mean.end(), T(0));
    std::fill(acc_var.begin(), acc_var.end(), T(0));
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t p = 0; p < hw; ++p) acc_mean[p] += xb[ch * hw + p];
    }
    for (auto& m : acc_mean) m /= static_cast<T>(c);
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t p = 0; p < hw; ++p) {
        const T d = xb[ch * hw + p] - acc_mean[p];
        acc_var[p] += d * d;
      }
    }
    T* rs = rstd.data() + b * hw;
    for (std::size_t p = 0; p < hw; ++p) rs[p] = T(1) / std::sqrt(acc_var[p] / static_cast<T>(c) + eps);
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t p = 0; p < hw; ++p) {
        const std::size_t i = (b * c + ch) * hw + p;
        xhat[i] = (xb[ch * hw + p] - acc_mean[p]) * rs[p];
        out[i] = xhat[i] * gv[ch] + bv[ch];
      }
    }
  }
  NodePtr<T> xn = x.node_ptr(), gn = gamma.node_ptr(), bn = beta.node_ptr();
  return make_result<T>(
      x.shape(), std::move(out), {&x, &gamma, &beta},
      [xn, gn, bn, xhat = std::move(xhat), rstd = std::move(rstd), n, c, hw](detail::TensorNode<T>& self) {
        const auto& g = self.grad;
        if (gn->requires_grad || bn->requires_grad) {
          gn->ensure_grad();
          bn->ensure_grad();
          for (std::size_t b = 0; b < n; ++b) {
            for (std::size_t ch = 0; ch < c; ++ch) {
              T dg = T(0), db = T(0);
              for (std::size_t p = 0; p < hw; ++p) {
                const std::size_t i = (b * c + ch) * hw + p;
                dg += g[i] * xhat[i];
                db += g[i];
              }
              if (gn->requires_grad) gn->grad[ch] += dg;
              if (bn->requires_grad) bn->grad[ch] += db;
            }
          }
        }
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        std::vector<T> m1(hw), m2(hw);
        for (std::size_t b = 0; b < n; ++b) {
          std::fill(m1.begin(), m1.end(), T(0));
          std::fill(m2.begin(), m2.end(), T(0));
          for (std::size_t ch = 0; ch < c; ++ch) {
            const T gamma_c = gn->data[ch];
            for (std::size_t p = 0; p < hw; ++p) {
              const std::size_t i = (b * c + ch) * hw + p;
              const T dxh = g[i] * gamma_c;
              m1[p] += dxh;
              m2[p] += dxh * xhat[i];
            }
          }
          const T inv_c = T(1) / static_cast<T>(c);
          for (std::size_t ch = 0; ch < c; ++ch) {
            const T gamma_c = gn->data[ch];
            for (std::size_t p = 0; p < hw; ++p) {
              const std::size_t i = (b * c + ch) * hw + p;
              const T dxh = g[i] * gamma_c;
              xn->grad[i] += rstd[b * hw + p] * (dxh - m1[p] * inv_c - xhat[i] * m2[p] * inv_c);
            }
          }
        }
      });
}

template <typename T>
Tensor<T> adaptive_avg_pool(const Tensor<T>& x, std::size_t out_h, std::size_t out_w) {
  require_nchw(x, "adaptive_avg_pool");
  if (out_h == 0 || out_w == 0) throw DimensionError("adaptive_avg_pool: output extent must be >= 1");
  const std::size_t nc = x.dim(0) * x.dim(1), in_h = x.dim(2), in_w = x.dim(3);
  std::vector<T> out(nc * out_h * out_w);
  auto xv = x.data();
  for (std::size_t p = 0; p < nc; ++p) {
    const T* src = xv.data() + p * in_h * in_w;
    for (std::size_t i = 0; i < out_h; ++i) {
      const std::size_t y0 = bin_begin(i, in_h, out_h), y1 = bin_end(i, in_h, out_h);
      for (std::size_t j = 0; j < out_w; ++j) {
        const std::size_t x0 = bin_begin(j, in_w, out_w), x1 = bin_end(j, in_w, out_w);
        T acc = T(0);
        for (std::size_t y = y0; y < y1; ++y) {
          for (std::size_t xx = x0; xx < x1; ++xx) acc += src[y * in_w + xx];
        }
        out[(p * out_h + i) * out_w + j] = acc / static_cast<T>((y1 - y0) * (x1 - x0));
      }
    }
  }
  NodePtr<T> xn = x.node_ptr();
  return make_result<T>(
      Shape{x.dim(0), x.dim(1), out_h, out_w}, std::move(out), {&x},
      [xn, nc, in_h, in_w, out_h, out_w](detail::TensorNode<T>& self) {
        xn->ensure_grad();
        for (std::size_t p = 0; p < nc; ++p) {
          T* dst = xn->grad.data() + p * in_h * in_w;
          for (std::size_t i = 0; i < out_h; ++i) {
            const std::size_t y0 = bin_begin(i, in_h, out_h), y1 = bin_end(i, in_h, out_h);
            for (std::size_t j = 0; j < out_w; ++j) {
              const std::size_t x0 = bin_begin(j, in_w, out_w), x1 = bin_end(j, in_w, out_w);
              const T g = self.grad[(p * out_h + i) * out_w + j] /
                          static_cast<T>((y1 - y0) * (x1 - x0));
              for (std::size_t y = y0; y < y1; ++y) {
                for (std::size_t xx = x0; xx < x1; ++xx) dst[y * in_w + xx] += g;
              }
            }
          }
        }
      });
}

#define FANET_INSTANTIATE(T)                                                                  \
  template void require_nchw<T>(const Tensor<T>&, const char*);                              \
  template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&);                              \
  template Tensor<T> sub<T>(const Tensor<T>&, const Tensor<T>&);                              \
  template Tensor<T> mul<T>(const Tensor<T>&, const Tensor<T>&);                              \
  template Tensor<T> scale<T>(const Tensor<T>&, T);                                           \
  template Tensor<T> gelu<T>(const Tensor<T>&);                                               \
  template Tensor<T> sum<T>(const Tensor<T>&);                                                \
  template Tensor<T> mean<T>(const Tensor<T>&);                                               \
  template Tensor<T> weighted_sum<T>(const Tensor<T>&, const Tensor<T>&);                     \
  template Tensor<T> concat_channels<T>(const std::vector<Tensor<T>>&);                       \
  template Tensor<T> slice_channels<T>(const Tensor<T>&, std::size_t, std::size_t);           \
  template Tensor<T> bilinear_resize<T>(const Tensor<T>&, std::size_t, std::size_t);          \
  template Tensor<T> layer_norm<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);  \
  template Tensor<T> adaptive_avg_pool<T>(const Tensor<T>&, std::size_t, std::size_t);

FANET_INSTANTIATE(float)
FANET_INSTANTIATE(double)

#undef FANET_INSTANTIATE

}  // namespace fanet
