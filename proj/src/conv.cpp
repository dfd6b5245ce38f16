#include "fanet/conv.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <string>

#include "fanet/error.hpp"
#include "fanet/ops.hpp"

namespace fanet {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

struct Geometry {
  std::size_t n, cin, h, w, cout, ho, wo, kh, kw, stride, pad, groups;
  std::size_t cin_g() const { return cin / groups; }
  std::size_t cout_g() const { return cout / groups; }
  std::size_t patch() const { return cin_g() * kh * kw; }
  std::size_t pixels() const { return ho * wo; }
  bool pointwise() const { return kh == 1 && kw == 1 && stride == 1 && pad == 0; }
};

// Range of output columns whose input column ox*stride + k - pad lies in [0, extent).
inline void valid_range(std::size_t k, std::size_t pad, std::size_t stride, std::size_t extent,
                        std::size_t out_extent, std::size_t& lo, std::size_t& hi) {
  const auto sk = static_cast<long>(k), sp = static_cast<long>(pad), ss = static_cast<long>(stride);
  const long first = sp - sk;  // need ox*stride >= pad - k
  long l = first <= 0 ? 0 : (first + ss - 1) / ss;
  const long last = static_cast<long>(extent) - 1 + sp - sk;  // ox*stride <= last
  long h = last < 0 ? 0 : last / ss + 1;
  h = std::min<long>(h, static_cast<long>(out_extent));
  l = std::min(l, h);
  lo = static_cast<std::size_t>(l);
  hi = static_cast<std::size_t>(h);
}

template <typename T>
void im2col(const T* x, const Geometry& g, std::size_t group, T* col) {
  const std::size_t cg = g.cin_g(), p = g.pixels();
  for (std::size_t c = 0; c < cg; ++c) {
    const T* plane = x + (group * cg + c) * g.h * g.w;
    for (std::size_t ky = 0; ky < g.kh; ++ky) {
      for (std::size_t kx = 0; kx < g.kw; ++kx) {
        T* row = col + ((c * g.kh + ky) * g.kw + kx) * p;
        std::size_t lo, hi;
        valid_range(kx, g.pad, g.stride, g.w, g.wo, lo, hi);
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          T* dst = row + oy * g.wo;
          const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
          if (iy < 0 || iy >= static_cast<long>(g.h)) {
            std::fill_n(dst, g.wo, T(0));
            continue;
          }
          const T* src = plane + static_cast<std::size_t>(iy) * g.w;
          std::fill_n(dst, lo, T(0));
          for (std::size_t ox = lo; ox < hi; ++ox) dst[ox] = src[ox * g.stride + kx - g.pad];
          std::fill(dst + hi, dst + g.wo, T(0));
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, const Geometry& g, std::size_t group, T* dx) {
  const std::size_t cg = g.cin_g(), p = g.pixels();
  for (std::size_t c = 0; c < cg; ++c) {
    T* plane = dx + (group * cg + c) * g.h * g.w;
    for (std::size_t ky = 0; ky < g.kh; ++ky) {
      for (std::size_t kx = 0; kx < g.kw; ++kx) {
        const T* row = col + ((c * g.kh + ky) * g.kw + kx) * p;
        std::size_t lo, hi;
        valid_range(kx, g.pad, g.stride, g.w, g.wo, lo, hi);
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
          if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
          T* dst = plane + static_cast<std::size_t>(iy) * g.w;
          const T* src = row + oy * g.wo;
          for (std::size_t ox = lo; ox < hi; ++ox) dst[ox * g.stride + kx - g.pad] += src[ox];
        }
      }
    }
  }
}

template <typename T>
void depthwise_forward(const T* x, const T* w, const Geometry& g, T* out) {
  const std::size_t ksz = g.kh * g.kw;
  for (std::size_t b = 0; b < g.n; ++b) {
    for (std::size_t c = 0; c < g.cin; ++c) {
      const T* plane = x + (b * g.cin + c) * g.h * g.w;
      const T* wk = w + c * ksz;
      T* o = out + (b * g.cin + c) * g.pixels();
      for (std::size_t oy = 0; oy < g.ho; ++oy) {
        T* orow = o + oy * g.wo;
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
          const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
          if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
          const T* xrow = plane + static_cast<std::size_t>(iy) * g.w;
          for (std::size_t kx = 0; kx < g.kw; ++kx) {
            const T wv = wk[ky * g.kw + kx];
            std::size_t lo, hi;
            valid_range(kx, g.pad, g.stride, g.w, g.wo, lo, hi);
            for (std::size_t ox = lo; ox < hi; ++ox) orow[ox] += wv * xrow[ox * g.stride + kx - g.pad];
          }
        }
      }
    }
  }
}

template <typename T>
void depthwise_backward(const T* x, const T* w, const T* gy, const Geometry& g, T* gx, T* gw) {
  const std::size_t ksz = g.kh * g.kw;
  for (std::size_t b = 0; b < g.n; ++b) {
    for (std::size_t c = 0; c < g.cin; ++c) {
      const T* plane = x + (b * g.cin + c) * g.h * g.w;
      T* gplane = gx ? gx + (b * g.cin + c) * g.h * g.w : nullptr;
      const T* wk = w + c * ksz;
      T* gwk = gw ? gw + c * ksz : nullptr;
      const T* go = gy + (b * g.cin + c) * g.pixels();
      for (std::size_t oy = 0; oy < g.ho; ++oy) {
        const T* grow = go + oy * g.wo;
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
          const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
          if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
          const std::size_t row_off = static_cast<std::size_t>(iy) * g.w;
          for (std::size_t kx = 0; kx < g.kw; ++kx) {
            std::size_t lo, hi;
            valid_range(kx, g.pad, g.stride, g.w, g.wo, lo, hi);
            const std::size_t base = row_off + kx - g.pad;
            if (gwk) {
              T acc = T(0);
              for (std::size_t ox = lo; ox < hi; ++ox) acc += grow[ox] * plane[base + ox * g.stride];
              gwk[ky * g.kw + kx] += acc;
            }
            if (gplane) {
              const T wv = wk[ky * g.kw + kx];
              for (std::size_t ox = lo; ox < hi; ++ox) gplane[base + ox * g.stride] += wv * grow[ox];
            }
          }
        }
      }
    }
  }
}

}  // namespace

std::size_t conv_out_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                            std::size_t padding) {
  if (in + 2 * padding < kernel || stride == 0) return 0;
  return (in + 2 * padding - kernel) / stride + 1;
}

template <typename T>
ConvSpec<T> ConvSpec<T>::create(std::size_t in, std::size_t out, std::size_t kernel,
                                std::size_t stride, std::size_t padding, std::size_t groups,
                                bool with_bias) {
  ConvSpec s;
  s.in_channels = in;
  s.out_channels = out;
  s.kernel_h = s.kernel_w = kernel;
  s.stride = stride;
  s.padding = padding;
  s.groups = groups;
  s.validate();
  s.weight = Tensor<T>(Shape{out, in / groups, kernel, kernel});
  s.weight.set_requires_grad(true);
  if (with_bias) {
    s.bias = Tensor<T>(Shape{out});
    s.bias.set_requires_grad(true);
  }
  return s;
}

template <typename T>
void ConvSpec<T>::validate() const {
  if (in_channels == 0 || out_channels == 0 || kernel_h == 0 || kernel_w == 0 || stride == 0 ||
      groups == 0) {
    throw ConfigError("conv: channels, kernel, stride and groups must be positive");
  }
  if (in_channels % groups != 0 || out_channels % groups != 0) {
    throw ConfigError("conv: groups (" + std::to_string(groups) + ") must divide in_channels (" +
                      std::to_string(in_channels) + ") and out_channels (" +
                      std::to_string(out_channels) + ")");
  }
  if (weight.defined()) {
    const Shape want{out_channels, in_channels / groups, kernel_h, kernel_w};
    if (weight.shape() != want) {
      throw DimensionError("conv: weight shape " + shape_str(weight.shape()) + " != " +
                           shape_str(want));
    }
  }
  if (bias.defined() && bias.numel() != out_channels) {
    throw DimensionError("conv: bias length " + std::to_string(bias.numel()) + " != " +
                         std::to_string(out_channels));
  }
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const ConvSpec<T>& spec) {
  require_nchw(x, "conv2d");
  spec.validate();
  if (x.dim(1) != spec.in_channels) {
    throw DimensionError("conv2d: channel axis (1) has extent " + std::to_string(x.dim(1)) +
                         ", expected " + std::to_string(spec.in_channels));
  }
  Geometry g{x.dim(0), x.dim(1), x.dim(2), x.dim(3), spec.out_channels, 0, 0,
             spec.kernel_h, spec.kernel_w, spec.stride, spec.padding, spec.groups};
  g.ho = conv_out_extent(g.h, g.kh, g.stride, g.pad);
  g.wo = conv_out_extent(g.w, g.kw, g.stride, g.pad);
  if (g.ho == 0) {
    throw DimensionError("conv2d: height axis (2) of extent " + std::to_string(g.h) +
                         " is too small for kernel " + std::to_string(g.kh));
  }
  if (g.wo == 0) {
    throw DimensionError("conv2d: width axis (3) of extent " + std::to_string(g.w) +
                         " is too small for kernel " + std::to_string(g.kw));
  }

  const std::size_t p = g.pixels();
  std::vector<T> out(g.n * g.cout * p, T(0));
  const T* xd = x.data().data();
  const T* wd = spec.weight.data().data();
  const bool depthwise = spec.is_depthwise();

  if (depthwise) {
    depthwise_forward(xd, wd, g, out.data());
  } else {
    std::vector<T> col(g.pointwise() ? 0 : g.patch() * p);
    for (std::size_t b = 0; b < g.n; ++b) {
      const T* xb = xd + b * g.cin * g.h * g.w;
      for (std::size_t grp = 0; grp < g.groups; ++grp) {
        const T* cols = xb + grp * g.cin_g() * p;
        if (!g.pointwise()) {
          im2col(xb, g, grp, col.data());
          cols = col.data();
        }
        ConstMapMat<T> wm(wd + grp * g.cout_g() * g.patch(), g.cout_g(), g.patch());
        ConstMapMat<T> cm(cols, g.patch(), p);
        MapMat<T> om(out.data() + (b * g.cout + grp * g.cout_g()) * p, g.cout_g(), p);
        om.noalias() = wm * cm;
      }
    }
  }
  if (spec.bias.defined()) {
    const auto bv = spec.bias.data();
    for (std::size_t b = 0; b < g.n; ++b) {
      for (std::size_t o = 0; o < g.cout; ++o) {
        T* row = out.data() + (b * g.cout + o) * p;
        for (std::size_t i = 0; i < p; ++i) row[i] += bv[o];
      }
    }
  }

  auto xn = x.node_ptr();
  auto wn = spec.weight.node_ptr();
  auto bn = spec.bias.defined() ? spec.bias.node_ptr() : nullptr;
  std::vector<const Tensor<T>*> inputs{&x, &spec.weight};
  if (spec.bias.defined()) inputs.push_back(&spec.bias);

  return make_result<T>(
      Shape{g.n, g.cout, g.ho, g.wo}, std::move(out), inputs,
      [xn, wn, bn, g, depthwise](detail::TensorNode<T>& self) {
        const std::size_t p = g.pixels();
        const T* gy = self.grad.data();
        if (bn && bn->requires_grad) {
          bn->ensure_grad();
          for (std::size_t b = 0; b < g.n; ++b) {
            for (std::size_t o = 0; o < g.cout; ++o) {
              const T* row = gy + (b * g.cout + o) * p;
              T acc = T(0);
              for (std::size_t i = 0; i < p; ++i) acc += row[i];
              bn->grad[o] += acc;
            }
          }
        }
        const bool need_x = xn->requires_grad, need_w = wn->requires_grad;
        if (need_x) xn->ensure_grad();
        if (need_w) wn->ensure_grad();
        if (!need_x && !need_w) return;
        if (depthwise) {
          depthwise_backward(xn->data.data(), wn->data.data(), gy, g,
                             need_x ? xn->grad.data() : nullptr, need_w ? wn->grad.data() : nullptr);
          return;
        }
        std::vector<T> col(g.pointwise() ? 0 : g.patch() * p);
        std::vector<T> dcol(g.pointwise() || !need_x ? 0 : g.patch() * p);
        for (std::size_t b = 0; b < g.n; ++b) {
          const T* xb = xn->data.data() + b * g.cin * g.h * g.w;
          for (std::size_t grp = 0; grp < g.groups; ++grp) {
            ConstMapMat<T> gym(gy + (b * g.cout + grp * g.cout_g()) * p, g.cout_g(), p);
            if (need_w) {
              const T* cols = xb + grp * g.cin_g() * p;
              if (!g.pointwise()) {
                im2col(xb, g, grp, col.data());
                cols = col.data();
              }
              ConstMapMat<T> cm(cols, g.patch(), p);
              MapMat<T> gwm(wn->grad.data() + grp * g.cout_g() * g.patch(), g.cout_g(), g.patch());
              gwm.noalias() += gym * cm.transpose();
            }
            if (need_x) {
              ConstMapMat<T> wm(wn->data.data() + grp * g.cout_g() * g.patch(), g.cout_g(),
                                g.patch());
              T* gxb = xn->grad.data() + b * g.cin * g.h * g.w;
              if (g.pointwise()) {
                MapMat<T> gxm(gxb + grp * g.cin_g() * p, g.cin_g(), p);
                gxm.noalias() += wm.transpose() * gym;
              } else {
                MapMat<T> dcm(dcol.data(), g.patch(), p);
                dcm.noalias() = wm.transpose() * gym;
                col2im_add(dcol.data(), g, grp, gxb);
              }
            }
          }
        }
      });
}

template struct ConvSpec<float>;
template struct ConvSpec<double>;
template Tensor<float> conv2d<float>(const Tensor<float>&, const ConvSpec<float>&);
template Tensor<double> conv2d<double>(const Tensor<double>&, const ConvSpec<double>&);

}  // namespace fanet
