/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

#include <cmath>
#include <random>

#include "cwcc/gemm.hpp"
#include "cwcc/tensor.hpp"

namespace cwcc {

enum class Padding { valid, same };

namespace detail {

struct ConvGeom {
  int n, c, h, w;       // input
  int k, kh, kw;        // kernel
  int stride;
  int pt, pl;           // top/left zero padding
  int oh, ow;

  static ConvGeom make(const Shape& xs, const Shape& ws, int stride, Padding pad) {
    if (xs.size() != 4) fail("conv2d: input must be N,C,H,W, got " + shape_str(xs));
    if (ws.size() != 4) fail("conv2d: weights must be K,C,kh,kw, got " + shape_str(ws));
    if (stride < 1) fail("conv2d: stride must be >= 1");
    ConvGeom g{xs[0], xs[1], xs[2], xs[3], ws[0], ws[2], ws[3], stride, 0, 0, 0, 0};
    if (ws[1] != g.c) {
      fail("conv2d: input channels of " + shape_str(xs) + " do not match weights " + shape_str(ws));
    }
    int ph = 0, pw = 0;
    if (pad == Padding::same) {
      g.oh = (g.h + stride - 1) / stride;
      g.ow = (g.w + stride - 1) / stride;
      ph = std::max(0, (g.oh - 1) * stride + g.kh - g.h);
      pw = std::max(0, (g.ow - 1) * stride + g.kw - g.w);
    } else {
      if (g.kh > g.h || g.kw > g.w) {
        fail("conv2d: kernel " + shape_str(ws) + " larger than input " + shape_str(xs));
      }
      g.oh = (g.h - g.kh) / stride + 1;
      g.ow = (g.w - g.kw) / stride + 1;
    }
    g.pt = ph / 2;
    g.pl = pw / 2;
    if (g.kh > g.h + ph || g.kw > g.w + pw) {
      fail("conv2d: kernel " + shape_str(ws) + " larger than padded input " + shape_str(xs));
    }
    return g;
  }

  std::int64_t patch() const { return std::int64_t(c) * kh * kw; }
  std::int64_t spots() const { return std::int64_t(oh) * ow; }
};

/// col[c*kh*kw][oh*ow] for one sample, zero-filled outside the image.
template <typename T>
void im2col(const ConvGeom& g, const T* x, T* col) {
  const std::int64_t spots = g.spots();
  for (int c = 0; c < g.c; ++c) {
    const T* plane = x + std::int64_t(c) * g.h * g.w;
    for (int i = 0; i < g.kh; ++i) {
      for (int j = 0; j < g.kw; ++j) {
        T* row = col + ((std::int64_t(c) * g.kh + i) * g.kw + j) * spots;
        for (int oh = 0; oh < g.oh; ++oh) {
          const int ih = oh * g.stride + i - g.pt;
          T* out = row + std::int64_t(oh) * g.ow;
          if (ih < 0 || ih >= g.h) {
            std::fill(out, out + g.ow, T(0));
            continue;
          }
          const T* src = plane + std::int64_t(ih) * g.w;
          for (int ow = 0; ow < g.ow; ++ow) {
            const int iw = ow * g.stride + j - g.pl;
            out[ow] = (iw >= 0 && iw < g.w) ? src[iw] : T(0);
          }
        }
      }
    }
  }
}

/// Adds col-shaped gradients back into the (unpadded) input gradient.
template <typename T>
void col2im_add(const ConvGeom& g, const T* col, T* dx) {
  const std::int64_t spots = g.spots();
  for (int c = 0; c < g.c; ++c) {
    T* plane = dx + std::int64_t(c) * g.h * g.w;
    for (int i = 0; i < g.kh; ++i) {
      for (int j = 0; j < g.kw; ++j) {
        const T* row = col + ((std::int64_t(c) * g.kh + i) * g.kw + j) * spots;
        for (int oh = 0; oh < g.oh; ++oh) {
          const int ih = oh * g.stride + i - g.pt;
          if (ih < 0 || ih >= g.h) continue;
          const T* src = row + std::int64_t(oh) * g.ow;
          T* out = plane + std::int64_t(ih) * g.w;
          for (int ow = 0; ow < g.ow; ++ow) {
            const int iw = ow * g.stride + j - g.pl;
            if (iw >= 0 && iw < g.w) out[iw] += src[ow];
          }
        }
      }
    }
  }
}

}  // namespace detail

/// 2-d cross-correlation, N,C,H,W by K,C,kh,kw -> N,K,H',W'.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int stride = 1,
                 Padding pad = Padding::valid) {
  const auto g = detail::ConvGeom::make(x.shape(), w.shape(), stride, pad);
  if (b.shape().size() != 1 || b.shape()[0] != g.k) {
    fail("conv2d: bias " + shape_str(b.shape()) + " does not match " + std::to_string(g.k) + " kernels");
  }
  // A pointwise stride-1 conv is a plain matrix product on the channel
  // planes; skip the im2col buffers entirely.
  const bool pointwise = g.kh == 1 && g.kw == 1 && g.stride == 1;
  const std::int64_t patch = g.patch(), spots = g.spots();
  std::vector<T> out(std::size_t(g.n) * g.k * spots, T(0));
  std::vector<T> col(pointwise ? 0 : std::size_t(patch) * spots);
  const T* xd = x.data().data();
  const T* wd = w.data().data();
  const T* bd = b.data().data();
  for (int n = 0; n < g.n; ++n) {
    const T* xn = xd + std::int64_t(n) * g.c * g.h * g.w;
    const T* cols = pointwise ? xn : col.data();
    if (!pointwise) detail::im2col(g, xn, col.data());
    T* y = out.data() + std::int64_t(n) * g.k * spots;
    gemm_nn<T>(g.k, int(patch), int(spots), wd, cols, y);
    for (int k = 0; k < g.k; ++k) {
      T* row = y + std::int64_t(k) * spots;
      for (std::int64_t s = 0; s < spots; ++s) row[s] += bd[k];
    }
  }
  return Tensor<T>::result(
      {g.n, g.k, g.oh, g.ow}, std::move(out), {x, w, b}, [g, pointwise](detail::Node<T>& self) {
        auto& xn = *self.parents[0];
        auto& wn = *self.parents[1];
        auto& bn = *self.parents[2];
        const std::int64_t patch = g.patch(), spots = g.spots();
        const T* dy = self.grad.data();
        std::vector<T> col(pointwise ? 0 : std::size_t(patch) * spots);
        std::vector<T> dcol(pointwise ? 0 : std::size_t(patch) * spots);
        for (int n = 0; n < g.n; ++n) {
          const T* dyn = dy + std::int64_t(n) * g.k * spots;
          const T* xdat = xn.data.data() + std::int64_t(n) * g.c * g.h * g.w;
          const T* cols = pointwise ? xdat : col.data();
          if (!pointwise) detail::im2col(g, xdat, col.data());
          if (wn.requires_grad) {
            gemm_nt<T>(g.k, int(spots), int(patch), dyn, cols, wn.grad.data());
          }
          if (bn.requires_grad) {
            for (int k = 0; k < g.k; ++k) {
              T acc = T(0);
              const T* row = dyn + std::int64_t(k) * spots;
              for (std::int64_t s = 0; s < spots; ++s) acc += row[s];
              bn.grad[k] += acc;
            }
          }
          if (xn.requires_grad) {
            T* dxn = xn.grad.data() + std::int64_t(n) * g.c * g.h * g.w;
            if (pointwise) {
              gemm_tn<T>(g.k, int(patch), int(spots), wn.data.data(), dyn, dxn);
            } else {
              std::fill(dcol.begin(), dcol.end(), T(0));
              gemm_tn<T>(g.k, int(patch), int(spots), wn.data.data(), dyn, dcol.data());
              detail::col2im_add(g, dcol.data(), dxn);
            }
          }
        }
      });
}

/// Max pooling with a square window; gradient routes to the first maximum
/// in row-major order within each window.
template <typename T>
Tensor<T> maxpool2d(const Tensor<T>& x, int window = 3, int stride = 2) {
  const auto& s = x.shape();
  if (s.size() != 4) fail("maxpool2d: input must be N,C,H,W, got " + shape_str(s));
  if (stride < 1) fail("maxpool2d: stride must be >= 1");
  const int n = s[0], c = s[1], h = s[2], w = s[3];
  if (window > h || window > w) {
    fail("maxpool2d: window " + std::to_string(window) + " larger than input " + shape_str(s));
  }
  const int oh = (h - window) / stride + 1;
  const int ow = (w - window) / stride + 1;
  std::vector<T> out(std::size_t(n) * c * oh * ow);
  auto arg = std::make_shared<std::vector<std::int64_t>>(out.size());
  const T* xd = x.data().data();
  std::int64_t o = 0;
  for (int nn = 0; nn < n; ++nn) {
    for (int cc = 0; cc < c; ++cc) {
      const T* plane = xd + (std::int64_t(nn) * c + cc) * h * w;
      const std::int64_t base = (std::int64_t(nn) * c + cc) * h * w;
      for (int i = 0; i < oh; ++i) {
        for (int j = 0; j < ow; ++j, ++o) {
          T best{};
          std::int64_t besti = -1;
          for (int di = 0; di < window; ++di) {
            const int ih = i * stride + di;
            for (int dj = 0; dj < window; ++dj) {
              const int iw = j * stride + dj;
              const T v = plane[std::int64_t(ih) * w + iw];
              if (besti < 0 || v > best) {
                best = v;
                besti = base + std::int64_t(ih) * w + iw;
              }
            }
          }
          out[o] = best;
          (*arg)[o] = besti;
        }
      }
    }
  }
  return Tensor<T>::result({n, c, oh, ow}, std::move(out), {x}, [arg](detail::Node<T>& self) {
    auto& xn = *self.parents[0];
    if (!xn.requires_grad) return;
    for (std::size_t i = 0; i < self.grad.size(); ++i) xn.grad[(*arg)[i]] += self.grad[i];
  });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  std::vector<T> out(x.data().begin(), x.data().end());
  for (auto& v : out) v = v > T(0) ? v : T(0);
  return Tensor<T>::result(x.shape(), std::move(out), {x}, [](detail::Node<T>& self) {
    auto& xn = *self.parents[0];
    if (!xn.requires_grad) return;
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (xn.data[i] > T(0)) xn.grad[i] += self.grad[i];
    }
  });
}

/// x[N,D] * w[D,U] + b[U]
template <typename T>
Tensor<T> dense(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  const auto& xs = x.shape();
  const auto& ws = w.shape();
  if (xs.size() != 2 || ws.size() != 2 || xs[1] != ws[0]) {
    fail("dense: incompatible shapes " + shape_str(xs) + " and " + shape_str(ws));
  }
  if (b.shape().size() != 1 || b.shape()[0] != ws[1]) {
    fail("dense: bias " + shape_str(b.shape()) + " does not match " + std::to_string(ws[1]) + " units");
  }
  const int n = xs[0], d = xs[1], u = ws[1];
  std::vector<T> out(std::size_t(n) * u, T(0));
  gemm_nn<T>(n, d, u, x.data().data(), w.data().data(), out.data());
  const T* bd = b.data().data();
  for (int i = 0; i < n; ++i) {
    T* row = out.data() + std::size_t(i) * u;
    for (int j = 0; j < u; ++j) row[j] += bd[j];
  }
  return Tensor<T>::result({n, u}, std::move(out), {x, w, b}, [n, d, u](detail::Node<T>& self) {
    auto& xn = *self.parents[0];
    auto& wn = *self.parents[1];
    auto& bn = *self.parents[2];
    const T* dy = self.grad.data();
    if (xn.requires_grad) {
      std::vector<T> wt(std::size_t(u) * d);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < u; ++j) wt[std::size_t(j) * d + i] = wn.data[std::size_t(i) * u + j];
      gemm_nn<T>(n, u, d, dy, wt.data(), xn.grad.data());
    }
    if (wn.requires_grad) gemm_tn<T>(n, d, u, xn.data.data(), dy, wn.grad.data());
    if (bn.requires_grad) {
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < u; ++j) bn.grad[j] += dy[std::size_t(i) * u + j];
    }
  });
}

/// Inverted dropout: identity at inference; in training keeps each element
/// with probability 1-rate and scales survivors by 1/(1-rate).
template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double rate, bool training, std::mt19937_64& rng) {
  if (rate < 0.0 || rate >= 1.0) fail("dropout: rate must be in [0,1), got " + std::to_string(rate));
  if (!training || rate == 0.0) return x;
  const T scale = T(1.0 / (1.0 - rate));
  auto mask = std::make_shared<std::vector<unsigned char>>(x.data().size());
  std::vector<T> out(x.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const bool keep = uniform01(rng) >= rate;
    (*mask)[i] = keep;
    out[i] = keep ? x.data()[i] * scale : T(0);
  }
  return Tensor<T>::result(x.shape(), std::move(out), {x}, [mask, scale](detail::Node<T>& self) {
    auto& xn = *self.parents[0];
    if (!xn.requires_grad) return;
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if ((*mask)[i]) xn.grad[i] += self.grad[i] * scale;
    }
  });
}

/// Global average pooling, N,C,H,W -> N,C. Sums run sequentially in
/// row-major order.
template <typename T>
Tensor<T> gap(const Tensor<T>& x) {
  const auto& s = x.shape();
  if (s.size() != 4) fail("gap: input must be N,C,H,W, got " + shape_str(s));
  const int n = s[0], c = s[1];
  const std::int64_t hw = std::int64_t(s[2]) * s[3];
  std::vector<T> out(std::size_t(n) * c);
  const T* xd = x.data().data();
  for (std::int64_t p = 0; p < std::int64_t(n) * c; ++p) {
    T acc = T(0);
    const T* plane = xd + p * hw;
    for (std::int64_t i = 0; i < hw; ++i) acc += plane[i];
    out[std::size_t(p)] = acc / T(hw);
  }
  return Tensor<T>::result({n, c}, std::move(out), {x}, [hw](detail::Node<T>& self) {
    auto& xn = *self.parents[0];
    if (!xn.requires_grad) return;
    for (std::size_t p = 0; p < self.grad.size(); ++p) {
      const T g = self.grad[p] / T(hw);
      T* dst = xn.grad.data() + std::int64_t(p) * hw;
      for (std::int64_t i = 0; i < hw; ++i) dst[i] += g;
    }
  });
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& xs, int axis) {
  if (xs.empty()) fail("concat: no inputs");
  const auto& s0 = xs[0].shape();
  if (axis < 0 || axis >= int(s0.size())) fail("concat: bad axis " + std::to_string(axis));
  Shape out_shape = s0;
  out_shape[axis] = 0;
  for (const auto& t : xs) {
    const auto& s = t.shape();
    if (s.size() != s0.size()) fail("concat: rank mismatch " + shape_str(s) + " vs " + shape_str(s0));
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (int(i) != axis && s[i] != s0[i]) {
        fail("concat: extent mismatch at axis " + std::to_string(i) + ": " + shape_str(s) + " vs " + shape_str(s0));
      }
    }
    out_shape[axis] += s[axis];
  }
  std::int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= s0[i];
  for (std::size_t i = axis + 1; i < s0.size(); ++i) inner *= s0[i];
  std::vector<T> out(std::size_t(numel(out_shape)));
  const std::int64_t out_row = std::int64_t(out_shape[axis]) * inner;
  std::int64_t off = 0;
  for (const auto& t : xs) {
    const std::int64_t block = std::int64_t(t.shape()[axis]) * inner;
    const T* src = t.data().data();
    for (std::int64_t o = 0; o < outer; ++o) {
      std::copy(src + o * block, src + (o + 1) * block, out.data() + o * out_row + off);
    }
    off += block;
  }
  return Tensor<T>::result(out_shape, std::move(out), xs, [outer, inner, out_row](detail::Node<T>& self) {
    std::int64_t off = 0;
    for (auto& pp : self.parents) {
      auto& p = *pp;
      const std::int64_t axis_extent = p.size() / (outer * inner);
      const std::int64_t blk = axis_extent * inner;
      if (p.requires_grad) {
        for (std::int64_t o = 0; o < outer; ++o) {
          const T* src = self.grad.data() + o * out_row + off;
          T* dst = p.grad.data() + o * blk;
          for (std::int64_t i = 0; i < blk; ++i) dst[i] += src[i];
        }
      }
      off += blk;
    }
  });
}

// ---- elementwise / reduction helpers used by the losses ----

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) fail("add: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  std::vector<T> out(a.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return Tensor<T>::result(a.shape(), std::move(out), {a, b}, [](detail::Node<T>& self) {
    for (int k = 0; k < 2; ++k) {
      auto& p = *self.parents[k];
      if (!p.requires_grad) continue;
      for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) fail("sub: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  std::vector<T> out(a.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  return Tensor<T>::result(a.shape(), std::move(out), {a, b}, [](detail::Node<T>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (pa.requires_grad) pa.grad[i] += self.grad[i];
      if (pb.requires_grad) pb.grad[i] -= self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) fail("mul: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  std::vector<T> out(a.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  return Tensor<T>::result(a.shape(), std::move(out), {a, b}, [](detail::Node<T>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (pa.requires_grad) pa.grad[i] += self.grad[i] * pb.data[i];
      if (pb.requires_grad) pb.grad[i] += self.grad[i] * pa.data[i];
    }
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T s) {
  std::vector<T> out(x.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] * s;
  return Tensor<T>::result(x.shape(), std::move(out), {x}, [s](detail::Node<T>& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i] * s;
  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T acc = T(0);
  for (T v : x.data()) acc += v;
  return Tensor<T>::result({1}, {acc}, {x}, [](detail::Node<T>& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    for (auto& g : p.grad) g += self.grad[0];
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  return scale(sum(x), T(1) / T(x.size()));
}

template <typename T>
Tensor<T> softplus(const Tensor<T>& x) {
  std::vector<T> out(x.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T v = x.data()[i];
    out[i] = std::max(v, T(0)) + std::log1p(std::exp(-std::abs(v)));
  }
  return Tensor<T>::result(x.shape(), std::move(out), {x}, [](detail::Node<T>& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const T sig = T(1) / (T(1) + std::exp(-p.data[i]));
      p.grad[i] += self.grad[i] * sig;
    }
  });
}

template <typename T>
Tensor<T> abs(const Tensor<T>& x) {
  std::vector<T> out(x.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::abs(x.data()[i]);
  return Tensor<T>::result(x.shape(), std::move(out), {x}, [](detail::Node<T>& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const T s = p.data[i] > T(0) ? T(1) : (p.data[i] < T(0) ? T(-1) : T(0));
      p.grad[i] += self.grad[i] * s;
    }
  });
}

/// Row-wise L2 normalization of an N,M matrix.
template <typename T>
Tensor<T> l2_normalize_rows(const Tensor<T>& x) {
  const auto& s = x.shape();
  if (s.size() != 2) fail("l2_normalize_rows: input must be N,M, got " + shape_str(s));
  const int n = s[0], m = s[1];
  std::vector<T> out(x.data().size());
  std::vector<T> norms(n);
  for (int i = 0; i < n; ++i) {
    const T* row = x.data().data() + std::size_t(i) * m;
    T sq = T(0);
    for (int j = 0; j < m; ++j) sq += row[j] * row[j];
    const T nrm = std::sqrt(sq);
    if (!(nrm > T(0))) fail("l2_normalize_rows: zero-norm row");
    norms[i] = nrm;
    for (int j = 0; j < m; ++j) out[std::size_t(i) * m + j] = row[j] / nrm;
  }
  return Tensor<T>::result(s, std::move(out), {x}, [n, m, norms = std::move(norms)](detail::Node<T>& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    for (int i = 0; i < n; ++i) {
      const T* y = self.data.data() + std::size_t(i) * m;
      const T* dy = self.grad.data() + std::size_t(i) * m;
      T* dx = p.grad.data() + std::size_t(i) * m;
      T ydy = T(0);
      for (int j = 0; j < m; ++j) ydy += y[j] * dy[j];
      for (int j = 0; j < m; ++j) dx[j] += (dy[j] - y[j] * ydy) / norms[i];
    }
  });
}

/// Per-row dot product of two N,M matrices -> N.
template <typename T>
Tensor<T> rowwise_dot(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape() || a.shape().size() != 2) {
    fail("rowwise_dot: need matching N,M shapes, got " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  const int n = a.shape()[0], m = a.shape()[1];
  std::vector<T> out(n, T(0));
  for (int i = 0; i < n; ++i) {
    const T* ra = a.data().data() + std::size_t(i) * m;
    const T* rb = b.data().data() + std::size_t(i) * m;
    T acc = T(0);
    for (int j = 0; j < m; ++j) acc += ra[j] * rb[j];
    out[i] = acc;
  }
  return Tensor<T>::result({n}, std::move(out), {a, b}, [n, m](detail::Node<T>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    for (int i = 0; i < n; ++i) {
      const T g = self.grad[i];
      for (int j = 0; j < m; ++j) {
        if (pa.requires_grad) pa.grad[std::size_t(i) * m + j] += g * pb.data[std::size_t(i) * m + j];
        if (pb.requires_grad) pb.grad[std::size_t(i) * m + j] += g * pa.data[std::size_t(i) * m + j];
      }
    }
  });
}

/// acos of a clamped cosine, in degrees. The clamp keeps the gradient finite
/// near +-1; outside the clamp band the gradient is zero.
template <typename T>
Tensor<T> angle_deg_from_cos(const Tensor<T>& c, T clamp_eps = T(1e-7)) {
  constexpr double kDegPerRad = 57.29577951308232;
  const T lo = T(-1) + clamp_eps, hi = T(1) - clamp_eps;
  std::vector<T> out(c.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T v = std::min(hi, std::max(lo, c.data()[i]));
    out[i] = std::acos(v) * T(kDegPerRad);
  }
  return Tensor<T>::result(c.shape(), std::move(out), {c}, [lo, hi](detail::Node<T>& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const T v = p.data[i];
      if (v <= lo || v >= hi) continue;
      p.grad[i] += self.grad[i] * T(-kDegPerRad) / std::sqrt(T(1) - v * v);
    }
  });
}

// ---- fire module ----

/// Squeeze/expand split behind a fire module of a given size. The declared
/// size is the output channel count; the split is calibrated so the full
/// model lands on its parameter budget.
struct FireSpec {
  int size = 0;
  int squeeze = 0;
  int expand1x1 = 0;
  int expand3x3 = 0;

  static FireSpec from_size(int size) {
    if (size < 8 || size % 8 != 0) fail("fire: size must be a positive multiple of 8, got " + std::to_string(size));
    FireSpec s;
    s.size = size;
    s.squeeze = size / 2;
    s.expand1x1 = 3 * size / 8;
    s.expand3x3 = 5 * size / 8;
    s.validate();
    return s;
  }

  void validate() const {
    if (squeeze < 1) fail("fire: squeeze channels must be >= 1");
    if (expand1x1 + expand3x3 != size) {
      fail("fire: expand1x1 + expand3x3 = " + std::to_string(expand1x1 + expand3x3) +
           " does not equal declared size " + std::to_string(size));
    }
  }
};

template <typename T>
struct FireParams {
  Tensor<T> squeeze_w, squeeze_b;
  Tensor<T> expand1_w, expand1_b;
  Tensor<T> expand3_w, expand3_b;
};

/// Fire module: 1x1 squeeze + ReLU, then parallel 1x1 and padded 3x3 expands
/// + ReLU, channel-concatenated. Preserves spatial extent.
template <typename T>
Tensor<T> fire(const Tensor<T>& x, const FireParams<T>& p) {
  auto squeezed = relu(conv2d(x, p.squeeze_w, p.squeeze_b, 1, Padding::valid));
  auto e1 = relu(conv2d(squeezed, p.expand1_w, p.expand1_b, 1, Padding::valid));
  auto e3 = relu(conv2d(squeezed, p.expand3_w, p.expand3_b, 1, Padding::same));
  return concat<T>({e1, e3}, 1);
}

}  // namespace cwcc
