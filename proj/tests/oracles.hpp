/* SPDX-License-Identifier: Apache-2.0 */
// Test-side reference implementations, kept deliberately independent of the
// library's compute paths: plain nested loops, no im2col, no shared helpers.
#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "cwcc/tensor.hpp"

namespace oracles {

struct NaiveConv {
  std::vector<double> data;
  int oh = 0, ow = 0;
};

/// Seven-loop cross-correlation with explicit zero padding.
inline NaiveConv naive_conv2d(const std::vector<double>& x, int n, int c, int h, int w,
                              const std::vector<double>& wt, int k, int kh, int kw,
                              const std::vector<double>& bias, int stride, int pt, int pl, int pb, int pr) {
  NaiveConv out;
  out.oh = (h + pt + pb - kh) / stride + 1;
  out.ow = (w + pl + pr - kw) / stride + 1;
  out.data.assign(std::size_t(n) * k * out.oh * out.ow, 0.0);
  for (int nn = 0; nn < n; ++nn)
    for (int kk = 0; kk < k; ++kk)
      for (int oy = 0; oy < out.oh; ++oy)
        for (int ox = 0; ox < out.ow; ++ox) {
          double acc = bias[std::size_t(kk)];
          for (int cc = 0; cc < c; ++cc)
            for (int i = 0; i < kh; ++i)
              for (int j = 0; j < kw; ++j) {
                const int iy = oy * stride + i - pt;
                const int ix = ox * stride + j - pl;
                if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                acc += x[((std::size_t(nn) * c + cc) * h + iy) * w + ix] *
                       wt[((std::size_t(kk) * c + cc) * kh + i) * kw + j];
              }
          out.data[((std::size_t(nn) * k + kk) * out.oh + oy) * out.ow + ox] = acc;
        }
  return out;
}

struct NaivePool {
  std::vector<double> data;
  int oh = 0, ow = 0;
};

inline NaivePool naive_maxpool2d(const std::vector<double>& x, int n, int c, int h, int w, int window,
                                 int stride) {
  NaivePool out;
  out.oh = (h - window) / stride + 1;
  out.ow = (w - window) / stride + 1;
  out.data.assign(std::size_t(n) * c * out.oh * out.ow, 0.0);
  for (int nn = 0; nn < n; ++nn)
    for (int cc = 0; cc < c; ++cc)
      for (int oy = 0; oy < out.oh; ++oy)
        for (int ox = 0; ox < out.ow; ++ox) {
          double best = -1e300;
          for (int i = 0; i < window; ++i)
            for (int j = 0; j < window; ++j) {
              best = std::max(best, x[((std::size_t(nn) * c + cc) * h + oy * stride + i) * w + ox * stride + j]);
            }
          out.data[((std::size_t(nn) * c + cc) * out.oh + oy) * out.ow + ox] = best;
        }
  return out;
}

/// Order statistics without any library sort: repeated minimum extraction.
inline std::vector<double> extract_ascending(std::vector<double> v) {
  std::vector<double> out;
  out.reserve(v.size());
  while (!v.empty()) {
    std::size_t mi = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
      if (v[i] < v[mi]) mi = i;
    }
    out.push_back(v[mi]);
    v.erase(v.begin() + long(mi));
  }
  return out;
}

struct BruteSummary {
  double best25, mean, median, trimean, worst25;
};

inline BruteSummary brute_summarize(const std::vector<double>& errors) {
  const auto asc = extract_ascending(errors);
  const std::size_t n = asc.size();
  const std::size_t quarter = (n % 4 == 0) ? n / 4 : n / 4 + 1;
  auto mean_range = [&](std::size_t lo, std::size_t hi) {
    double acc = 0;
    for (std::size_t i = lo; i < hi; ++i) acc += asc[i];
    return acc / double(hi - lo);
  };
  auto quantile = [&](double p) {
    const double pos = p * double(n - 1);
    const std::size_t lo = std::size_t(pos);
    const double frac = pos - double(lo);
    const std::size_t hi = lo + 1 < n ? lo + 1 : lo;
    return asc[lo] * (1.0 - frac) + asc[hi] * frac;
  };
  BruteSummary s{};
  s.best25 = mean_range(0, quarter);
  s.worst25 = mean_range(n - quarter, n);
  s.mean = mean_range(0, n);
  s.median = (n % 2 == 1) ? asc[n / 2] : (asc[n / 2 - 1] + asc[n / 2]) / 2.0;
  s.trimean = (quantile(0.25) + 2.0 * quantile(0.5) + quantile(0.75)) / 4.0;
  return s;
}

/// Central-difference gradient audit. `scalar_fn` must rebuild the graph from
/// the current contents of `target` on every call.
struct GradCheck {
  double max_rel_err = 0;
  bool ok = true;
};

inline GradCheck check_gradient(const std::function<cwcc::TensorD()>& scalar_fn, cwcc::TensorD target,
                                double step = 1e-3, double tol = 1e-4) {
  auto loss = scalar_fn();
  loss.backward();
  const std::vector<double> analytic(target.grad().begin(), target.grad().end());
  auto data = target.mutable_data();
  GradCheck result;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double orig = data[i];
    data[i] = orig + step;
    const double fp = scalar_fn().item();
    data[i] = orig - step;
    const double fm = scalar_fn().item();
    data[i] = orig;
    const double numeric = (fp - fm) / (2.0 * step);
    const double scale = std::max({1e-3, std::abs(analytic[i]), std::abs(numeric)});
    const double rel = std::abs(analytic[i] - numeric) / scale;
    result.max_rel_err = std::max(result.max_rel_err, rel);
    if (rel > tol) result.ok = false;
  }
  return result;
}

}  // namespace oracles
