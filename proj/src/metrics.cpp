/* SPDX-License-Identifier: Apache-2.0 */
#include "cwcc/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace cwcc {

namespace {

constexpr double kDegPerRad = 57.29577951308232;

double angle_deg(double cosine) {
  return std::acos(std::clamp(cosine, -1.0, 1.0)) * kDegPerRad;
}

/// Linearly interpolated quantile of a sorted sample (index (n-1)*p).
double quantile_sorted(const std::vector<double>& sorted, double p) {
  const double pos = (double(sorted.size()) - 1.0) * p;
  const auto lo = std::size_t(pos);
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - double(lo);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

}  // namespace

double Illuminant::norm() const { return std::sqrt(r * r + g * g + b * b); }

Illuminant Illuminant::normalized() const {
  const double n = norm();
  if (!(n > 0)) fail("illuminant: cannot normalize a zero vector");
  return {r / n, g / n, b / n};
}

void Illuminant::validate(const char* what) const {
  for (double v : {r, g, b}) {
    if (!std::isfinite(v)) fail(std::string(what) + ": non-finite component");
    if (v <= 0) fail(std::string(what) + ": components must be strictly positive");
  }
}

namespace {

/// Metric-argument check: finite, non-negative, nonzero norm. Components may
/// sit on the zero boundary; only the zero vector is rejected.
void validate_direction(const Illuminant& e, const char* what) {
  for (double v : {e.r, e.g, e.b}) {
    if (!std::isfinite(v)) fail(std::string(what) + ": non-finite component");
    if (v < 0) fail(std::string(what) + ": negative component");
  }
  if (!(e.norm() > 0)) fail(std::string(what) + ": zero vector");
}

}  // namespace

double recovery_error(const Illuminant& gt, const Illuminant& est) {
  validate_direction(gt, "recovery_error: ground truth");
  validate_direction(est, "recovery_error: estimate");
  const double dot = gt.r * est.r + gt.g * est.g + gt.b * est.b;
  return angle_deg(dot / (gt.norm() * est.norm()));
}

double reproduction_error(const Illuminant& gt, const Illuminant& est) {
  validate_direction(gt, "reproduction_error: ground truth");
  if (!(est.r > 0) || !(est.g > 0) || !(est.b > 0)) {
    fail("reproduction_error: estimate components must be strictly positive");
  }
  const Illuminant ratio{gt.r / est.r, gt.g / est.g, gt.b / est.b};
  const double dot = (ratio.r + ratio.g + ratio.b) / std::sqrt(3.0);
  return angle_deg(dot / ratio.norm());
}

ErrorSummary summarize(const std::vector<double>& errors_deg) {
  if (errors_deg.empty()) fail("summarize: empty error list");
  for (double e : errors_deg) {
    if (!std::isfinite(e) || e < 0) fail("summarize: errors must be finite and >= 0");
  }
  std::vector<double> sorted = errors_deg;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const std::size_t quarter = (n + 3) / 4;  // ceil(n/4)

  ErrorSummary s;
  double acc = 0;
  for (std::size_t i = 0; i < quarter; ++i) acc += sorted[i];
  s.best25_mean = acc / double(quarter);
  acc = 0;
  for (std::size_t i = n - quarter; i < n; ++i) acc += sorted[i];
  s.worst25_mean = acc / double(quarter);
  acc = 0;
  for (double e : sorted) acc += e;
  s.mean = acc / double(n);
  s.median = (n % 2 == 1) ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  const double q1 = quantile_sorted(sorted, 0.25);
  const double q2 = quantile_sorted(sorted, 0.50);
  const double q3 = quantile_sorted(sorted, 0.75);
  s.trimean = (q1 + 2.0 * q2 + q3) / 4.0;
  return s;
}

double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) fail("pearson: length mismatch");
  if (xs.size() < 2) fail("pearson: need at least two pairs");
  const double n = double(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx, dy = ys[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (!(sxx > 0) || !(syy > 0)) fail("pearson: zero variance input");
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace cwcc
