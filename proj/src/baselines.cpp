/* SPDX-License-Identifier: Apache-2.0 */
#include "cwcc/baselines.hpp"

#include <algorithm>
#include <cmath>

namespace cwcc {

namespace {

Illuminant normalized_or_fail(double r, double g, double b, const char* who) {
  const double n = std::sqrt(r * r + g * g + b * b);
  if (!(n > 0)) fail(std::string(who) + ": zero estimate vector (no usable image content)");
  return {r / n, g / n, b / n};
}

bool saturated(const LinearImage& img, int y, int x, const SaturationPolicy& sat) {
  if (!sat.exclude) return false;
  for (int c = 0; c < 3; ++c) {
    if (img.at(y, x, c) >= float(sat.level)) return true;
  }
  return false;
}

/// Minkowski-p mean with the channel peak factored out; stable for large p.
double minkowski_mean(const std::vector<double>& values, double peak, double p) {
  if (!(peak > 0)) return 0.0;
  double acc = 0;
  for (double v : values) acc += std::pow(v / peak, p);
  return peak * std::pow(acc / double(values.size()), 1.0 / p);
}

using Plane = std::vector<double>;

Plane channel_plane(const LinearImage& img, int c) {
  Plane out(std::size_t(img.height) * img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) out[std::size_t(y) * img.width + x] = img.at(y, x, c);
  return out;
}

double at_clamped(const Plane& p, int h, int w, int y, int x) {
  y = std::clamp(y, 0, h - 1);
  x = std::clamp(x, 0, w - 1);
  return p[std::size_t(y) * w + x];
}

Plane gaussian_smooth(const Plane& src, int h, int w, double sigma) {
  const int radius = int(std::ceil(3.0 * sigma));
  std::vector<double> kernel(std::size_t(2 * radius + 1));
  double norm = 0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[std::size_t(i + radius)] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    norm += kernel[std::size_t(i + radius)];
  }
  for (auto& k : kernel) k /= norm;

  Plane tmp(src.size()), out(src.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0;
      for (int i = -radius; i <= radius; ++i) acc += kernel[std::size_t(i + radius)] * at_clamped(src, h, w, y, x + i);
      tmp[std::size_t(y) * w + x] = acc;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0;
      for (int i = -radius; i <= radius; ++i) acc += kernel[std::size_t(i + radius)] * at_clamped(tmp, h, w, y + i, x);
      out[std::size_t(y) * w + x] = acc;
    }
  return out;
}

}  // namespace

Illuminant grey_world(const LinearImage& image) {
  image.validate();
  double sum[3] = {0, 0, 0};
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      for (int c = 0; c < 3; ++c) sum[c] += image.at(y, x, c);
  return normalized_or_fail(sum[0], sum[1], sum[2], "grey_world");
}

Illuminant white_patch(const LinearImage& image, const SaturationPolicy& sat) {
  image.validate();
  double mx[3] = {0, 0, 0};
  bool any = false;
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x) {
      if (saturated(image, y, x, sat)) continue;
      any = true;
      for (int c = 0; c < 3; ++c) mx[c] = std::max(mx[c], double(image.at(y, x, c)));
    }
  if (!any) fail("white_patch: every pixel is saturated");
  return normalized_or_fail(mx[0], mx[1], mx[2], "white_patch");
}

Illuminant shades_of_grey(const LinearImage& image, double p, const SaturationPolicy& sat) {
  image.validate();
  if (!(p >= 1.0)) fail("shades_of_grey: Minkowski order must be >= 1, got " + std::to_string(p));
  std::vector<double> vals[3];
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x) {
      if (saturated(image, y, x, sat)) continue;
      for (int c = 0; c < 3; ++c) vals[c].push_back(image.at(y, x, c));
    }
  if (vals[0].empty()) fail("shades_of_grey: every pixel is saturated");
  double est[3];
  for (int c = 0; c < 3; ++c) {
    const double peak = *std::max_element(vals[c].begin(), vals[c].end());
    est[c] = minkowski_mean(vals[c], peak, p);
  }
  return normalized_or_fail(est[0], est[1], est[2], "shades_of_grey");
}

Illuminant grey_edge(const LinearImage& image, int order, double p, double sigma) {
  image.validate();
  if (order != 1 && order != 2) fail("grey_edge: derivative order must be 1 or 2");
  if (!(p >= 1.0)) fail("grey_edge: Minkowski order must be >= 1");
  if (sigma < 0) fail("grey_edge: negative sigma");
  const int h = image.height, w = image.width;
  const int stencil = sigma > 0 ? 2 * int(std::ceil(3.0 * sigma)) + 1 : 3;
  if (h < stencil || w < stencil) {
    fail("grey_edge: image " + std::to_string(h) + "x" + std::to_string(w) + " smaller than the " +
         std::to_string(stencil) + "-tap stencil");
  }
  double est[3];
  for (int c = 0; c < 3; ++c) {
    Plane plane = channel_plane(image, c);
    if (sigma > 0) plane = gaussian_smooth(plane, h, w, sigma);
    std::vector<double> mag(plane.size());
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double m;
        if (order == 1) {
          const double dx = 0.5 * (at_clamped(plane, h, w, y, x + 1) - at_clamped(plane, h, w, y, x - 1));
          const double dy = 0.5 * (at_clamped(plane, h, w, y + 1, x) - at_clamped(plane, h, w, y - 1, x));
          m = std::sqrt(dx * dx + dy * dy);
        } else {
          const double lap = at_clamped(plane, h, w, y, x + 1) + at_clamped(plane, h, w, y, x - 1) +
                             at_clamped(plane, h, w, y + 1, x) + at_clamped(plane, h, w, y - 1, x) -
                             4.0 * at_clamped(plane, h, w, y, x);
          m = std::abs(lap);
        }
        mag[std::size_t(y) * w + x] = m;
      }
    }
    const double peak = *std::max_element(mag.begin(), mag.end());
    est[c] = minkowski_mean(mag, peak, p);
  }
  return normalized_or_fail(est[0], est[1], est[2], "grey_edge");
}

}  // namespace cwcc
