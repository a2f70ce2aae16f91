/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

#include "cwcc/image.hpp"
#include "cwcc/metrics.hpp"

namespace cwcc {

/// Pixels at the saturation level are excluded from max/Minkowski statistics
/// unless disabled.
struct SaturationPolicy {
  bool exclude = true;
  double level = 1.0;
};

/// Estimate proportional to the per-channel mean.
Illuminant grey_world(const LinearImage& image);

/// Estimate proportional to the per-channel maximum.
Illuminant white_patch(const LinearImage& image, const SaturationPolicy& sat = {});

/// Minkowski-p mean per channel; p=1 collapses to grey-world, large p
/// approaches white-patch.
Illuminant shades_of_grey(const LinearImage& image, double p = 6.0, const SaturationPolicy& sat = {});

/// Gaussian-smoothed derivative-magnitude Minkowski statistics. order 1 is
/// the gradient magnitude, order 2 the Laplacian magnitude.
Illuminant grey_edge(const LinearImage& image, int order = 1, double p = 6.0, double sigma = 2.0);

}  // namespace cwcc
