/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

#include <array>
#include <vector>

#include "cwcc/common.hpp"

namespace cwcc {

/// Scene illuminant as an RGB direction; only the direction is meaningful.
struct Illuminant {
  double r = 0, g = 0, b = 0;

  double norm() const;
  Illuminant normalized() const;
  std::array<double, 3> rgb() const { return {r, g, b}; }

  /// All components strictly positive and finite.
  void validate(const char* what = "illuminant") const;
};

/// Angle in degrees between ground-truth and estimated illuminant directions.
double recovery_error(const Illuminant& gt, const Illuminant& est);

/// Angle in degrees between gt/est (element-wise quotient) and the grey axis.
double reproduction_error(const Illuminant& gt, const Illuminant& est);

/// The five-statistic report used in the evaluation tables, degrees.
struct ErrorSummary {
  double best25_mean = 0;
  double mean = 0;
  double median = 0;
  double trimean = 0;
  double worst25_mean = 0;
};

/// Sorts ascending; best/worst 25% take ceil(n/4) elements, the median uses
/// the midpoint convention and the trimean (Q1 + 2*Q2 + Q3)/4 with
/// linearly interpolated quartiles.
ErrorSummary summarize(const std::vector<double>& errors_deg);

/// Sample Pearson correlation; rejects degenerate (zero variance) inputs.
double pearson(const std::vector<double>& xs, const std::vector<double>& ys);

}  // namespace cwcc
