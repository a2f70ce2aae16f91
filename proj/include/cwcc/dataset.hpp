/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cwcc/image.hpp"
#include "cwcc/metrics.hpp"

namespace cwcc {

/// One dataset entry: an image path, its ground-truth illuminant and its
/// cross-validation fold.
struct Sample {
  std::string path;  // relative to the manifest
  Illuminant gt;
  int fold = 0;
};

/// An image paired with its ground truth, ready for training/evaluation.
struct LabeledImage {
  LinearImage image;
  Illuminant gt;
};

/// Scene generator settings. Scenes are piecewise-constant reflectance
/// mosaics lit by one global illuminant drawn from a chromaticity box.
struct SynthConfig {
  int size = 64;
  int patches_min = 30;
  int patches_max = 60;
  double patch_side_min = 0.08;  // fractions of the image side
  double patch_side_max = 0.35;
  double reflectance_min = 0.05;
  double reflectance_max = 0.80;
  // Per-channel tint multiplying chromatic reflectances; a non-neutral tint
  // makes the scene population violate the grey-world assumption.
  double tint_r = 1.0, tint_g = 1.0, tint_b = 1.0;
  // Scenes carry an achromatic patch with this probability; it anchors the
  // per-channel scale the way real white surfaces do, and scenes without
  // one are markedly harder.
  bool achromatic_patch = true;
  double achromatic_prob = 1.0;
  double achromatic_min = 0.85;
  double achromatic_max = 1.00;
  double achromatic_side_min = 0.15;
  double achromatic_side_max = 0.35;
  // Rescale channels so the mean reflectance is exactly grey.
  bool enforce_grey_mean = false;
  double illum_rg_min = 0.6, illum_rg_max = 1.4;  // r/g of the illuminant
  double illum_bg_min = 0.6, illum_bg_max = 1.4;  // b/g
  // Per-scene exposure gain drawn uniformly from this range; dim scenes
  // carry weaker cues and are harder.
  double exposure_min = 1.0;
  double exposure_max = 1.0;
  // Gaussian sensor noise; each scene draws its level uniformly from
  // [noise_std, noise_std_max] (equal bounds give a fixed level).
  double noise_std = 0.0;
  double noise_std_max = 0.0;
  bool clip = true;
  std::uint64_t seed = 0;

  void validate() const;
};

/// A generated scene with its exact ground truth and the latent reflectance.
struct SynthSample {
  LinearImage image;
  Illuminant gt;
  LinearImage reflectance;
};

/// Deterministic per (config.seed, index); samples are independent streams.
std::vector<SynthSample> synthesize(const SynthConfig& config, int n);

/// Manifest CSV with header `path,e_r,e_g,e_b,fold`, paths relative to the
/// manifest file. Loading validates every row and that referenced files exist.
std::vector<Sample> load_manifest(const std::filesystem::path& manifest_path);
void write_manifest(const std::vector<Sample>& samples, const std::filesystem::path& manifest_path);

std::filesystem::path sample_image_path(const std::filesystem::path& manifest_path, const Sample& sample);

struct FoldSplit {
  std::vector<std::size_t> train;  // indices into the sample list
  std::vector<std::size_t> test;
};

/// Fold k's test set is every sample with fold==k, train is the rest.
/// Every fold in [0,F) must be nonempty.
std::vector<FoldSplit> cross_validation_splits(const std::vector<Sample>& samples, int folds);

}  // namespace cwcc
