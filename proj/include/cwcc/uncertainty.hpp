/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

#include "cwcc/model.hpp"

namespace cwcc {

/// Auxiliary head predicting the recovery error of the main estimate from
/// the merging block's hidden representation. Two ReLU layers of sizes 40
/// and 15 plus a 1-unit output; predictions pass a non-negativity guard.
class UncertaintyBranch {
 public:
  UncertaintyBranch(int input_units, std::uint64_t seed);

  static UncertaintyBranch from_named_tensors(int input_units,
                                              const std::vector<std::pair<std::string, TensorF>>& tensors);

  int input_units() const { return input_units_; }

  /// hidden [N,input_units] -> predicted error in degrees [N,1], all >= 0.
  TensorF forward(const TensorF& hidden) const;

  /// Names carry the checkpoint's "uq/" prefix.
  std::vector<std::pair<std::string, TensorF>> named_parameters() const;
  std::vector<TensorF> parameters() const;

 private:
  int input_units_ = 0;
  TensorF w1, b1, w2, b2, w3, b3;
};

/// (hidden representation, true recovery error in degrees) pairs computed
/// from a frozen backbone; one row per image.
struct ErrorDataset {
  int feature_dim = 0;
  std::vector<float> features;  // row-major, size() * feature_dim
  std::vector<double> errors_deg;

  std::size_t size() const { return errors_deg.size(); }
};

ErrorDataset build_error_dataset(const CwccModel& frozen_model, const std::vector<LabeledImage>& images,
                                 int batch_size = 16);

struct BranchHyper {
  int epochs = 300;
  int batch_size = 32;
  double lr = 1e-2;
};

/// Minimizes MSE between predicted and true errors. Only branch parameters
/// are updated; the backbone is never touched (the dataset is precomputed).
void train_branch(UncertaintyBranch& branch, const ErrorDataset& dataset, const BranchHyper& hyper,
                  std::uint64_t seed);

struct Prediction {
  Illuminant estimate;
  double predicted_error_deg = 0;
};

/// Both heads from one forward pass of the backbone.
Prediction predict_with_uncertainty(const CwccModel& model, const UncertaintyBranch& branch,
                                    const LinearImage& image);

struct ThresholdReport {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  double worst_accepted_true_deg = 0;  // NaN when nothing is accepted
  std::vector<std::size_t> accepted_indices;
};

/// Keeps pairs whose predicted error is <= tau degrees.
ThresholdReport threshold_filter(const std::vector<std::pair<double, double>>& predicted_true, double tau);

}  // namespace cwcc
