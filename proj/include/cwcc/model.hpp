/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

#include <array>
#include <atomic>
#include <memory>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cwcc/dataset.hpp"
#include "cwcc/image.hpp"
#include "cwcc/metrics.hpp"
#include "cwcc/ops.hpp"

namespace cwcc {

enum class Variant { shared, per_channel };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);

struct CwccConfig {
  int input_size = 128;
  Variant variant = Variant::shared;
  float dropout_rate = 0.10f;
  std::array<int, 4> fire_sizes{64, 64, 128, 128};
  int hidden_units = 40;

  /// input_size must survive three 3x3/stride-2 maxpools (>= 32, multiple of 8).
  void validate() const;
};

/// Parameters of the per-channel feature extractor: one 3x3 conv stage and
/// four fire modules, pooled 3x between stages.
struct DisjointParams {
  TensorF conv_w, conv_b;
  std::array<FireParams<float>, 4> fires;
};

/// The channel-wise model: a disjoint block applied to each color plane
/// (weights shared across channels, or tripled in the per-channel variant)
/// and a merging block mapping pooled concatenated features to the
/// illuminant estimate. Immutable during inference; training is
/// single-writer.
class CwccModel {
 public:
  CwccModel(CwccConfig config, std::uint64_t seed);

  /// Rebuild from checkpoint tensors; names and shapes must match the config.
  static CwccModel from_named_tensors(const CwccConfig& config,
                                      const std::vector<std::pair<std::string, TensorF>>& tensors);

  const CwccConfig& config() const { return config_; }

  /// Single-image inference; the image must already be at config.input_size.
  Illuminant forward(const LinearImage& image) const;

  struct Activations {
    TensorF estimate;                 // [N,3], strictly positive, unit rows
    TensorF hidden;                   // [N,hidden_units], post-ReLU pre-dropout
    std::array<TensorF, 3> features;  // pre-concat disjoint-block outputs
  };
  Activations forward_batch(const std::vector<const LinearImage*>& images, bool training,
                            std::mt19937_64* dropout_rng) const;

  /// The disjoint block applied standalone to one [N,1,S,S] plane.
  TensorF apply_disjoint(const TensorF& plane, int channel) const;

  std::int64_t count_parameters() const;
  std::int64_t disjoint_parameter_count() const;
  std::vector<std::pair<std::string, TensorF>> named_parameters() const;
  std::vector<TensorF> parameters() const;

  /// FNV-1a over all parameter bytes in declaration order.
  std::uint64_t parameter_hash() const;

  // Forward-pass instrumentation.
  std::uint64_t disjoint_evals() const { return counters_->disjoint.load(); }
  std::uint64_t merge_evals() const { return counters_->merge.load(); }

 private:
  CwccModel() = default;
  const DisjointParams& disjoint_for_channel(int channel) const;

  struct Counters {
    std::atomic<std::uint64_t> disjoint{0};
    std::atomic<std::uint64_t> merge{0};
  };

  CwccConfig config_;
  std::vector<DisjointParams> disjoint_;  // 1 entry when shared, 3 when per-channel
  TensorF fc1_w, fc1_b, fc2_w, fc2_b;
  std::shared_ptr<Counters> counters_ = std::make_shared<Counters>();
};

struct TrainHyper {
  int epochs = 30;
  int batch_size = 16;
  double lr = 1e-3;
  double lr_decay = 1.0;  // per-epoch multiplier
};

struct EpochLog {
  int epoch = 0;
  double train_err_deg = 0;
  double val_err_deg = 0;
};

struct TrainResult {
  std::vector<EpochLog> log;
  int best_epoch = 0;
  double best_val_err_deg = 0;
};

/// Minimizes the mean recovery angular error with Adam; returns the per-epoch
/// log and leaves the model at the best validation epoch.
TrainResult train(CwccModel& model, const std::vector<LabeledImage>& train_set,
                  const std::vector<LabeledImage>& val_set, const TrainHyper& hyper, std::uint64_t seed);

/// Batched inference over a whole set.
std::vector<Illuminant> predict_all(const CwccModel& model, const std::vector<LabeledImage>& set,
                                    int batch_size = 16);

double mean_recovery_error(const CwccModel& model, const std::vector<LabeledImage>& set, int batch_size = 16);

/// Undo the illuminant: divide by the (normalized) estimate, rescale so the
/// green channel is preserved, clip to [0,1].
LinearImage correct_image(const LinearImage& image, const Illuminant& e);

}  // namespace cwcc
