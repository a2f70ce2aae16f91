/* SPDX-License-Identifier: Apache-2.0 */
#include "cwcc/uncertainty.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "cwcc/optim.hpp"

namespace cwcc {

namespace {

TensorF he_uniform(Shape shape, std::int64_t fan_in, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / double(fan_in));
  std::vector<float> data(std::size_t(numel(shape)));
  for (auto& v : data) v = float(uniform_in(rng, -bound, bound));
  return TensorF::from_data(std::move(shape), std::move(data), true);
}

}  // namespace

UncertaintyBranch::UncertaintyBranch(int input_units, std::uint64_t seed) : input_units_(input_units) {
  if (input_units < 1) fail("uncertainty: input units must be >= 1");
  std::mt19937_64 rng(mix64(seed ^ 0x55513432ull));
  w1 = he_uniform({input_units, 40}, input_units, rng);
  b1 = TensorF::zeros({40}, true);
  w2 = he_uniform({40, 15}, 40, rng);
  b2 = TensorF::zeros({15}, true);
  w3 = he_uniform({15, 1}, 15, rng);
  b3 = TensorF::zeros({1}, true);
}

UncertaintyBranch UncertaintyBranch::from_named_tensors(
    int input_units, const std::vector<std::pair<std::string, TensorF>>& tensors) {
  UncertaintyBranch branch(input_units, 0);
  auto expected = branch.named_parameters();
  if (tensors.size() != expected.size()) {
    fail("checkpoint: expected " + std::to_string(expected.size()) + " branch tensors, got " +
         std::to_string(tensors.size()));
  }
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const auto& [name, tensor] = tensors[i];
    auto& [want_name, param] = expected[i];
    if (name != want_name) fail("checkpoint: tensor '" + name + "' where '" + want_name + "' was expected");
    if (tensor.shape() != param.shape()) {
      fail("checkpoint: tensor '" + name + "' has shape " + shape_str(tensor.shape()) + ", expected " +
           shape_str(param.shape()));
    }
    std::copy(tensor.data().begin(), tensor.data().end(), param.mutable_data().begin());
  }
  return branch;
}

TensorF UncertaintyBranch::forward(const TensorF& hidden) const {
  if (hidden.shape().size() != 2 || hidden.shape()[1] != input_units_) {
    fail("uncertainty: hidden representation " + shape_str(hidden.shape()) + " does not match " +
         std::to_string(input_units_) + " input units");
  }
  auto x = relu(dense(hidden, w1, b1));
  x = relu(dense(x, w2, b2));
  return abs(dense(x, w3, b3));
}

std::vector<std::pair<std::string, TensorF>> UncertaintyBranch::named_parameters() const {
  return {{"uq/fc1/w", w1}, {"uq/fc1/b", b1}, {"uq/fc2/w", w2},
          {"uq/fc2/b", b2}, {"uq/fc3/w", w3}, {"uq/fc3/b", b3}};
}

std::vector<TensorF> UncertaintyBranch::parameters() const {
  std::vector<TensorF> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

ErrorDataset build_error_dataset(const CwccModel& frozen_model, const std::vector<LabeledImage>& images,
                                 int batch_size) {
  if (images.empty()) fail("uncertainty: empty image set");
  ErrorDataset ds;
  ds.feature_dim = frozen_model.config().hidden_units;
  ds.features.reserve(images.size() * std::size_t(ds.feature_dim));
  ds.errors_deg.reserve(images.size());
  for (std::size_t lo = 0; lo < images.size(); lo += std::size_t(batch_size)) {
    const std::size_t hi = std::min(images.size(), lo + std::size_t(batch_size));
    std::vector<const LinearImage*> batch;
    for (std::size_t i = lo; i < hi; ++i) batch.push_back(&images[i].image);
    const auto acts = frozen_model.forward_batch(batch, false, nullptr);
    const auto h = acts.hidden.data();
    const auto e = acts.estimate.data();
    for (std::size_t i = 0; i < hi - lo; ++i) {
      for (int j = 0; j < ds.feature_dim; ++j) ds.features.push_back(h[i * std::size_t(ds.feature_dim) + std::size_t(j)]);
      const Illuminant est{double(e[i * 3]), double(e[i * 3 + 1]), double(e[i * 3 + 2])};
      ds.errors_deg.push_back(recovery_error(images[lo + i].gt, est));
    }
  }
  return ds;
}

void train_branch(UncertaintyBranch& branch, const ErrorDataset& dataset, const BranchHyper& hyper,
                  std::uint64_t seed) {
  if (dataset.size() == 0) fail("uncertainty: empty training dataset");
  if (hyper.epochs < 0) fail("uncertainty: negative epoch count");
  if (hyper.batch_size < 1) fail("uncertainty: batch size must be >= 1");
  const int dim = dataset.feature_dim;
  if (dim != branch.input_units()) {
    fail("uncertainty: dataset feature dim " + std::to_string(dim) + " does not match branch input " +
         std::to_string(branch.input_units()));
  }

  Adam<float> opt(branch.parameters(), AdamHyper{hyper.lr, 0.9, 0.999, 1e-8});
  std::mt19937_64 rng(mix64(seed ^ 0x55515452ull));
  std::vector<std::size_t> idx(dataset.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;

  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng() % i]);
    for (std::size_t lo = 0; lo < idx.size(); lo += std::size_t(hyper.batch_size)) {
      const std::size_t hi = std::min(idx.size(), lo + std::size_t(hyper.batch_size));
      const int n = int(hi - lo);
      std::vector<float> feats(std::size_t(n) * std::size_t(dim));
      std::vector<float> targets(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) {
        const std::size_t s = idx[lo + std::size_t(i)];
        for (int j = 0; j < dim; ++j) {
          feats[std::size_t(i) * std::size_t(dim) + std::size_t(j)] =
              dataset.features[s * std::size_t(dim) + std::size_t(j)];
        }
        targets[std::size_t(i)] = float(dataset.errors_deg[s]);
      }
      const auto x = TensorF::from_data({n, dim}, std::move(feats));
      const auto t = TensorF::from_data({n, 1}, std::move(targets));
      const auto diff = sub(branch.forward(x), t);
      const auto loss = mean(mul(diff, diff));
      if (!std::isfinite(loss.item())) {
        fail("uncertainty: non-finite loss at epoch " + std::to_string(epoch));
      }
      opt.zero_grad();
      loss.backward();
      opt.step();
    }
  }
}

Prediction predict_with_uncertainty(const CwccModel& model, const UncertaintyBranch& branch,
                                    const LinearImage& image) {
  const auto acts = model.forward_batch({&image}, false, nullptr);
  const auto e = acts.estimate.data();
  const auto pred = branch.forward(acts.hidden);
  return Prediction{Illuminant{double(e[0]), double(e[1]), double(e[2])}, double(pred.data()[0])};
}

ThresholdReport threshold_filter(const std::vector<std::pair<double, double>>& predicted_true, double tau) {
  if (std::isnan(tau) || tau < 0) fail("threshold_filter: tau must be >= 0 degrees");
  ThresholdReport report;
  report.worst_accepted_true_deg = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < predicted_true.size(); ++i) {
    const auto& [pred, truth] = predicted_true[i];
    if (pred <= tau) {
      ++report.accepted;
      report.accepted_indices.push_back(i);
      if (std::isnan(report.worst_accepted_true_deg) || truth > report.worst_accepted_true_deg) {
        report.worst_accepted_true_deg = truth;
      }
    } else {
      ++report.rejected;
    }
  }
  return report;
}

}  // namespace cwcc
