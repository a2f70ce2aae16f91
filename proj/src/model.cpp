/* SPDX-License-Identifier: Apache-2.0 */
#include "cwcc/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
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

TensorF zeros_param(Shape shape) { return TensorF::zeros(std::move(shape), true); }

DisjointParams init_disjoint(const CwccConfig& cfg, std::mt19937_64& rng) {
  DisjointParams d;
  d.conv_w = he_uniform({64, 1, 3, 3}, 9, rng);
  d.conv_b = zeros_param({64});
  int in_ch = 64;
  for (int i = 0; i < 4; ++i) {
    const auto spec = FireSpec::from_size(cfg.fire_sizes[std::size_t(i)]);
    auto& f = d.fires[std::size_t(i)];
    f.squeeze_w = he_uniform({spec.squeeze, in_ch, 1, 1}, in_ch, rng);
    f.squeeze_b = zeros_param({spec.squeeze});
    f.expand1_w = he_uniform({spec.expand1x1, spec.squeeze, 1, 1}, spec.squeeze, rng);
    f.expand1_b = zeros_param({spec.expand1x1});
    f.expand3_w = he_uniform({spec.expand3x3, spec.squeeze, 3, 3}, std::int64_t(spec.squeeze) * 9, rng);
    f.expand3_b = zeros_param({spec.expand3x3});
    in_ch = spec.size;
  }
  return d;
}

DisjointParams clone_disjoint(const DisjointParams& src) {
  DisjointParams d;
  d.conv_w = src.conv_w.detach(true);
  d.conv_b = src.conv_b.detach(true);
  for (int i = 0; i < 4; ++i) {
    auto& f = d.fires[std::size_t(i)];
    const auto& g = src.fires[std::size_t(i)];
    f.squeeze_w = g.squeeze_w.detach(true);
    f.squeeze_b = g.squeeze_b.detach(true);
    f.expand1_w = g.expand1_w.detach(true);
    f.expand1_b = g.expand1_b.detach(true);
    f.expand3_w = g.expand3_w.detach(true);
    f.expand3_b = g.expand3_b.detach(true);
  }
  return d;
}

std::array<TensorF, 3> make_planes(const std::vector<const LinearImage*>& images, int size) {
  if (images.empty()) fail("forward: empty batch");
  const int n = int(images.size());
  const std::size_t hw = std::size_t(size) * size;
  std::array<std::vector<float>, 3> data;
  for (auto& d : data) d.resize(std::size_t(n) * hw);
  for (int i = 0; i < n; ++i) {
    const LinearImage& img = *images[std::size_t(i)];
    if (img.height != size || img.width != size) {
      fail("forward: image is " + std::to_string(img.height) + "x" + std::to_string(img.width) +
           " but the model expects " + std::to_string(size) + "x" + std::to_string(size) +
           "; resize before calling");
    }
    for (std::size_t p = 0; p < hw; ++p) {
      for (int c = 0; c < 3; ++c) {
        const float v = img.pixels[p * 3 + std::size_t(c)];
        if (!std::isfinite(v)) fail("forward: non-finite pixel value");
        if (v < 0.0f || v > 1.0f + 1e-5f) fail("forward: pixel value outside [0,1]");
        data[std::size_t(c)][std::size_t(i) * hw + p] = v;
      }
    }
  }
  std::array<TensorF, 3> planes;
  for (int c = 0; c < 3; ++c) {
    planes[std::size_t(c)] = TensorF::from_data({n, 1, size, size}, std::move(data[std::size_t(c)]));
  }
  return planes;
}

void append_disjoint_names(const std::string& prefix, const DisjointParams& d,
                           std::vector<std::pair<std::string, TensorF>>& out) {
  out.emplace_back(prefix + "/conv/w", d.conv_w);
  out.emplace_back(prefix + "/conv/b", d.conv_b);
  for (int i = 0; i < 4; ++i) {
    const std::string fp = prefix + "/fire" + std::to_string(i);
    const auto& f = d.fires[std::size_t(i)];
    out.emplace_back(fp + "/squeeze/w", f.squeeze_w);
    out.emplace_back(fp + "/squeeze/b", f.squeeze_b);
    out.emplace_back(fp + "/expand1x1/w", f.expand1_w);
    out.emplace_back(fp + "/expand1x1/b", f.expand1_b);
    out.emplace_back(fp + "/expand3x3/w", f.expand3_w);
    out.emplace_back(fp + "/expand3x3/b", f.expand3_b);
  }
}

}  // namespace

std::string to_string(Variant v) { return v == Variant::shared ? "shared" : "per_channel"; }

Variant variant_from_string(const std::string& s) {
  if (s == "shared") return Variant::shared;
  if (s == "per_channel") return Variant::per_channel;
  fail("unknown variant '" + s + "' (expected shared or per_channel)");
}

void CwccConfig::validate() const {
  if (input_size < 32 || input_size % 8 != 0) {
    fail("config: input_size must be >= 32 and a multiple of 8, got " + std::to_string(input_size));
  }
  if (!(dropout_rate >= 0.0f) || dropout_rate >= 1.0f) fail("config: dropout_rate must be in [0,1)");
  if (hidden_units < 1) fail("config: hidden_units must be >= 1");
  for (int s : fire_sizes) FireSpec::from_size(s);
  if (fire_sizes[0] != fire_sizes[1] || fire_sizes[2] != fire_sizes[3]) {
    fail("config: fire sizes must pair up per stage");
  }
}

CwccModel::CwccModel(CwccConfig config, std::uint64_t seed) {
  config.validate();
  config_ = config;
  std::mt19937_64 rng(mix64(seed ^ 0x43574343ull));
  // The per-channel variant starts from three identical copies of the same
  // draw, so both variants are directly comparable under one seed.
  disjoint_.push_back(init_disjoint(config_, rng));
  if (config_.variant == Variant::per_channel) {
    disjoint_.push_back(clone_disjoint(disjoint_[0]));
    disjoint_.push_back(clone_disjoint(disjoint_[0]));
  }
  const int merged = 3 * config_.fire_sizes[3];
  fc1_w = he_uniform({merged, config_.hidden_units}, merged, rng);
  fc1_b = zeros_param({config_.hidden_units});
  fc2_w = he_uniform({config_.hidden_units, 3}, config_.hidden_units, rng);
  fc2_b = zeros_param({3});
}

CwccModel CwccModel::from_named_tensors(const CwccConfig& config,
                                        const std::vector<std::pair<std::string, TensorF>>& tensors) {
  CwccModel model(config, 0);
  auto expected = model.named_parameters();
  if (tensors.size() != expected.size()) {
    fail("checkpoint: expected " + std::to_string(expected.size()) + " model tensors, got " +
         std::to_string(tensors.size()));
  }
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const auto& [name, tensor] = tensors[i];
    auto& [want_name, param] = expected[i];
    if (name != want_name) fail("checkpoint: tensor '" + name + "' where '" + want_name + "' was expected");
    if (tensor.shape() != param.shape()) {
      fail("checkpoint: tensor '" + name + "' has shape " + shape_str(tensor.shape()) +
           " but the declared config needs " + shape_str(param.shape()));
    }
    std::copy(tensor.data().begin(), tensor.data().end(), param.mutable_data().begin());
  }
  return model;
}

const DisjointParams& CwccModel::disjoint_for_channel(int channel) const {
  if (channel < 0 || channel > 2) fail("model: channel index out of range");
  return config_.variant == Variant::shared ? disjoint_[0] : disjoint_[std::size_t(channel)];
}

TensorF CwccModel::apply_disjoint(const TensorF& plane, int channel) const {
  const auto& d = disjoint_for_channel(channel);
  ++counters_->disjoint;
  auto x = relu(conv2d(plane, d.conv_w, d.conv_b, 1, Padding::same));
  x = maxpool2d(x, 3, 2);
  x = fire(x, d.fires[0]);
  x = fire(x, d.fires[1]);
  x = maxpool2d(x, 3, 2);
  x = fire(x, d.fires[2]);
  x = fire(x, d.fires[3]);
  return maxpool2d(x, 3, 2);
}

CwccModel::Activations CwccModel::forward_batch(const std::vector<const LinearImage*>& images, bool training,
                                                std::mt19937_64* dropout_rng) const {
  if (training && dropout_rng == nullptr) fail("forward: training mode needs a dropout RNG");
  auto planes = make_planes(images, config_.input_size);
  Activations acts;
  for (int c = 0; c < 3; ++c) acts.features[std::size_t(c)] = apply_disjoint(planes[std::size_t(c)], c);
  ++counters_->merge;
  auto merged = concat<float>({acts.features[0], acts.features[1], acts.features[2]}, 1);
  auto pooled = gap(merged);
  acts.hidden = relu(dense(pooled, fc1_w, fc1_b));
  auto h = training ? dropout(acts.hidden, config_.dropout_rate, true, *dropout_rng) : acts.hidden;
  auto raw = dense(h, fc2_w, fc2_b);
  acts.estimate = l2_normalize_rows(softplus(raw));
  return acts;
}

Illuminant CwccModel::forward(const LinearImage& image) const {
  const auto acts = forward_batch({&image}, false, nullptr);
  const auto e = acts.estimate.data();
  return Illuminant{double(e[0]), double(e[1]), double(e[2])};
}

std::vector<std::pair<std::string, TensorF>> CwccModel::named_parameters() const {
  std::vector<std::pair<std::string, TensorF>> out;
  if (config_.variant == Variant::shared) {
    append_disjoint_names("disjoint", disjoint_[0], out);
  } else {
    static const char* kChannel[3] = {"disjoint_r", "disjoint_g", "disjoint_b"};
    for (int c = 0; c < 3; ++c) append_disjoint_names(kChannel[c], disjoint_[std::size_t(c)], out);
  }
  out.emplace_back("merge/fc1/w", fc1_w);
  out.emplace_back("merge/fc1/b", fc1_b);
  out.emplace_back("merge/fc2/w", fc2_w);
  out.emplace_back("merge/fc2/b", fc2_b);
  return out;
}

std::vector<TensorF> CwccModel::parameters() const {
  std::vector<TensorF> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

std::int64_t CwccModel::count_parameters() const {
  std::int64_t n = 0;
  for (const auto& t : parameters()) n += t.size();
  return n;
}

std::int64_t CwccModel::disjoint_parameter_count() const {
  std::int64_t n = 0;
  for (const auto& [name, t] : named_parameters()) {
    if (name.rfind("disjoint", 0) == 0) n += t.size();
  }
  return n;
}

std::uint64_t CwccModel::parameter_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& t : parameters()) {
    h = fnv1a(t.data().data(), t.data().size() * sizeof(float), h);
  }
  return h;
}

namespace {

std::vector<std::vector<float>> snapshot(const std::vector<TensorF>& params) {
  std::vector<std::vector<float>> out;
  out.reserve(params.size());
  for (const auto& p : params) out.emplace_back(p.data().begin(), p.data().end());
  return out;
}

void restore(std::vector<TensorF>& params, const std::vector<std::vector<float>>& snap) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    std::copy(snap[i].begin(), snap[i].end(), params[i].mutable_data().begin());
  }
}

void fisher_yates(std::vector<std::size_t>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = std::size_t(rng() % i);
    std::swap(v[i - 1], v[j]);
  }
}

TensorF gt_tensor(const std::vector<LabeledImage>& set, const std::vector<std::size_t>& idx, std::size_t lo,
                  std::size_t hi) {
  std::vector<float> data;
  data.reserve((hi - lo) * 3);
  for (std::size_t i = lo; i < hi; ++i) {
    const Illuminant e = set[idx[i]].gt.normalized();
    data.push_back(float(e.r));
    data.push_back(float(e.g));
    data.push_back(float(e.b));
  }
  return TensorF::from_data({int(hi - lo), 3}, std::move(data));
}

}  // namespace

TrainResult train(CwccModel& model, const std::vector<LabeledImage>& train_set,
                  const std::vector<LabeledImage>& val_set, const TrainHyper& hyper, std::uint64_t seed) {
  if (train_set.empty()) fail("train: empty training set");
  if (val_set.empty()) fail("train: empty validation set");
  if (hyper.epochs < 1) fail("train: epochs must be >= 1");
  if (hyper.batch_size < 1) fail("train: batch size must be >= 1");
  if (!(hyper.lr_decay > 0) || hyper.lr_decay > 1.0) fail("train: lr decay must be in (0,1]");
  for (const auto& s : train_set) s.gt.validate("train: ground truth");

  auto params = model.parameters();
  Adam<float> opt(params, AdamHyper{hyper.lr, 0.9, 0.999, 1e-8});
  std::mt19937_64 shuffle_rng(mix64(seed ^ 0x53485546ull));
  std::mt19937_64 dropout_rng(mix64(seed ^ 0x44524f50ull));

  std::vector<std::size_t> idx(train_set.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;

  TrainResult result;
  double best_val = std::numeric_limits<double>::infinity();
  auto best = snapshot(params);
  int best_epoch = 0;

  for (int epoch = 1; epoch <= hyper.epochs; ++epoch) {
    if (hyper.lr_decay != 1.0) opt.set_lr(hyper.lr * std::pow(hyper.lr_decay, double(epoch - 1)));
    fisher_yates(idx, shuffle_rng);
    double err_sum = 0;
    for (std::size_t lo = 0; lo < idx.size(); lo += std::size_t(hyper.batch_size)) {
      const std::size_t hi = std::min(idx.size(), lo + std::size_t(hyper.batch_size));
      std::vector<const LinearImage*> batch;
      batch.reserve(hi - lo);
      for (std::size_t i = lo; i < hi; ++i) batch.push_back(&train_set[idx[i]].image);

      const auto acts = model.forward_batch(batch, true, &dropout_rng);
      const auto gts = gt_tensor(train_set, idx, lo, hi);
      const auto loss = mean(angle_deg_from_cos(rowwise_dot(acts.estimate, gts)));
      if (!std::isfinite(loss.item())) {
        fail("train: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
             std::to_string(lo / std::size_t(hyper.batch_size)));
      }
      opt.zero_grad();
      loss.backward();
      opt.step();
      err_sum += double(loss.item()) * double(hi - lo);
    }
    EpochLog log;
    log.epoch = epoch;
    log.train_err_deg = err_sum / double(train_set.size());
    log.val_err_deg = mean_recovery_error(model, val_set, hyper.batch_size);
    result.log.push_back(log);
    if (log.val_err_deg < best_val) {
      best_val = log.val_err_deg;
      best = snapshot(params);
      best_epoch = epoch;
    }
  }
  restore(params, best);
  result.best_epoch = best_epoch;
  result.best_val_err_deg = best_val;
  return result;
}

std::vector<Illuminant> predict_all(const CwccModel& model, const std::vector<LabeledImage>& set, int batch_size) {
  if (batch_size < 1) fail("predict_all: batch size must be >= 1");
  std::vector<Illuminant> out;
  out.reserve(set.size());
  for (std::size_t lo = 0; lo < set.size(); lo += std::size_t(batch_size)) {
    const std::size_t hi = std::min(set.size(), lo + std::size_t(batch_size));
    std::vector<const LinearImage*> batch;
    for (std::size_t i = lo; i < hi; ++i) batch.push_back(&set[i].image);
    const auto acts = model.forward_batch(batch, false, nullptr);
    const auto e = acts.estimate.data();
    for (std::size_t i = 0; i < hi - lo; ++i) {
      out.push_back(Illuminant{double(e[i * 3]), double(e[i * 3 + 1]), double(e[i * 3 + 2])});
    }
  }
  return out;
}

double mean_recovery_error(const CwccModel& model, const std::vector<LabeledImage>& set, int batch_size) {
  if (set.empty()) fail("mean_recovery_error: empty set");
  const auto estimates = predict_all(model, set, batch_size);
  double acc = 0;
  for (std::size_t i = 0; i < set.size(); ++i) acc += recovery_error(set[i].gt, estimates[i]);
  return acc / double(set.size());
}

LinearImage correct_image(const LinearImage& image, const Illuminant& e) {
  image.validate();
  e.validate("correct_image: illuminant");
  const Illuminant en = e.normalized();
  LinearImage out(image.height, image.width);
  const double gain[3] = {en.g / en.r, 1.0, en.g / en.b};  // green-anchored
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        out.at(y, x, c) = float(std::clamp(double(image.at(y, x, c)) * gain[c], 0.0, 1.0));
      }
    }
  }
  return out;
}

}  // namespace cwcc
