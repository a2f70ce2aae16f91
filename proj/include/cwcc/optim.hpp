/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

#include <cmath>

#include "cwcc/tensor.hpp"

namespace cwcc {

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct AdamState {
  std::vector<T> m, v;
};

/// One bias-corrected Adam update over a flat parameter buffer.
template <typename T>
void adam_step(std::span<T> params, std::span<const T> grads, AdamState<T>& state, long step,
               const AdamHyper& h = {}) {
  if (params.size() != grads.size()) {
    fail("adam_step: parameter/gradient length mismatch: " + std::to_string(params.size()) + " vs " +
         std::to_string(grads.size()));
  }
  if (state.m.empty()) state.m.assign(params.size(), T(0));
  if (state.v.empty()) state.v.assign(params.size(), T(0));
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    fail("adam_step: state length mismatch");
  }
  const T b1 = T(h.beta1), b2 = T(h.beta2);
  const T corr1 = T(1) - T(std::pow(h.beta1, double(step)));
  const T corr2 = T(1) - T(std::pow(h.beta2, double(step)));
  const T lr = T(h.lr), eps = T(h.eps);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const T g = grads[i];
    state.m[i] = b1 * state.m[i] + (T(1) - b1) * g;
    state.v[i] = b2 * state.v[i] + (T(1) - b2) * g * g;
    const T mhat = state.m[i] / corr1;
    const T vhat = state.v[i] / corr2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

/// Adam over a fixed set of leaf tensors, reading each tensor's accumulated
/// gradient. Single-writer: training steps are not thread safe.
template <typename T>
class Adam {
 public:
  explicit Adam(std::vector<Tensor<T>> params, AdamHyper hyper = {})
      : params_(std::move(params)), state_(params_.size()), hyper_(hyper) {}

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

  void step() {
    ++t_;
    for (std::size_t i = 0; i < params_.size(); ++i) {
      adam_step<T>(params_[i].mutable_data(), params_[i].grad(), state_[i], t_, hyper_);
    }
  }

  long steps() const { return t_; }
  const AdamHyper& hyper() const { return hyper_; }
  void set_lr(double lr) { hyper_.lr = lr; }

 private:
  std::vector<Tensor<T>> params_;
  std::vector<AdamState<T>> state_;
  AdamHyper hyper_;
  long t_ = 0;
};

}  // namespace cwcc
