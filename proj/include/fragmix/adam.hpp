// Copyright 2026 The fragmix authors.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "fragmix/tensor.hpp"

namespace fragmix {

/// One Adam update with bias correction over a flat parameter buffer.
/// `t` is the 1-based step count after this update.
template <typename T>
void adam_step(std::span<T> param, std::span<const T> grad, std::span<T> m,
               std::span<T> v, std::int64_t t, T lr, T beta1, T beta2, T eps) {
  if (lr <= T(0)) throw ConfigError("adam: lr must be positive");
  if (param.size() != grad.size() || param.size() != m.size() ||
      param.size() != v.size())
    throw DimensionError("adam: state size mismatch");
  const T bc1 = T(1) - std::pow(beta1, static_cast<T>(t));
  const T bc2 = T(1) - std::pow(beta2, static_cast<T>(t));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const T g = grad[i];
    m[i] = beta1 * m[i] + (T(1) - beta1) * g;
    v[i] = beta2 * v[i] + (T(1) - beta2) * g * g;
    const T mhat = m[i] / bc1;
    const T vhat = v[i] / bc2;
    param[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

/// Keeps first/second moment buffers aligned with a parameter list.
template <typename T>
class Adam {
 public:
  Adam(std::vector<Tensor<T>> params, T lr, T beta1 = T(0.9),
       T beta2 = T(0.999), T eps = T(1e-8))
      : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2),
        eps_(eps) {
    if (lr_ <= T(0)) throw ConfigError("adam: lr must be positive");
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (auto& p : params_) {
      m_.push_back(std::vector<T>(p.numel(), T(0)));
      v_.push_back(std::vector<T>(p.numel(), T(0)));
    }
  }

  void set_lr(T lr) {
    if (lr <= T(0)) throw ConfigError("adam: lr must be positive");
    lr_ = lr;
  }
  T lr() const { return lr_; }

  std::int64_t step_count() const { return t_; }
  void set_step_count(std::int64_t t) { t_ = t; }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

  /// Applies one update using each parameter's accumulated gradient.
  /// Parameters whose gradient was never touched this step are skipped.
  void step() {
    ++t_;
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& p = params_[i];
      if (!p.has_grad()) continue;
      adam_step<T>(p.data(), p.grad(), {m_[i].data(), m_[i].size()},
                   {v_[i].data(), v_[i].size()}, t_, lr_, beta1_, beta2_, eps_);
    }
  }

  std::span<T> moment1(std::size_t i) { return {m_[i].data(), m_[i].size()}; }
  std::span<T> moment2(std::size_t i) { return {v_[i].data(), v_[i].size()}; }
  std::size_t size() const { return params_.size(); }

 private:
  std::vector<Tensor<T>> params_;
  std::vector<std::vector<T>> m_, v_;
  std::int64_t t_ = 0;
  T lr_, beta1_, beta2_, eps_;
};

}  // namespace fragmix
