// Copyright 2026 The fragmix authors.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "fragmix/tensor.hpp"

namespace fragmix {

/// Mean over the batch of -log softmax(logits)[label]. Computed with the
/// log-sum-exp trick; the backward rule is the closed form (p - onehot)/N.
template <typename T>
Tensor<T> cross_entropy_loss(Tape<T>& tape, const Tensor<T>& logits,
                             const std::vector<int>& labels) {
  if (logits.rank() != 2)
    throw DimensionError("cross_entropy: want N x K logits, got " +
                         shape_str(logits.shape()));
  const std::size_t N = logits.dim(0), K = logits.dim(1);
  if (labels.size() != N)
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(N) + " rows");
  for (std::size_t i = 0; i < N; ++i)
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= K)
      throw DataError("cross_entropy: label " + std::to_string(labels[i]) +
                      " of sample " + std::to_string(i) + " outside [0, " +
                      std::to_string(K) + ")");
  const T* pl = logits.data().data();
  T total = T(0);
  for (std::size_t i = 0; i < N; ++i) {
    const T* row = pl + i * K;
    T mx = row[0];
    for (std::size_t k = 1; k < K; ++k) mx = std::max(mx, row[k]);
    T sum = T(0);
    for (std::size_t k = 0; k < K; ++k) sum += std::exp(row[k] - mx);
    total += mx + std::log(sum) - row[labels[i]];
  }
  auto out = Tensor<T>::scalar(total / static_cast<T>(N));
  if (tape.recording() && logits.requires_grad()) {
    out.set_requires_grad(true);
    auto labels_copy = std::make_shared<std::vector<int>>(labels);
    tape.record([logits, out, labels_copy]() mutable {
      if (!out.has_grad()) return;
      const std::size_t N = logits.dim(0), K = logits.dim(1);
      const T g = out.grad()[0] / static_cast<T>(N);
      const T* pl = logits.data().data();
      T* dl = logits.grad().data();
      for (std::size_t i = 0; i < N; ++i) {
        const T* row = pl + i * K;
        T mx = row[0];
        for (std::size_t k = 1; k < K; ++k) mx = std::max(mx, row[k]);
        T sum = T(0);
        for (std::size_t k = 0; k < K; ++k) sum += std::exp(row[k] - mx);
        for (std::size_t k = 0; k < K; ++k) {
          const T p = std::exp(row[k] - mx) / sum;
          dl[i * K + k] +=
              g * (p - (static_cast<std::size_t>((*labels_copy)[i]) == k
                            ? T(1)
                            : T(0)));
        }
      }
    });
  }
  return out;
}

namespace detail {

/// Dense pairwise Euclidean distance matrix of the rows of x.
template <typename T>
std::vector<T> pairwise_euclidean(const Tensor<T>& x) {
  const std::size_t N = x.dim(0), D = x.dim(1);
  const T* p = x.data().data();
  std::vector<T> d(N * N, T(0));
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = i + 1; j < N; ++j) {
      T acc = T(0);
      const T* a = p + i * D;
      const T* b = p + j * D;
      for (std::size_t k = 0; k < D; ++k) {
        const T diff = a[k] - b[k];
        acc += diff * diff;
      }
      const T dist = std::sqrt(acc);
      d[i * N + j] = dist;
      d[j * N + i] = dist;
    }
  }
  return d;
}

}  // namespace detail

/// Batch-hard triplet loss on (assumed l2-normalized) descriptor rows.
/// Per anchor: hardest positive = farthest same-label row, hardest negative
/// = nearest different-label row; loss is the mean hinge
/// max(0, d_pos - d_neg + margin) over anchors that have a positive.
template <typename T>
Tensor<T> batch_hard_triplet_loss(Tape<T>& tape, const Tensor<T>& desc,
                                  const std::vector<int>& labels, T margin) {
  if (desc.rank() != 2)
    throw DimensionError("triplet: want N x D descriptors, got " +
                         shape_str(desc.shape()));
  const std::size_t N = desc.dim(0);
  if (labels.size() != N)
    throw DimensionError("triplet: " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(N) + " rows");
  if (margin <= T(0)) throw ConfigError("triplet: margin must be positive");
  bool multi_class = false;
  for (std::size_t i = 1; i < N; ++i)
    if (labels[i] != labels[0]) {
      multi_class = true;
      break;
    }
  if (!multi_class)
    throw DataError("triplet: degenerate batch, all " + std::to_string(N) +
                    " samples share one label");

  const auto dist = detail::pairwise_euclidean(desc);
  struct Pick {
    std::size_t anchor, pos, neg;
    T d_pos, d_neg;
  };
  auto picks = std::make_shared<std::vector<Pick>>();
  for (std::size_t i = 0; i < N; ++i) {
    bool has_pos = false;
    T d_pos = T(0), d_neg = T(0);
    std::size_t pos = i, neg = i;
    bool has_neg = false;
    for (std::size_t j = 0; j < N; ++j) {
      if (j == i) continue;
      const T d = dist[i * N + j];
      if (labels[j] == labels[i]) {
        if (!has_pos || d > d_pos) {
          d_pos = d;
          pos = j;
          has_pos = true;
        }
      } else {
        if (!has_neg || d < d_neg) {
          d_neg = d;
          neg = j;
          has_neg = true;
        }
      }
    }
    if (has_pos && has_neg) picks->push_back({i, pos, neg, d_pos, d_neg});
  }
  if (picks->empty())
    throw DataError("triplet: no anchor has a positive in this batch");

  T total = T(0);
  for (const auto& p : *picks) total += std::max(T(0), p.d_pos - p.d_neg + margin);
  auto out = Tensor<T>::scalar(total / static_cast<T>(picks->size()));

  if (tape.recording() && desc.requires_grad()) {
    out.set_requires_grad(true);
    tape.record([desc, out, picks, margin]() mutable {
      if (!out.has_grad()) return;
      const std::size_t D = desc.dim(1);
      const T g = out.grad()[0] / static_cast<T>(picks->size());
      const T* p = desc.data().data();
      T* dd = desc.grad().data();
      for (const auto& pk : *picks) {
        if (pk.d_pos - pk.d_neg + margin <= T(0)) continue;
        const T* a = p + pk.anchor * D;
        if (pk.d_pos > T(0)) {
          const T* pp = p + pk.pos * D;
          const T s = g / pk.d_pos;
          for (std::size_t k = 0; k < D; ++k) {
            const T diff = (a[k] - pp[k]) * s;
            dd[pk.anchor * D + k] += diff;
            dd[pk.pos * D + k] -= diff;
          }
        }
        if (pk.d_neg > T(0)) {
          const T* pn = p + pk.neg * D;
          const T s = g / pk.d_neg;
          for (std::size_t k = 0; k < D; ++k) {
            const T diff = (a[k] - pn[k]) * s;
            dd[pk.anchor * D + k] -= diff;
            dd[pk.neg * D + k] += diff;
          }
        }
      }
    });
  }
  return out;
}

}  // namespace fragmix
