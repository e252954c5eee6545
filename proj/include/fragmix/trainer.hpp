// Copyright 2026 The fragmix authors.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fragmix/model.hpp"
#include "fragmix/tensor.hpp"

namespace fragmix {

enum class LossKind { cross_entropy, triplet };

inline std::string loss_kind_name(LossKind k) {
  return k == LossKind::cross_entropy ? "cross_entropy" : "triplet";
}

inline LossKind loss_kind_from(const std::string& s) {
  if (s == "cross_entropy") return LossKind::cross_entropy;
  if (s == "triplet") return LossKind::triplet;
  throw ConfigError("unknown loss '" + s + "' (cross_entropy|triplet)");
}

struct TrainConfig {
  int epochs = 50;
  double lr = 1e-4;
  int batch_size = 128;
  int warmup_epochs = 2;
  double final_lr_fraction = 0.1;  // cosine annealing target lr fraction
  LossKind loss_kind = LossKind::cross_entropy;
  double triplet_margin = 0.15;
  std::uint64_t seed = 0;
  int sampler_writers = 4;  // P, triplet batches are P writers x Q samples
  int sampler_samples = 4;  // Q

  void validate() const {
    if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
    if (lr <= 0.0) throw ConfigError("train: lr must be positive");
    if (batch_size < 2) throw ConfigError("train: batch_size must be >= 2");
    if (warmup_epochs < 0 || warmup_epochs > epochs)
      throw ConfigError("train: warmup_epochs out of range");
    if (final_lr_fraction <= 0.0 || final_lr_fraction > 1.0)
      throw ConfigError("train: final_lr_fraction must be in (0, 1]");
    if (triplet_margin <= 0.0)
      throw ConfigError("train: triplet margin must be positive");
    if (sampler_writers < 2 || sampler_samples < 2)
      throw ConfigError("train: triplet sampler needs P, Q >= 2");
  }
};

struct TrainItem {
  Tensor<float> image;  // 3 x H x W
  int label = 0;
};

struct TrainLogRecord {
  int epoch = 0;
  std::int64_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
  std::string split;  // "train" | "val"
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_metric = 0.0;  // accuracy (cross-entropy) or loss (triplet)
  bool has_val = false;
};

struct TrainResult {
  std::vector<EpochStats> history;
  std::vector<double> lr_history;  // per optimizer step
  int best_epoch = 0;
  double best_metric = 0.0;
  std::int64_t steps_per_epoch = 0;
  std::int64_t total_steps = 0;
  // optimizer state after the last executed step, aligned with
  // model.parameters(); lets a checkpoint resume mid-schedule
  std::vector<std::vector<float>> adam_m, adam_v;
  std::int64_t adam_steps = 0;
};

using LogSink = std::function<void(const TrainLogRecord&)>;

/// Optimizer/progress carry-over for resuming a run.
struct ResumePoint {
  int start_epoch = 0;
  std::int64_t adam_steps = 0;
  std::vector<std::vector<float>> adam_m, adam_v;
};

/// Trains in place. The schedule always spans cfg.epochs; with a resume
/// point only the remaining epochs execute but the lr curve continues at
/// the right step. When a validation set is given the model is left at its
/// best-validation parameters.
TrainResult train(Model<float>& model, const std::vector<TrainItem>& train_set,
                  const std::vector<TrainItem>& val_set, const TrainConfig& cfg,
                  const LogSink& log = {}, const ResumePoint* resume = nullptr);

/// Eval-mode top-1 classification accuracy.
double classification_accuracy(Model<float>& model,
                               const std::vector<TrainItem>& items,
                               int batch_size = 16);

}  // namespace fragmix
