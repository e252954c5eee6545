// Copyright 2026 The fragmix authors.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <cmath>
#include <cstdint>

#include "fragmix/errors.hpp"

namespace fragmix {

/// Linear warmup from 0 to `lr` over the warmup steps, then cosine decay
/// down to lr * final_fraction at the last step. Warmup length is the
/// warmup_epochs share of total_steps. Boundary values are exact: the first
/// post-warmup step returns lr itself, the final step returns
/// lr * final_fraction with no cosine residue.
inline double lr_at(std::int64_t step, std::int64_t total_steps, double lr,
                    std::int64_t warmup_epochs, std::int64_t epochs,
                    double final_fraction) {
  if (total_steps <= 0) throw ConfigError("lr_at: total_steps must be positive");
  if (step < 0 || step >= total_steps)
    throw ConfigError("lr_at: step out of range");
  if (final_fraction <= 0.0 || final_fraction > 1.0)
    throw ConfigError("lr_at: final_fraction must be in (0, 1]");
  const std::int64_t warmup_steps =
      epochs > 0 ? (total_steps * warmup_epochs) / epochs : 0;
  if (step < warmup_steps)
    return lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
  const double final_lr = lr * final_fraction;
  if (step >= total_steps - 1) return final_lr;
  if (step == warmup_steps) return lr;
  const double t = static_cast<double>(step - warmup_steps) /
                   static_cast<double>(total_steps - 1 - warmup_steps);
  return final_lr + (lr - final_lr) * 0.5 * (1.0 + std::cos(3.14159265358979323846 * t));
}

}  // namespace fragmix
