// Copyright 2026 The fragmix authors.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace fragmix {

/// Bad user-supplied configuration (hyperparameters, CLI flags, file schemas).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Shape or axis disagreement between tensors.
struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Broken input data (manifests, images, labels, checkpoints).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace fragmix
