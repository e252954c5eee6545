// Copyright 2026 The fragmix authors.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include "fragmix/raster.hpp"

namespace fragmix {

/// Sauvola adaptive thresholding over an odd square window (edge-clamped):
///   T = m * (1 + k * (s / R - 1))
/// with m, s the window mean and standard deviation. Pixels darker than T
/// become foreground (0), the rest background (255). Window sums come from
/// integral images, so the cost per pixel is constant in the window size.
/// Color input is converted to luma first.
RasterImage sauvola_binarize(const RasterImage& img, int window = 31,
                             double k = 0.2, double R = 128.0);

}  // namespace fragmix
