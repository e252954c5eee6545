// Copyright 2026 The fragmix authors.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <array>
#include <optional>

#include "fragmix/raster.hpp"
#include "fragmix/tensor.hpp"

namespace fragmix {

/// Geometry of an aspect-preserving fit into a fixed canvas.
struct LetterboxGeometry {
  double scale = 1.0;
  int content_h = 0, content_w = 0;  // scaled image size
  int top = 0, left = 0;             // padding offsets
};

LetterboxGeometry letterbox_geometry(int in_h, int in_w, int target_h,
                                     int target_w);

/// Bilinear resize by min(target_h/h, target_w/w), centered on a canvas of
/// pad_value. Target dims must be divisible by 32 (network constraint,
/// surfaced here so bad sizes fail before training).
RasterImage resize_letterbox(const RasterImage& img, int target_h, int target_w,
                             std::uint8_t pad_value = 255);

/// Optional per-channel affine normalization applied after the [0,1] scale.
struct PixelNorm {
  std::array<double, 3> mean{0.0, 0.0, 0.0};
  std::array<double, 3> stddev{1.0, 1.0, 1.0};
};

/// Image (already at model resolution) to a 3xHxW tensor in [0,1], with
/// grayscale replicated across channels.
template <typename T>
Tensor<T> to_model_tensor(const RasterImage& img,
                          const std::optional<PixelNorm>& norm = std::nullopt) {
  const std::size_t H = static_cast<std::size_t>(img.height);
  const std::size_t W = static_cast<std::size_t>(img.width);
  if (img.empty()) throw DataError("to_model_tensor: empty image");
  auto t = Tensor<T>::zeros({3, H, W});
  auto out = t.data();
  for (std::size_t c = 0; c < 3; ++c) {
    const int src_c = img.channels == 3 ? static_cast<int>(c) : 0;
    const double mu = norm ? norm->mean[c] : 0.0;
    const double sd = norm ? norm->stddev[c] : 1.0;
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x) {
        const double v =
            img.at(static_cast<int>(x), static_cast<int>(y), src_c) / 255.0;
        out[(c * H + y) * W + x] = static_cast<T>((v - mu) / sd);
      }
  }
  return t;
}

}  // namespace fragmix
