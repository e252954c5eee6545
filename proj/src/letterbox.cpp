// Copyright 2026 The fragmix authors.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#include "fragmix/letterbox.hpp"

#include <algorithm>
#include <cmath>

namespace fragmix {

LetterboxGeometry letterbox_geometry(int in_h, int in_w, int target_h,
                                     int target_w) {
  if (in_h <= 0 || in_w <= 0) throw DataError("letterbox: zero-area input");
  LetterboxGeometry g;
  g.scale = std::min(static_cast<double>(target_h) / in_h,
                     static_cast<double>(target_w) / in_w);
  g.content_h = std::clamp(
      static_cast<int>(std::floor(in_h * g.scale + 0.5)), 1, target_h);
  g.content_w = std::clamp(
      static_cast<int>(std::floor(in_w * g.scale + 0.5)), 1, target_w);
  g.top = (target_h - g.content_h) / 2;
  g.left = (target_w - g.content_w) / 2;
  return g;
}

namespace {

/// Center-aligned bilinear sampling of one channel.
void bilinear_resize(const RasterImage& src, int c, RasterImage& dst,
                     const LetterboxGeometry& g) {
  const double sy = static_cast<double>(src.height) / g.content_h;
  const double sx = static_cast<double>(src.width) / g.content_w;
  for (int y = 0; y < g.content_h; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    fy = std::clamp(fy, 0.0, static_cast<double>(src.height - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, src.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < g.content_w; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      fx = std::clamp(fx, 0.0, static_cast<double>(src.width - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, src.width - 1);
      const double wx = fx - x0;
      const double v =
          (1 - wy) * ((1 - wx) * src.at(x0, y0, c) + wx * src.at(x1, y0, c)) +
          wy * ((1 - wx) * src.at(x0, y1, c) + wx * src.at(x1, y1, c));
      dst.at(g.left + x, g.top + y, c) =
          static_cast<std::uint8_t>(std::clamp(v + 0.5, 0.0, 255.0));
    }
  }
}

}  // namespace

RasterImage resize_letterbox(const RasterImage& img, int target_h, int target_w,
                             std::uint8_t pad_value) {
  if (target_h <= 0 || target_w <= 0 || target_h % 32 != 0 || target_w % 32 != 0)
    throw ConfigError("letterbox: target " + std::to_string(target_h) + "x" +
                      std::to_string(target_w) + " must be divisible by 32");
  const auto g = letterbox_geometry(img.height, img.width, target_h, target_w);
  RasterImage out = RasterImage::make(target_w, target_h, img.channels, pad_value);
  for (int c = 0; c < img.channels; ++c) bilinear_resize(img, c, out, g);
  return out;
}

}  // namespace fragmix
