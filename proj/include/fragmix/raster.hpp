// Copyright 2026 The fragmix authors.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "fragmix/errors.hpp"

namespace fragmix {

/// 8-bit image, row-major, interleaved channels (1 = gray, 3 = RGB).
struct RasterImage {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;

  static RasterImage make(int w, int h, int c, std::uint8_t fill = 0) {
    if (w < 0 || h < 0 || (c != 1 && c != 3))
      throw DataError("raster: bad dimensions");
    RasterImage img;
    img.width = w;
    img.height = h;
    img.channels = c;
    img.pixels.assign(static_cast<std::size_t>(w) * h * c, fill);
    return img;
  }

  std::uint8_t& at(int x, int y, int c = 0) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::uint8_t at(int x, int y, int c = 0) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  bool empty() const { return width == 0 || height == 0; }
};

/// ITU-R 601 luma with integer rounding; grayscale input passes through.
RasterImage to_grayscale(const RasterImage& img);

}  // namespace fragmix
