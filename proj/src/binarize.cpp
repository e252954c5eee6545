// Copyright 2026 The fragmix authors.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#include "fragmix/binarize.hpp"

#include <cmath>
#include <cstdint>
#include <vector>

namespace fragmix {

RasterImage sauvola_binarize(const RasterImage& img, int window, double k,
                             double R) {
  if (window < 3 || window % 2 == 0)
    throw ConfigError("sauvola: window must be odd and >= 3, got " +
                      std::to_string(window));
  if (R <= 0.0) throw ConfigError("sauvola: R must be positive");
  const RasterImage gray = to_grayscale(img);
  const int w = gray.width, h = gray.height;
  RasterImage out = RasterImage::make(w, h, 1);
  if (gray.empty()) return out;

  // Integral images of v and v^2; exact in int64 for 8-bit input.
  const int iw = w + 1;
  std::vector<std::int64_t> integ(static_cast<std::size_t>(iw) * (h + 1), 0);
  std::vector<std::int64_t> integ_sq(integ.size(), 0);
  for (int y = 0; y < h; ++y) {
    std::int64_t row = 0, row_sq = 0;
    for (int x = 0; x < w; ++x) {
      const std::int64_t v = gray.at(x, y);
      row += v;
      row_sq += v * v;
      integ[static_cast<std::size_t>(y + 1) * iw + (x + 1)] =
          integ[static_cast<std::size_t>(y) * iw + (x + 1)] + row;
      integ_sq[static_cast<std::size_t>(y + 1) * iw + (x + 1)] =
          integ_sq[static_cast<std::size_t>(y) * iw + (x + 1)] + row_sq;
    }
  }
  const auto box = [&](const std::vector<std::int64_t>& ii, int x0, int y0,
                       int x1, int y1) {  // inclusive corners
    return ii[static_cast<std::size_t>(y1 + 1) * iw + (x1 + 1)] -
           ii[static_cast<std::size_t>(y0) * iw + (x1 + 1)] -
           ii[static_cast<std::size_t>(y1 + 1) * iw + x0] +
           ii[static_cast<std::size_t>(y0) * iw + x0];
  };

  const int half = window / 2;
  for (int y = 0; y < h; ++y) {
    const int y0 = y - half < 0 ? 0 : y - half;
    const int y1 = y + half >= h ? h - 1 : y + half;
    for (int x = 0; x < w; ++x) {
      const int x0 = x - half < 0 ? 0 : x - half;
      const int x1 = x + half >= w ? w - 1 : x + half;
      const std::int64_t area =
          static_cast<std::int64_t>(x1 - x0 + 1) * (y1 - y0 + 1);
      const std::int64_t sum = box(integ, x0, y0, x1, y1);
      const std::int64_t sum_sq = box(integ_sq, x0, y0, x1, y1);
      const double mean = static_cast<double>(sum) / static_cast<double>(area);
      double var = static_cast<double>(sum_sq) / static_cast<double>(area) -
                   mean * mean;
      if (var < 0.0) var = 0.0;
      const double stddev = std::sqrt(var);
      const double threshold = mean * (1.0 + k * (stddev / R - 1.0));
      out.at(x, y) = gray.at(x, y) < threshold ? 0 : 255;
    }
  }
  return out;
}

}  // namespace fragmix
