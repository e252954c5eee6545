// Copyright 2026 The fragmix authors.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

// Test-only reference implementations. Everything here is deliberately
// naive (plain loops, direct definitions) and independent of the library's
// compute paths; tests compare the two.

#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "fragmix/tensor.hpp"

namespace oracles {

/// Plain triple-loop matrix product, accumulation over k innermost.
template <typename T>
std::vector<T> naive_matmul(std::size_t m, std::size_t k, std::size_t n,
                            const T* a, const T* b) {
  std::vector<T> c(m * n, T(0));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      T acc = T(0);
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
      c[i * n + j] = acc;
    }
  return c;
}

/// Direct cross-correlation with zero padding and groups; six nested loops.
template <typename T>
std::vector<T> naive_conv2d(const std::vector<T>& in, std::size_t N,
                            std::size_t C, std::size_t H, std::size_t W,
                            const std::vector<T>& w, std::size_t O,
                            std::size_t kh, std::size_t kw, std::size_t stride,
                            std::size_t pad, std::size_t groups) {
  const std::size_t Cg = C / groups, Og = O / groups;
  const std::size_t Ho = (H + 2 * pad - kh) / stride + 1;
  const std::size_t Wo = (W + 2 * pad - kw) / stride + 1;
  std::vector<T> out(N * O * Ho * Wo, T(0));
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t g = 0; g < groups; ++g)
      for (std::size_t o = 0; o < Og; ++o)
        for (std::size_t oy = 0; oy < Ho; ++oy)
          for (std::size_t ox = 0; ox < Wo; ++ox) {
            T acc = T(0);
            for (std::size_t c = 0; c < Cg; ++c)
              for (std::size_t ky = 0; ky < kh; ++ky)
                for (std::size_t kx = 0; kx < kw; ++kx) {
                  const std::ptrdiff_t iy =
                      static_cast<std::ptrdiff_t>(oy * stride + ky) -
                      static_cast<std::ptrdiff_t>(pad);
                  const std::ptrdiff_t ix =
                      static_cast<std::ptrdiff_t>(ox * stride + kx) -
                      static_cast<std::ptrdiff_t>(pad);
                  if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H) || ix < 0 ||
                      ix >= static_cast<std::ptrdiff_t>(W))
                    continue;
                  acc += in[((n * C + g * Cg + c) * H + iy) * W + ix] *
                         w[(((g * Og + o) * Cg + c) * kh + ky) * kw + kx];
                }
            out[((n * O + g * Og + o) * Ho + oy) * Wo + ox] = acc;
          }
  return out;
}

/// Central finite differences against the analytic gradients already stored
/// on `inputs`. `forward` must re-evaluate the scalar function from the
/// inputs' current values. Returns the max relative error over all checked
/// coordinates.
inline double fd_max_rel_err(std::vector<fragmix::Tensor<double>> inputs,
                             const std::function<double()>& forward,
                             double h = 1e-5) {
  double worst = 0.0;
  for (auto& t : inputs) {
    if (!t.requires_grad()) continue;
    auto values = t.data();
    auto analytic = t.has_grad() ? t.grad() : t.grad();  // allocates zeros
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double keep = values[i];
      values[i] = keep + h;
      const double fp = forward();
      values[i] = keep - h;
      const double fm = forward();
      values[i] = keep;
      const double numeric = (fp - fm) / (2.0 * h);
      const double a = analytic[i];
      const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-6});
      worst = std::max(worst, std::fabs(a - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace oracles
