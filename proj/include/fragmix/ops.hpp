// Copyright 2026 The fragmix authors.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "fragmix/rng.hpp"
#include "fragmix/tensor.hpp"

namespace fragmix {

// ---------------------------------------------------------------------------
// Small row-major matrix kernels. All accumulate into C.
// ---------------------------------------------------------------------------

/// C[m x n] += A[m x k] * B[k x n]
template <typename T>
void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const T* A,
             const T* B, T* C) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* a = A + i * k;
    T* c = C + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = a[p];
      const T* b = B + p * n;
      for (std::size_t j = 0; j < n; ++j) c[j] += av * b[j];
    }
  }
}

/// C[m x n] += A[m x k] * B^T, B stored [n x k]
template <typename T>
void gemm_nt(std::size_t m, std::size_t k, std::size_t n, const T* A,
             const T* B, T* C) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* a = A + i * k;
    T* c = C + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const T* b = B + j * k;
      T acc = T(0);
      for (std::size_t p = 0; p < k; ++p) acc += a[p] * b[p];
      c[j] += acc;
    }
  }
}

/// C[m x n] += A^T * B, A stored [k x m], B stored [k x n]
template <typename T>
void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const T* A,
             const T* B, T* C) {
  for (std::size_t p = 0; p < k; ++p) {
    const T* a = A + p * m;
    const T* b = B + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const T av = a[i];
      T* c = C + i * n;
      for (std::size_t j = 0; j < n; ++j) c[j] += av * b[j];
    }
  }
}

namespace detail {

template <typename T>
bool want_grad(const Tape<T>& tape, const Tensor<T>& a) {
  return tape.recording() && a.requires_grad();
}

template <typename T>
bool want_grad(const Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  return tape.recording() && (a.requires_grad() || b.requires_grad());
}

/// Axis decomposition for reductions/normalizations along one axis.
struct AxisSplit {
  std::size_t outer, n, inner;
};

inline AxisSplit split_axis(const Shape& shape, std::size_t axis) {
  if (axis >= shape.size())
    throw DimensionError("axis " + std::to_string(axis) +
                         " out of range for shape " + shape_str(shape));
  AxisSplit s{1, shape[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

/// Broadcast check: b must have one element or a shape equal to a trailing
/// suffix of a's shape. Returns b's element count; indexing the small side
/// with (linear_index % count) then realizes the broadcast.
inline std::size_t suffix_broadcast(const Shape& big, const Shape& small) {
  const std::size_t sn = shape_numel(small);
  if (sn == 1) return 1;
  if (small.size() > big.size()) return 0;
  for (std::size_t i = 0; i < small.size(); ++i) {
    if (small[small.size() - 1 - i] != big[big.size() - 1 - i]) return 0;
  }
  return sn;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Linear algebra ops
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> matmul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()));
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  auto out = Tensor<T>::zeros({m, n});
  gemm_nn(m, k, n, a.data().data(), b.data().data(), out.data().data());
  if (detail::want_grad(tape, a, b)) {
    out.set_requires_grad(true);
    tape.record([a, b, out]() mutable {
      if (!out.has_grad()) return;
      const T* dC = out.grad().data();
      const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
      if (a.requires_grad())  // dA = dC * B^T
        gemm_nt(m, n, k, dC, b.data().data(), a.grad().data());
      if (b.requires_grad())  // dB = A^T * dC
        gemm_tn(n, m, k, a.data().data(), dC, b.grad().data());
    });
  }
  return out;
}

template <typename T>
Tensor<T> transpose(Tape<T>& tape, const Tensor<T>& x) {
  if (x.rank() != 2)
    throw DimensionError("transpose: expected 2-d, got " + shape_str(x.shape()));
  const std::size_t m = x.dim(0), n = x.dim(1);
  auto out = Tensor<T>::zeros({n, m});
  const T* src = x.data().data();
  T* dst = out.data().data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) dst[j * m + i] = src[i * n + j];
  if (detail::want_grad(tape, x)) {
    out.set_requires_grad(true);
    tape.record([x, out]() mutable {
      if (!out.has_grad()) return;
      const std::size_t m = x.dim(0), n = x.dim(1);
      const T* dy = out.grad().data();
      T* dx = x.grad().data();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) dx[i * n + j] += dy[j * m + i];
    });
  }
  return out;
}

/// Row-major reshape; copies (no strided views in this library).
template <typename T>
Tensor<T> reshape(Tape<T>& tape, const Tensor<T>& x, Shape new_shape) {
  if (shape_numel(new_shape) != x.numel())
    throw DimensionError("reshape: " + shape_str(x.shape()) + " to " +
                         shape_str(new_shape) + " changes element count");
  auto out = Tensor<T>::from(std::move(new_shape),
                             std::vector<T>(x.data().begin(), x.data().end()));
  if (detail::want_grad(tape, x)) {
    out.set_requires_grad(true);
    tape.record([x, out]() mutable {
      if (!out.has_grad()) return;
      const T* dy = out.grad().data();
      T* dx = x.grad().data();
      for (std::size_t i = 0; i < x.numel(); ++i) dx[i] += dy[i];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Elementwise suite
// ---------------------------------------------------------------------------

namespace detail {

/// Shared skeleton for add/mul with suffix or scalar broadcast on the
/// smaller operand (either side).
template <typename T, typename FwdFn, typename BwdFn>
Tensor<T> broadcast_binary(Tape<T>& tape, const Tensor<T>& a,
                           const Tensor<T>& b, const char* name, FwdFn fwd,
                           BwdFn bwd) {
  const Tensor<T>* big = &a;
  const Tensor<T>* small = &b;
  bool swapped = false;
  std::size_t sn = suffix_broadcast(a.shape(), b.shape());
  if (sn == 0 || b.numel() > a.numel()) {
    sn = suffix_broadcast(b.shape(), a.shape());
    if (sn == 0)
      throw DimensionError(std::string(name) + ": shapes " +
                           shape_str(a.shape()) + " and " +
                           shape_str(b.shape()) + " do not broadcast");
    big = &b;
    small = &a;
    swapped = true;
  }
  auto out = Tensor<T>::zeros(big->shape());
  const T* pb = big->data().data();
  const T* ps = small->data().data();
  T* po = out.data().data();
  const std::size_t n = big->numel();
  for (std::size_t i = 0; i < n; ++i) po[i] = fwd(pb[i], ps[i % sn], swapped);
  if (detail::want_grad(tape, a, b)) {
    out.set_requires_grad(true);
    Tensor<T> bigT = *big, smallT = *small;
    tape.record([bigT, smallT, out, sn, swapped, bwd]() mutable {
      if (!out.has_grad()) return;
      const T* dy = out.grad().data();
      const std::size_t n = bigT.numel();
      const T* pb = bigT.data().data();
      const T* ps = smallT.data().data();
      T* db = bigT.requires_grad() ? bigT.grad().data() : nullptr;
      T* ds = smallT.requires_grad() ? smallT.grad().data() : nullptr;
      for (std::size_t i = 0; i < n; ++i)
        bwd(dy[i], pb[i], ps[i % sn], swapped, db ? db + i : nullptr,
            ds ? ds + (i % sn) : nullptr);
    });
  }
  return out;
}

}  // namespace detail

template <typename T>
Tensor<T> add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  return detail::broadcast_binary(
      tape, a, b, "add", [](T x, T y, bool) { return x + y; },
      [](T dy, T, T, bool, T* db, T* ds) {
        if (db) *db += dy;
        if (ds) *ds += dy;
      });
}

template <typename T>
Tensor<T> mul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  return detail::broadcast_binary(
      tape, a, b, "mul", [](T x, T y, bool) { return x * y; },
      [](T dy, T xb, T xs, bool, T* db, T* ds) {
        if (db) *db += dy * xs;
        if (ds) *ds += dy * xb;
      });
}

/// Multiply by a plain constant (not a graph node).
template <typename T>
Tensor<T> scale(Tape<T>& tape, const Tensor<T>& x, T c) {
  auto out = Tensor<T>::zeros(x.shape());
  const T* px = x.data().data();
  T* po = out.data().data();
  for (std::size_t i = 0; i < x.numel(); ++i) po[i] = c * px[i];
  if (detail::want_grad(tape, x)) {
    out.set_requires_grad(true);
    tape.record([x, out, c]() mutable {
      if (!out.has_grad()) return;
      const T* dy = out.grad().data();
      T* dx = x.grad().data();
      for (std::size_t i = 0; i < x.numel(); ++i) dx[i] += c * dy[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> relu(Tape<T>& tape, const Tensor<T>& x) {
  auto out = Tensor<T>::zeros(x.shape());
  const T* px = x.data().data();
  T* po = out.data().data();
  for (std::size_t i = 0; i < x.numel(); ++i) po[i] = px[i] > T(0) ? px[i] : T(0);
  if (detail::want_grad(tape, x)) {
    out.set_requires_grad(true);
    tape.record([x, out]() mutable {
      if (!out.has_grad()) return;
      const T* dy = out.grad().data();
      const T* px = x.data().data();
      T* dx = x.grad().data();
      for (std::size_t i = 0; i < x.numel(); ++i)
        if (px[i] > T(0)) dx[i] += dy[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> square(Tape<T>& tape, const Tensor<T>& x) {
  auto out = Tensor<T>::zeros(x.shape());
  const T* px = x.data().data();
  T* po = out.data().data();
  for (std::size_t i = 0; i < x.numel(); ++i) po[i] = px[i] * px[i];
  if (detail::want_grad(tape, x)) {
    out.set_requires_grad(true);
    tape.record([x, out]() mutable {
      if (!out.has_grad()) return;
      const T* dy = out.grad().data();
      const T* px = x.data().data();
      T* dx = x.grad().data();
      for (std::size_t i = 0; i < x.numel(); ++i) dx[i] += T(2) * px[i] * dy[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> log(Tape<T>& tape, const Tensor<T>& x) {
  auto out = Tensor<T>::zeros(x.shape());
  const T* px = x.data().data();
  T* po = out.data().data();
  for (std::size_t i = 0; i < x.numel(); ++i) po[i] = std::log(px[i]);
  if (detail::want_grad(tape, x)) {
    out.set_requires_grad(true);
    tape.record([x, out]() mutable {
      if (!out.has_grad()) return;
      const T* dy = out.grad().data();
      const T* px = x.data().data();
      T* dx = x.grad().data();
      for (std::size_t i = 0; i < x.numel(); ++i) dx[i] += dy[i] / px[i];
    });
  }
  return out;
}

/// Mean over all elements, producing a scalar.
template <typename T>
Tensor<T> mean(Tape<T>& tape, const Tensor<T>& x) {
  const std::size_t n = x.numel();
  T acc = T(0);
  const T* px = x.data().data();
  for (std::size_t i = 0; i < n; ++i) acc += px[i];
  auto out = Tensor<T>::scalar(acc / static_cast<T>(n));
  if (detail::want_grad(tape, x)) {
    out.set_requires_grad(true);
    tape.record([x, out]() mutable {
      if (!out.has_grad()) return;
      const T g = out.grad()[0] / static_cast<T>(x.numel());
      T* dx = x.grad().data();
      for (std::size_t i = 0; i < x.numel(); ++i) dx[i] += g;
    });
  }
  return out;
}

template <typename T>
Tensor<T> softmax(Tape<T>& tape, const Tensor<T>& x, std::size_t axis) {
  const auto sp = detail::split_axis(x.shape(), axis);
  auto out = Tensor<T>::zeros(x.shape());
  const T* px = x.data().data();
  T* po = out.data().data();
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t r = 0; r < sp.inner; ++r) {
      const std::size_t base = o * sp.n * sp.inner + r;
      T mx = px[base];
      for (std::size_t i = 1; i < sp.n; ++i)
        mx = std::max(mx, px[base + i * sp.inner]);
      T denom = T(0);
      for (std::size_t i = 0; i < sp.n; ++i) {
        const T e = std::exp(px[base + i * sp.inner] - mx);
        po[base + i * sp.inner] = e;
        denom += e;
      }
      for (std::size_t i = 0; i < sp.n; ++i) po[base + i * sp.inner] /= denom;
    }
  }
  if (detail::want_grad(tape, x)) {
    out.set_requires_grad(true);
    tape.record([x, out, sp]() mutable {
      if (!out.has_grad()) return;
      const T* dy = out.grad().data();
      const T* py = out.data().data();
      T* dx = x.grad().data();
      for (std::size_t o = 0; o < sp.outer; ++o) {
        for (std::size_t r = 0; r < sp.inner; ++r) {
          const std::size_t base = o * sp.n * sp.inner + r;
          T dot = T(0);
          for (std::size_t i = 0; i < sp.n; ++i) {
            const std::size_t k = base + i * sp.inner;
            dot += dy[k] * py[k];
          }
          for (std::size_t i = 0; i < sp.n; ++i) {
            const std::size_t k = base + i * sp.inner;
            dx[k] += py[k] * (dy[k] - dot);
          }
        }
      }
    });
  }
  return out;
}

/// v / max(||v||_2, eps) along the given axis.
template <typename T>
Tensor<T> l2_normalize(Tape<T>& tape, const Tensor<T>& x, std::size_t axis,
                       T eps = T(1e-12)) {
  const auto sp = detail::split_axis(x.shape(), axis);
  auto out = Tensor<T>::zeros(x.shape());
  const T* px = x.data().data();
  T* po = out.data().data();
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t r = 0; r < sp.inner; ++r) {
      const std::size_t base = o * sp.n * sp.inner + r;
      T nsq = T(0);
      for (std::size_t i = 0; i < sp.n; ++i) {
        const T v = px[base + i * sp.inner];
        nsq += v * v;
      }
      const T norm = std::max(std::sqrt(nsq), eps);
      for (std::size_t i = 0; i < sp.n; ++i)
        po[base + i * sp.inner] = px[base + i * sp.inner] / norm;
    }
  }
  if (detail::want_grad(tape, x)) {
    out.set_requires_grad(true);
    tape.record([x, out, sp, eps]() mutable {
      if (!out.has_grad()) return;
      const T* dy = out.grad().data();
      const T* px = x.data().data();
      T* dx = x.grad().data();
      for (std::size_t o = 0; o < sp.outer; ++o) {
        for (std::size_t r = 0; r < sp.inner; ++r) {
          const std::size_t base = o * sp.n * sp.inner + r;
          T nsq = T(0);
          for (std::size_t i = 0; i < sp.n; ++i) {
            const T v = px[base + i * sp.inner];
            nsq += v * v;
          }
          const T raw = std::sqrt(nsq);
          const T norm = std::max(raw, eps);
          if (raw <= eps) {
            // below the floor the map is x / eps, which is linear
            for (std::size_t i = 0; i < sp.n; ++i)
              dx[base + i * sp.inner] += dy[base + i * sp.inner] / norm;
          } else {
            T dot = T(0);
            for (std::size_t i = 0; i < sp.n; ++i) {
              const std::size_t k = base + i * sp.inner;
              dot += dy[k] * px[k];
            }
            const T n3 = norm * norm * norm;
            for (std::size_t i = 0; i < sp.n; ++i) {
              const std::size_t k = base + i * sp.inner;
              dx[k] += dy[k] / norm - px[k] * dot / n3;
            }
          }
        }
      }
    });
  }
  return out;
}

/// Zero-mean unit-variance along one axis, then per-position affine with
/// gamma/beta of length shape[axis].
template <typename T>
Tensor<T> layer_norm(Tape<T>& tape, const Tensor<T>& x, std::size_t axis,
                     const Tensor<T>& gamma, const Tensor<T>& beta, T eps) {
  if (eps <= T(0)) throw ConfigError("layer_norm: eps must be positive");
  const auto sp = detail::split_axis(x.shape(), axis);
  if (gamma.numel() != sp.n || beta.numel() != sp.n)
    throw DimensionError("layer_norm: gamma/beta length " +
                         std::to_string(gamma.numel()) + "/" +
                         std::to_string(beta.numel()) + " != axis extent " +
                         std::to_string(sp.n));
  auto out = Tensor<T>::zeros(x.shape());
  const T* px = x.data().data();
  const T* pg = gamma.data().data();
  const T* pb = beta.data().data();
  T* po = out.data().data();
  const T invn = T(1) / static_cast<T>(sp.n);
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t r = 0; r < sp.inner; ++r) {
      const std::size_t base = o * sp.n * sp.inner + r;
      T mu = T(0);
      for (std::size_t i = 0; i < sp.n; ++i) mu += px[base + i * sp.inner];
      mu *= invn;
      T var = T(0);
      for (std::size_t i = 0; i < sp.n; ++i) {
        const T d = px[base + i * sp.inner] - mu;
        var += d * d;
      }
      var *= invn;
      const T istd = T(1) / std::sqrt(var + eps);
      for (std::size_t i = 0; i < sp.n; ++i) {
        const std::size_t k = base + i * sp.inner;
        po[k] = (px[k] - mu) * istd * pg[i] + pb[i];
      }
    }
  }
  if (tape.recording() &&
      (x.requires_grad() || gamma.requires_grad() || beta.requires_grad())) {
    out.set_requires_grad(true);
    Tensor<T> g = gamma, b = beta;
    tape.record([x, g, b, out, sp, eps]() mutable {
      if (!out.has_grad()) return;
      const T* dy = out.grad().data();
      const T* px = x.data().data();
      const T* pg = g.data().data();
      T* dx = x.requires_grad() ? x.grad().data() : nullptr;
      T* dg = g.requires_grad() ? g.grad().data() : nullptr;
      T* db = b.requires_grad() ? b.grad().data() : nullptr;
      const T invn = T(1) / static_cast<T>(sp.n);
      std::vector<T> xhat(sp.n);
      for (std::size_t o = 0; o < sp.outer; ++o) {
        for (std::size_t r = 0; r < sp.inner; ++r) {
          const std::size_t base = o * sp.n * sp.inner + r;
          T mu = T(0);
          for (std::size_t i = 0; i < sp.n; ++i) mu += px[base + i * sp.inner];
          mu *= invn;
          T var = T(0);
          for (std::size_t i = 0; i < sp.n; ++i) {
            const T d = px[base + i * sp.inner] - mu;
            var += d * d;
          }
          var *= invn;
          const T istd = T(1) / std::sqrt(var + eps);
          for (std::size_t i = 0; i < sp.n; ++i)
            xhat[i] = (px[base + i * sp.inner] - mu) * istd;
          if (dg || db) {
            for (std::size_t i = 0; i < sp.n; ++i) {
              const T d = dy[base + i * sp.inner];
              if (dg) dg[i] += d * xhat[i];
              if (db) db[i] += d;
            }
          }
          if (dx) {
            T sum_dh = T(0), sum_dh_xhat = T(0);
            for (std::size_t i = 0; i < sp.n; ++i) {
              const T dh = dy[base + i * sp.inner] * pg[i];
              sum_dh += dh;
              sum_dh_xhat += dh * xhat[i];
            }
            for (std::size_t i = 0; i < sp.n; ++i) {
              const T dh = dy[base + i * sp.inner] * pg[i];
              dx[base + i * sp.inner] +=
                  istd * (dh - invn * sum_dh - xhat[i] * invn * sum_dh_xhat);
            }
          }
        }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// NCHW channel helpers
// ---------------------------------------------------------------------------

namespace detail {
template <typename T>
void check_nchw_vec(const Tensor<T>& x, const Tensor<T>& v, const char* name) {
  if (x.rank() != 4)
    throw DimensionError(std::string(name) + ": expected NCHW input, got " +
                         shape_str(x.shape()));
  if (v.numel() != x.dim(1))
    throw DimensionError(std::string(name) + ": vector length " +
                         std::to_string(v.numel()) + " != channels " +
                         std::to_string(x.dim(1)));
}
}  // namespace detail

/// y[n,c,h,w] = x[n,c,h,w] * s[c]
template <typename T>
Tensor<T> channel_scale(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& s) {
  detail::check_nchw_vec(x, s, "channel_scale");
  const std::size_t N = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
  auto out = Tensor<T>::zeros(x.shape());
  const T* px = x.data().data();
  const T* ps = s.data().data();
  T* po = out.data().data();
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t c = 0; c < C; ++c) {
      const T sv = ps[c];
      const std::size_t base = (n * C + c) * HW;
      for (std::size_t i = 0; i < HW; ++i) po[base + i] = px[base + i] * sv;
    }
  if (detail::want_grad(tape, x, s)) {
    out.set_requires_grad(true);
    tape.record([x, s, out, N, C, HW]() mutable {
      if (!out.has_grad()) return;
      const T* dy = out.grad().data();
      const T* px = x.data().data();
      const T* ps = s.data().data();
      T* dx = x.requires_grad() ? x.grad().data() : nullptr;
      T* ds = s.requires_grad() ? s.grad().data() : nullptr;
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t c = 0; c < C; ++c) {
          const std::size_t base = (n * C + c) * HW;
          if (dx) {
            const T sv = ps[c];
            for (std::size_t i = 0; i < HW; ++i) dx[base + i] += dy[base + i] * sv;
          }
          if (ds) {
            T acc = T(0);
            for (std::size_t i = 0; i < HW; ++i) acc += dy[base + i] * px[base + i];
            ds[c] += acc;
          }
        }
    });
  }
  return out;
}

/// y[n,c,h,w] = x[n,c,h,w] + b[c]
template <typename T>
Tensor<T> channel_bias(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& b) {
  detail::check_nchw_vec(x, b, "channel_bias");
  const std::size_t N = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
  auto out = Tensor<T>::zeros(x.shape());
  const T* px = x.data().data();
  const T* pb = b.data().data();
  T* po = out.data().data();
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t c = 0; c < C; ++c) {
      const T bv = pb[c];
      const std::size_t base = (n * C + c) * HW;
      for (std::size_t i = 0; i < HW; ++i) po[base + i] = px[base + i] + bv;
    }
  if (detail::want_grad(tape, x, b)) {
    out.set_requires_grad(true);
    tape.record([x, b, out, N, C, HW]() mutable {
      if (!out.has_grad()) return;
      const T* dy = out.grad().data();
      T* dx = x.requires_grad() ? x.grad().data() : nullptr;
      T* db = b.requires_grad() ? b.grad().data() : nullptr;
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t c = 0; c < C; ++c) {
          const std::size_t base = (n * C + c) * HW;
          if (dx)
            for (std::size_t i = 0; i < HW; ++i) dx[base + i] += dy[base + i];
          if (db) {
            T acc = T(0);
            for (std::size_t i = 0; i < HW; ++i) acc += dy[base + i];
            db[c] += acc;
          }
        }
    });
  }
  return out;
}

/// N x C x H x W -> N x C spatial average.
template <typename T>
Tensor<T> global_avg_pool(Tape<T>& tape, const Tensor<T>& x) {
  if (x.rank() != 4)
    throw DimensionError("global_avg_pool: expected NCHW, got " +
                         shape_str(x.shape()));
  const std::size_t N = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
  auto out = Tensor<T>::zeros({N, C});
  const T* px = x.data().data();
  T* po = out.data().data();
  for (std::size_t nc = 0; nc < N * C; ++nc) {
    T acc = T(0);
    for (std::size_t i = 0; i < HW; ++i) acc += px[nc * HW + i];
    po[nc] = acc / static_cast<T>(HW);
  }
  if (detail::want_grad(tape, x)) {
    out.set_requires_grad(true);
    tape.record([x, out, N, C, HW]() mutable {
      if (!out.has_grad()) return;
      const T* dy = out.grad().data();
      T* dx = x.grad().data();
      for (std::size_t nc = 0; nc < N * C; ++nc) {
        const T g = dy[nc] / static_cast<T>(HW);
        for (std::size_t i = 0; i < HW; ++i) dx[nc * HW + i] += g;
      }
    });
  }
  return out;
}

/// Inverted dropout: keeps with probability 1-p and rescales by 1/(1-p).
/// Call only on the training path; at inference the op is skipped entirely.
template <typename T>
Tensor<T> dropout(Tape<T>& tape, const Tensor<T>& x, T p, Rng& rng) {
  if (p < T(0) || p >= T(1)) throw ConfigError("dropout: p must be in [0, 1)");
  const std::size_t n = x.numel();
  auto mask = std::make_shared<std::vector<std::uint8_t>>(n);
  const T inv_keep = T(1) / (T(1) - p);
  auto out = Tensor<T>::zeros(x.shape());
  const T* px = x.data().data();
  T* po = out.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    const bool keep = rng.uniform() >= static_cast<double>(p);
    (*mask)[i] = keep ? 1 : 0;
    po[i] = keep ? px[i] * inv_keep : T(0);
  }
  if (detail::want_grad(tape, x)) {
    out.set_requires_grad(true);
    tape.record([x, out, mask, inv_keep]() mutable {
      if (!out.has_grad()) return;
      const T* dy = out.grad().data();
      T* dx = x.grad().data();
      for (std::size_t i = 0; i < x.numel(); ++i)
        if ((*mask)[i]) dx[i] += dy[i] * inv_keep;
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// conv2d (im2col + matmul; cross-correlation semantics)
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
std::vector<T>& conv_scratch() {
  thread_local std::vector<T> buf;
  return buf;
}

/// Lowers one (sample, group) input block into a [K x P] patch matrix,
/// K = Cg*kh*kw, P = Ho*Wo, with zero padding.
template <typename T>
void im2col(const T* src, std::size_t H, std::size_t W, std::size_t Cg,
            std::size_t kh, std::size_t kw, std::size_t stride,
            std::size_t pad, std::size_t Ho, std::size_t Wo, T* cols) {
  const std::size_t P = Ho * Wo;
  for (std::size_t c = 0; c < Cg; ++c) {
    const T* plane = src + c * H * W;
    for (std::size_t ky = 0; ky < kh; ++ky) {
      for (std::size_t kx = 0; kx < kw; ++kx) {
        T* row = cols + ((c * kh + ky) * kw + kx) * P;
        for (std::size_t oy = 0; oy < Ho; ++oy) {
          const std::ptrdiff_t iy =
              static_cast<std::ptrdiff_t>(oy * stride + ky) -
              static_cast<std::ptrdiff_t>(pad);
          const bool y_ok = iy >= 0 && iy < static_cast<std::ptrdiff_t>(H);
          for (std::size_t ox = 0; ox < Wo; ++ox) {
            const std::ptrdiff_t ix =
                static_cast<std::ptrdiff_t>(ox * stride + kx) -
                static_cast<std::ptrdiff_t>(pad);
            row[oy * Wo + ox] =
                (y_ok && ix >= 0 && ix < static_cast<std::ptrdiff_t>(W))
                    ? plane[iy * W + ix]
                    : T(0);
          }
        }
      }
    }
  }
}

/// Scatter-add of a [K x P] gradient matrix back onto the input block.
template <typename T>
void col2im_acc(const T* cols, std::size_t H, std::size_t W, std::size_t Cg,
                std::size_t kh, std::size_t kw, std::size_t stride,
                std::size_t pad, std::size_t Ho, std::size_t Wo, T* dst) {
  const std::size_t P = Ho * Wo;
  for (std::size_t c = 0; c < Cg; ++c) {
    T* plane = dst + c * H * W;
    for (std::size_t ky = 0; ky < kh; ++ky) {
      for (std::size_t kx = 0; kx < kw; ++kx) {
        const T* row = cols + ((c * kh + ky) * kw + kx) * P;
        for (std::size_t oy = 0; oy < Ho; ++oy) {
          const std::ptrdiff_t iy =
              static_cast<std::ptrdiff_t>(oy * stride + ky) -
              static_cast<std::ptrdiff_t>(pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
          for (std::size_t ox = 0; ox < Wo; ++ox) {
            const std::ptrdiff_t ix =
                static_cast<std::ptrdiff_t>(ox * stride + kx) -
                static_cast<std::ptrdiff_t>(pad);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) continue;
            plane[iy * W + ix] += row[oy * Wo + ox];
          }
        }
      }
    }
  }
}

}  // namespace detail

template <typename T>
Tensor<T> conv2d(Tape<T>& tape, const Tensor<T>& input, const Tensor<T>& weight,
                 std::size_t stride, std::size_t padding, std::size_t groups) {
  if (input.rank() != 4 || weight.rank() != 4)
    throw DimensionError("conv2d: want NCHW input and OIHW weight, got " +
                         shape_str(input.shape()) + " and " +
                         shape_str(weight.shape()));
  const std::size_t N = input.dim(0), C = input.dim(1), H = input.dim(2),
                    W = input.dim(3);
  const std::size_t O = weight.dim(0), Cg = weight.dim(1), kh = weight.dim(2),
                    kw = weight.dim(3);
  if (groups == 0 || stride == 0) throw ConfigError("conv2d: stride/groups must be >= 1");
  if (C % groups != 0 || O % groups != 0)
    throw ConfigError("conv2d: channels " + std::to_string(C) + "/" +
                      std::to_string(O) + " not divisible by groups " +
                      std::to_string(groups));
  if (Cg != C / groups)
    throw DimensionError("conv2d: weight expects " + std::to_string(Cg) +
                         " channels per group, input gives " +
                         std::to_string(C / groups));
  if (H + 2 * padding < kh || W + 2 * padding < kw)
    throw DimensionError("conv2d: kernel " + std::to_string(kh) + "x" +
                         std::to_string(kw) + " larger than padded input");
  const std::size_t Ho = (H + 2 * padding - kh) / stride + 1;
  const std::size_t Wo = (W + 2 * padding - kw) / stride + 1;
  const std::size_t Og = O / groups, K = Cg * kh * kw, P = Ho * Wo;

  auto out = Tensor<T>::zeros({N, O, Ho, Wo});
  auto& cols = detail::conv_scratch<T>();
  cols.resize(K * P);
  const T* pin = input.data().data();
  const T* pw = weight.data().data();
  T* po = out.data().data();
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t g = 0; g < groups; ++g) {
      detail::im2col(pin + (n * C + g * Cg) * H * W, H, W, Cg, kh, kw, stride,
                     padding, Ho, Wo, cols.data());
      gemm_nn(Og, K, P, pw + g * Og * K, cols.data(),
              po + (n * O + g * Og) * P);
    }
  }

  if (detail::want_grad(tape, input, weight)) {
    out.set_requires_grad(true);
    tape.record([input, weight, out, stride, padding, groups]() mutable {
      if (!out.has_grad()) return;
      const std::size_t N = input.dim(0), C = input.dim(1), H = input.dim(2),
                        W = input.dim(3);
      const std::size_t O = weight.dim(0), Cg = weight.dim(1),
                        kh = weight.dim(2), kw = weight.dim(3);
      const std::size_t Ho = out.dim(2), Wo = out.dim(3);
      const std::size_t Og = O / groups, K = Cg * kh * kw, P = Ho * Wo;
      auto& cols = detail::conv_scratch<T>();
      cols.resize(K * P);
      std::vector<T> dcols(K * P);
      const T* pin = input.data().data();
      const T* pw = weight.data().data();
      const T* dout = out.grad().data();
      T* din = input.requires_grad() ? input.grad().data() : nullptr;
      T* dw = weight.requires_grad() ? weight.grad().data() : nullptr;
      for (std::size_t n = 0; n < N; ++n) {
        for (std::size_t g = 0; g < groups; ++g) {
          const T* dblock = dout + (n * O + g * Og) * P;
          if (dw) {
            detail::im2col(pin + (n * C + g * Cg) * H * W, H, W, Cg, kh, kw,
                           stride, padding, Ho, Wo, cols.data());
            // dW += dOut * cols^T
            gemm_nt(Og, P, K, dblock, cols.data(), dw + g * Og * K);
          }
          if (din) {
            std::fill(dcols.begin(), dcols.end(), T(0));
            // dcols = W^T * dOut
            gemm_tn(K, Og, P, pw + g * Og * K, dblock, dcols.data());
            detail::col2im_acc(dcols.data(), H, W, Cg, kh, kw, stride, padding,
                               Ho, Wo, din + (n * C + g * Cg) * H * W);
          }
        }
      }
    });
  }
  return out;
}

}  // namespace fragmix
