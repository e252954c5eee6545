// Copyright 2026 The fragmix authors.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "fragmix/adam.hpp"
#include "fragmix/ops.hpp"
#include "fragmix/rng.hpp"
#include "fragmix/tensor.hpp"
#include "support/oracles.hpp"

using namespace fragmix;

namespace {

template <typename T>
Tensor<T> random_tensor(Shape shape, Rng& rng, double lo = -1.0,
                        double hi = 1.0, bool grad = true) {
  auto t = Tensor<T>::zeros(std::move(shape));
  for (auto& v : t.data()) v = static_cast<T>(rng.uniform(lo, hi));
  t.set_requires_grad(grad);
  return t;
}

bool all_finite(std::span<const float> xs) {
  for (float x : xs)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace

TEST_CASE("tensor basics and invariants") {
  auto t = Tensor<float>::from({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t.numel() == 6);
  CHECK(t.dim(0) == 2);
  CHECK(t.grad().size() == t.numel());
  CHECK_THROWS_AS(Tensor<float>::from({2, 2}, {1, 2, 3}), DimensionError);
  CHECK_THROWS_AS(Tensor<float>::from({3}, {1, 2, 3}).item(), DimensionError);
}

TEST_CASE("matmul identity and small product") {
  Tape<float> tape;
  auto i2 = Tensor<float>::from({2, 2}, {1, 0, 0, 1});
  auto b = Tensor<float>::from({2, 2}, {3, 4, 5, 6});
  auto c = matmul(tape, i2, b);
  CHECK(c.data()[0] == 3);
  CHECK(c.data()[1] == 4);
  CHECK(c.data()[2] == 5);
  CHECK(c.data()[3] == 6);

  auto a = Tensor<float>::from({1, 2}, {1, 2});
  auto v = Tensor<float>::from({2, 1}, {3, 4});
  CHECK(matmul(tape, a, v).item() == 11);
}

TEST_CASE("matmul shape error names both shapes") {
  Tape<float> tape;
  auto a = Tensor<float>::zeros({2, 3});
  auto b = Tensor<float>::zeros({4, 2});
  try {
    matmul(tape, a, b);
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
    CHECK(msg.find("[4x2]") != std::string::npos);
  }
}

TEST_CASE("matmul forward equals naive triple loop") {
  Rng rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t m = 3 + trial, k = 2 + trial, n = 4;
    auto a = random_tensor<float>({m, k}, rng);
    auto b = random_tensor<float>({k, n}, rng);
    Tape<float> tape;
    auto c = matmul(tape, a, b);
    auto ref = oracles::naive_matmul(m, k, n, a.data().data(), b.data().data());
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(c.data()[i] == ref[i]);
  }
}

TEST_CASE("matmul backward matches finite differences") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    auto a = random_tensor<double>({4, 5}, rng);
    auto b = random_tensor<double>({5, 3}, rng);
    auto w = random_tensor<double>({4, 3}, rng, -1.0, 1.0, false);
    auto run = [&](Tape<double>& tape) {
      return mean(tape, mul(tape, matmul(tape, a, b), w));
    };
    Tape<double> tape;
    tape.backward(run(tape));
    const double err = oracles::fd_max_rel_err({a, b}, [&]() {
      Tape<double> t2;
      t2.set_recording(false);
      return run(t2).item();
    });
    CHECK(err < 1e-4);
  }
}

TEST_CASE("conv2d ones kernel sums a ones patch") {
  Tape<float> tape;
  auto in = Tensor<float>::ones({1, 1, 3, 3});
  auto w = Tensor<float>::ones({1, 1, 3, 3});
  auto out = conv2d(tape, in, w, 1, 0, 1);
  CHECK(out.shape() == Shape{1, 1, 1, 1});
  CHECK(out.item() == 9.0f);
}

TEST_CASE("depthwise conv output channels depend only on their own input") {
  Rng rng(7);
  auto in = random_tensor<float>({1, 2, 5, 5}, rng, -1, 1, false);
  auto w = random_tensor<float>({2, 1, 3, 3}, rng, -1, 1, false);
  Tape<float> tape;
  auto full = conv2d(tape, in, w, 1, 1, 2);
  auto zeroed = Tensor<float>::from(in.shape(),
                                    {in.data().begin(), in.data().end()});
  for (std::size_t i = 0; i < 25; ++i) zeroed.data()[i] = 0.0f;  // channel 0
  auto out2 = conv2d(tape, zeroed, w, 1, 1, 2);
  const std::size_t plane = full.dim(2) * full.dim(3);
  for (std::size_t i = 0; i < plane; ++i) {
    CHECK(out2.data()[i] == 0.0f);                       // channel 0 killed
    CHECK(out2.data()[plane + i] == full.data()[plane + i]);  // 1 untouched
  }
}

TEST_CASE("conv2d forward equals naive six-loop oracle") {
  Rng rng(23);
  struct Case {
    std::size_t N, C, H, W, O, k, stride, pad, groups;
  };
  for (const Case& c : {Case{2, 3, 5, 5, 4, 3, 1, 1, 1},
                        Case{1, 4, 6, 6, 4, 3, 2, 1, 4},
                        Case{2, 4, 5, 4, 6, 3, 1, 0, 2},
                        Case{1, 2, 7, 5, 2, 1, 2, 0, 1}}) {
    auto in = random_tensor<float>({c.N, c.C, c.H, c.W}, rng, -1, 1, false);
    auto w = random_tensor<float>({c.O, c.C / c.groups, c.k, c.k}, rng, -1, 1,
                                  false);
    Tape<float> tape;
    auto out = conv2d(tape, in, w, c.stride, c.pad, c.groups);
    auto ref = oracles::naive_conv2d(
        std::vector<float>(in.data().begin(), in.data().end()), c.N, c.C, c.H,
        c.W, std::vector<float>(w.data().begin(), w.data().end()), c.O, c.k,
        c.k, c.stride, c.pad, c.groups);
    REQUIRE(out.numel() == ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(out.data()[i] == ref[i]);
  }
}

TEST_CASE("conv2d backward matches finite differences") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed * 31);
    auto in = random_tensor<double>({2, 3, 5, 5}, rng);
    auto w = random_tensor<double>({4, 3, 3, 3}, rng);
    auto coef = random_tensor<double>({2, 4, 5, 5}, rng, -1, 1, false);
    auto run = [&](Tape<double>& tape) {
      return mean(tape, mul(tape, conv2d(tape, in, w, 1, 1, 1), coef));
    };
    Tape<double> tape;
    tape.backward(run(tape));
    const double err = oracles::fd_max_rel_err({in, w}, [&]() {
      Tape<double> t2;
      t2.set_recording(false);
      return run(t2).item();
    });
    CHECK(err < 1e-4);
  }
}

TEST_CASE("depthwise + strided conv backward matches finite differences") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed * 101);
    auto in = random_tensor<double>({1, 4, 6, 6}, rng);
    auto w = random_tensor<double>({4, 1, 3, 3}, rng);
    auto coef = random_tensor<double>({1, 4, 3, 3}, rng, -1, 1, false);
    auto run = [&](Tape<double>& tape) {
      return mean(tape, mul(tape, conv2d(tape, in, w, 2, 1, 4), coef));
    };
    Tape<double> tape;
    tape.backward(run(tape));
    const double err = oracles::fd_max_rel_err({in, w}, [&]() {
      Tape<double> t2;
      t2.set_recording(false);
      return run(t2).item();
    });
    CHECK(err < 1e-4);
  }
}

TEST_CASE("conv2d rejects bad group configuration") {
  Tape<float> tape;
  auto in = Tensor<float>::zeros({1, 3, 4, 4});
  auto w = Tensor<float>::zeros({2, 1, 3, 3});
  CHECK_THROWS_AS(conv2d(tape, in, w, 1, 1, 2), ConfigError);
}

TEST_CASE("elementwise examples") {
  Tape<float> tape;
  auto v = Tensor<float>::from({2}, {3, 4});
  auto n = l2_normalize(tape, v, 0);
  CHECK(n.data()[0] == doctest::Approx(0.6));
  CHECK(n.data()[1] == doctest::Approx(0.8));

  auto s = softmax(tape, Tensor<float>::from({2}, {0, 0}), 0);
  CHECK(s.data()[0] == doctest::Approx(0.5));
  CHECK(s.data()[1] == doctest::Approx(0.5));

  auto z = l2_normalize(tape, Tensor<float>::from({2}, {0, 0}), 0, 1e-12f);
  CHECK(z.data()[0] == 0.0f);
  CHECK(z.data()[1] == 0.0f);
}

TEST_CASE("broadcast add and mul: scalar and trailing dimension") {
  Tape<float> tape;
  auto a = Tensor<float>::from({2, 3}, {1, 2, 3, 4, 5, 6});
  auto row = Tensor<float>::from({3}, {10, 20, 30});
  auto sum = add(tape, a, row);
  CHECK(sum.data()[0] == 11);
  CHECK(sum.data()[5] == 36);
  auto c = Tensor<float>::scalar(2.0f);
  auto prod = mul(tape, a, c);
  CHECK(prod.data()[4] == 10);
  // commuted order broadcasts the same way
  auto prod2 = mul(tape, c, a);
  CHECK(prod2.data()[4] == 10);
  auto bad = Tensor<float>::from({2}, {1, 2});
  CHECK_THROWS_AS(add(tape, a, bad), DimensionError);
}

TEST_CASE("broadcast backward accumulates over the repeated axis") {
  Rng rng(5);
  auto a = random_tensor<double>({3, 4}, rng);
  auto b = random_tensor<double>({4}, rng);
  auto w = random_tensor<double>({3, 4}, rng, -1, 1, false);
  auto run = [&](Tape<double>& tape) {
    return mean(tape, mul(tape, add(tape, a, b), w));
  };
  Tape<double> tape;
  tape.backward(run(tape));
  const double err = oracles::fd_max_rel_err({a, b}, [&]() {
    Tape<double> t2;
    t2.set_recording(false);
    return run(t2).item();
  });
  CHECK(err < 1e-4);
}

TEST_CASE("layer_norm trivial values") {
  Tape<float> tape;
  auto g = Tensor<float>::ones({3});
  auto b = Tensor<float>::zeros({3});
  auto y = layer_norm(tape, Tensor<float>::from({3}, {1, 1, 1}), 0, g, b, 1e-5f);
  for (float v : y.data()) CHECK(v == doctest::Approx(0.0f));

  auto g2 = Tensor<float>::ones({2});
  auto b2 = Tensor<float>::zeros({2});
  auto y2 =
      layer_norm(tape, Tensor<float>::from({2}, {1, 3}), 0, g2, b2, 1e-12f);
  CHECK(y2.data()[0] == doctest::Approx(-1.0f).epsilon(1e-5));
  CHECK(y2.data()[1] == doctest::Approx(1.0f).epsilon(1e-5));

  CHECK_THROWS_AS(
      layer_norm(tape, Tensor<float>::from({2}, {1, 3}), 0, g2, b2, 0.0f),
      ConfigError);
}

TEST_CASE("layer_norm backward matches finite differences") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed * 13);
    auto x = random_tensor<double>({2, 8}, rng);
    auto g = random_tensor<double>({8}, rng, 0.5, 1.5);
    auto b = random_tensor<double>({8}, rng, -0.5, 0.5);
    auto w = random_tensor<double>({2, 8}, rng, -1, 1, false);
    auto run = [&](Tape<double>& tape) {
      return mean(tape, mul(tape, layer_norm(tape, x, 1, g, b, 1e-6), w));
    };
    Tape<double> tape;
    tape.backward(run(tape));
    const double err = oracles::fd_max_rel_err({x, g, b}, [&]() {
      Tape<double> t2;
      t2.set_recording(false);
      return run(t2).item();
    });
    CHECK(err < 1e-4);
  }
}

TEST_CASE("softmax, log, square, relu, l2_normalize gradients") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed * 17);
    auto x = random_tensor<double>({2, 5}, rng);
    // keep relu inputs away from the kink
    for (auto& v : x.data()) v += (v >= 0 ? 0.1 : -0.1);
    auto w = random_tensor<double>({2, 5}, rng, -1, 1, false);

    auto check = [&](auto graph) {
      Tape<double> tape;
      tape.backward(graph(tape));
      x.zero_grad();
      Tape<double> t2;
      t2.backward(graph(t2));
      const double err = oracles::fd_max_rel_err({x}, [&]() {
        Tape<double> t3;
        t3.set_recording(false);
        return graph(t3).item();
      });
      CHECK(err < 1e-4);
      x.zero_grad();
    };

    check([&](Tape<double>& t) { return mean(t, mul(t, softmax(t, x, 1), w)); });
    check([&](Tape<double>& t) {
      return mean(t, mul(t, l2_normalize(t, x, 1, 1e-12), w));
    });
    check([&](Tape<double>& t) { return mean(t, mul(t, square(t, x), w)); });
    check([&](Tape<double>& t) { return mean(t, mul(t, relu(t, x), w)); });
    check([&](Tape<double>& t) {
      return mean(t, mul(t, fragmix::log(t, square(t, add(t, x, Tensor<double>::scalar(3.0)))), w));
    });
    check([&](Tape<double>& t) { return mean(t, scale(t, x, 2.5)); });
  }
}

TEST_CASE("shared input accumulates gradient from both consumers") {
  Rng rng(3);
  auto x = random_tensor<double>({3, 3}, rng);
  auto w1 = random_tensor<double>({3, 3}, rng, -1, 1, false);
  auto w2 = random_tensor<double>({3, 3}, rng, -1, 1, false);
  auto run = [&](Tape<double>& tape) {
    auto y1 = matmul(tape, x, w1);
    auto y2 = matmul(tape, w2, x);
    return mean(tape, add(tape, y1, y2));
  };
  Tape<double> tape;
  tape.backward(run(tape));
  const double err = oracles::fd_max_rel_err({x}, [&]() {
    Tape<double> t2;
    t2.set_recording(false);
    return run(t2).item();
  });
  CHECK(err < 1e-4);
}

TEST_CASE("axis out of range raises a dimension error") {
  Tape<float> tape;
  auto x = Tensor<float>::zeros({2, 3});
  CHECK_THROWS_AS(softmax(tape, x, 2), DimensionError);
  CHECK_THROWS_AS(l2_normalize(tape, x, 5), DimensionError);
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  auto w = Tensor<float>::from({2}, {1.0f, -2.0f});
  w.set_requires_grad(true);
  Adam<float> opt({w}, 0.1f);
  w.grad();  // allocate zeros
  opt.step();
  CHECK(w.data()[0] == 1.0f);
  CHECK(w.data()[1] == -2.0f);
}

TEST_CASE("adam: one step on w^2 descends") {
  auto w = Tensor<float>::scalar(1.0f);
  w.set_requires_grad(true);
  Adam<float> opt({w}, 0.1f);
  Tape<float> tape;
  auto loss = mean(tape, square(tape, w));
  tape.backward(loss);
  opt.step();
  CHECK(w.data()[0] < 1.0f);
  CHECK_THROWS_AS(Adam<float>({w}, 0.0f), ConfigError);
}

TEST_CASE("adam: 200 steps minimize a 2-d convex quadratic") {
  auto w = Tensor<double>::from({2}, {1.0, -1.0});
  w.set_requires_grad(true);
  auto coef = Tensor<double>::from({2}, {1.0, 2.0});
  Adam<double> opt({w}, 0.05);
  double loss_val = 1e9;
  for (int step = 0; step < 200; ++step) {
    opt.zero_grad();
    Tape<double> tape;
    auto loss = mean(tape, mul(tape, square(tape, w), coef));
    tape.backward(loss);
    opt.step();
    loss_val = loss.item();
  }
  CHECK(loss_val < 1e-3);
}

TEST_CASE("values stay finite through a composite forward/backward pass") {
  Rng rng(41);
  auto x = random_tensor<float>({2, 4, 6, 6}, rng);
  auto w = random_tensor<float>({4, 4, 3, 3}, rng);
  Tape<float> tape;
  auto y = relu(tape, conv2d(tape, x, w, 1, 1, 1));
  auto loss = mean(tape, square(tape, y));
  tape.backward(loss);
  CHECK(all_finite(y.data()));
  CHECK(all_finite(x.grad()));
  CHECK(all_finite(w.grad()));
}
