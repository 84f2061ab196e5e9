#include <cmath>

#include "doctest.h"
#include "framescope/numerics.hpp"
#include "oracles.hpp"

using namespace framescope;

TEST_CASE("matmul: identity, dot product and triple-loop oracle") {
  const Tensor32 eye({2, 2}, {1, 0, 0, 1});
  const Tensor32 m({2, 2}, {3, 4, 5, 6});
  CHECK(matmul(eye, m) == m);

  const Tensor32 row({1, 2}, {1, 2});
  const Tensor32 col({2, 1}, {3, 4});
  CHECK(matmul(row, col)[0] == 11.0f);

  SplitMix64 rng(11);
  const auto a = oracle::random<float>(rng, {8, 8});
  const auto b = oracle::random<float>(rng, {8, 8});
  CHECK(oracle::max_abs_diff(matmul(a, b), oracle::matmul(a, b)) <= 1e-6);
}

TEST_CASE("matmul: shape error names both shapes") {
  const Tensor32 a({2, 3});
  const Tensor32 b({2, 3});
  try {
    matmul(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2,3]") != std::string::npos);
    CHECK(msg.find("vs B [2,3]") != std::string::npos);
  }
}

TEST_CASE("softmax_rows: closed forms, shift invariance, row sums") {
  const Tensor64 zeros({1, 2}, {0.0, 0.0});
  const Tensor64 s0 = softmax_rows(zeros);
  CHECK(s0[0] == doctest::Approx(0.5));
  CHECK(s0[1] == doctest::Approx(0.5));

  const Tensor64 s1 = softmax_rows(Tensor64({1, 2}, {std::log(2.0), 0.0}));
  CHECK(s1[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(s1[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));

  SplitMix64 rng(3);
  auto x = oracle::random<double>(rng, {1, 9}, -5, 5);
  auto shifted = x;
  for (double& v : shifted.data()) v += 7.0;
  CHECK(oracle::max_abs_diff(softmax_rows(x), softmax_rows(shifted)) < 1e-15);

  for (int trial = 0; trial < 20; ++trial) {
    const auto m32 = oracle::random<float>(rng, {7, 33}, -20, 20);
    const auto m64 = oracle::random<double>(rng, {7, 33}, -20, 20);
    const auto o32 = softmax_rows(m32);
    const auto o64 = softmax_rows(m64);
    for (std::size_t r = 0; r < 7; ++r) {
      double s32 = 0, s64 = 0;
      for (std::size_t c = 0; c < 33; ++c) {
        s32 += o32.at(r, c);
        s64 += o64.at(r, c);
      }
      CHECK(std::abs(s32 - 1.0) < 1e-6);
      CHECK(std::abs(s64 - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("adaptive_avg_pool2d: examples and invariants") {
  CHECK(adaptive_avg_pool2d(Tensor64::full({2, 5, 7}, 3.25), 3, 4) == Tensor64::full({2, 3, 4}, 3.25));

  Tensor64 ramp({1, 4, 4});
  for (std::size_t i = 0; i < 16; ++i) ramp[i] = double(i);
  CHECK(adaptive_avg_pool2d(ramp, 2, 2) == Tensor64({1, 2, 2}, {2.5, 4.5, 10.5, 12.5}));

  SplitMix64 rng(5);
  const auto x = oracle::random<double>(rng, {1, 14, 14});
  CHECK(oracle::max_abs_diff(adaptive_avg_pool2d(x, 12, 12), oracle::adaptive_pool(x, 12, 12)) < 1e-6);

  // Identity at full size.
  CHECK(adaptive_avg_pool2d(x, 14, 14) == x);

  // Global mean preserved for divisible grids.
  const auto y = oracle::random<double>(rng, {3, 12, 8});
  const auto pooled = adaptive_avg_pool2d(y, 4, 2);
  const double in_mean = std::accumulate(y.data().begin(), y.data().end(), 0.0) / y.numel();
  const double out_mean = std::accumulate(pooled.data().begin(), pooled.data().end(), 0.0) / pooled.numel();
  CHECK(std::abs(in_mean - out_mean) < 1e-6);

  CHECK_THROWS_AS(adaptive_avg_pool2d(x, 15, 2), UnsupportedUpsampleError);
}

TEST_CASE("pool_region matches floor/ceil formula for overlapping cells") {
  // 14 -> 12: cells overlap; cell 1 covers rows [1, 3).
  CHECK(pool_region(1, 14, 12) == std::pair<std::size_t, std::size_t>{1, 3});
  CHECK(pool_region(11, 14, 12) == std::pair<std::size_t, std::size_t>{12, 14});
  // 14 -> 7 splits evenly.
  CHECK(pool_region(3, 14, 7) == std::pair<std::size_t, std::size_t>{6, 8});
}

TEST_CASE("ffn_forward: zero params, GELU fixed point, per-token oracle") {
  const LinearParams<double> z1{Tensor64({3, 4}), Tensor64({4})};
  const LinearParams<double> z2{Tensor64({4, 2}), Tensor64({2})};
  SplitMix64 rng(8);
  const auto x = oracle::random<double>(rng, {2, 5, 3});
  CHECK(ffn_forward(x, z1, z2) == Tensor64({2, 5, 2}));
  CHECK(gelu(0.0) == 0.0);
  CHECK(gelu(0.0f) == 0.0f);

  const LinearParams<double> p1{oracle::random<double>(rng, {3, 4}), oracle::random<double>(rng, {4})};
  const LinearParams<double> p2{oracle::random<double>(rng, {4, 2}), oracle::random<double>(rng, {2})};
  const auto y = ffn_forward(x, p1, p2);
  for (std::size_t tok = 0; tok < 10; ++tok) {
    const std::vector<double> xt(x.data().begin() + tok * 3, x.data().begin() + tok * 3 + 3);
    const auto yt = oracle::ffn_token(xt, p1.weight, p1.bias, p2.weight, p2.bias);
    for (std::size_t j = 0; j < 2; ++j) CHECK(std::abs(y[tok * 2 + j] - yt[j]) < 1e-6);
  }

  CHECK_THROWS_AS(ffn_forward(oracle::random<double>(rng, {1, 2, 5}), p1, p2), ShapeError);
}

TEST_CASE("depthwise_conv3x3: zero kernel, delta kernel, direct oracle") {
  SplitMix64 rng(21);
  const auto x = oracle::random<double>(rng, {2, 5, 5});
  const ConvParams<double> zero{Tensor64({2, 3, 3}), Tensor64({2})};
  CHECK(depthwise_conv3x3(x, zero) == Tensor64({2, 5, 5}));

  ConvParams<double> delta{Tensor64({2, 3, 3}), Tensor64({2})};
  delta.kernel[4] = 1.0;
  delta.kernel[9 + 4] = 1.0;
  CHECK(depthwise_conv3x3(x, delta) == x);

  const ConvParams<double> p{oracle::random<double>(rng, {2, 3, 3}), oracle::random<double>(rng, {2})};
  CHECK(oracle::max_abs_diff(depthwise_conv3x3(x, p), oracle::depthwise_conv(x, p.kernel, p.bias)) < 1e-6);

  const ConvParams<double> three{Tensor64({3, 3, 3}), Tensor64({3})};
  CHECK_THROWS_AS(depthwise_conv3x3(x, three), ShapeError);
  CHECK_THROWS_AS((ConvParams<double>{Tensor64({2, 5, 5}), Tensor64({2})}.validate()), ShapeError);
}

TEST_CASE("backward: hand-computed linear gradient and constant path") {
  // y = x w + b = 2*3 + 1 = 7, L = y^2: dL/dw = 2 x y = 28, dL/db = 14, dL/dx = 2 y w = 42.
  const Tensor64 x({1, 1}, {2.0});
  const LinearParams<double> p{Tensor64({1, 1}, {3.0}), Tensor64({1}, {1.0})};
  const Tensor64 y = linear(x, p);
  REQUIRE(y[0] == 7.0);
  const auto g = linear_grad(x, p, Tensor64({1, 1}, {2.0 * y[0]}));
  CHECK(g.params.weight[0] == 28.0);
  CHECK(g.params.bias[0] == 14.0);
  CHECK(g.input[0] == 42.0);

  // With x = 0 the output does not depend on W.
  const Tensor64 zero_x({3, 2});
  SplitMix64 rng(1);
  const LinearParams<double> q{oracle::random<double>(rng, {2, 4}), oracle::random<double>(rng, {4})};
  const auto yz = linear(zero_x, q);
  auto up = yz;
  for (double& v : up.data()) v *= 2;
  CHECK(linear_grad(zero_x, q, up).params.weight == Tensor64({2, 4}));
}

TEST_CASE("backward: every kernel matches central differences over 20 seeds") {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SplitMix64 rng(1000 + seed);

    auto a = oracle::random<double>(rng, {3, 4});
    auto b = oracle::random<double>(rng, {4, 2});
    {
      auto up = matmul(a, b);
      for (double& v : up.data()) v *= 2;
      const auto g = matmul_grad(a, b, up);
      auto loss = [&] { return oracle::sum_sq(oracle::matmul(a, b)); };
      worst = std::max({worst, oracle::rel_error(g.a, oracle::central_diff(a, loss)),
                        oracle::rel_error(g.b, oracle::central_diff(b, loss))});
    }

    auto x = oracle::random<double>(rng, {2, 3, 3});
    LinearParams<double> p1{oracle::random<double>(rng, {3, 5}), oracle::random<double>(rng, {5})};
    LinearParams<double> p2{oracle::random<double>(rng, {5, 2}), oracle::random<double>(rng, {2})};
    {
      auto up = ffn_forward(x, p1, p2);
      for (double& v : up.data()) v *= 2;
      const auto g = ffn_grad(x, p1, p2, up);
      auto loss = [&] {
        double s = 0;
        for (std::size_t tok = 0; tok < 6; ++tok) {
          const std::vector<double> xt(x.data().begin() + tok * 3, x.data().begin() + tok * 3 + 3);
          for (double v : oracle::ffn_token(xt, p1.weight, p1.bias, p2.weight, p2.bias)) s += v * v;
        }
        return s;
      };
      worst = std::max({worst, oracle::rel_error(g.input, oracle::central_diff(x, loss)),
                        oracle::rel_error(g.p1.weight, oracle::central_diff(p1.weight, loss)),
                        oracle::rel_error(g.p1.bias, oracle::central_diff(p1.bias, loss)),
                        oracle::rel_error(g.p2.weight, oracle::central_diff(p2.weight, loss)),
                        oracle::rel_error(g.p2.bias, oracle::central_diff(p2.bias, loss))});
    }

    auto img = oracle::random<double>(rng, {2, 7, 6});
    {
      auto up = adaptive_avg_pool2d(img, 5, 4);
      for (double& v : up.data()) v *= 2;
      auto loss = [&] { return oracle::sum_sq(oracle::adaptive_pool(img, 5, 4)); };
      worst = std::max(worst, oracle::rel_error(pool_grad(img.shape(), up), oracle::central_diff(img, loss)));
    }

    ConvParams<double> cp{oracle::random<double>(rng, {2, 3, 3}), oracle::random<double>(rng, {2})};
    {
      auto up = depthwise_conv3x3(img, cp);
      for (double& v : up.data()) v *= 2;
      const auto g = conv_grad(img, cp, up);
      auto loss = [&] { return oracle::sum_sq(oracle::depthwise_conv(img, cp.kernel, cp.bias)); };
      worst = std::max({worst, oracle::rel_error(g.input, oracle::central_diff(img, loss)),
                        oracle::rel_error(g.params.kernel, oracle::central_diff(cp.kernel, loss)),
                        oracle::rel_error(g.params.bias, oracle::central_diff(cp.bias, loss))});
    }
  }
  INFO("worst relative error " << worst);
  CHECK(worst < 1e-4);
}

TEST_CASE("forward kernels are bitwise deterministic") {
  SplitMix64 rng(99);
  const auto x = oracle::random<float>(rng, {1, 6, 8});
  const LinearParams<float> p1{oracle::random<float>(rng, {8, 5}), oracle::random<float>(rng, {5})};
  const LinearParams<float> p2{oracle::random<float>(rng, {5, 4}), oracle::random<float>(rng, {4})};
  CHECK(ffn_forward(x, p1, p2).identical(ffn_forward(x, p1, p2)));
  const auto img = oracle::random<float>(rng, {3, 9, 9});
  CHECK(adaptive_avg_pool2d(img, 4, 5).identical(adaptive_avg_pool2d(img, 4, 5)));
}

TEST_CASE("MAC counter counts exactly what the formulas say") {
  SplitMix64 rng(4);
  const auto a = oracle::random<float>(rng, {3, 5});
  const auto b = oracle::random<float>(rng, {5, 7});
  reset_mac_counter();
  matmul(a, b);
  CHECK(mac_count() == 3 * 5 * 7);

  // In-bounds taps, counted by brute force.
  for (std::size_t h : {1, 2, 5}) {
    for (std::size_t w : {1, 3, 4}) {
      std::uint64_t taps = 0;
      for (long i = 0; i < long(h); ++i)
        for (long j = 0; j < long(w); ++j)
          for (long di = -1; di <= 1; ++di)
            for (long dj = -1; dj <= 1; ++dj)
              if (i + di >= 0 && i + di < long(h) && j + dj >= 0 && j + dj < long(w)) ++taps;
      const Tensor32 x({2, h, w});
      const ConvParams<float> p{Tensor32({2, 3, 3}), Tensor32({2})};
      reset_mac_counter();
      depthwise_conv3x3(x, p);
      CHECK(mac_count() == 2 * taps);
      CHECK(conv3x3_macs(2, h, w) == 2 * taps);
    }
  }

  reset_mac_counter();
  adaptive_avg_pool2d(Tensor32({4, 14, 14}), 7, 7);
  CHECK(mac_count() == 4 * 49);
}

TEST_CASE("tensor invariants") {
  CHECK_THROWS_AS(Tensor32({2, 0}), ShapeError);
  CHECK_THROWS_AS(Tensor32({2, 2}, {1, 2, 3}), ShapeError);
  CHECK_THROWS_AS(Tensor32({4}).reshaped({3}), ShapeError);
  Tensor32 t({2});
  CHECK(t.all_finite());
  t[1] = std::nanf("");
  CHECK_FALSE(t.all_finite());
}
