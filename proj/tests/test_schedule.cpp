// Copyright 2026 The Locodiff Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "locodiff/schedule.hpp"

#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <set>

#include "locodiff/rng.hpp"

using namespace locodiff;

TEST_CASE("linear schedule endpoints and spacing") {
  const auto s = NoiseSchedule::linear(60, 1e-4, 0.02);
  CHECK(s.num_steps() == 60);
  CHECK(s.beta(1) == doctest::Approx(1e-4).epsilon(1e-15));
  CHECK(s.beta(60) == doctest::Approx(0.02).epsilon(1e-15));
  // Frozen arithmetic oracle: (0.02 - 1e-4) / 59.
  const double spacing = 0.00033728813559322034;
  for (int t = 1; t < 60; ++t) {
    CHECK(s.beta(t + 1) - s.beta(t) == doctest::Approx(spacing).epsilon(1e-9));
  }
}

TEST_CASE("alpha_bar matches an independent cumulative product to 1e-12") {
  const auto s = NoiseSchedule::linear(60, 1e-4, 0.02);
  long double running = 1.0L;
  for (int t = 1; t <= 60; ++t) {
    const long double beta = 1e-4L + (0.02L - 1e-4L) * (t - 1) / 59.0L;
    running *= (1.0L - beta);
    CHECK(std::abs(s.alpha_bar(t) - static_cast<double>(running)) < 1e-12);
  }
  // Frozen from the long-double oracle.
  CHECK(s.alpha_bar(60) == doctest::Approx(0.54493157804203184).epsilon(1e-12));
}

TEST_CASE("schedule invariants: monotone betas, decreasing alpha_bars") {
  const auto s = NoiseSchedule::linear(60, 1e-4, 0.02);
  CHECK(s.alpha_bar(0) == 1.0);
  for (int t = 1; t <= 60; ++t) {
    CHECK(s.beta(t) > 0.0);
    CHECK(s.beta(t) < 1.0);
    CHECK(s.alpha_bar(t) > 0.0);
    CHECK(s.alpha_bar(t) < 1.0);
    CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
    if (t > 1) CHECK(s.beta(t) > s.beta(t - 1));
  }
  CHECK(s.alpha_bar(60) < s.alpha_bar(1));
}

TEST_CASE("schedule rejects invalid ranges") {
  CHECK_THROWS_AS(NoiseSchedule::linear(0, 1e-4, 0.02), std::invalid_argument);
  CHECK_THROWS_AS(NoiseSchedule::linear(10, 0.0, 0.02), std::invalid_argument);
  CHECK_THROWS_AS(NoiseSchedule::linear(10, 0.03, 0.02), std::invalid_argument);
  CHECK_THROWS_AS(NoiseSchedule::linear(10, 1e-4, 1.0), std::invalid_argument);
  const auto s = NoiseSchedule::linear(10, 1e-4, 0.02);
  CHECK_THROWS_AS(s.beta(0), std::out_of_range);
  CHECK_THROWS_AS(s.beta(11), std::out_of_range);
}

TEST_CASE("forward_noise edge cases") {
  const auto s = NoiseSchedule::linear(60, 1e-4, 0.02);
  const std::vector<double> a0{0.3, -0.5, 0.8};
  const std::vector<double> zero(3, 0.0);
  SUBCASE("eps = 0 gives sqrt(alpha_bar) * a0") {
    const auto out = forward_noise(a0, 30, zero, s);
    const double c = std::sqrt(s.alpha_bar(30));
    for (int i = 0; i < 3; ++i) CHECK(out[i] == doctest::Approx(c * a0[i]).epsilon(1e-15));
  }
  SUBCASE("a0 = 0 gives sqrt(1 - alpha_bar) * eps") {
    const std::vector<double> eps{1.0, -2.0, 0.5};
    const auto out = forward_noise(zero, 30, eps, s);
    const double c = std::sqrt(1.0 - s.alpha_bar(30));
    for (int i = 0; i < 3; ++i) CHECK(out[i] == doctest::Approx(c * eps[i]).epsilon(1e-15));
  }
  SUBCASE("t out of range rejected") {
    CHECK_THROWS_AS(forward_noise(a0, 0, zero, s), std::out_of_range);
    CHECK_THROWS_AS(forward_noise(a0, 61, zero, s), std::out_of_range);
  }
  SUBCASE("length preserved and affine in both arguments") {
    Rng rng(4);
    std::vector<double> eps(3), a(3), b(3);
    for (auto& v : eps) v = rng.normal();
    for (auto& v : a) v = rng.normal();
    for (auto& v : b) v = rng.normal();
    const auto fa = forward_noise(a, 15, eps, s);
    const auto fb = forward_noise(b, 15, eps, s);
    std::vector<double> mix(3);
    for (int i = 0; i < 3; ++i) mix[i] = 0.25 * a[i] + 0.75 * b[i];
    const auto fmix = forward_noise(mix, 15, eps, s);
    for (int i = 0; i < 3; ++i) {
      // affine in a0 for fixed eps: f(mix) = 0.25 f(a) + 0.75 f(b)
      CHECK(fmix[i] == doctest::Approx(0.25 * fa[i] + 0.75 * fb[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("forward_noise Monte-Carlo moments at t = 30") {
  const auto s = NoiseSchedule::linear(60, 1e-4, 0.02);
  const std::vector<double> a0{0.3, -0.5, 0.8, -0.1, 0.25, -0.7};
  const int n = 100000;
  Rng rng(2025);
  std::vector<double> sum(6, 0.0), sum2(6, 0.0);
  std::vector<double> eps(6);
  for (int i = 0; i < n; ++i) {
    for (auto& e : eps) e = rng.normal();
    const auto at = forward_noise(a0, 30, eps, s);
    for (int d = 0; d < 6; ++d) {
      sum[d] += at[d];
      sum2[d] += at[d] * at[d];
    }
  }
  const double ab = s.alpha_bar(30);
  const double sigma = std::sqrt(1.0 - ab);
  const double mean_tol = 3.0 * sigma / std::sqrt(static_cast<double>(n));
  for (int d = 0; d < 6; ++d) {
    const double mean = sum[d] / n;
    const double var = sum2[d] / n - mean * mean;
    CHECK(std::abs(mean - std::sqrt(ab) * a0[d]) < mean_tol);
    CHECK(std::abs(var - (1.0 - ab)) < 0.02 * (1.0 - ab));
  }
}

TEST_CASE("sinusoidal embedding layout and values") {
  SUBCASE("t = 0: sin half zero, cos half one") {
    const auto e = sinusoidal_embedding(0, 128);
    REQUIRE(e.size() == 128);
    for (int i = 0; i < 64; ++i) CHECK(e[i] == 0.0);
    for (int i = 64; i < 128; ++i) CHECK(e[i] == 1.0);
  }
  SUBCASE("t = 1 entry 0 is sin(1)") {
    const auto e = sinusoidal_embedding(1, 128);
    CHECK(e[0] == doctest::Approx(0.8414709848078965).epsilon(1e-15));
    CHECK(e[64] == doctest::Approx(std::cos(1.0)).epsilon(1e-15));
  }
  SUBCASE("all entries within [-1, 1] for many t") {
    for (int t = 0; t <= 200; t += 7) {
      for (double v : sinusoidal_embedding(t, 128)) {
        CHECK(v >= -1.0);
        CHECK(v <= 1.0);
      }
    }
  }
  SUBCASE("odd dim rejected") {
    CHECK_THROWS_AS(sinusoidal_embedding(1, 127), std::invalid_argument);
    CHECK_THROWS_AS(sinusoidal_embedding(-1, 128), std::invalid_argument);
  }
}

TEST_CASE("embeddings are pairwise distinct across t = 0..60") {
  std::vector<std::vector<double>> embs;
  for (int t = 0; t <= 60; ++t) embs.push_back(sinusoidal_embedding(t, 128));
  for (std::size_t i = 0; i < embs.size(); ++i) {
    for (std::size_t j = i + 1; j < embs.size(); ++j) {
      double dist2 = 0.0;
      for (int d = 0; d < 128; ++d) {
        const double diff = embs[i][d] - embs[j][d];
        dist2 += diff * diff;
      }
      CHECK(dist2 > 0.0);
    }
  }
}
