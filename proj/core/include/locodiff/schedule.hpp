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

#ifndef LOCODIFF_SCHEDULE_HPP_
#define LOCODIFF_SCHEDULE_HPP_

#include <span>
#include <vector>

namespace locodiff {

// Linear-beta noise schedule. beta_t runs over t = 1..T, equally spaced from
// beta_start to beta_end inclusive; alpha_t = 1 - beta_t and
// alpha_bar_t = prod_{s<=t} alpha_s, with the convention alpha_bar(0) = 1
// ("t = 0 is noiseless data"). Immutable after construction.
class NoiseSchedule {
 public:
  static constexpr int kDefaultSteps = 60;
  static constexpr double kDefaultBetaStart = 1e-4;
  static constexpr double kDefaultBetaEnd = 0.02;

  static NoiseSchedule linear(int num_steps = kDefaultSteps,
                              double beta_start = kDefaultBetaStart,
                              double beta_end = kDefaultBetaEnd);

  int num_steps() const { return static_cast<int>(betas_.size()); }
  double beta_start() const { return beta_start_; }
  double beta_end() const { return beta_end_; }

  // t is 1-based, 1 <= t <= num_steps().
  double beta(int t) const { return betas_[check(t) - 1]; }
  double alpha(int t) const { return alphas_[check(t) - 1]; }

  // Valid for 0 <= t <= num_steps(); alpha_bar(0) == 1.
  double alpha_bar(int t) const;

 private:
  NoiseSchedule() = default;
  int check(int t) const;

  double beta_start_ = 0.0;
  double beta_end_ = 0.0;
  std::vector<double> betas_;
  std::vector<double> alphas_;
  std::vector<double> alpha_bars_;
};

// Closed-form forward noising:
// a_t = sqrt(alpha_bar_t) a0 + sqrt(1 - alpha_bar_t) eps.
std::vector<double> forward_noise(std::span<const double> a0, int t,
                                  std::span<const double> eps,
                                  const NoiseSchedule& schedule);

// Sinusoidal diffusion-step embedding, concatenated layout:
// out[i]         = sin(t / 10000^(2i/dim))   for i in [0, dim/2)
// out[dim/2 + i] = cos(t / 10000^(2i/dim))
// dim must be even, t >= 0. Every entry lies in [-1, 1].
std::vector<double> sinusoidal_embedding(int t, int dim = 128);

}  // namespace locodiff

#endif  // LOCODIFF_SCHEDULE_HPP_
