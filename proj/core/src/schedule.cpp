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

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace locodiff {

NoiseSchedule NoiseSchedule::linear(int num_steps, double beta_start, double beta_end) {
  if (num_steps < 1) {
    throw std::invalid_argument("NoiseSchedule: num_steps must be >= 1");
  }
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
    std::ostringstream os;
    os << "NoiseSchedule: need 0 < beta_start <= beta_end < 1, got ["
       << beta_start << ", " << beta_end << "]";
    throw std::invalid_argument(os.str());
  }

  NoiseSchedule s;
  s.beta_start_ = beta_start;
  s.beta_end_ = beta_end;
  s.betas_.resize(num_steps);
  s.alphas_.resize(num_steps);
  s.alpha_bars_.resize(num_steps);
  double running = 1.0;
  for (int t = 1; t <= num_steps; ++t) {
    const double frac =
        num_steps == 1 ? 0.0 : static_cast<double>(t - 1) / (num_steps - 1);
    const double beta = beta_start + (beta_end - beta_start) * frac;
    s.betas_[t - 1] = beta;
    s.alphas_[t - 1] = 1.0 - beta;
    running *= s.alphas_[t - 1];
    s.alpha_bars_[t - 1] = running;
  }
  return s;
}

int NoiseSchedule::check(int t) const {
  if (t < 1 || t > num_steps()) {
    std::ostringstream os;
    os << "NoiseSchedule: step " << t << " outside [1, " << num_steps() << "]";
    throw std::out_of_range(os.str());
  }
  return t;
}

double NoiseSchedule::alpha_bar(int t) const {
  if (t == 0) return 1.0;
  return alpha_bars_[check(t) - 1];
}

std::vector<double> forward_noise(std::span<const double> a0, int t,
                                  std::span<const double> eps,
                                  const NoiseSchedule& schedule) {
  if (eps.size() != a0.size()) {
    throw std::invalid_argument("forward_noise: eps length must match a0");
  }
  if (t < 1 || t > schedule.num_steps()) {
    std::ostringstream os;
    os << "forward_noise: step " << t << " outside [1, " << schedule.num_steps() << "]";
    throw std::out_of_range(os.str());
  }
  const double ab = schedule.alpha_bar(t);
  const double signal = std::sqrt(ab);
  const double noise = std::sqrt(1.0 - ab);
  std::vector<double> out(a0.size());
  for (std::size_t i = 0; i < a0.size(); ++i) {
    out[i] = signal * a0[i] + noise * eps[i];
  }
  return out;
}

std::vector<double> sinusoidal_embedding(int t, int dim) {
  if (dim < 2 || dim % 2 != 0) {
    throw std::invalid_argument("sinusoidal_embedding: dim must be even and >= 2");
  }
  if (t < 0) {
    throw std::invalid_argument("sinusoidal_embedding: t must be >= 0");
  }
  const int half = dim / 2;
  std::vector<double> out(dim);
  for (int i = 0; i < half; ++i) {
    const double freq = std::pow(10000.0, -2.0 * i / dim);
    const double arg = static_cast<double>(t) * freq;
    out[i] = std::sin(arg);
    out[half + i] = std::cos(arg);
  }
  return out;
}

}  // namespace locodiff
