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

#ifndef LOCODIFF_ENV_HPP_
#define LOCODIFF_ENV_HPP_

#include "locodiff/policy.hpp"

namespace locodiff {

// Minimal surface the closed-loop control driver needs from an environment.
// Implementations are single-threaded; run independent instances in parallel
// with distinct RNG streams if needed.
class ControlEnv {
 public:
  virtual ~ControlEnv() = default;

  virtual bool alive() const = 0;
  virtual Observation observation() const = 0;      // stacked 5-frame history
  virtual StateFrame current_frame() const = 0;
  virtual double phase() const = 0;
  virtual Action reference_action() const = 0;      // expert target at this state
  virtual void apply(const Action& action) = 0;     // advance one control step
  virtual std::string end_reason() const = 0;       // why alive() went false
};

}  // namespace locodiff

#endif  // LOCODIFF_ENV_HPP_
