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

#ifndef LOCODIFF_SURROGATE_HPP_
#define LOCODIFF_SURROGATE_HPP_

#include <array>
#include <deque>
#include <filesystem>
#include <string>
#include <vector>

#include "locodiff/dataset.hpp"
#include "locodiff/ddpm.hpp"
#include "locodiff/env.hpp"
#include "locodiff/policy.hpp"
#include "locodiff/rng.hpp"

namespace locodiff {

struct TerrainParams {
  double slope = 0.0;          // rad, |slope| < pi/4
  double roughness_amp = 0.0;  // rad, zero-mean joint perturbation amplitude

  void validate() const;
};

// Analytic gait: joint j target = offset_j + amp_j * sin(2 pi phase + phase_j).
// Offsets are affine in slope, amplitudes affine in commanded velocity, and
// the right leg runs half a period behind the left, so the expert is smooth
// in both conditioning variables.
struct GaitConfig {
  double velocity_cmd = 0.0;  // m/s
  double stride_freq = 0.0;   // Hz
  std::array<double, 6> joint_offsets{};  // rad, slope-dependent
  std::array<double, 6> joint_amps{};     // rad, velocity-dependent
  std::array<double, 6> joint_phases{};   // rad

  static GaitConfig for_command(double velocity_cmd, const TerrainParams& terrain);
  void validate() const;
};

// Joint order: left hip, left thigh, left shank, right hip, right thigh,
// right shank. The neutral stance that joint_pos_offset is measured against.
inline constexpr std::array<double, 6> kNeutralPose = {0.0, 0.45, -0.9,
                                                       0.0, 0.45, -0.9};

Action expert_action(double phase, const GaitConfig& cfg);

// Deterministic kinematic stand-in for the physics simulator. Joints track
// the applied action first-order (gain 0.7 per step, dt 20 ms); the base
// states are idealized gait kinematics driven by the phase clock. The run
// dies when the joint-state RMS error against the expert gait over the last
// 25 steps exceeds 0.5 rad.
class SurrogateEnv : public ControlEnv {
 public:
  static constexpr double kDt = 0.02;            // s, 50 Hz control
  static constexpr double kTrackingGain = 0.7;   // per-step joint gain
  static constexpr double kFallThreshold = 0.5;  // rad
  static constexpr int kFallWindow = 25;         // steps

  SurrogateEnv(GaitConfig cfg, TerrainParams terrain, std::uint64_t seed);

  bool alive() const override { return alive_; }
  Observation observation() const override;
  StateFrame current_frame() const override { return history_.back(); }
  double phase() const override { return phase_; }
  Action reference_action() const override;
  void apply(const Action& action) override;
  std::string end_reason() const override { return end_reason_; }

  const GaitConfig& gait() const { return cfg_; }
  const TerrainParams& terrain() const { return terrain_; }

 private:
  StateFrame make_frame(const Action& applied) const;

  GaitConfig cfg_;
  TerrainParams terrain_;
  Rng rng_;
  double phase_ = 0.0;
  std::array<double, 6> joints_{};
  std::array<double, 6> joint_vel_{};
  std::deque<StateFrame> history_;   // 5 frames, oldest first
  std::deque<double> error_window_;  // per-step joint RMS vs expert
  bool alive_ = true;
  std::string end_reason_;
};

// One (velocity, slope, count) block of the data recipe.
struct RecipeCell {
  double velocity = 0.0;   // m/s
  double slope_deg = 0.0;  // degrees, as in the recipe file
  std::size_t pairs = 0;
};

// Recipe text format: one cell per line, `velocity=<m/s> slope_deg=<deg>
// pairs=<count>`; '#' starts a comment.
std::vector<RecipeCell> parse_recipe(const std::filesystem::path& path);

// velocities {0.3, 1.0} x slopes {0, 5.7, 10.2} deg, equal pair counts.
std::vector<RecipeCell> default_recipe(std::size_t total_pairs);

// Rolls the analytic expert through the environment, recording (stacked
// observation, expert action) pairs plus (velocity, slope, cell) tags.
OfflineDataset gen_dataset(const std::vector<RecipeCell>& recipe, std::uint64_t seed,
                           double roughness_amp = 0.0);

struct TrackingEval {
  double rmse = 0.0;  // rad, action-space RMSE vs the expert over survived steps
  bool fell = false;
  int steps_survived = 0;
};

// Closed-loop policy evaluation against the expert gait.
TrackingEval eval_tracking(const DiffusionPolicy& policy, const NoiseSchedule& schedule,
                           const GaitConfig& cfg, const TerrainParams& terrain,
                           int steps, const SampleOptions& options, Rng& rng);

// ---------------------------------------------------------------------------
// 1-D bimodal toy task: modes at -1 and +1 with equal weight, mode noise
// std 0.05, and a deliberately uninformative scalar condition. Isolates
// whether a policy can hold two action modes instead of averaging them.
struct BimodalToyTask {
  static constexpr double kModeCenter = 1.0;
  static constexpr double kModeNoiseStd = 0.05;
  static constexpr double kBinThreshold = 0.25;
};

// Draws (condition, action) from the mixture.
std::pair<double, double> bimodal_sample(Rng& rng);

OfflineDataset gen_bimodal_dataset(std::size_t n, std::uint64_t seed);

struct BimodalMass {
  double neg = 0.0;     // fraction of samples < -0.25
  double middle = 0.0;  // fraction in [-0.25, 0.25]
  double pos = 0.0;     // fraction > +0.25
};
BimodalMass bimodal_eval(std::span<const double> action_samples);

}  // namespace locodiff

#endif  // LOCODIFF_SURROGATE_HPP_
