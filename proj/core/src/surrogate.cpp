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

#include "locodiff/surrogate.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace locodiff {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Gait shape constants. Offsets lean the stance into the slope; amplitudes
// grow with commanded velocity so faster gaits swing wider. Amplitudes are
// sized so a non-tracking policy drifts past the fall threshold while a
// tracking one keeps a wide margin.
constexpr std::array<double, 3> kOffsetSlopeGain = {0.15, 0.7, -0.9};
constexpr std::array<double, 3> kAmpBase = {0.08, 0.28, 0.20};
constexpr std::array<double, 3> kAmpVelGain = {0.08, 0.34, 0.26};
constexpr std::array<double, 3> kLegPhase = {0.0, kPi / 2.0, kPi};

double rms6(const std::array<double, 6>& a, const Action& b) {
  double acc = 0.0;
  for (int i = 0; i < 6; ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return std::sqrt(acc / 6.0);
}

}  // namespace

void TerrainParams::validate() const {
  if (!(std::abs(slope) < kPi / 4.0)) {
    throw std::invalid_argument("TerrainParams: |slope| must be < pi/4");
  }
  if (roughness_amp < 0.0) {
    throw std::invalid_argument("TerrainParams: roughness_amp must be >= 0");
  }
}

GaitConfig GaitConfig::for_command(double velocity_cmd, const TerrainParams& terrain) {
  terrain.validate();
  GaitConfig cfg;
  cfg.velocity_cmd = velocity_cmd;
  cfg.stride_freq = 1.2 + 0.4 * std::abs(velocity_cmd);
  for (int leg = 0; leg < 2; ++leg) {
    for (int j = 0; j < 3; ++j) {
      const int k = leg * 3 + j;
      cfg.joint_offsets[k] = kNeutralPose[k] + kOffsetSlopeGain[j] * terrain.slope;
      cfg.joint_amps[k] = kAmpBase[j] + kAmpVelGain[j] * std::abs(velocity_cmd);
      cfg.joint_phases[k] = kLegPhase[j] + (leg == 1 ? kPi : 0.0);
    }
  }
  cfg.validate();
  return cfg;
}

void GaitConfig::validate() const {
  if (!(stride_freq > 0.0)) {
    throw std::invalid_argument("GaitConfig: stride_freq must be > 0");
  }
  for (double a : joint_amps) {
    if (a < 0.0) throw std::invalid_argument("GaitConfig: amplitudes must be >= 0");
  }
}

Action expert_action(double phase, const GaitConfig& cfg) {
  Action a(6);
  for (int j = 0; j < 6; ++j) {
    a[j] = cfg.joint_offsets[j] +
           cfg.joint_amps[j] * std::sin(2.0 * kPi * phase + cfg.joint_phases[j]);
  }
  return a;
}

SurrogateEnv::SurrogateEnv(GaitConfig cfg, TerrainParams terrain, std::uint64_t seed)
    : cfg_(std::move(cfg)), terrain_(terrain), rng_(seed, /*stream=*/29) {
  terrain_.validate();
  cfg_.validate();
  const Action start = expert_action(phase_, cfg_);
  for (int j = 0; j < 6; ++j) joints_[j] = start[j];
  joint_vel_.fill(0.0);
  // History starts as five copies of the initial frame; rollouts that begin
  // with fewer than 5 real frames repeat the first one.
  const StateFrame first = make_frame(start);
  for (int i = 0; i < kHistoryLen; ++i) history_.push_back(first);
}

Observation SurrogateEnv::observation() const {
  std::vector<StateFrame> frames(history_.begin(), history_.end());
  return stack_history(frames);
}

Action SurrogateEnv::reference_action() const { return expert_action(phase_, cfg_); }

StateFrame SurrogateEnv::make_frame(const Action& applied) const {
  StateFrame f;
  const double v = cfg_.velocity_cmd;
  const double s1 = std::sin(2.0 * kPi * phase_);
  const double c1 = std::cos(2.0 * kPi * phase_);
  const double s2 = std::sin(4.0 * kPi * phase_);

  // Idealized base kinematics driven by the gait clock.
  f.base_lin_vel = {v * (1.0 + 0.10 * s2), 0.05 * v * s1, 0.08 * v * s2};
  f.base_ang_vel = {0.05 * v * s1, 0.12 * v * c1, 0.03 * v * s2};
  f.projected_gravity = {std::sin(terrain_.slope), 0.0, -std::cos(terrain_.slope)};
  f.commands = {v, 0.0, 0.0};
  for (int j = 0; j < 6; ++j) {
    f.joint_pos_offset[j] = joints_[j] - kNeutralPose[j];
    f.joint_vel[j] = joint_vel_[j];
    f.prev_action[j] = applied[j];
  }
  return f;
}

void SurrogateEnv::apply(const Action& action) {
  if (!alive_) {
    throw std::runtime_error("SurrogateEnv::apply: environment is not alive (" +
                             end_reason_ + ")");
  }
  if (action.size() != 6) {
    throw std::invalid_argument("SurrogateEnv::apply: action must have 6 joints");
  }

  std::array<double, 6> prev = joints_;
  for (int j = 0; j < 6; ++j) {
    double target = action[j];
    if (terrain_.roughness_amp > 0.0) {
      target += terrain_.roughness_amp * rng_.normal();
    }
    joints_[j] = prev[j] + kTrackingGain * (target - prev[j]);
    joint_vel_[j] = (joints_[j] - prev[j]) / kDt;
  }
  phase_ = std::fmod(phase_ + cfg_.stride_freq * kDt, 1.0);

  const double err = rms6(joints_, expert_action(phase_, cfg_));
  error_window_.push_back(err);
  if (static_cast<int>(error_window_.size()) > kFallWindow) error_window_.pop_front();
  if (static_cast<int>(error_window_.size()) == kFallWindow) {
    double acc = 0.0;
    for (double e : error_window_) acc += e * e;
    if (std::sqrt(acc / kFallWindow) > kFallThreshold) {
      alive_ = false;
      std::ostringstream os;
      os << "fall: joint tracking RMS over last " << kFallWindow << " steps exceeded "
         << kFallThreshold << " rad";
      end_reason_ = os.str();
    }
  }

  history_.push_back(make_frame(action));
  if (static_cast<int>(history_.size()) > kHistoryLen) history_.pop_front();
}

std::vector<RecipeCell> parse_recipe(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("parse_recipe: cannot open " + path.string());
  std::vector<RecipeCell> cells;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string token;
    RecipeCell cell;
    bool has_velocity = false, has_slope = false, has_pairs = false;
    while (ls >> token) {
      const auto eq = token.find('=');
      if (eq == std::string::npos) {
        std::ostringstream os;
        os << path.string() << ":" << line_no << ": expected key=value, got '" << token
           << "'";
        throw std::runtime_error(os.str());
      }
      const std::string key = token.substr(0, eq);
      const std::string value = token.substr(eq + 1);
      try {
        if (key == "velocity") {
          cell.velocity = std::stod(value);
          has_velocity = true;
        } else if (key == "slope_deg") {
          cell.slope_deg = std::stod(value);
          has_slope = true;
        } else if (key == "pairs") {
          cell.pairs = static_cast<std::size_t>(std::stoull(value));
          has_pairs = true;
        } else {
          throw std::runtime_error("unknown key '" + key + "'");
        }
      } catch (const std::exception& e) {
        std::ostringstream os;
        os << path.string() << ":" << line_no << ": " << e.what();
        throw std::runtime_error(os.str());
      }
    }
    if (!has_velocity && !has_slope && !has_pairs) continue;  // blank/comment line
    if (!(has_velocity && has_slope && has_pairs)) {
      std::ostringstream os;
      os << path.string() << ":" << line_no
         << ": cell needs velocity=, slope_deg= and pairs=";
      throw std::runtime_error(os.str());
    }
    cells.push_back(cell);
  }
  return cells;
}

std::vector<RecipeCell> default_recipe(std::size_t total_pairs) {
  const std::array<double, 2> velocities = {0.3, 1.0};
  const std::array<double, 3> slopes_deg = {0.0, 5.7, 10.2};
  const std::size_t per_cell = total_pairs / (velocities.size() * slopes_deg.size());
  std::vector<RecipeCell> cells;
  for (double v : velocities) {
    for (double s : slopes_deg) {
      cells.push_back({v, s, per_cell});
    }
  }
  return cells;
}

OfflineDataset gen_dataset(const std::vector<RecipeCell>& recipe, std::uint64_t seed,
                           double roughness_amp) {
  if (recipe.empty()) throw std::invalid_argument("gen_dataset: empty recipe");
  OfflineDataset ds(kObsDim, kActDim);
  for (std::size_t cell_idx = 0; cell_idx < recipe.size(); ++cell_idx) {
    const RecipeCell& cell = recipe[cell_idx];
    TerrainParams terrain{cell.slope_deg * kPi / 180.0, roughness_amp};
    const GaitConfig cfg = GaitConfig::for_command(cell.velocity, terrain);
    SurrogateEnv env(cfg, terrain, seed + 1000 * cell_idx);
    PairMeta meta{static_cast<float>(cell.velocity), static_cast<float>(terrain.slope),
                  static_cast<std::uint8_t>(cell_idx)};
    for (std::size_t i = 0; i < cell.pairs; ++i) {
      const Observation obs = env.observation();
      const Action act = expert_action(env.phase(), cfg);
      ds.append(obs.values, act, meta);
      env.apply(act);
    }
  }
  return ds;
}

TrackingEval eval_tracking(const DiffusionPolicy& policy, const NoiseSchedule& schedule,
                           const GaitConfig& cfg, const TerrainParams& terrain,
                           int steps, const SampleOptions& options, Rng& rng) {
  SurrogateEnv env(cfg, terrain, rng.next_u64());
  const RolloutRecord record =
      closed_loop_rollout(env, policy, schedule, steps, options, rng);
  TrackingEval eval;
  eval.rmse = record.tracking_rmse();
  eval.fell = record.ended_early;
  eval.steps_survived = static_cast<int>(record.steps.size());
  return eval;
}

std::pair<double, double> bimodal_sample(Rng& rng) {
  const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
  const double action =
      sign * BimodalToyTask::kModeCenter + BimodalToyTask::kModeNoiseStd * rng.normal();
  return {0.0, action};
}

OfflineDataset gen_bimodal_dataset(std::size_t n, std::uint64_t seed) {
  OfflineDataset ds(1, 1);
  Rng rng(seed, /*stream=*/31);
  for (std::size_t i = 0; i < n; ++i) {
    const auto [cond, act] = bimodal_sample(rng);
    const double obs[1] = {cond};
    const double action[1] = {act};
    ds.append(obs, action, PairMeta{0.0f, 0.0f, 0});
  }
  return ds;
}

BimodalMass bimodal_eval(std::span<const double> action_samples) {
  BimodalMass mass;
  if (action_samples.empty()) return mass;
  for (double a : action_samples) {
    if (a < -BimodalToyTask::kBinThreshold) {
      mass.neg += 1.0;
    } else if (a > BimodalToyTask::kBinThreshold) {
      mass.pos += 1.0;
    } else {
      mass.middle += 1.0;
    }
  }
  const double inv = 1.0 / static_cast<double>(action_samples.size());
  mass.neg *= inv;
  mass.middle *= inv;
  mass.pos *= inv;
  return mass;
}

}  // namespace locodiff
