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

#ifndef LOCODIFF_POLICY_HPP_
#define LOCODIFF_POLICY_HPP_

#include <array>
#include <span>
#include <vector>

#include "locodiff/dataset.hpp"
#include "locodiff/nn.hpp"
#include "locodiff/schedule.hpp"

namespace locodiff {

inline constexpr int kStateDim = 30;
inline constexpr int kHistoryLen = 5;
static_assert(kObsDim == kStateDim * kHistoryLen);

// One 30-dim robot state sample. Field order is the wire order.
struct StateFrame {
  std::array<double, 3> base_lin_vel{};       // m/s
  std::array<double, 3> base_ang_vel{};       // rad/s
  std::array<double, 3> projected_gravity{};  // unit norm
  std::array<double, 3> commands{};           // vx, vy, yaw rate
  std::array<double, 6> joint_pos_offset{};   // rad, actuator pos - default
  std::array<double, 6> joint_vel{};          // rad/s
  std::array<double, 6> prev_action{};        // rad

  void write_to(std::span<double> out) const;  // out.size() == kStateDim
  static StateFrame read_from(std::span<const double> in);

  // Throws unless projected_gravity has unit norm within 1e-6.
  void validate() const;
};

// Flat 150-dim history of 5 frames, oldest first, newest last.
struct Observation {
  std::vector<double> values;
  Observation() : values(kObsDim, 0.0) {}
};

// frames.size() must be exactly kHistoryLen, ordered oldest first.
Observation stack_history(std::span<const StateFrame> frames);
std::vector<StateFrame> unstack_history(const Observation& obs);

using Action = std::vector<double>;  // joint targets, rad

// Shapes of the two trainable networks plus the time-embedding width.
// standard() matches the reference architecture: encoder 150 -> 48x3 -> 48,
// denoiser (6 + 128 + 48) -> 256x7 -> 6, time embedding 128.
struct PolicyConfig {
  nn::NetworkSpec encoder;
  nn::NetworkSpec denoiser;
  int time_embed_dim = 128;

  static PolicyConfig standard();
  static PolicyConfig custom(int obs_dim, int act_dim, int latent_dim,
                             int encoder_hidden, int encoder_layers,
                             int denoiser_hidden, int denoiser_layers,
                             int time_embed_dim);

  int obs_dim() const { return encoder.input_dim(); }
  int latent_dim() const { return encoder.output_dim(); }
  int act_dim() const { return denoiser.output_dim(); }
  int embed_dim() const { return time_embed_dim + latent_dim(); }

  void validate() const;  // denoiser input must equal act + time + latent
  bool operator==(const PolicyConfig&) const = default;
};

// The trainable pair: latent-observation encoder and noise-prediction
// denoiser. Parameters are frozen during sampling; training holds exclusive
// write access between batch reductions.
struct DiffusionPolicy {
  PolicyConfig config;
  nn::Mlp encoder;
  nn::Mlp denoiser;

  explicit DiffusionPolicy(PolicyConfig cfg);
  static DiffusionPolicy seeded(PolicyConfig cfg, Rng& rng);

  std::size_t param_count() const {
    return encoder.param_count() + denoiser.param_count();
  }
  // Fixed tensor order: encoder tensors then denoiser tensors.
  std::vector<nn::TensorRef> tensors();
  std::vector<nn::ConstTensorRef> tensors() const;
};

// Latent observation O^l = encoder(obs); obs must match config.obs_dim().
std::vector<double> encode_observation(const DiffusionPolicy& policy,
                                       std::span<const double> obs);

// emb = [time embedding | latent observation], in that order.
std::vector<double> build_embedding(std::span<const double> time_embed,
                                    std::span<const double> latent,
                                    const PolicyConfig& config);

// Noise estimate from the denoiser; input is [noisy_action | emb].
std::vector<double> predict_noise(const DiffusionPolicy& policy,
                                  std::span<const double> noisy_action,
                                  std::span<const double> embedding);

// z-scoring against training-split statistics.
std::vector<double> normalize_observation(std::span<const double> obs,
                                          const NormStats& stats);
std::vector<double> normalize_action(std::span<const double> act,
                                     const NormStats& stats);
std::vector<double> denormalize_action(std::span<const double> act,
                                       const NormStats& stats);

}  // namespace locodiff

#endif  // LOCODIFF_POLICY_HPP_
