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

#include "locodiff/policy.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace locodiff {

namespace {

void copy3(std::span<const double> src, std::size_t at, std::array<double, 3>& dst) {
  dst = {src[at], src[at + 1], src[at + 2]};
}
void copy6(std::span<const double> src, std::size_t at, std::array<double, 6>& dst) {
  for (int i = 0; i < 6; ++i) dst[i] = src[at + i];
}

}  // namespace

void StateFrame::write_to(std::span<double> out) const {
  if (out.size() != kStateDim) {
    throw std::invalid_argument("StateFrame::write_to: need a 30-dim span");
  }
  std::size_t k = 0;
  for (double v : base_lin_vel) out[k++] = v;
  for (double v : base_ang_vel) out[k++] = v;
  for (double v : projected_gravity) out[k++] = v;
  for (double v : commands) out[k++] = v;
  for (double v : joint_pos_offset) out[k++] = v;
  for (double v : joint_vel) out[k++] = v;
  for (double v : prev_action) out[k++] = v;
}

StateFrame StateFrame::read_from(std::span<const double> in) {
  if (in.size() != kStateDim) {
    throw std::invalid_argument("StateFrame::read_from: need a 30-dim span");
  }
  StateFrame f;
  copy3(in, 0, f.base_lin_vel);
  copy3(in, 3, f.base_ang_vel);
  copy3(in, 6, f.projected_gravity);
  copy3(in, 9, f.commands);
  copy6(in, 12, f.joint_pos_offset);
  copy6(in, 18, f.joint_vel);
  copy6(in, 24, f.prev_action);
  return f;
}

void StateFrame::validate() const {
  const double n2 = projected_gravity[0] * projected_gravity[0] +
                    projected_gravity[1] * projected_gravity[1] +
                    projected_gravity[2] * projected_gravity[2];
  if (std::abs(std::sqrt(n2) - 1.0) > 1e-6) {
    std::ostringstream os;
    os << "StateFrame: projected_gravity norm " << std::sqrt(n2) << " is not 1 +/- 1e-6";
    throw std::invalid_argument(os.str());
  }
}

Observation stack_history(std::span<const StateFrame> frames) {
  if (frames.size() != kHistoryLen) {
    std::ostringstream os;
    os << "stack_history: need exactly " << kHistoryLen << " frames, got "
       << frames.size();
    throw std::invalid_argument(os.str());
  }
  Observation obs;
  for (int i = 0; i < kHistoryLen; ++i) {
    frames[i].write_to(
        std::span<double>(obs.values.data() + i * kStateDim, kStateDim));
  }
  return obs;
}

std::vector<StateFrame> unstack_history(const Observation& obs) {
  std::vector<StateFrame> frames;
  frames.reserve(kHistoryLen);
  for (int i = 0; i < kHistoryLen; ++i) {
    frames.push_back(StateFrame::read_from(
        std::span<const double>(obs.values.data() + i * kStateDim, kStateDim)));
  }
  return frames;
}

PolicyConfig PolicyConfig::standard() {
  return custom(kObsDim, kActDim, /*latent_dim=*/48, /*encoder_hidden=*/48,
                /*encoder_layers=*/3, /*denoiser_hidden=*/256, /*denoiser_layers=*/7,
                /*time_embed_dim=*/128);
}

PolicyConfig PolicyConfig::custom(int obs_dim, int act_dim, int latent_dim,
                                  int encoder_hidden, int encoder_layers,
                                  int denoiser_hidden, int denoiser_layers,
                                  int time_embed_dim) {
  std::vector<int> enc{obs_dim};
  for (int l = 0; l < encoder_layers; ++l) enc.push_back(encoder_hidden);
  enc.push_back(latent_dim);

  std::vector<int> den{act_dim + time_embed_dim + latent_dim};
  for (int l = 0; l < denoiser_layers; ++l) den.push_back(denoiser_hidden);
  den.push_back(act_dim);

  PolicyConfig cfg;
  cfg.encoder = nn::NetworkSpec::make(std::move(enc));
  cfg.denoiser = nn::NetworkSpec::make(std::move(den));
  cfg.time_embed_dim = time_embed_dim;
  cfg.validate();
  return cfg;
}

void PolicyConfig::validate() const {
  if (time_embed_dim < 2 || time_embed_dim % 2 != 0) {
    throw std::invalid_argument("PolicyConfig: time_embed_dim must be even and >= 2");
  }
  const int expected_in = act_dim() + time_embed_dim + latent_dim();
  if (denoiser.input_dim() != expected_in) {
    std::ostringstream os;
    os << "PolicyConfig: denoiser input " << denoiser.input_dim()
       << " != act+time+latent = " << expected_in;
    throw std::invalid_argument(os.str());
  }
}

DiffusionPolicy::DiffusionPolicy(PolicyConfig cfg)
    : config(std::move(cfg)), encoder(config.encoder), denoiser(config.denoiser) {
  config.validate();
}

DiffusionPolicy DiffusionPolicy::seeded(PolicyConfig cfg, Rng& rng) {
  cfg.validate();
  DiffusionPolicy p(cfg);
  p.encoder = nn::Mlp::seeded(cfg.encoder, rng);
  p.denoiser = nn::Mlp::seeded(cfg.denoiser, rng);
  return p;
}

std::vector<nn::TensorRef> DiffusionPolicy::tensors() {
  auto refs = encoder.tensors("encoder");
  auto den = denoiser.tensors("denoiser");
  refs.insert(refs.end(), den.begin(), den.end());
  return refs;
}

std::vector<nn::ConstTensorRef> DiffusionPolicy::tensors() const {
  auto refs = static_cast<const nn::Mlp&>(encoder).tensors("encoder");
  auto den = static_cast<const nn::Mlp&>(denoiser).tensors("denoiser");
  refs.insert(refs.end(), den.begin(), den.end());
  return refs;
}

std::vector<double> encode_observation(const DiffusionPolicy& policy,
                                       std::span<const double> obs) {
  if (obs.size() != static_cast<std::size_t>(policy.config.obs_dim())) {
    std::ostringstream os;
    os << "encode_observation: observation length " << obs.size() << " != "
       << policy.config.obs_dim();
    throw std::invalid_argument(os.str());
  }
  return policy.encoder.forward(obs);
}

std::vector<double> build_embedding(std::span<const double> time_embed,
                                    std::span<const double> latent,
                                    const PolicyConfig& config) {
  if (time_embed.size() != static_cast<std::size_t>(config.time_embed_dim) ||
      latent.size() != static_cast<std::size_t>(config.latent_dim())) {
    std::ostringstream os;
    os << "build_embedding: got time " << time_embed.size() << "/latent "
       << latent.size() << ", expected " << config.time_embed_dim << "/"
       << config.latent_dim();
    throw std::invalid_argument(os.str());
  }
  std::vector<double> emb;
  emb.reserve(time_embed.size() + latent.size());
  emb.insert(emb.end(), time_embed.begin(), time_embed.end());
  emb.insert(emb.end(), latent.begin(), latent.end());
  return emb;
}

std::vector<double> predict_noise(const DiffusionPolicy& policy,
                                  std::span<const double> noisy_action,
                                  std::span<const double> embedding) {
  const auto& cfg = policy.config;
  if (noisy_action.size() != static_cast<std::size_t>(cfg.act_dim()) ||
      embedding.size() != static_cast<std::size_t>(cfg.embed_dim())) {
    std::ostringstream os;
    os << "predict_noise: got action " << noisy_action.size() << "/embedding "
       << embedding.size() << ", expected " << cfg.act_dim() << "/" << cfg.embed_dim();
    throw std::invalid_argument(os.str());
  }
  std::vector<double> input;
  input.reserve(noisy_action.size() + embedding.size());
  input.insert(input.end(), noisy_action.begin(), noisy_action.end());
  input.insert(input.end(), embedding.begin(), embedding.end());
  return policy.denoiser.forward(input);
}

namespace {

std::vector<double> z_apply(std::span<const double> x, const std::vector<double>& mean,
                            const std::vector<double>& std, bool inverse,
                            const char* what) {
  if (x.size() != mean.size() || x.size() != std.size()) {
    std::ostringstream os;
    os << what << ": length " << x.size() << " does not match stats of length "
       << mean.size();
    throw std::invalid_argument(os.str());
  }
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = inverse ? x[i] * std[i] + mean[i] : (x[i] - mean[i]) / std[i];
  }
  return out;
}

}  // namespace

std::vector<double> normalize_observation(std::span<const double> obs,
                                          const NormStats& stats) {
  return z_apply(obs, stats.obs_mean, stats.obs_std, false, "normalize_observation");
}

std::vector<double> normalize_action(std::span<const double> act,
                                     const NormStats& stats) {
  return z_apply(act, stats.act_mean, stats.act_std, false, "normalize_action");
}

std::vector<double> denormalize_action(std::span<const double> act,
                                       const NormStats& stats) {
  return z_apply(act, stats.act_mean, stats.act_std, true, "denormalize_action");
}

}  // namespace locodiff
