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

#ifndef LOCODIFF_DDPM_HPP_
#define LOCODIFF_DDPM_HPP_

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "locodiff/dataset.hpp"
#include "locodiff/env.hpp"
#include "locodiff/nn.hpp"
#include "locodiff/policy.hpp"
#include "locodiff/rng.hpp"
#include "locodiff/schedule.hpp"

namespace locodiff {

// Two reverse updates are kept side by side. kPaperLiteral subtracts the
// noise estimate with no schedule coefficients and injects no noise;
// kAncestral is the standard DDPM posterior step with fixed per-step
// variance beta_t.
enum class SamplerMode { kPaperLiteral, kAncestral };

const char* to_string(SamplerMode mode);
std::optional<SamplerMode> sampler_mode_from_string(const std::string& s);

// a_{t-1} = a_t - eps_hat. No coefficients, no noise.
std::vector<double> reverse_step_literal(std::span<const double> a_t,
                                         std::span<const double> eps_hat);

// a_{t-1} = (a_t - beta_t / sqrt(1 - alpha_bar_t) * eps_hat) / sqrt(alpha_t)
//           + sqrt(beta_t) * z,   with z forced to zero at t = 1.
std::vector<double> reverse_step_ancestral(std::span<const double> a_t,
                                           std::span<const double> eps_hat, int t,
                                           const NoiseSchedule& schedule,
                                           std::span<const double> z);

// ---------------------------------------------------------------------------
// Training

// Flat row-major views over one batch (already normalized when normalization
// is enabled). count rows of obs_dim / act_dim.
struct BatchView {
  std::span<const double> observations;
  std::span<const double> actions;
  std::size_t count = 0;
  int obs_dim = 0;
  int act_dim = 0;
};

// Per-epoch summary row.
struct TrainReport {
  int epoch = 0;
  double mean_batch_loss = 0.0;
  double val_loss = 0.0;
  double wall_s = 0.0;
};

// Reusable buffers for train_step: per-worker gradient accumulators and
// forward caches. Worker count is fixed at construction; gradient reduction
// runs in worker order so a given (seed, threads) pair is bit-reproducible.
class TrainContext {
 public:
  TrainContext(const PolicyConfig& config, int threads);
  ~TrainContext();

  int threads() const { return threads_; }

  // One step of the training algorithm: draw per-element t and noise, form
  // noisy actions, run encoder and denoiser jointly, backpropagate through
  // both, apply one optimizer step. Returns the batch loss. Throws on
  // non-finite loss.
  double train_step(const BatchView& batch, DiffusionPolicy& policy,
                    const NoiseSchedule& schedule, nn::AdamState& opt, Rng& rng);

  // Mean loss over rows without touching parameters; draws come from `rng`.
  double eval_loss(const BatchView& batch, const DiffusionPolicy& policy,
                   const NoiseSchedule& schedule, Rng& rng);

 private:
  struct Worker;
  double run_batch(const BatchView& batch, const DiffusionPolicy& policy,
                   const NoiseSchedule& schedule, Rng& rng, bool with_grads);

  PolicyConfig config_;
  int threads_;
  std::vector<Worker> workers_;
  std::vector<int> step_draws_;       // per-element diffusion step
  std::vector<double> noise_draws_;   // per-element noise, count * act_dim
};

struct TrainOptions {
  int epochs = 0;
  std::size_t batch_size = 4000;
  double lr = 1e-4;
  int threads = 2;
  int checkpoint_interval = 1000;
  std::uint64_t seed = 1;
  bool normalize = true;
  int start_epoch = 0;  // resume support: epochs already completed
};

using CheckpointSink =
    std::function<void(int epoch, const DiffusionPolicy& policy, bool is_final)>;
using ReportSink = std::function<void(const TrainReport&)>;

// Full training loop: epochs x ceil(n_train / batch) steps, without-
// replacement batches, per-epoch validation loss, checkpoints every
// checkpoint_interval epochs and at the end. The policy is updated in place.
// Data in `ds` is used raw; pass `stats` to z-score rows on the fly.
void train(DiffusionPolicy& policy, const OfflineDataset& ds, const SplitIndex& split,
           const NormStats* stats, const NoiseSchedule& schedule,
           const TrainOptions& options, const CheckpointSink& checkpoint_sink,
           const ReportSink& report_sink);

// ---------------------------------------------------------------------------
// Sampling

struct SampleOptions {
  SamplerMode mode = SamplerMode::kAncestral;
  // Reuse one initial a^T draw as the chain start of every control step
  // instead of redrawing. Off by default; the redraw is what makes sampling
  // multimodal across steps.
  bool warm_start = false;
  // When set, observations are z-scored on the way in and actions
  // de-scored on the way out.
  const NormStats* stats = nullptr;
};

struct SampleResult {
  Action action;
  double latency_s = 0.0;
};

// Per-control-step reverse diffusion. Encodes the observation once, then
// walks t = T..1 with the per-t time embedding. Scratch buffers and the time
// embeddings are owned by the sampler so repeated calls do not allocate.
class ActionSampler {
 public:
  ActionSampler(const DiffusionPolicy& policy, const NoiseSchedule& schedule,
                SampleOptions options);

  SampleResult sample(std::span<const double> observation, Rng& rng);

  void reset();  // drops warm-start state
  const SampleOptions& options() const { return options_; }

 private:
  const DiffusionPolicy& policy_;
  const NoiseSchedule& schedule_;
  SampleOptions options_;
  std::vector<std::vector<double>> time_embeddings_;  // [t-1] for t = 1..T
  std::vector<double> warm_chain_;
  bool warm_ready_ = false;
  std::vector<double> denoiser_input_;
  std::vector<double> z_;
};

// One-shot convenience wrapper around ActionSampler.
SampleResult sample_action(const DiffusionPolicy& policy, const NoiseSchedule& schedule,
                           const Observation& obs, Rng& rng,
                           const SampleOptions& options);

// ---------------------------------------------------------------------------
// Closed loop

struct RolloutStep {
  int step = 0;
  double phase = 0.0;
  StateFrame state;        // newest frame the action was conditioned on
  Action action;           // policy output (denormalized)
  Action expert;           // environment reference at the same state
  double latency_s = 0.0;
  double tracking_error = 0.0;  // per-step RMS over joints, rad
};

struct RolloutRecord {
  std::vector<RolloutStep> steps;
  SamplerMode mode = SamplerMode::kAncestral;
  bool warm_start = false;
  bool ended_early = false;
  std::string end_reason;

  double tracking_rmse() const;  // over recorded steps
  double mean_latency_s() const;
};

// Runs `steps` control steps (or until the environment dies): stack history,
// sample an action, apply it, record state/action/latency/tracking error.
RolloutRecord closed_loop_rollout(ControlEnv& env, const DiffusionPolicy& policy,
                                  const NoiseSchedule& schedule, int steps,
                                  const SampleOptions& options, Rng& rng);

}  // namespace locodiff

#endif  // LOCODIFF_DDPM_HPP_
