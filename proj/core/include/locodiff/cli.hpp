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

#ifndef LOCODIFF_CLI_HPP_
#define LOCODIFF_CLI_HPP_

#include <cstdint>
#include <iosfwd>
#include <string>

#include "locodiff/ddpm.hpp"

namespace locodiff {

// Resolved parameters for one command invocation. Defaults follow the
// reference architecture (T=60, lr=1e-4, batch 4000, epochs 10000, latent 48,
// denoiser 7x256, time embedding 128); beta endpoints and the 20 ms deadline
// are configurable conventions.
struct RunConfig {
  std::uint64_t seed = 1;
  int threads = 2;
  bool force = false;

  // schedule
  int num_steps = 60;
  double beta_start = 1e-4;
  double beta_end = 0.02;

  // network dims (observation/action dims come from the dataset)
  int latent_dim = 48;
  int encoder_hidden = 48;
  int encoder_layers = 3;
  int denoiser_hidden = 256;
  int denoiser_layers = 7;
  int time_embed_dim = 128;

  // training
  int epochs = 10000;
  std::size_t batch = 4000;
  double lr = 1e-4;
  double split_ratio = 0.8;
  int checkpoint_interval = 1000;
  bool normalize = true;

  // sampling / rollout
  SamplerMode mode = SamplerMode::kAncestral;
  bool warm_start = false;
  int steps = 500;
  double velocity = 1.0;     // m/s
  double slope_deg = 0.0;    // degrees
  double roughness = 0.0;    // rad
  int bimodal_samples = 1000;

  // bench
  int trials = 1000;
  double deadline_ms = 20.0;
  bool bench_f32 = false;
  int bench_steps_override = 0;  // 0 = use checkpoint T

  // data generation
  std::size_t pairs = 60000;
  std::string task = "locomotion";  // or "bimodal"

  // io
  std::string dataset_path;
  std::string checkpoint_path;
  std::string resume_path;
  std::string recipe_path;
  std::string out_path;
  std::string csv_export_path;
};

// Full resolved-config echo; printed by every command before it acts and
// written next to the primary output.
std::string manifest(const RunConfig& config, const std::string& command);

// Command entry points. Each returns a process exit code and reports
// progress on `out`.
int cmd_gen_data(const RunConfig& config, std::ostream& out);
int cmd_train(const RunConfig& config, std::ostream& out);
int cmd_rollout(const RunConfig& config, std::ostream& out);
int cmd_bench(const RunConfig& config, std::ostream& out);
int cmd_eval(const RunConfig& config, std::ostream& out);

// Latency summary for cmd_bench; p50 <= p99 <= max by construction.
struct LatencyReport {
  int trials = 0;
  double p50_ms = 0.0;
  double p99_ms = 0.0;
  double max_ms = 0.0;
  double deadline_ms = 0.0;
  bool pass = false;
};

// Shared by cmd_bench and the acceptance suite: runs warmup + `trials`
// samples and summarizes wall-clock latency. Set `f32` for the 32-bit
// inference mirror.
LatencyReport measure_sampling_latency(const DiffusionPolicy& policy,
                                       const NoiseSchedule& schedule,
                                       const SampleOptions& options, int trials,
                                       double deadline_ms, bool f32, Rng& rng);

}  // namespace locodiff

#endif  // LOCODIFF_CLI_HPP_
