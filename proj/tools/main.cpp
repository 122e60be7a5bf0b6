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

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "locodiff/cli.hpp"

namespace {

using locodiff::RunConfig;

void add_common(CLI::App* cmd, RunConfig& cfg, std::string& mode) {
  cmd->add_option("--seed", cfg.seed, "Run seed");
  cmd->add_option("--threads", cfg.threads, "Worker threads for batch evaluation");
  cmd->add_flag("--force", cfg.force, "Allow overwriting existing outputs");
  cmd->add_option("--mode", mode, "Sampler mode: ancestral or paper-literal")
      ->check(CLI::IsMember({"ancestral", "paper-literal", "paper_literal"}));
  cmd->add_flag("--warm-start", cfg.warm_start,
                "Reuse one initial noise draw across control steps");
  cmd->add_option("--T", cfg.num_steps, "Denoising steps");
  cmd->add_option("--beta-start", cfg.beta_start, "Schedule beta at t=1");
  cmd->add_option("--beta-end", cfg.beta_end, "Schedule beta at t=T");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"locodiff: real-time diffusion-policy locomotion engine"};
  app.set_config("--config", "",
                 "INI config file; keys live in a section named after the "
                 "subcommand, e.g. [train]");
  app.fallthrough();
  app.require_subcommand(1);

  RunConfig cfg;
  std::string mode = "ancestral";

  auto* gen = app.add_subcommand("gen-data", "Generate an offline dataset (BRDF)");
  add_common(gen, cfg, mode);
  gen->add_option("--out", cfg.out_path, "Output BRDF file")->required();
  gen->add_option("--pairs", cfg.pairs, "Total observation-action pairs");
  gen->add_option("--recipe", cfg.recipe_path, "Recipe file (velocity/slope/pairs cells)");
  gen->add_option("--roughness", cfg.roughness, "Joint perturbation amplitude, rad");
  gen->add_option("--task", cfg.task, "locomotion or bimodal")
      ->check(CLI::IsMember({"locomotion", "bimodal"}));
  gen->add_option("--csv", cfg.csv_export_path, "Also export a CSV copy");

  auto* train = app.add_subcommand("train", "Train the diffusion policy");
  add_common(train, cfg, mode);
  train->add_option("--dataset", cfg.dataset_path, "Input BRDF dataset")->required();
  train->add_option("--out", cfg.out_path, "Output directory")->required();
  train->add_option("--epochs", cfg.epochs, "Training epochs");
  train->add_option("--batch", cfg.batch, "Batch size");
  train->add_option("--lr", cfg.lr, "Adam learning rate");
  train->add_option("--split-ratio", cfg.split_ratio, "Train fraction of the split");
  train->add_option("--checkpoint-interval", cfg.checkpoint_interval,
                    "Save a checkpoint every N epochs");
  train->add_option("--latent-dim", cfg.latent_dim, "Latent observation size");
  train->add_option("--enc-hidden", cfg.encoder_hidden, "Encoder hidden width");
  train->add_option("--enc-layers", cfg.encoder_layers, "Encoder hidden layers");
  train->add_option("--den-hidden", cfg.denoiser_hidden, "Denoiser hidden width");
  train->add_option("--den-layers", cfg.denoiser_layers, "Denoiser hidden layers");
  train->add_option("--time-embed-dim", cfg.time_embed_dim, "Time embedding size");
  train->add_option("--resume", cfg.resume_path, "Continue from a checkpoint");
  bool no_normalize_train = false;
  train->add_flag("--no-normalize", no_normalize_train,
                  "Train on raw observations/actions");

  auto* rollout = app.add_subcommand("rollout", "Closed-loop rollout of a checkpoint");
  add_common(rollout, cfg, mode);
  rollout->add_option("--checkpoint", cfg.checkpoint_path, "BRCK checkpoint")->required();
  rollout->add_option("--out", cfg.out_path, "Output CSV")->required();
  rollout->add_option("--steps", cfg.steps, "Control steps");
  rollout->add_option("--velocity", cfg.velocity, "Commanded velocity, m/s");
  rollout->add_option("--slope-deg", cfg.slope_deg, "Terrain slope, degrees");
  rollout->add_option("--roughness", cfg.roughness, "Terrain roughness amplitude, rad");
  rollout->add_option("--task", cfg.task, "locomotion or bimodal")
      ->check(CLI::IsMember({"locomotion", "bimodal"}));
  rollout->add_option("--samples", cfg.bimodal_samples, "Samples for the bimodal task");

  auto* bench = app.add_subcommand("bench", "Sampling latency benchmark");
  add_common(bench, cfg, mode);
  bench->add_option("--checkpoint", cfg.checkpoint_path, "BRCK checkpoint")->required();
  bench->add_option("--trials", cfg.trials, "Timed trials (after warmup)");
  bench->add_option("--deadline-ms", cfg.deadline_ms, "Per-step latency budget");
  bench->add_flag("--f32", cfg.bench_f32, "Benchmark the 32-bit inference mirror");
  bench->add_option("--override-T", cfg.bench_steps_override,
                    "Bench with a different number of denoising steps");
  bench->add_option("--out", cfg.out_path, "Write the report to a file");

  auto* eval = app.add_subcommand("eval", "Train/val MSE of a checkpoint on a dataset");
  add_common(eval, cfg, mode);
  eval->add_option("--checkpoint", cfg.checkpoint_path, "BRCK checkpoint")->required();
  eval->add_option("--dataset", cfg.dataset_path, "BRDF dataset")->required();
  eval->add_option("--split-ratio", cfg.split_ratio, "Train fraction of the split");
  eval->add_option("--out", cfg.out_path, "Write the JSON summary to a file");

  CLI11_PARSE(app, argc, argv);

  if (no_normalize_train) cfg.normalize = false;
  if (const auto parsed = locodiff::sampler_mode_from_string(mode)) {
    cfg.mode = *parsed;
  }

  try {
    if (gen->parsed()) return locodiff::cmd_gen_data(cfg, std::cout);
    if (train->parsed()) return locodiff::cmd_train(cfg, std::cout);
    if (rollout->parsed()) return locodiff::cmd_rollout(cfg, std::cout);
    if (bench->parsed()) return locodiff::cmd_bench(cfg, std::cout);
    if (eval->parsed()) return locodiff::cmd_eval(cfg, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
