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

#include <benchmark/benchmark.h>

#include "locodiff/ddpm.hpp"
#include "locodiff/nn.hpp"
#include "locodiff/policy.hpp"
#include "locodiff/schedule.hpp"

namespace {

using namespace locodiff;

DiffusionPolicy make_policy() {
  Rng rng(42);
  return DiffusionPolicy::seeded(PolicyConfig::standard(), rng);
}

void BM_DenoiserForward(benchmark::State& state) {
  const DiffusionPolicy policy = make_policy();
  Rng rng(1);
  std::vector<double> input(policy.config.denoiser.input_dim());
  for (auto& v : input) v = rng.normal();
  for (auto _ : state) {
    auto out = policy.denoiser.forward(input);
    benchmark::DoNotOptimize(out);
  }
}
BENCHMARK(BM_DenoiserForward);

void BM_EncoderForward(benchmark::State& state) {
  const DiffusionPolicy policy = make_policy();
  Rng rng(1);
  std::vector<double> obs(policy.config.obs_dim());
  for (auto& v : obs) v = rng.normal();
  for (auto _ : state) {
    auto out = policy.encoder.forward(obs);
    benchmark::DoNotOptimize(out);
  }
}
BENCHMARK(BM_EncoderForward);

// Full per-control-step reverse diffusion at a given number of steps.
void BM_SampleAction(benchmark::State& state) {
  const DiffusionPolicy policy = make_policy();
  const auto schedule =
      NoiseSchedule::linear(static_cast<int>(state.range(0)), 1e-4, 0.02);
  ActionSampler sampler(policy, schedule, SampleOptions{});
  Rng rng(2);
  std::vector<double> obs(policy.config.obs_dim());
  for (auto& v : obs) v = rng.normal();
  for (auto _ : state) {
    auto result = sampler.sample(obs, rng);
    benchmark::DoNotOptimize(result.action);
  }
}
BENCHMARK(BM_SampleAction)->Arg(1)->Arg(10)->Arg(60)->Unit(benchmark::kMillisecond);

void BM_SinusoidalEmbedding(benchmark::State& state) {
  int t = 0;
  for (auto _ : state) {
    auto emb = sinusoidal_embedding(t++ % 61, 128);
    benchmark::DoNotOptimize(emb);
  }
}
BENCHMARK(BM_SinusoidalEmbedding);

void BM_TrainStepBatch256(benchmark::State& state) {
  const PolicyConfig cfg = PolicyConfig::standard();
  Rng rng(3);
  DiffusionPolicy policy = DiffusionPolicy::seeded(cfg, rng);
  const auto schedule = NoiseSchedule::linear(60, 1e-4, 0.02);
  TrainContext ctx(cfg, static_cast<int>(state.range(0)));
  nn::AdamState opt(policy.param_count(), nn::AdamConfig{});
  const std::size_t count = 256;
  std::vector<double> obs(count * cfg.obs_dim()), act(count * cfg.act_dim());
  for (auto& v : obs) v = rng.normal();
  for (auto& v : act) v = rng.normal();
  const BatchView batch{obs, act, count, cfg.obs_dim(), cfg.act_dim()};
  Rng draws(4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(ctx.train_step(batch, policy, schedule, opt, draws));
  }
}
BENCHMARK(BM_TrainStepBatch256)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
