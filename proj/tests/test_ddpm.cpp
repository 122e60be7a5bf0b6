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

#include "locodiff/ddpm.hpp"

#include <doctest.h>

#include <stdexcept>

#include <cmath>

#include "test_oracles.hpp"

using namespace locodiff;

namespace {

// Small generic dims keep the finite-difference sweeps fast.
PolicyConfig toy_config() {
  return PolicyConfig::custom(/*obs=*/10, /*act=*/2, /*latent=*/5,
                              /*enc_hidden=*/8, /*enc_layers=*/2,
                              /*den_hidden=*/16, /*den_layers=*/2,
                              /*time_embed=*/8);
}

struct ToyBatch {
  std::vector<double> obs;
  std::vector<double> act;
  std::size_t count;
  BatchView view(const PolicyConfig& cfg) const {
    return {obs, act, count, cfg.obs_dim(), cfg.act_dim()};
  }
};

ToyBatch make_batch(const PolicyConfig& cfg, std::size_t count, Rng& rng) {
  ToyBatch b;
  b.count = count;
  b.obs.resize(count * cfg.obs_dim());
  b.act.resize(count * cfg.act_dim());
  for (auto& v : b.obs) v = rng.normal();
  for (auto& v : b.act) v = rng.normal();
  return b;
}

std::vector<double> snapshot(const DiffusionPolicy& policy) {
  std::vector<double> flat;
  for (const auto& t : policy.tensors()) {
    flat.insert(flat.end(), t.data, t.data + t.size);
  }
  return flat;
}

}  // namespace

TEST_CASE("reverse_step_literal") {
  const std::vector<double> a{0.5, -1.0, 2.0};
  SUBCASE("zero estimate leaves the action unchanged") {
    const std::vector<double> zero(3, 0.0);
    CHECK(reverse_step_literal(a, zero) == a);
  }
  SUBCASE("a_t = eps_hat gives zero") {
    const auto out = reverse_step_literal(a, a);
    for (double v : out) CHECK(v == 0.0);
  }
  SUBCASE("telescoping: T literal steps equal a_T minus the estimate sum") {
    Rng rng(3);
    const int T = 60;
    std::vector<double> chain{1.0, -2.0, 0.5};
    const std::vector<double> start = chain;
    std::vector<double> total(3, 0.0);
    for (int t = 0; t < T; ++t) {
      std::vector<double> eps(3);
      for (auto& v : eps) v = rng.normal();
      for (int i = 0; i < 3; ++i) total[i] += eps[i];
      chain = reverse_step_literal(chain, eps);
    }
    for (int i = 0; i < 3; ++i) {
      CHECK(std::abs(chain[i] - (start[i] - total[i])) < 1e-12);
    }
  }
}

TEST_CASE("reverse_step_ancestral") {
  const auto s = NoiseSchedule::linear(60, 1e-4, 0.02);
  const std::vector<double> a{0.5, -1.0, 2.0};
  const std::vector<double> zero(3, 0.0);
  SUBCASE("zero estimate and zero noise reduce to a_t / sqrt(alpha_t)") {
    const auto out = reverse_step_ancestral(a, zero, 17, s, zero);
    const double c = 1.0 / std::sqrt(s.alpha(17));
    for (int i = 0; i < 3; ++i) CHECK(out[i] == doctest::Approx(c * a[i]).epsilon(1e-15));
  }
  SUBCASE("t = 1 injects no noise regardless of z") {
    const std::vector<double> z{100.0, -100.0, 100.0};
    const auto with_z = reverse_step_ancestral(a, zero, 1, s, z);
    const auto without = reverse_step_ancestral(a, zero, 1, s, zero);
    CHECK(with_z == without);
  }
  SUBCASE("fixture at t = 30 matches a scalar evaluation of the formula") {
    const std::vector<double> eps{0.3, 0.7, -0.2};
    const std::vector<double> z{1.5, -0.5, 0.25};
    const auto out = reverse_step_ancestral(a, eps, 30, s, z);
    for (int i = 0; i < 3; ++i) {
      const double want =
          (a[i] - s.beta(30) / std::sqrt(1.0 - s.alpha_bar(30)) * eps[i]) /
              std::sqrt(s.alpha(30)) +
          std::sqrt(s.beta(30)) * z[i];
      CHECK(out[i] == doctest::Approx(want).epsilon(1e-15));
    }
  }
  SUBCASE("t out of range rejected") {
    CHECK_THROWS_AS(reverse_step_ancestral(a, zero, 0, s, zero), std::out_of_range);
    CHECK_THROWS_AS(reverse_step_ancestral(a, zero, 61, s, zero), std::out_of_range);
  }
}

TEST_CASE("train_step with lr = 0 leaves parameters bit-identical") {
  Rng rng(21);
  const PolicyConfig cfg = toy_config();
  DiffusionPolicy policy = DiffusionPolicy::seeded(cfg, rng);
  const auto before = snapshot(policy);
  const auto s = NoiseSchedule::linear(60, 1e-4, 0.02);
  TrainContext ctx(cfg, 1);
  nn::AdamState opt(policy.param_count(), nn::AdamConfig{.lr = 0.0});
  const ToyBatch batch = make_batch(cfg, 8, rng);
  Rng draws(22);
  ctx.train_step(batch.view(cfg), policy, s, opt, draws);
  CHECK(snapshot(policy) == before);
}

TEST_CASE("fixed seed gives an identical loss sequence") {
  const PolicyConfig cfg = toy_config();
  const auto s = NoiseSchedule::linear(60, 1e-4, 0.02);
  auto run = [&] {
    Rng rng(33);
    DiffusionPolicy policy = DiffusionPolicy::seeded(cfg, rng);
    TrainContext ctx(cfg, 1);
    nn::AdamState opt(policy.param_count(), nn::AdamConfig{.lr = 1e-3});
    Rng draws(34);
    Rng batch_rng(35);
    std::vector<double> losses;
    for (int step = 0; step < 5; ++step) {
      const ToyBatch batch = make_batch(cfg, 6, batch_rng);
      losses.push_back(ctx.train_step(batch.view(cfg), policy, s, opt, draws));
    }
    return losses;
  };
  CHECK(run() == run());
}

TEST_CASE("composed encoder+denoiser gradient matches finite differences") {
  Rng rng(55);
  const PolicyConfig cfg = toy_config();
  DiffusionPolicy policy = DiffusionPolicy::seeded(cfg, rng);
  const auto s = NoiseSchedule::linear(60, 1e-4, 0.02);
  const std::size_t batch_count = 4;
  const ToyBatch batch = make_batch(cfg, batch_count, rng);

  // Fixed per-element draws so the objective is a deterministic function of
  // the parameters alone.
  std::vector<int> ts(batch_count);
  std::vector<double> eps(batch_count * cfg.act_dim());
  Rng draw_rng(56);
  for (auto& t : ts) t = 1 + static_cast<int>(draw_rng.below(60));
  for (auto& v : eps) v = draw_rng.normal();

  const auto objective = [&] {
    double total = 0.0;
    for (std::size_t i = 0; i < batch_count; ++i) {
      std::span<const double> obs{batch.obs.data() + i * cfg.obs_dim(),
                                  static_cast<std::size_t>(cfg.obs_dim())};
      std::span<const double> a0{batch.act.data() + i * cfg.act_dim(),
                                 static_cast<std::size_t>(cfg.act_dim())};
      std::span<const double> e{eps.data() + i * cfg.act_dim(),
                                static_cast<std::size_t>(cfg.act_dim())};
      const auto latent = encode_observation(policy, obs);
      const auto t_emb = sinusoidal_embedding(ts[i], cfg.time_embed_dim);
      const auto emb = build_embedding(t_emb, latent, cfg);
      const auto noisy = forward_noise(a0, ts[i], e, s);
      const auto eps_hat = predict_noise(policy, noisy, emb);
      total += nn::mse_loss(eps_hat, e).loss;
    }
    return total / static_cast<double>(batch_count);
  };

  // Analytic gradients via the training path with the same fixed draws.
  nn::GradBuffer enc_grads(cfg.encoder), den_grads(cfg.denoiser);
  enc_grads.zero();
  den_grads.zero();
  nn::ForwardCache enc_cache, den_cache;
  const double inv_batch = 1.0 / static_cast<double>(batch_count);
  for (std::size_t i = 0; i < batch_count; ++i) {
    std::span<const double> obs{batch.obs.data() + i * cfg.obs_dim(),
                                static_cast<std::size_t>(cfg.obs_dim())};
    std::span<const double> a0{batch.act.data() + i * cfg.act_dim(),
                               static_cast<std::size_t>(cfg.act_dim())};
    std::span<const double> e{eps.data() + i * cfg.act_dim(),
                              static_cast<std::size_t>(cfg.act_dim())};
    const auto latent = policy.encoder.forward(obs, enc_cache);
    const auto t_emb = sinusoidal_embedding(ts[i], cfg.time_embed_dim);
    const auto noisy = forward_noise(a0, ts[i], e, s);
    std::vector<double> input;
    input.insert(input.end(), noisy.begin(), noisy.end());
    input.insert(input.end(), t_emb.begin(), t_emb.end());
    input.insert(input.end(), latent.begin(), latent.end());
    const auto eps_hat = policy.denoiser.forward(input, den_cache);
    auto mse = nn::mse_loss(eps_hat, e);
    for (auto& g : mse.grad_pred) g *= inv_batch;
    const auto grad_in = policy.denoiser.backward(den_cache, mse.grad_pred, den_grads);
    std::span<const double> grad_latent{
        grad_in.data() + cfg.act_dim() + cfg.time_embed_dim,
        static_cast<std::size_t>(cfg.latent_dim())};
    policy.encoder.backward(enc_cache, grad_latent, enc_grads);
  }

  const auto fd = testing::finite_difference(policy.tensors(), objective);
  std::size_t k = 0;
  auto check_block = [&](nn::GradBuffer& grads, const char* prefix) {
    for (const auto& tensor : grads.tensors(prefix)) {
      for (std::size_t i = 0; i < tensor.size; ++i, ++k) {
        CHECK(testing::relative_error(tensor.data[i], fd[k]) < 1e-6);
      }
    }
  };
  check_block(enc_grads, "encoder");
  check_block(den_grads, "denoiser");
  CHECK(k == fd.size());
}

TEST_CASE("batch loss is invariant to element order under fixed draws") {
  const PolicyConfig cfg = toy_config();
  const auto s = NoiseSchedule::linear(60, 1e-4, 0.02);
  Rng rng(66);
  DiffusionPolicy policy = DiffusionPolicy::seeded(cfg, rng);
  TrainContext ctx(cfg, 1);
  ToyBatch batch = make_batch(cfg, 16, rng);

  // eval_loss draws (t, eps) per element in order; permuting the batch while
  // re-seeding identically assigns the same draws to different rows, so here
  // we instead reverse both rows and the rng-consumption by evaluating two
  // layouts whose per-element pairs are equal as a multiset.
  Rng d1(67);
  const double loss_a = ctx.eval_loss(batch.view(cfg), policy, s, d1);

  // reversed rows with reversed draw order: swap rows i <-> n-1-i and feed a
  // draw stream that assigns each row its original (t, eps).
  const std::size_t n = batch.count;
  ToyBatch reversed = batch;
  for (std::size_t i = 0; i < n; ++i) {
    for (int d = 0; d < cfg.obs_dim(); ++d) {
      reversed.obs[i * cfg.obs_dim() + d] = batch.obs[(n - 1 - i) * cfg.obs_dim() + d];
    }
    for (int d = 0; d < cfg.act_dim(); ++d) {
      reversed.act[i * cfg.act_dim() + d] = batch.act[(n - 1 - i) * cfg.act_dim() + d];
    }
  }
  // Per-element losses are independent, so the reversed batch with reversed
  // draws must produce the same mean up to summation order (compensated sum
  // keeps that below 1e-12).
  std::vector<int> ts(n);
  std::vector<double> eps(n * cfg.act_dim());
  Rng d2(67);
  for (std::size_t i = 0; i < n; ++i) {
    ts[i] = 1 + static_cast<int>(d2.below(60));
    for (int d = 0; d < cfg.act_dim(); ++d) eps[i * cfg.act_dim() + d] = d2.normal();
  }
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t src = n - 1 - i;  // row now at position i
    std::span<const double> obs{reversed.obs.data() + i * cfg.obs_dim(),
                                static_cast<std::size_t>(cfg.obs_dim())};
    std::span<const double> a0{reversed.act.data() + i * cfg.act_dim(),
                               static_cast<std::size_t>(cfg.act_dim())};
    std::span<const double> e{eps.data() + src * cfg.act_dim(),
                              static_cast<std::size_t>(cfg.act_dim())};
    const auto latent = encode_observation(policy, obs);
    const auto emb =
        build_embedding(sinusoidal_embedding(ts[src], cfg.time_embed_dim), latent, cfg);
    const auto noisy = forward_noise(a0, ts[src], e, s);
    total += nn::mse_loss(predict_noise(policy, noisy, emb), e).loss;
  }
  CHECK(std::abs(total / static_cast<double>(n) - loss_a) < 1e-12);
}

TEST_CASE("thread-parallel training matches the configured-thread rerun exactly") {
  const PolicyConfig cfg = toy_config();
  const auto s = NoiseSchedule::linear(60, 1e-4, 0.02);
  auto run = [&](int threads) {
    Rng rng(44);
    DiffusionPolicy policy = DiffusionPolicy::seeded(cfg, rng);
    TrainContext ctx(cfg, threads);
    nn::AdamState opt(policy.param_count(), nn::AdamConfig{.lr = 1e-3});
    Rng draws(45);
    Rng batch_rng(46);
    for (int step = 0; step < 4; ++step) {
      const ToyBatch batch = make_batch(cfg, 32, batch_rng);
      ctx.train_step(batch.view(cfg), policy, s, opt, draws);
    }
    return snapshot(policy);
  };
  CHECK(run(2) == run(2));  // bit-identical for a fixed worker count
}

TEST_CASE("sample_action: zero-parameter literal mode returns the initial draw") {
  const PolicyConfig cfg = toy_config();
  DiffusionPolicy policy(cfg);  // all-zero parameters -> eps_hat = 0
  const auto s = NoiseSchedule::linear(60, 1e-4, 0.02);
  SampleOptions options;
  options.mode = SamplerMode::kPaperLiteral;
  Observation obs_small;
  std::vector<double> obs(cfg.obs_dim(), 0.25);

  Rng a(77);
  ActionSampler sampler(policy, s, options);
  const auto result = sampler.sample(obs, a);

  Rng b(77);
  std::vector<double> draw(cfg.act_dim());
  for (auto& v : draw) v = b.normal();
  REQUIRE(result.action.size() == draw.size());
  for (std::size_t i = 0; i < draw.size(); ++i) CHECK(result.action[i] == draw[i]);
  CHECK(result.latency_s >= 0.0);
}

TEST_CASE("sample_action is seed-deterministic") {
  Rng rng(88);
  const PolicyConfig cfg = toy_config();
  DiffusionPolicy policy = DiffusionPolicy::seeded(cfg, rng);
  const auto s = NoiseSchedule::linear(60, 1e-4, 0.02);
  std::vector<double> obs(cfg.obs_dim());
  for (auto& v : obs) v = rng.normal();
  for (SamplerMode mode : {SamplerMode::kAncestral, SamplerMode::kPaperLiteral}) {
    SampleOptions options;
    options.mode = mode;
    Rng r1(99), r2(99);
    ActionSampler s1(policy, s, options), s2(policy, s, options);
    CHECK(s1.sample(obs, r1).action == s2.sample(obs, r2).action);
  }
}

TEST_CASE("warm start reuses one initial draw across control steps") {
  const PolicyConfig cfg = toy_config();
  DiffusionPolicy policy(cfg);  // zero params; literal mode returns the chain start
  const auto s = NoiseSchedule::linear(60, 1e-4, 0.02);
  SampleOptions options;
  options.mode = SamplerMode::kPaperLiteral;
  options.warm_start = true;
  ActionSampler sampler(policy, s, options);
  std::vector<double> obs(cfg.obs_dim(), 0.0);
  Rng rng(31);
  const auto first = sampler.sample(obs, rng);
  const auto second = sampler.sample(obs, rng);
  CHECK(first.action == second.action);  // same a^T reused
  sampler.reset();
  const auto third = sampler.sample(obs, rng);
  CHECK(third.action != first.action);
}

TEST_CASE("train: zero epochs emit only the initial checkpoint") {
  const PolicyConfig cfg = toy_config();
  Rng rng(3);
  DiffusionPolicy policy = DiffusionPolicy::seeded(cfg, rng);
  const auto before = snapshot(policy);

  OfflineDataset ds(cfg.obs_dim(), cfg.act_dim());
  std::vector<double> obs(cfg.obs_dim()), act(cfg.act_dim());
  for (int i = 0; i < 10; ++i) {
    for (auto& v : obs) v = rng.normal();
    for (auto& v : act) v = rng.normal();
    ds.append(obs, act, {});
  }
  const SplitIndex split = split_train_val(ds, 0.8, 1);
  const auto s = NoiseSchedule::linear(60, 1e-4, 0.02);

  TrainOptions options;
  options.epochs = 0;
  options.batch_size = 4;
  int checkpoints = 0;
  int reports = 0;
  train(policy, ds, split, nullptr, s, options,
        [&](int epoch, const DiffusionPolicy&, bool is_final) {
          ++checkpoints;
          CHECK(epoch == 0);
          CHECK(is_final);
        },
        [&](const TrainReport&) { ++reports; });
  CHECK(checkpoints == 1);
  CHECK(reports == 0);
  CHECK(snapshot(policy) == before);
}

TEST_CASE("train: loss decreases on a single-pair dataset") {
  const PolicyConfig cfg = toy_config();
  Rng rng(17);
  DiffusionPolicy policy = DiffusionPolicy::seeded(cfg, rng);

  OfflineDataset ds(cfg.obs_dim(), cfg.act_dim());
  std::vector<double> obs(cfg.obs_dim()), act(cfg.act_dim());
  for (auto& v : obs) v = rng.normal();
  for (auto& v : act) v = rng.normal();
  ds.append(obs, act, {});
  ds.append(obs, act, {});  // two pairs so the split keeps one for training

  SplitIndex split;
  split.train_rows = {0};
  split.val_rows = {1};
  const auto s = NoiseSchedule::linear(60, 1e-4, 0.02);

  TrainOptions options;
  options.epochs = 500;  // one step per epoch at batch 1
  options.batch_size = 1;
  options.lr = 2e-3;
  options.threads = 1;
  options.checkpoint_interval = 0;
  options.seed = 17;
  std::vector<double> losses;
  train(policy, ds, split, nullptr, s, options, nullptr,
        [&](const TrainReport& r) { losses.push_back(r.mean_batch_loss); });
  REQUIRE(losses.size() == 500);
  CHECK(losses.back() < losses.front());
  // windowed means are the sturdier signal under per-step draw noise
  double head = 0.0, tail = 0.0;
  for (int i = 0; i < 50; ++i) {
    head += losses[i];
    tail += losses[450 + i];
  }
  CHECK(tail < head);
}

TEST_CASE("closed-loop rollout records one step per control tick") {
  // Deterministic mini-env that never dies.
  class StubEnv : public ControlEnv {
   public:
    bool alive() const override { return true; }
    Observation observation() const override { return Observation{}; }
    StateFrame current_frame() const override { return StateFrame{}; }
    double phase() const override { return 0.25; }
    Action reference_action() const override { return Action(6, 0.0); }
    void apply(const Action&) override { ++applied; }
    std::string end_reason() const override { return {}; }
    int applied = 0;
  };

  Rng rng(5);
  DiffusionPolicy policy = DiffusionPolicy::seeded(PolicyConfig::standard(), rng);
  const auto s = NoiseSchedule::linear(10, 1e-4, 0.02);
  StubEnv env;
  Rng roll(6);
  const RolloutRecord record =
      closed_loop_rollout(env, policy, s, 1, SampleOptions{}, roll);
  CHECK(env.applied == 1);
  CHECK(record.steps.size() == 1);
  CHECK_FALSE(record.ended_early);
}
