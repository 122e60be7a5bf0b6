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

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace locodiff {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Neumaier-compensated sum; keeps the batch loss insensitive to summation
// order at the 1e-15 level, which the order-invariance property relies on.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      comp_ += (sum_ - t) + v;
    } else {
      comp_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace

const char* to_string(SamplerMode mode) {
  return mode == SamplerMode::kPaperLiteral ? "paper-literal" : "ancestral";
}

std::optional<SamplerMode> sampler_mode_from_string(const std::string& s) {
  if (s == "paper-literal" || s == "paper_literal") return SamplerMode::kPaperLiteral;
  if (s == "ancestral") return SamplerMode::kAncestral;
  return std::nullopt;
}

std::vector<double> reverse_step_literal(std::span<const double> a_t,
                                         std::span<const double> eps_hat) {
  if (a_t.size() != eps_hat.size()) {
    throw std::invalid_argument("reverse_step_literal: length mismatch");
  }
  std::vector<double> out(a_t.size());
  for (std::size_t i = 0; i < a_t.size(); ++i) out[i] = a_t[i] - eps_hat[i];
  return out;
}

std::vector<double> reverse_step_ancestral(std::span<const double> a_t,
                                           std::span<const double> eps_hat, int t,
                                           const NoiseSchedule& schedule,
                                           std::span<const double> z) {
  if (a_t.size() != eps_hat.size() || a_t.size() != z.size()) {
    throw std::invalid_argument("reverse_step_ancestral: length mismatch");
  }
  const double beta = schedule.beta(t);  // validates 1 <= t <= T
  const double inv_sqrt_alpha = 1.0 / std::sqrt(schedule.alpha(t));
  const double noise_coef = beta / std::sqrt(1.0 - schedule.alpha_bar(t));
  const double sigma = t > 1 ? std::sqrt(beta) : 0.0;  // no noise at the last step
  std::vector<double> out(a_t.size());
  for (std::size_t i = 0; i < a_t.size(); ++i) {
    out[i] = inv_sqrt_alpha * (a_t[i] - noise_coef * eps_hat[i]) + sigma * z[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training

struct TrainContext::Worker {
  nn::GradBuffer encoder_grads;
  nn::GradBuffer denoiser_grads;
  nn::ForwardCache encoder_cache;
  nn::ForwardCache denoiser_cache;
  CompensatedSum loss;

  explicit Worker(const PolicyConfig& cfg)
      : encoder_grads(cfg.encoder), denoiser_grads(cfg.denoiser) {}
};

TrainContext::TrainContext(const PolicyConfig& config, int threads)
    : config_(config), threads_(std::max(1, threads)) {
  workers_.reserve(threads_);
  for (int i = 0; i < threads_; ++i) workers_.emplace_back(config_);
}

TrainContext::~TrainContext() = default;

double TrainContext::run_batch(const BatchView& batch, const DiffusionPolicy& policy,
                               const NoiseSchedule& schedule, Rng& rng,
                               bool with_grads) {
  if (batch.count == 0) throw std::invalid_argument("train_step: empty batch");
  if (batch.obs_dim != config_.obs_dim() || batch.act_dim != config_.act_dim()) {
    std::ostringstream os;
    os << "train_step: batch dims " << batch.obs_dim << "/" << batch.act_dim
       << " do not match policy " << config_.obs_dim() << "/" << config_.act_dim();
    throw std::invalid_argument(os.str());
  }

  const int act_dim = config_.act_dim();
  const int T = schedule.num_steps();

  // All randomness is drawn up front, sequentially, so worker scheduling
  // cannot perturb the stream.
  step_draws_.resize(batch.count);
  noise_draws_.resize(batch.count * act_dim);
  for (std::size_t i = 0; i < batch.count; ++i) {
    step_draws_[i] = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(T)));
    for (int d = 0; d < act_dim; ++d) {
      noise_draws_[i * act_dim + d] = rng.normal();
    }
  }

  const double inv_batch = 1.0 / static_cast<double>(batch.count);

  auto run_rows = [&](Worker& w, std::size_t begin, std::size_t end) {
    if (with_grads) {
      w.encoder_grads.zero();
      w.denoiser_grads.zero();
    }
    w.loss = CompensatedSum();
    std::vector<double> denoiser_input(config_.denoiser.input_dim());
    for (std::size_t i = begin; i < end; ++i) {
      std::span<const double> obs{batch.observations.data() + i * batch.obs_dim,
                                  static_cast<std::size_t>(batch.obs_dim)};
      std::span<const double> a0{batch.actions.data() + i * batch.act_dim,
                                 static_cast<std::size_t>(batch.act_dim)};
      std::span<const double> eps{noise_draws_.data() + i * act_dim,
                                  static_cast<std::size_t>(act_dim)};
      const int t = step_draws_[i];

      const auto latent = policy.encoder.forward(obs, w.encoder_cache);
      const auto t_emb = sinusoidal_embedding(t, config_.time_embed_dim);
      const auto noisy = forward_noise(a0, t, eps, schedule);

      double* in = denoiser_input.data();
      std::copy(noisy.begin(), noisy.end(), in);
      std::copy(t_emb.begin(), t_emb.end(), in + act_dim);
      std::copy(latent.begin(), latent.end(), in + act_dim + config_.time_embed_dim);

      const auto eps_hat = policy.denoiser.forward(denoiser_input, w.denoiser_cache);
      auto mse = nn::mse_loss(eps_hat, eps);
      w.loss.add(mse.loss);

      if (with_grads) {
        for (auto& g : mse.grad_pred) g *= inv_batch;
        const auto grad_input =
            policy.denoiser.backward(w.denoiser_cache, mse.grad_pred, w.denoiser_grads);
        std::span<const double> grad_latent{
            grad_input.data() + act_dim + config_.time_embed_dim,
            static_cast<std::size_t>(config_.latent_dim())};
        policy.encoder.backward(w.encoder_cache, grad_latent, w.encoder_grads);
      }
    }
  };

  const int used_workers =
      static_cast<int>(std::min<std::size_t>(threads_, batch.count));
  const std::size_t chunk = (batch.count + used_workers - 1) / used_workers;
  if (used_workers == 1) {
    run_rows(workers_[0], 0, batch.count);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(used_workers);
    for (int k = 0; k < used_workers; ++k) {
      const std::size_t begin = k * chunk;
      const std::size_t end = std::min(batch.count, begin + chunk);
      pool.emplace_back([&, k, begin, end] { run_rows(workers_[k], begin, end); });
    }
    for (auto& th : pool) th.join();
  }

  // Fixed reduction order: worker 0, 1, 2, ...
  CompensatedSum loss;
  for (int k = 0; k < used_workers; ++k) loss.add(workers_[k].loss.value());
  if (with_grads) {
    for (int k = 1; k < used_workers; ++k) {
      workers_[0].encoder_grads.add(workers_[k].encoder_grads);
      workers_[0].denoiser_grads.add(workers_[k].denoiser_grads);
    }
  }
  return loss.value() * inv_batch;
}

double TrainContext::train_step(const BatchView& batch, DiffusionPolicy& policy,
                                const NoiseSchedule& schedule, nn::AdamState& opt,
                                Rng& rng) {
  const double loss = run_batch(batch, policy, schedule, rng, /*with_grads=*/true);
  if (!std::isfinite(loss)) {
    std::ostringstream os;
    os << "train_step: non-finite loss " << loss << " (lr=" << opt.config().lr
       << ", optimizer step " << opt.step_count() << ")";
    throw std::runtime_error(os.str());
  }

  auto params = policy.tensors();
  auto enc_g = workers_[0].encoder_grads.tensors("encoder");
  auto den_g = workers_[0].denoiser_grads.tensors("denoiser");
  std::vector<nn::TensorRef> grads;
  grads.reserve(enc_g.size() + den_g.size());
  grads.insert(grads.end(), enc_g.begin(), enc_g.end());
  grads.insert(grads.end(), den_g.begin(), den_g.end());
  opt.step(params, grads);
  return loss;
}

double TrainContext::eval_loss(const BatchView& batch, const DiffusionPolicy& policy,
                               const NoiseSchedule& schedule, Rng& rng) {
  return run_batch(batch, policy, schedule, rng, /*with_grads=*/false);
}

namespace {

// Gather + optionally z-score a batch of dataset rows into flat buffers.
void materialize_rows(const OfflineDataset& ds, std::span<const std::size_t> rows,
                      const NormStats* stats, std::vector<double>& obs_out,
                      std::vector<double>& act_out) {
  const int od = ds.obs_dim();
  const int ad = ds.act_dim();
  obs_out.resize(rows.size() * od);
  act_out.resize(rows.size() * ad);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto obs = ds.observation(rows[i]);
    auto act = ds.action(rows[i]);
    if (stats != nullptr) {
      for (int d = 0; d < od; ++d) {
        obs_out[i * od + d] = (obs[d] - stats->obs_mean[d]) / stats->obs_std[d];
      }
      for (int d = 0; d < ad; ++d) {
        act_out[i * ad + d] = (act[d] - stats->act_mean[d]) / stats->act_std[d];
      }
    } else {
      std::copy(obs.begin(), obs.end(), obs_out.begin() + i * od);
      std::copy(act.begin(), act.end(), act_out.begin() + i * ad);
    }
  }
}

}  // namespace

void train(DiffusionPolicy& policy, const OfflineDataset& ds, const SplitIndex& split,
           const NormStats* stats, const NoiseSchedule& schedule,
           const TrainOptions& options, const CheckpointSink& checkpoint_sink,
           const ReportSink& report_sink) {
  ds.require_dims(policy.config.obs_dim(), policy.config.act_dim());

  TrainContext ctx(policy.config, options.threads);
  nn::AdamState opt(policy.param_count(), nn::AdamConfig{.lr = options.lr});
  BatchSampler sampler(split, options.batch_size);

  // Distinct streams: batch order, per-element training draws, validation
  // draws (re-seeded every evaluation so val losses are comparable).
  Rng order_rng(options.seed, 11);
  Rng draw_rng(options.seed, 12);

  std::vector<double> obs_buf, act_buf;
  const auto t_start = Clock::now();

  if (options.epochs == 0 && checkpoint_sink) {
    checkpoint_sink(options.start_epoch, policy, /*is_final=*/true);
    return;
  }

  for (int e = 0; e < options.epochs; ++e) {
    const int epoch = options.start_epoch + e + 1;
    sampler.begin_epoch(order_rng);
    CompensatedSum epoch_loss;
    std::size_t batches = 0;
    for (auto rows = sampler.next_batch(); !rows.empty(); rows = sampler.next_batch()) {
      materialize_rows(ds, rows, stats, obs_buf, act_buf);
      BatchView batch{obs_buf, act_buf, rows.size(), ds.obs_dim(), ds.act_dim()};
      epoch_loss.add(ctx.train_step(batch, policy, schedule, opt, draw_rng));
      ++batches;
    }

    TrainReport report;
    report.epoch = epoch;
    report.mean_batch_loss = epoch_loss.value() / static_cast<double>(batches);
    if (!split.val_rows.empty()) {
      Rng val_rng(options.seed, 13);
      materialize_rows(ds, split.val_rows, stats, obs_buf, act_buf);
      BatchView val{obs_buf, act_buf, split.val_rows.size(), ds.obs_dim(), ds.act_dim()};
      report.val_loss = ctx.eval_loss(val, policy, schedule, val_rng);
    } else {
      report.val_loss = std::numeric_limits<double>::quiet_NaN();
    }
    report.wall_s = seconds_since(t_start);
    if (report_sink) report_sink(report);

    const bool last = e + 1 == options.epochs;
    if (checkpoint_sink &&
        (last || (options.checkpoint_interval > 0 &&
                  epoch % options.checkpoint_interval == 0))) {
      checkpoint_sink(epoch, policy, last);
    }
  }
}

// ---------------------------------------------------------------------------
// Sampling

ActionSampler::ActionSampler(const DiffusionPolicy& policy,
                             const NoiseSchedule& schedule, SampleOptions options)
    : policy_(policy), schedule_(schedule), options_(options) {
  const int T = schedule_.num_steps();
  time_embeddings_.reserve(T);
  for (int t = 1; t <= T; ++t) {
    time_embeddings_.push_back(
        sinusoidal_embedding(t, policy_.config.time_embed_dim));
  }
  denoiser_input_.resize(policy_.config.denoiser.input_dim());
  z_.resize(policy_.config.act_dim());
}

void ActionSampler::reset() { warm_ready_ = false; }

SampleResult ActionSampler::sample(std::span<const double> observation, Rng& rng) {
  const auto t0 = Clock::now();
  const auto& cfg = policy_.config;
  const int act_dim = cfg.act_dim();
  const int T = schedule_.num_steps();

  std::vector<double> obs_norm;
  std::span<const double> obs = observation;
  if (options_.stats != nullptr) {
    obs_norm = normalize_observation(observation, *options_.stats);
    obs = obs_norm;
  }

  // O^l is computed once per control step; only the chain walks t.
  const auto latent = policy_.encoder.forward(obs);

  std::vector<double> chain(act_dim);
  if (options_.warm_start && warm_ready_) {
    chain = warm_chain_;
  } else {
    for (auto& v : chain) v = rng.normal();
    if (options_.warm_start) {
      warm_chain_ = chain;
      warm_ready_ = true;
    }
  }

  const std::size_t latent_at = static_cast<std::size_t>(act_dim) + cfg.time_embed_dim;
  std::copy(latent.begin(), latent.end(), denoiser_input_.begin() + latent_at);

  for (int t = T; t >= 1; --t) {
    const auto& t_emb = time_embeddings_[t - 1];
    std::copy(chain.begin(), chain.end(), denoiser_input_.begin());
    std::copy(t_emb.begin(), t_emb.end(), denoiser_input_.begin() + act_dim);
    const auto eps_hat = policy_.denoiser.forward(denoiser_input_);

    if (options_.mode == SamplerMode::kPaperLiteral) {
      for (int d = 0; d < act_dim; ++d) chain[d] -= eps_hat[d];
    } else {
      for (auto& v : z_) v = t > 1 ? rng.normal() : 0.0;
      chain = reverse_step_ancestral(chain, eps_hat, t, schedule_, z_);
    }
    for (int d = 0; d < act_dim; ++d) {
      if (!std::isfinite(chain[d])) {
        std::ostringstream os;
        os << "sample_action: non-finite chain value at diffusion step " << t
           << ", component " << d;
        throw std::runtime_error(os.str());
      }
    }
  }

  SampleResult result;
  result.action = options_.stats != nullptr
                      ? denormalize_action(chain, *options_.stats)
                      : chain;
  result.latency_s = seconds_since(t0);
  return result;
}

SampleResult sample_action(const DiffusionPolicy& policy, const NoiseSchedule& schedule,
                           const Observation& obs, Rng& rng,
                           const SampleOptions& options) {
  ActionSampler sampler(policy, schedule, options);
  return sampler.sample(obs.values, rng);
}

// ---------------------------------------------------------------------------
// Closed loop

double RolloutRecord::tracking_rmse() const {
  if (steps.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& s : steps) acc += s.tracking_error * s.tracking_error;
  return std::sqrt(acc / static_cast<double>(steps.size()));
}

double RolloutRecord::mean_latency_s() const {
  if (steps.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& s : steps) acc += s.latency_s;
  return acc / static_cast<double>(steps.size());
}

RolloutRecord closed_loop_rollout(ControlEnv& env, const DiffusionPolicy& policy,
                                  const NoiseSchedule& schedule, int steps,
                                  const SampleOptions& options, Rng& rng) {
  if (steps < 1) throw std::invalid_argument("closed_loop_rollout: steps must be >= 1");
  RolloutRecord record;
  record.mode = options.mode;
  record.warm_start = options.warm_start;
  record.steps.reserve(steps);

  ActionSampler sampler(policy, schedule, options);
  for (int k = 0; k < steps; ++k) {
    if (!env.alive()) {
      record.ended_early = true;
      record.end_reason = env.end_reason();
      break;
    }
    RolloutStep step;
    step.step = k;
    step.phase = env.phase();
    step.state = env.current_frame();
    step.expert = env.reference_action();

    const Observation obs = env.observation();
    auto sampled = sampler.sample(obs.values, rng);
    step.action = std::move(sampled.action);
    step.latency_s = sampled.latency_s;

    double acc = 0.0;
    for (std::size_t d = 0; d < step.action.size(); ++d) {
      const double diff = step.action[d] - step.expert[d];
      acc += diff * diff;
    }
    step.tracking_error = std::sqrt(acc / static_cast<double>(step.action.size()));

    env.apply(step.action);
    record.steps.push_back(std::move(step));
  }
  return record;
}

}  // namespace locodiff
