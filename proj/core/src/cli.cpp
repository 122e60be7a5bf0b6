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

#include "locodiff/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "locodiff/checkpoint.hpp"
#include "locodiff/surrogate.hpp"

namespace locodiff {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

void require_writable(const fs::path& path, bool force, const char* what) {
  if (fs::exists(path) && !force) {
    std::ostringstream os;
    os << what << ": refusing to overwrite " << path.string()
       << " (pass --force to allow)";
    throw std::runtime_error(os.str());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open " + path.string());
  os << text;
  if (!os) throw std::runtime_error("write failed for " + path.string());
}

void write_manifest(const RunConfig& config, const std::string& command,
                    const fs::path& primary_output) {
  if (primary_output.empty()) return;
  write_text(fs::path(primary_output.string() + ".manifest.txt"),
             manifest(config, command));
}

std::string rollout_csv(const RolloutRecord& record) {
  std::ostringstream os;
  os << "step,phase";
  for (int j = 0; j < 6; ++j) os << ",expert_" << j;
  for (int j = 0; j < 6; ++j) os << ",policy_" << j;
  os << ",latency_ms,tracking_error\n";
  for (const auto& s : record.steps) {
    os << s.step << ',' << fmt(s.phase);
    for (double v : s.expert) os << ',' << fmt(v);
    for (double v : s.action) os << ',' << fmt(v);
    os << ',' << fmt(s.latency_s * 1e3) << ',' << fmt(s.tracking_error) << '\n';
  }
  return os.str();
}

}  // namespace

std::string manifest(const RunConfig& c, const std::string& command) {
  std::ostringstream os;
  os << "# locodiff run manifest\n";
  os << "command = " << command << '\n';
  os << "seed = " << c.seed << '\n';
  os << "threads = " << c.threads << '\n';
  os << "force = " << (c.force ? "true" : "false") << '\n';
  os << "num_steps = " << c.num_steps << '\n';
  os << "beta_start = " << fmt(c.beta_start) << '\n';
  os << "beta_end = " << fmt(c.beta_end) << '\n';
  os << "latent_dim = " << c.latent_dim << '\n';
  os << "encoder_hidden = " << c.encoder_hidden << '\n';
  os << "encoder_layers = " << c.encoder_layers << '\n';
  os << "denoiser_hidden = " << c.denoiser_hidden << '\n';
  os << "denoiser_layers = " << c.denoiser_layers << '\n';
  os << "time_embed_dim = " << c.time_embed_dim << '\n';
  os << "epochs = " << c.epochs << '\n';
  os << "batch = " << c.batch << '\n';
  os << "lr = " << fmt(c.lr) << '\n';
  os << "split_ratio = " << fmt(c.split_ratio) << '\n';
  os << "checkpoint_interval = " << c.checkpoint_interval << '\n';
  os << "normalize = " << (c.normalize ? "true" : "false") << '\n';
  os << "mode = " << to_string(c.mode) << '\n';
  os << "warm_start = " << (c.warm_start ? "true" : "false") << '\n';
  os << "steps = " << c.steps << '\n';
  os << "velocity = " << fmt(c.velocity) << '\n';
  os << "slope_deg = " << fmt(c.slope_deg) << '\n';
  os << "roughness = " << fmt(c.roughness) << '\n';
  os << "bimodal_samples = " << c.bimodal_samples << '\n';
  os << "trials = " << c.trials << '\n';
  os << "deadline_ms = " << fmt(c.deadline_ms) << '\n';
  os << "bench_f32 = " << (c.bench_f32 ? "true" : "false") << '\n';
  os << "bench_steps_override = " << c.bench_steps_override << '\n';
  os << "pairs = " << c.pairs << '\n';
  os << "task = " << c.task << '\n';
  os << "dataset_path = " << c.dataset_path << '\n';
  os << "checkpoint_path = " << c.checkpoint_path << '\n';
  os << "resume_path = " << c.resume_path << '\n';
  os << "recipe_path = " << c.recipe_path << '\n';
  os << "out_path = " << c.out_path << '\n';
  os << "csv_export_path = " << c.csv_export_path << '\n';
  return os.str();
}

int cmd_gen_data(const RunConfig& config, std::ostream& out) {
  out << manifest(config, "gen-data");
  if (config.out_path.empty()) {
    throw std::runtime_error("gen-data: --out is required");
  }
  require_writable(config.out_path, config.force, "gen-data");

  OfflineDataset ds;
  if (config.task == "bimodal") {
    ds = gen_bimodal_dataset(config.pairs, config.seed);
  } else if (config.task == "locomotion") {
    const auto recipe = config.recipe_path.empty()
                            ? default_recipe(config.pairs)
                            : parse_recipe(config.recipe_path);
    ds = gen_dataset(recipe, config.seed, config.roughness);
    for (std::size_t i = 0; i < recipe.size(); ++i) {
      out << "cell " << i << ": velocity=" << fmt(recipe[i].velocity)
          << " slope_deg=" << fmt(recipe[i].slope_deg) << " pairs=" << recipe[i].pairs
          << '\n';
    }
  } else {
    throw std::runtime_error("gen-data: unknown task '" + config.task + "'");
  }

  save_dataset(ds, config.out_path);
  if (!config.csv_export_path.empty()) {
    require_writable(config.csv_export_path, config.force, "gen-data csv");
    export_dataset_csv(ds, config.csv_export_path);
  }
  write_manifest(config, "gen-data", config.out_path);
  out << "wrote " << ds.size() << " pairs (obs_dim=" << ds.obs_dim()
      << ", act_dim=" << ds.act_dim() << ") to " << config.out_path << '\n';
  return 0;
}

int cmd_train(const RunConfig& config, std::ostream& out) {
  out << manifest(config, "train");
  if (config.dataset_path.empty()) throw std::runtime_error("train: --dataset is required");
  if (config.out_path.empty()) throw std::runtime_error("train: --out is required");

  const OfflineDataset ds = load_dataset(config.dataset_path);
  if (ds.size() < 2) throw std::runtime_error("train: dataset too small to split");

  const fs::path out_dir(config.out_path);
  fs::create_directories(out_dir);
  const fs::path metrics_path = out_dir / "metrics.csv";
  require_writable(metrics_path, config.force, "train");

  const SplitIndex split = split_train_val(ds, config.split_ratio, config.seed);

  CheckpointMeta meta;
  meta.num_steps = config.num_steps;
  meta.beta_start = config.beta_start;
  meta.beta_end = config.beta_end;
  meta.normalize = config.normalize;
  meta.seed = config.seed;

  TrainOptions options;
  options.epochs = config.epochs;
  options.batch_size = config.batch;
  options.lr = config.lr;
  options.threads = config.threads;
  options.checkpoint_interval = config.checkpoint_interval;
  options.seed = config.seed;
  options.normalize = config.normalize;

  DiffusionPolicy policy = [&] {
    if (!config.resume_path.empty()) {
      auto loaded = load_checkpoint(config.resume_path);
      meta.num_steps = loaded.meta.num_steps;
      meta.beta_start = loaded.meta.beta_start;
      meta.beta_end = loaded.meta.beta_end;
      meta.normalize = loaded.meta.normalize;
      meta.stats = loaded.meta.stats;
      options.normalize = loaded.meta.normalize;
      options.start_epoch = static_cast<int>(loaded.meta.epoch);
      out << "resumed from " << config.resume_path << " at epoch "
          << loaded.meta.epoch << '\n';
      return std::move(loaded.policy);
    }
    if (config.normalize) meta.stats = compute_norm_stats(ds, split);
    Rng init_rng(config.seed, 1);
    return DiffusionPolicy::seeded(
        PolicyConfig::custom(ds.obs_dim(), ds.act_dim(), config.latent_dim,
                             config.encoder_hidden, config.encoder_layers,
                             config.denoiser_hidden, config.denoiser_layers,
                             config.time_embed_dim),
        init_rng);
  }();
  ds.require_dims(policy.config.obs_dim(), policy.config.act_dim());

  const NoiseSchedule schedule =
      NoiseSchedule::linear(meta.num_steps, meta.beta_start, meta.beta_end);

  std::ofstream metrics(metrics_path, std::ios::trunc);
  if (!metrics) throw std::runtime_error("train: cannot open " + metrics_path.string());
  metrics << "epoch,train_loss,val_loss,wall_s\n";

  const int print_every = std::max(1, config.epochs / 20);
  const ReportSink report_sink = [&](const TrainReport& r) {
    metrics << r.epoch << ',' << fmt(r.mean_batch_loss) << ',' << fmt(r.val_loss) << ','
            << fmt(r.wall_s) << '\n';
    metrics.flush();
    if ((r.epoch - options.start_epoch) % print_every == 0) {
      out << "epoch " << r.epoch << " train_loss " << fmt(r.mean_batch_loss)
          << " val_loss " << fmt(r.val_loss) << " wall_s " << fmt(r.wall_s) << '\n';
    }
  };
  const CheckpointSink checkpoint_sink = [&](int epoch, const DiffusionPolicy& p,
                                             bool is_final) {
    meta.epoch = static_cast<std::uint64_t>(epoch);
    const fs::path path =
        is_final ? out_dir / "checkpoint_final.brck"
                 : out_dir / ("checkpoint_epoch" + std::to_string(epoch) + ".brck");
    save_checkpoint(path, p, meta);
    out << "saved " << path.string() << '\n';
  };

  train(policy, ds, split, options.normalize ? &meta.stats : nullptr, schedule, options,
        checkpoint_sink, report_sink);
  write_manifest(config, "train", metrics_path);
  return 0;
}

int cmd_rollout(const RunConfig& config, std::ostream& out) {
  out << manifest(config, "rollout");
  if (config.checkpoint_path.empty()) {
    throw std::runtime_error("rollout: --checkpoint is required");
  }
  if (config.out_path.empty()) throw std::runtime_error("rollout: --out is required");
  require_writable(config.out_path, config.force, "rollout");

  auto loaded = load_checkpoint(config.checkpoint_path);
  const NoiseSchedule schedule = NoiseSchedule::linear(
      loaded.meta.num_steps, loaded.meta.beta_start, loaded.meta.beta_end);

  SampleOptions options;
  options.mode = config.mode;
  options.warm_start = config.warm_start;
  options.stats = loaded.meta.normalize ? &loaded.meta.stats : nullptr;

  Rng rng(config.seed, 21);

  if (config.task == "bimodal") {
    if (loaded.policy.config.obs_dim() != 1 || loaded.policy.config.act_dim() != 1) {
      throw std::runtime_error("rollout: bimodal task needs a 1-d obs/action policy");
    }
    ActionSampler sampler(loaded.policy, schedule, options);
    const std::vector<double> condition{0.0};
    std::vector<double> samples;
    std::ostringstream csv;
    csv << "sample,condition,action,latency_ms\n";
    samples.reserve(config.bimodal_samples);
    for (int i = 0; i < config.bimodal_samples; ++i) {
      const auto res = sampler.sample(condition, rng);
      samples.push_back(res.action[0]);
      csv << i << ",0," << fmt(res.action[0]) << ',' << fmt(res.latency_s * 1e3) << '\n';
    }
    write_text(config.out_path, csv.str());
    const BimodalMass mass = bimodal_eval(samples);
    out << "bimodal: samples=" << samples.size() << " mass_neg=" << fmt(mass.neg)
        << " mass_middle=" << fmt(mass.middle) << " mass_pos=" << fmt(mass.pos) << '\n';
    write_manifest(config, "rollout", config.out_path);
    return 0;
  }

  if (config.task != "locomotion") {
    throw std::runtime_error("rollout: unknown task '" + config.task + "'");
  }
  TerrainParams terrain{config.slope_deg * M_PI / 180.0, config.roughness};
  const GaitConfig gait = GaitConfig::for_command(config.velocity, terrain);
  SurrogateEnv env(gait, terrain, config.seed);
  const RolloutRecord record =
      closed_loop_rollout(env, loaded.policy, schedule, config.steps, options, rng);

  write_text(config.out_path, rollout_csv(record));
  write_manifest(config, "rollout", config.out_path);
  out << "rollout: steps=" << record.steps.size() << " tracking_rmse="
      << fmt(record.tracking_rmse()) << " mean_latency_ms="
      << fmt(record.mean_latency_s() * 1e3)
      << " fell=" << (record.ended_early ? "true" : "false");
  if (record.ended_early) out << " reason=\"" << record.end_reason << '"';
  out << '\n';
  return 0;
}

namespace {

// 32-bit sampling path for latency comparison; mirrors ActionSampler.
class SamplerF32 {
 public:
  SamplerF32(const DiffusionPolicy& policy, const NoiseSchedule& schedule,
             const SampleOptions& options)
      : encoder_(policy.encoder),
        denoiser_(policy.denoiser),
        schedule_(schedule),
        options_(options),
        act_dim_(policy.config.act_dim()),
        time_dim_(policy.config.time_embed_dim) {
    for (int t = 1; t <= schedule.num_steps(); ++t) {
      const auto emb = sinusoidal_embedding(t, time_dim_);
      time_embeddings_.emplace_back(emb.begin(), emb.end());
    }
    input_.resize(denoiser_.input_dim());
  }

  double sample_once(std::span<const double> observation, Rng& rng) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<float> obs(observation.size());
    if (options_.stats != nullptr) {
      const auto& s = *options_.stats;
      for (std::size_t i = 0; i < obs.size(); ++i) {
        obs[i] = static_cast<float>((observation[i] - s.obs_mean[i]) / s.obs_std[i]);
      }
    } else {
      for (std::size_t i = 0; i < obs.size(); ++i) {
        obs[i] = static_cast<float>(observation[i]);
      }
    }
    const auto latent = encoder_.forward(obs);
    std::copy(latent.begin(), latent.end(),
              input_.begin() + act_dim_ + time_dim_);
    std::vector<float> chain(act_dim_);
    for (auto& v : chain) v = static_cast<float>(rng.normal());
    for (int t = schedule_.num_steps(); t >= 1; --t) {
      std::copy(chain.begin(), chain.end(), input_.begin());
      const auto& emb = time_embeddings_[t - 1];
      std::copy(emb.begin(), emb.end(), input_.begin() + act_dim_);
      const auto eps_hat = denoiser_.forward(input_);
      if (options_.mode == SamplerMode::kPaperLiteral) {
        for (int d = 0; d < act_dim_; ++d) chain[d] -= eps_hat[d];
      } else {
        const float beta = static_cast<float>(schedule_.beta(t));
        const float inv_sqrt_alpha =
            1.0f / std::sqrt(static_cast<float>(schedule_.alpha(t)));
        const float coef =
            beta / std::sqrt(1.0f - static_cast<float>(schedule_.alpha_bar(t)));
        const float sigma = t > 1 ? std::sqrt(beta) : 0.0f;
        for (int d = 0; d < act_dim_; ++d) {
          const float z = t > 1 ? static_cast<float>(rng.normal()) : 0.0f;
          chain[d] = inv_sqrt_alpha * (chain[d] - coef * eps_hat[d]) + sigma * z;
        }
      }
    }
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }

 private:
  nn::MlpF32 encoder_;
  nn::MlpF32 denoiser_;
  const NoiseSchedule& schedule_;
  SampleOptions options_;
  int act_dim_;
  int time_dim_;
  std::vector<std::vector<float>> time_embeddings_;
  std::vector<float> input_;
};

}  // namespace

LatencyReport measure_sampling_latency(const DiffusionPolicy& policy,
                                       const NoiseSchedule& schedule,
                                       const SampleOptions& options, int trials,
                                       double deadline_ms, bool f32, Rng& rng) {
  if (trials < 1) throw std::invalid_argument("measure_sampling_latency: trials >= 1");
  std::vector<double> observation(policy.config.obs_dim());
  for (auto& v : observation) v = rng.normal();

  std::vector<double> latencies_ms;
  latencies_ms.reserve(trials);
  const int warmup = std::min(50, trials);

  if (f32) {
    SamplerF32 sampler(policy, schedule, options);
    for (int i = 0; i < warmup; ++i) sampler.sample_once(observation, rng);
    for (int i = 0; i < trials; ++i) {
      latencies_ms.push_back(sampler.sample_once(observation, rng) * 1e3);
    }
  } else {
    ActionSampler sampler(policy, schedule, options);
    for (int i = 0; i < warmup; ++i) sampler.sample(observation, rng);
    for (int i = 0; i < trials; ++i) {
      latencies_ms.push_back(sampler.sample(observation, rng).latency_s * 1e3);
    }
  }

  std::sort(latencies_ms.begin(), latencies_ms.end());
  const auto rank = [&](double q) {
    const auto idx = static_cast<std::size_t>(
        std::ceil(q * static_cast<double>(latencies_ms.size()))) ;
    return latencies_ms[std::max<std::size_t>(idx, 1) - 1];
  };
  LatencyReport report;
  report.trials = trials;
  report.p50_ms = rank(0.50);
  report.p99_ms = rank(0.99);
  report.max_ms = latencies_ms.back();
  report.deadline_ms = deadline_ms;
  report.pass = report.p99_ms < deadline_ms;
  return report;
}

int cmd_bench(const RunConfig& config, std::ostream& out) {
  out << manifest(config, "bench");
  if (config.checkpoint_path.empty()) {
    throw std::runtime_error("bench: --checkpoint is required");
  }
  auto loaded = load_checkpoint(config.checkpoint_path);
  const int T = config.bench_steps_override > 0 ? config.bench_steps_override
                                                : loaded.meta.num_steps;
  const NoiseSchedule schedule =
      NoiseSchedule::linear(T, loaded.meta.beta_start, loaded.meta.beta_end);

  SampleOptions options;
  options.mode = config.mode;
  options.warm_start = config.warm_start;
  options.stats = loaded.meta.normalize ? &loaded.meta.stats : nullptr;

  Rng rng(config.seed, 22);
  const LatencyReport report = measure_sampling_latency(
      loaded.policy, schedule, options, config.trials, config.deadline_ms,
      config.bench_f32, rng);

  std::ostringstream summary;
  summary << "bench: trials=" << report.trials << " precision="
          << (config.bench_f32 ? "f32" : "f64") << " T=" << T
          << " p50_ms=" << fmt(report.p50_ms) << " p99_ms=" << fmt(report.p99_ms)
          << " max_ms=" << fmt(report.max_ms)
          << " deadline_ms=" << fmt(report.deadline_ms)
          << " pass=" << (report.pass ? "true" : "false") << '\n';
  out << summary.str();
  if (!config.out_path.empty()) {
    require_writable(config.out_path, config.force, "bench");
    write_text(config.out_path, summary.str());
    write_manifest(config, "bench", config.out_path);
  }
  return report.pass ? 0 : 3;
}

int cmd_eval(const RunConfig& config, std::ostream& out) {
  out << manifest(config, "eval");
  if (config.checkpoint_path.empty()) {
    throw std::runtime_error("eval: --checkpoint is required");
  }
  if (config.dataset_path.empty()) throw std::runtime_error("eval: --dataset is required");

  auto loaded = load_checkpoint(config.checkpoint_path);
  const OfflineDataset ds = load_dataset(config.dataset_path);
  ds.require_dims(loaded.policy.config.obs_dim(), loaded.policy.config.act_dim());

  const NoiseSchedule schedule = NoiseSchedule::linear(
      loaded.meta.num_steps, loaded.meta.beta_start, loaded.meta.beta_end);
  const SplitIndex split = split_train_val(ds, config.split_ratio, config.seed);
  const NormStats* stats = loaded.meta.normalize ? &loaded.meta.stats : nullptr;

  TrainContext ctx(loaded.policy.config, config.threads);
  std::vector<double> obs_buf, act_buf;
  const auto eval_rows = [&](const std::vector<std::size_t>& rows) {
    obs_buf.resize(rows.size() * ds.obs_dim());
    act_buf.resize(rows.size() * ds.act_dim());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      auto obs = ds.observation(rows[i]);
      auto act = ds.action(rows[i]);
      for (int d = 0; d < ds.obs_dim(); ++d) {
        obs_buf[i * ds.obs_dim() + d] =
            stats ? (obs[d] - stats->obs_mean[d]) / stats->obs_std[d] : obs[d];
      }
      for (int d = 0; d < ds.act_dim(); ++d) {
        act_buf[i * ds.act_dim() + d] =
            stats ? (act[d] - stats->act_mean[d]) / stats->act_std[d] : act[d];
      }
    }
    Rng rng(config.seed, 13);
    BatchView view{obs_buf, act_buf, rows.size(), ds.obs_dim(), ds.act_dim()};
    return ctx.eval_loss(view, loaded.policy, schedule, rng);
  };

  const double train_mse = eval_rows(split.train_rows);
  const double val_mse = eval_rows(split.val_rows);

  std::ostringstream json;
  json << "{\n"
       << "  \"train_mse\": " << fmt(train_mse) << ",\n"
       << "  \"val_mse\": " << fmt(val_mse) << ",\n"
       << "  \"val_train_ratio\": " << fmt(val_mse / train_mse) << ",\n"
       << "  \"train_rows\": " << split.train_rows.size() << ",\n"
       << "  \"val_rows\": " << split.val_rows.size() << ",\n"
       << "  \"checkpoint_epoch\": " << loaded.meta.epoch << ",\n"
       << "  \"normalize\": " << (loaded.meta.normalize ? "true" : "false") << "\n"
       << "}\n";
  out << json.str();
  if (!config.out_path.empty()) {
    require_writable(config.out_path, config.force, "eval");
    write_text(config.out_path, json.str());
    write_manifest(config, "eval", config.out_path);
  }
  return 0;
}

}  // namespace locodiff
