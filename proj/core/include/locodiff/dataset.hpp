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

#ifndef LOCODIFF_DATASET_HPP_
#define LOCODIFF_DATASET_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "locodiff/rng.hpp"

namespace locodiff {

// Default observation/action schema for the locomotion task.
inline constexpr int kObsDim = 150;
inline constexpr int kActDim = 6;

struct PairMeta {
  float velocity = 0.0f;    // commanded velocity, m/s
  float slope = 0.0f;       // terrain slope, rad
  std::uint8_t terrain_id = 0;
};

// Offline observation-action pairs with per-pair metadata. Stored on disk as
// f32 ("BRDF" format), held in memory as f64 for training math. Immutable by
// convention once loaded; readers may share freely.
class OfflineDataset {
 public:
  OfflineDataset(int obs_dim, int act_dim) : obs_dim_(obs_dim), act_dim_(act_dim) {}
  OfflineDataset() : OfflineDataset(kObsDim, kActDim) {}

  std::size_t size() const { return meta_.size(); }
  int obs_dim() const { return obs_dim_; }
  int act_dim() const { return act_dim_; }

  std::span<const double> observation(std::size_t i) const {
    return {observations_.data() + i * obs_dim_, static_cast<std::size_t>(obs_dim_)};
  }
  std::span<const double> action(std::size_t i) const {
    return {actions_.data() + i * act_dim_, static_cast<std::size_t>(act_dim_)};
  }
  const PairMeta& meta(std::size_t i) const { return meta_[i]; }

  void append(std::span<const double> obs, std::span<const double> act, PairMeta m);

  // Throws with a precise diagnostic when the file schema differs from what
  // the caller needs (e.g. the 150/6 locomotion schema).
  void require_dims(int obs_dim, int act_dim) const;

  // Test hook: mutate one observation entry in place. Used by the
  // "validation rows never influence stats" checks.
  void poke_observation(std::size_t i, int d, double value) {
    observations_[i * obs_dim_ + d] = value;
  }

 private:
  int obs_dim_;
  int act_dim_;
  std::vector<double> observations_;  // n * obs_dim
  std::vector<double> actions_;       // n * act_dim
  std::vector<PairMeta> meta_;
};

// BRDF container: magic "BRDF", version u32 = 1, n u64, obs_dim u32,
// act_dim u32, then n records of (obs f32 x obs_dim, act f32 x act_dim,
// velocity f32, slope f32, terrain_id u8). Little-endian throughout.
// Malformed input is rejected with the byte offset where reading failed.
void save_dataset(const OfflineDataset& ds, const std::filesystem::path& path);
OfflineDataset load_dataset(const std::filesystem::path& path);

// One CSV row per pair (header line first); inspection format.
void export_dataset_csv(const OfflineDataset& ds, const std::filesystem::path& path);

// Disjoint row index lists covering [0, n): seeded uniform permutation,
// first floor(ratio * n) rows are training.
struct SplitIndex {
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> val_rows;
  std::uint64_t seed = 0;
};
SplitIndex split_train_val(const OfflineDataset& ds, double ratio, std::uint64_t seed);

// Per-dimension z-scoring statistics computed from the training split only.
// Stddevs are floored at kStdFloor so constant dimensions stay harmless.
struct NormStats {
  static constexpr double kStdFloor = 1e-6;
  std::vector<double> obs_mean, obs_std;
  std::vector<double> act_mean, act_std;

  static NormStats identity(int obs_dim, int act_dim);
};
NormStats compute_norm_stats(const OfflineDataset& ds, const SplitIndex& split);

// Without-replacement batching: each epoch is a fresh seeded permutation of
// the training rows, consumed in consecutive slices. The final batch of an
// epoch may be short. batch_size must not exceed the training-set size.
class BatchSampler {
 public:
  BatchSampler(const SplitIndex& split, std::size_t batch_size);

  std::size_t batches_per_epoch() const;
  // Row indices for batch `b` of the epoch keyed by `epoch_rng`.
  // Call begin_epoch once per epoch, then next_batch until it returns empty.
  void begin_epoch(Rng& rng);
  std::vector<std::size_t> next_batch();

 private:
  std::vector<std::size_t> order_;
  std::size_t batch_size_;
  std::size_t cursor_ = 0;
};

}  // namespace locodiff

#endif  // LOCODIFF_DATASET_HPP_
