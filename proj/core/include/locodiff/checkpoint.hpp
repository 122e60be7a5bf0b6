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

#ifndef LOCODIFF_CHECKPOINT_HPP_
#define LOCODIFF_CHECKPOINT_HPP_

#include <cstdint>
#include <filesystem>

#include "locodiff/dataset.hpp"
#include "locodiff/policy.hpp"

namespace locodiff {

// Everything a checkpoint carries besides the tensors. The header is
// self-describing: a checkpoint alone reconstructs schedule, networks, and
// normalization, so inference needs no external config.
struct CheckpointMeta {
  int num_steps = 60;          // diffusion steps T
  double beta_start = 1e-4;
  double beta_end = 0.02;
  bool normalize = true;
  NormStats stats;             // meaningful when normalize is true
  std::uint64_t seed = 0;
  std::uint64_t epoch = 0;
};

struct LoadedCheckpoint {
  CheckpointMeta meta;
  DiffusionPolicy policy;
};

// BRCK container: magic "BRCK", version u32 = 1, schedule params, network
// layer sizes, time-embedding width, normalization stats, seed, epoch, then
// named f64 tensor records (name length + bytes, rank, dims, payload).
// Little-endian; round trips are bit-exact. Writes go through a temp file
// and rename, so a failed write never clobbers the previous checkpoint.
void save_checkpoint(const std::filesystem::path& path, const DiffusionPolicy& policy,
                     const CheckpointMeta& meta);
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace locodiff

#endif  // LOCODIFF_CHECKPOINT_HPP_
