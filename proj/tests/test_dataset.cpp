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

#include "locodiff/dataset.hpp"

#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

using namespace locodiff;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const char* name) {
  return fs::temp_directory_path() / name;
}

OfflineDataset random_dataset(int obs_dim, int act_dim, std::size_t n, Rng& rng) {
  OfflineDataset ds(obs_dim, act_dim);
  std::vector<double> obs(obs_dim), act(act_dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& v : obs) v = rng.uniform(-10.0, 10.0);
    for (auto& v : act) v = rng.uniform(-3.0, 3.0);
    ds.append(obs, act,
              PairMeta{static_cast<float>(rng.uniform()),
                       static_cast<float>(rng.uniform()),
                       static_cast<std::uint8_t>(rng.below(7))});
  }
  return ds;
}

}  // namespace

TEST_CASE("BRDF round trip is the identity at f32 precision") {
  Rng rng(1);
  const auto path = temp_file("ld_test_roundtrip.brdf");
  for (int trial = 0; trial < 5; ++trial) {
    const int obs_dim = 1 + static_cast<int>(rng.below(200));
    const int act_dim = 1 + static_cast<int>(rng.below(8));
    const std::size_t n = rng.below(50);
    const OfflineDataset ds = random_dataset(obs_dim, act_dim, n, rng);
    save_dataset(ds, path);
    const OfflineDataset back = load_dataset(path);
    REQUIRE(back.size() == ds.size());
    REQUIRE(back.obs_dim() == ds.obs_dim());
    REQUIRE(back.act_dim() == ds.act_dim());
    for (std::size_t i = 0; i < n; ++i) {
      for (int d = 0; d < obs_dim; ++d) {
        CHECK(back.observation(i)[d] ==
              static_cast<double>(static_cast<float>(ds.observation(i)[d])));
      }
      for (int d = 0; d < act_dim; ++d) {
        CHECK(back.action(i)[d] ==
              static_cast<double>(static_cast<float>(ds.action(i)[d])));
      }
      CHECK(back.meta(i).velocity == ds.meta(i).velocity);
      CHECK(back.meta(i).slope == ds.meta(i).slope);
      CHECK(back.meta(i).terrain_id == ds.meta(i).terrain_id);
    }
  }
  fs::remove(path);
}

TEST_CASE("empty dataset round-trips") {
  const auto path = temp_file("ld_test_empty.brdf");
  OfflineDataset ds(150, 6);
  save_dataset(ds, path);
  const OfflineDataset back = load_dataset(path);
  CHECK(back.size() == 0);
  CHECK(back.obs_dim() == 150);
  CHECK(back.act_dim() == 6);
  fs::remove(path);
}

TEST_CASE("truncated file reports the byte offset where data ran out") {
  const auto path = temp_file("ld_test_trunc.brdf");
  Rng rng(3);
  save_dataset(random_dataset(150, 6, 2, rng), path);
  // Keep only 17 bytes: magic(4) + version(4) + n(8) + 1 byte of obs_dim.
  {
    std::ifstream in(path, std::ios::binary);
    std::vector<char> head(17);
    in.read(head.data(), 17);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(head.data(), 17);
  }
  CHECK_THROWS_WITH_AS(load_dataset(path), doctest::Contains("byte offset 17"),
                       std::runtime_error);
  fs::remove(path);
}

TEST_CASE("bad magic and bad version are rejected") {
  const auto path = temp_file("ld_test_magic.brdf");
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write("NOPE", 4);
    const std::uint32_t version = 1;
    out.write(reinterpret_cast<const char*>(&version), 4);
  }
  CHECK_THROWS_WITH_AS(load_dataset(path), doctest::Contains("bad magic"),
                       std::runtime_error);
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write("BRDF", 4);
    const std::uint32_t version = 9;
    out.write(reinterpret_cast<const char*>(&version), 4);
  }
  CHECK_THROWS_WITH_AS(load_dataset(path), doctest::Contains("version 9"),
                       std::runtime_error);
  fs::remove(path);
}

TEST_CASE("require_dims produces a precise schema diagnostic") {
  OfflineDataset ds(100, 4);
  CHECK_THROWS_WITH_AS(ds.require_dims(150, 6),
                       doctest::Contains("obs_dim=100"), std::runtime_error);
}

TEST_CASE("split: sizes, disjointness, coverage") {
  Rng rng(9);
  SUBCASE("n = 100 at 0.8 gives 80/20") {
    const OfflineDataset ds = random_dataset(3, 2, 100, rng);
    const SplitIndex s = split_train_val(ds, 0.8, 4);
    CHECK(s.train_rows.size() == 80);
    CHECK(s.val_rows.size() == 20);
  }
  SUBCASE("same seed gives the identical split") {
    const OfflineDataset ds = random_dataset(3, 2, 57, rng);
    const SplitIndex a = split_train_val(ds, 0.8, 1234);
    const SplitIndex b = split_train_val(ds, 0.8, 1234);
    CHECK(a.train_rows == b.train_rows);
    CHECK(a.val_rows == b.val_rows);
  }
  SUBCASE("disjoint and covering for random sizes") {
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t n = 1 + rng.below(10000);
      const OfflineDataset ds = random_dataset(2, 1, n, rng);
      const SplitIndex s = split_train_val(ds, 0.8, trial);
      std::set<std::size_t> seen;
      for (auto r : s.train_rows) CHECK(seen.insert(r).second);
      for (auto r : s.val_rows) CHECK(seen.insert(r).second);
      CHECK(seen.size() == n);
      CHECK(*seen.rbegin() == n - 1);
    }
  }
  SUBCASE("empty dataset and bad ratio rejected") {
    OfflineDataset empty(3, 2);
    CHECK_THROWS_AS(split_train_val(empty, 0.8, 1), std::invalid_argument);
    const OfflineDataset ds = random_dataset(3, 2, 10, rng);
    CHECK_THROWS_AS(split_train_val(ds, 0.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(split_train_val(ds, 1.0, 1), std::invalid_argument);
  }
}

TEST_CASE("norm stats: floor, accuracy, and val independence") {
  SUBCASE("constant column gets the 1e-6 floor") {
    OfflineDataset ds(2, 1);
    for (int i = 0; i < 10; ++i) {
      const std::vector<double> obs{3.5, static_cast<double>(i)};
      const std::vector<double> act{1.0};
      ds.append(obs, act, {});
    }
    const SplitIndex split = split_train_val(ds, 0.8, 1);
    const NormStats stats = compute_norm_stats(ds, split);
    CHECK(stats.obs_mean[0] == doctest::Approx(3.5));
    CHECK(stats.obs_std[0] == NormStats::kStdFloor);
    CHECK(stats.act_std[0] == NormStats::kStdFloor);
  }
  SUBCASE("standard-normal column estimated within 0.02") {
    Rng rng(77);
    OfflineDataset ds(1, 1);
    for (int i = 0; i < 100000; ++i) {
      const std::vector<double> obs{rng.normal()};
      const std::vector<double> act{rng.normal()};
      ds.append(obs, act, {});
    }
    const SplitIndex split = split_train_val(ds, 0.8, 1);
    const NormStats stats = compute_norm_stats(ds, split);
    CHECK(std::abs(stats.obs_mean[0]) < 0.02);
    CHECK(std::abs(stats.obs_std[0] - 1.0) < 0.02);
  }
  SUBCASE("mutating validation rows leaves stats unchanged") {
    Rng rng(5);
    OfflineDataset ds = random_dataset(4, 2, 200, rng);
    const SplitIndex split = split_train_val(ds, 0.8, 3);
    const NormStats before = compute_norm_stats(ds, split);
    for (std::size_t r : split.val_rows) ds.poke_observation(r, 0, 1e9);
    const NormStats after = compute_norm_stats(ds, split);
    CHECK(before.obs_mean == after.obs_mean);
    CHECK(before.obs_std == after.obs_std);
  }
}

TEST_CASE("batch sampler: coverage, determinism, rejection") {
  Rng rng(8);
  const OfflineDataset ds = random_dataset(2, 1, 103, rng);
  const SplitIndex split = split_train_val(ds, 0.8, 7);  // 82 train rows

  SUBCASE("each train row appears exactly once per epoch") {
    BatchSampler sampler(split, 10);
    Rng order(55);
    sampler.begin_epoch(order);
    std::set<std::size_t> seen;
    std::size_t batches = 0;
    for (auto b = sampler.next_batch(); !b.empty(); b = sampler.next_batch()) {
      for (auto r : b) CHECK(seen.insert(r).second);
      ++batches;
    }
    CHECK(batches == sampler.batches_per_epoch());
    CHECK(seen.size() == split.train_rows.size());
  }
  SUBCASE("batch = train size gives one full batch") {
    BatchSampler sampler(split, split.train_rows.size());
    Rng order(55);
    sampler.begin_epoch(order);
    const auto b = sampler.next_batch();
    CHECK(b.size() == split.train_rows.size());
    CHECK(sampler.next_batch().empty());
  }
  SUBCASE("same seed gives identical batch sequences") {
    BatchSampler s1(split, 16), s2(split, 16);
    Rng o1(99), o2(99);
    for (int epoch = 0; epoch < 2; ++epoch) {
      s1.begin_epoch(o1);
      s2.begin_epoch(o2);
      for (;;) {
        const auto b1 = s1.next_batch();
        const auto b2 = s2.next_batch();
        CHECK(b1 == b2);
        if (b1.empty()) break;
      }
    }
  }
  SUBCASE("oversized batch rejected with a suggestion") {
    CHECK_THROWS_WITH_AS(BatchSampler(split, 1000), doctest::Contains("lower the batch"),
                         std::invalid_argument);
  }
}

TEST_CASE("CSV export writes a header and one row per pair") {
  Rng rng(2);
  const OfflineDataset ds = random_dataset(3, 2, 4, rng);
  const auto path = temp_file("ld_test_export.csv");
  export_dataset_csv(ds, path);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line ==
        "index,obs_0,obs_1,obs_2,act_0,act_1,velocity,slope,terrain_id");
  int rows = 0;
  while (std::getline(in, line)) {
    if (!line.empty()) ++rows;
  }
  CHECK(rows == 4);
  fs::remove(path);
}
