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

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "binary_io.hpp"

namespace locodiff {

namespace {

using detail::ByteReader;
using detail::ByteWriter;

constexpr char kMagic[4] = {'B', 'R', 'D', 'F'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

void OfflineDataset::append(std::span<const double> obs, std::span<const double> act,
                            PairMeta m) {
  if (obs.size() != static_cast<std::size_t>(obs_dim_) ||
      act.size() != static_cast<std::size_t>(act_dim_)) {
    std::ostringstream os;
    os << "OfflineDataset::append: got obs " << obs.size() << "/act " << act.size()
       << ", expected " << obs_dim_ << "/" << act_dim_;
    throw std::invalid_argument(os.str());
  }
  observations_.insert(observations_.end(), obs.begin(), obs.end());
  actions_.insert(actions_.end(), act.begin(), act.end());
  meta_.push_back(m);
}

void OfflineDataset::require_dims(int obs_dim, int act_dim) const {
  if (obs_dim_ != obs_dim || act_dim_ != act_dim) {
    std::ostringstream os;
    os << "dataset schema mismatch: file has obs_dim=" << obs_dim_
       << ", act_dim=" << act_dim_ << "; this consumer requires obs_dim=" << obs_dim
       << ", act_dim=" << act_dim;
    throw std::runtime_error(os.str());
  }
}

void save_dataset(const OfflineDataset& ds, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("save_dataset: cannot open " + path.string());
  ByteWriter w(os);
  w.put_bytes(kMagic, 4);
  w.put<std::uint32_t>(kVersion);
  w.put<std::uint64_t>(ds.size());
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ds.obs_dim()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ds.act_dim()));
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (double v : ds.observation(i)) w.put<float>(static_cast<float>(v));
    for (double v : ds.action(i)) w.put<float>(static_cast<float>(v));
    const PairMeta& m = ds.meta(i);
    w.put<float>(m.velocity);
    w.put<float>(m.slope);
    w.put<std::uint8_t>(m.terrain_id);
  }
  os.flush();
  if (!os) throw std::runtime_error("save_dataset: write failed for " + path.string());
}

OfflineDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_dataset: cannot open " + path.string());
  ByteReader r(is, path.string());

  char magic[4];
  r.get_bytes(magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) {
    std::ostringstream os;
    os << path.string() << ": bad magic at byte offset 0 (expected \"BRDF\")";
    throw std::runtime_error(os.str());
  }
  const auto version = r.get<std::uint32_t>("version");
  if (version != kVersion) {
    std::ostringstream os;
    os << path.string() << ": unsupported version " << version << " at byte offset 4";
    throw std::runtime_error(os.str());
  }
  const auto n = r.get<std::uint64_t>("record count");
  const auto obs_dim = r.get<std::uint32_t>("obs_dim");
  const auto act_dim = r.get<std::uint32_t>("act_dim");
  if (obs_dim == 0 || act_dim == 0 || obs_dim > 1u << 20 || act_dim > 1u << 20) {
    std::ostringstream os;
    os << path.string() << ": implausible dims " << obs_dim << "/" << act_dim
       << " at byte offset 16";
    throw std::runtime_error(os.str());
  }

  OfflineDataset ds(static_cast<int>(obs_dim), static_cast<int>(act_dim));
  std::vector<double> obs(obs_dim), act(act_dim);
  for (std::uint64_t i = 0; i < n; ++i) {
    for (auto& v : obs) v = r.get<float>("observation");
    for (auto& v : act) v = r.get<float>("action");
    PairMeta m;
    m.velocity = r.get<float>("velocity tag");
    m.slope = r.get<float>("slope tag");
    m.terrain_id = r.get<std::uint8_t>("terrain id");
    for (double v : obs) {
      if (!std::isfinite(v)) r.fail("observation (non-finite value)", r.offset());
    }
    for (double v : act) {
      if (!std::isfinite(v)) r.fail("action (non-finite value)", r.offset());
    }
    ds.append(obs, act, m);
  }
  return ds;
}

void export_dataset_csv(const OfflineDataset& ds, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("export_dataset_csv: cannot open " + path.string());
  os << "index";
  for (int d = 0; d < ds.obs_dim(); ++d) os << ",obs_" << d;
  for (int d = 0; d < ds.act_dim(); ++d) os << ",act_" << d;
  os << ",velocity,slope,terrain_id\n";
  os.precision(9);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    os << i;
    for (double v : ds.observation(i)) os << ',' << v;
    for (double v : ds.action(i)) os << ',' << v;
    const PairMeta& m = ds.meta(i);
    os << ',' << m.velocity << ',' << m.slope << ',' << static_cast<int>(m.terrain_id)
       << '\n';
  }
}

SplitIndex split_train_val(const OfflineDataset& ds, double ratio, std::uint64_t seed) {
  if (ds.size() == 0) throw std::invalid_argument("split_train_val: empty dataset");
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw std::invalid_argument("split_train_val: ratio must be in (0, 1)");
  }
  std::vector<std::size_t> perm(ds.size());
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed, /*stream=*/71);  // dedicated split stream, independent of training draws
  rng.shuffle(perm);

  const auto n_train = static_cast<std::size_t>(
      std::floor(ratio * static_cast<double>(ds.size())));
  SplitIndex split;
  split.seed = seed;
  split.train_rows.assign(perm.begin(), perm.begin() + n_train);
  split.val_rows.assign(perm.begin() + n_train, perm.end());
  return split;
}

NormStats NormStats::identity(int obs_dim, int act_dim) {
  NormStats s;
  s.obs_mean.assign(obs_dim, 0.0);
  s.obs_std.assign(obs_dim, 1.0);
  s.act_mean.assign(act_dim, 0.0);
  s.act_std.assign(act_dim, 1.0);
  return s;
}

NormStats compute_norm_stats(const OfflineDataset& ds, const SplitIndex& split) {
  if (split.train_rows.empty()) {
    throw std::invalid_argument("compute_norm_stats: empty training split");
  }
  const int od = ds.obs_dim();
  const int ad = ds.act_dim();
  NormStats s;
  s.obs_mean.assign(od, 0.0);
  s.obs_std.assign(od, 0.0);
  s.act_mean.assign(ad, 0.0);
  s.act_std.assign(ad, 0.0);

  const double inv_n = 1.0 / static_cast<double>(split.train_rows.size());
  for (std::size_t row : split.train_rows) {
    auto obs = ds.observation(row);
    for (int d = 0; d < od; ++d) s.obs_mean[d] += obs[d];
    auto act = ds.action(row);
    for (int d = 0; d < ad; ++d) s.act_mean[d] += act[d];
  }
  for (double& v : s.obs_mean) v *= inv_n;
  for (double& v : s.act_mean) v *= inv_n;

  for (std::size_t row : split.train_rows) {
    auto obs = ds.observation(row);
    for (int d = 0; d < od; ++d) {
      const double c = obs[d] - s.obs_mean[d];
      s.obs_std[d] += c * c;
    }
    auto act = ds.action(row);
    for (int d = 0; d < ad; ++d) {
      const double c = act[d] - s.act_mean[d];
      s.act_std[d] += c * c;
    }
  }
  for (double& v : s.obs_std) v = std::max(std::sqrt(v * inv_n), NormStats::kStdFloor);
  for (double& v : s.act_std) v = std::max(std::sqrt(v * inv_n), NormStats::kStdFloor);
  return s;
}

BatchSampler::BatchSampler(const SplitIndex& split, std::size_t batch_size)
    : order_(split.train_rows), batch_size_(batch_size) {
  if (batch_size_ == 0) throw std::invalid_argument("BatchSampler: batch_size must be > 0");
  if (batch_size_ > order_.size()) {
    std::ostringstream os;
    os << "BatchSampler: batch size " << batch_size_ << " exceeds training rows "
       << order_.size() << "; lower the batch size";
    throw std::invalid_argument(os.str());
  }
}

std::size_t BatchSampler::batches_per_epoch() const {
  return (order_.size() + batch_size_ - 1) / batch_size_;
}

void BatchSampler::begin_epoch(Rng& rng) {
  rng.shuffle(order_);
  cursor_ = 0;
}

std::vector<std::size_t> BatchSampler::next_batch() {
  if (cursor_ >= order_.size()) return {};
  const std::size_t end = std::min(cursor_ + batch_size_, order_.size());
  std::vector<std::size_t> batch(order_.begin() + cursor_, order_.begin() + end);
  cursor_ = end;
  return batch;
}

}  // namespace locodiff
