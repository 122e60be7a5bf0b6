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

#include "locodiff/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "binary_io.hpp"

namespace locodiff {

namespace {

using detail::ByteReader;
using detail::ByteWriter;

constexpr char kMagic[4] = {'B', 'R', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

void write_sizes(ByteWriter& w, const std::vector<int>& sizes) {
  w.put<std::uint32_t>(static_cast<std::uint32_t>(sizes.size()));
  for (int s : sizes) w.put<std::uint32_t>(static_cast<std::uint32_t>(s));
}

std::vector<int> read_sizes(ByteReader& r, const char* field) {
  const auto count = r.get<std::uint32_t>(field);
  if (count < 2 || count > 1024) {
    std::ostringstream os;
    os << field << ": implausible layer count " << count;
    throw std::runtime_error(os.str());
  }
  std::vector<int> sizes(count);
  for (auto& s : sizes) {
    const auto v = r.get<std::uint32_t>(field);
    if (v == 0 || v > 1u << 24) {
      std::ostringstream os;
      os << field << ": implausible layer size " << v << " at byte offset "
         << r.offset() - 4;
      throw std::runtime_error(os.str());
    }
    s = static_cast<int>(v);
  }
  return sizes;
}

void write_vec(ByteWriter& w, const std::vector<double>& v) {
  w.put<std::uint32_t>(static_cast<std::uint32_t>(v.size()));
  w.put_bytes(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
}

std::vector<double> read_vec(ByteReader& r, const char* field) {
  const auto n = r.get<std::uint32_t>(field);
  if (n > 1u << 24) {
    std::ostringstream os;
    os << field << ": implausible vector length " << n;
    throw std::runtime_error(os.str());
  }
  std::vector<double> v(n);
  r.get_bytes(reinterpret_cast<char*>(v.data()), n * sizeof(double), field);
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const DiffusionPolicy& policy,
                     const CheckpointMeta& meta) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("save_checkpoint: cannot open " + tmp.string());
    ByteWriter w(os);
    w.put_bytes(kMagic, 4);
    w.put<std::uint32_t>(kVersion);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(meta.num_steps));
    w.put<double>(meta.beta_start);
    w.put<double>(meta.beta_end);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(policy.config.time_embed_dim));
    write_sizes(w, policy.config.encoder.layer_sizes);
    write_sizes(w, policy.config.denoiser.layer_sizes);
    w.put<std::uint8_t>(meta.normalize ? 1 : 0);
    if (meta.normalize) {
      write_vec(w, meta.stats.obs_mean);
      write_vec(w, meta.stats.obs_std);
      write_vec(w, meta.stats.act_mean);
      write_vec(w, meta.stats.act_std);
    }
    w.put<std::uint64_t>(meta.seed);
    w.put<std::uint64_t>(meta.epoch);

    const auto tensors = policy.tensors();
    w.put<std::uint32_t>(static_cast<std::uint32_t>(tensors.size()));
    for (const auto& t : tensors) {
      w.put<std::uint32_t>(static_cast<std::uint32_t>(t.name.size()));
      w.put_bytes(t.name.data(), t.name.size());
      w.put<std::uint32_t>(static_cast<std::uint32_t>(t.dims.size()));
      for (int d : t.dims) w.put<std::uint32_t>(static_cast<std::uint32_t>(d));
      w.put_bytes(reinterpret_cast<const char*>(t.data), t.size * sizeof(double));
    }
    os.flush();
    if (!os) {
      throw std::runtime_error("save_checkpoint: write failed for " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_checkpoint: cannot open " + path.string());
  ByteReader r(is, path.string());

  char magic[4];
  r.get_bytes(magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error(path.string() +
                             ": bad magic at byte offset 0 (expected \"BRCK\")");
  }
  const auto version = r.get<std::uint32_t>("version");
  if (version != kVersion) {
    std::ostringstream os;
    os << path.string() << ": unsupported version " << version << " at byte offset 4";
    throw std::runtime_error(os.str());
  }

  CheckpointMeta meta;
  meta.num_steps = static_cast<int>(r.get<std::uint32_t>("num_steps"));
  meta.beta_start = r.get<double>("beta_start");
  meta.beta_end = r.get<double>("beta_end");
  const auto time_embed_dim = r.get<std::uint32_t>("time_embed_dim");
  const auto enc_sizes = read_sizes(r, "encoder sizes");
  const auto den_sizes = read_sizes(r, "denoiser sizes");
  meta.normalize = r.get<std::uint8_t>("normalize flag") != 0;
  if (meta.normalize) {
    meta.stats.obs_mean = read_vec(r, "obs_mean");
    meta.stats.obs_std = read_vec(r, "obs_std");
    meta.stats.act_mean = read_vec(r, "act_mean");
    meta.stats.act_std = read_vec(r, "act_std");
  }
  meta.seed = r.get<std::uint64_t>("seed");
  meta.epoch = r.get<std::uint64_t>("epoch");

  PolicyConfig cfg;
  cfg.encoder = nn::NetworkSpec::make(enc_sizes);
  cfg.denoiser = nn::NetworkSpec::make(den_sizes);
  cfg.time_embed_dim = static_cast<int>(time_embed_dim);
  cfg.validate();

  LoadedCheckpoint loaded{meta, DiffusionPolicy(cfg)};
  auto tensors = loaded.policy.tensors();

  const auto tensor_count = r.get<std::uint32_t>("tensor count");
  if (tensor_count != tensors.size()) {
    std::ostringstream os;
    os << path.string() << ": tensor count " << tensor_count << " does not match the "
       << tensors.size() << " parameters implied by the header";
    throw std::runtime_error(os.str());
  }
  for (auto& slot : tensors) {
    const auto name_len = r.get<std::uint32_t>("tensor name length");
    if (name_len > 4096) {
      std::ostringstream os;
      os << path.string() << ": implausible tensor name length " << name_len
         << " at byte offset " << r.offset() - 4;
      throw std::runtime_error(os.str());
    }
    std::string name(name_len, '\0');
    r.get_bytes(name.data(), name_len, "tensor name");
    if (name != slot.name) {
      std::ostringstream os;
      os << path.string() << ": tensor \"" << name << "\" where \"" << slot.name
         << "\" was expected (byte offset " << r.offset() << ")";
      throw std::runtime_error(os.str());
    }
    const auto rank = r.get<std::uint32_t>("tensor rank");
    std::size_t numel = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      numel *= r.get<std::uint32_t>("tensor dim");
    }
    if (numel != slot.size) {
      std::ostringstream os;
      os << path.string() << ": tensor \"" << name << "\" has " << numel
         << " elements, expected " << slot.size;
      throw std::runtime_error(os.str());
    }
    r.get_bytes(reinterpret_cast<char*>(slot.data), numel * sizeof(double),
                "tensor payload");
  }
  return loaded;
}

}  // namespace locodiff
