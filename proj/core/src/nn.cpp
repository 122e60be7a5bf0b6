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

#include "locodiff/nn.hpp"

#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>

namespace locodiff::nn {

namespace {

std::string shape_report(const char* op, std::size_t got, std::size_t want) {
  std::ostringstream os;
  os << op << ": length mismatch, got " << got << ", expected " << want;
  return os.str();
}

}  // namespace

NetworkSpec NetworkSpec::make(std::vector<int> sizes) {
  if (sizes.size() < 2) {
    throw std::invalid_argument("NetworkSpec: need at least input and output sizes");
  }
  for (int s : sizes) {
    if (s < 1) throw std::invalid_argument("NetworkSpec: all layer sizes must be >= 1");
  }
  NetworkSpec spec;
  spec.layer_sizes = std::move(sizes);
  return spec;
}

void check_finite(std::span<const double> v, const char* what) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      std::ostringstream os;
      os << what << ": non-finite value " << v[i] << " at index " << i;
      throw std::runtime_error(os.str());
    }
  }
}

void matvec(const Matrix& w, const Vec& bias, std::span<const double> x, double* y) {
  const int rows = w.rows;
  const int cols = w.cols;
  const double* wd = w.data.data();
  const double* xd = x.data();
  int r = 0;
  for (; r + 4 <= rows; r += 4) {
    const double* w0 = wd + static_cast<std::size_t>(r + 0) * cols;
    const double* w1 = wd + static_cast<std::size_t>(r + 1) * cols;
    const double* w2 = wd + static_cast<std::size_t>(r + 2) * cols;
    const double* w3 = wd + static_cast<std::size_t>(r + 3) * cols;
    double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
    for (int c = 0; c < cols; ++c) {
      const double xc = xd[c];
      a0 += w0[c] * xc;
      a1 += w1[c] * xc;
      a2 += w2[c] * xc;
      a3 += w3[c] * xc;
    }
    y[r + 0] = a0 + bias[r + 0];
    y[r + 1] = a1 + bias[r + 1];
    y[r + 2] = a2 + bias[r + 2];
    y[r + 3] = a3 + bias[r + 3];
  }
  for (; r < rows; ++r) {
    const double* wr = wd + static_cast<std::size_t>(r) * cols;
    double acc = 0.0;
    for (int c = 0; c < cols; ++c) acc += wr[c] * xd[c];
    y[r] = acc + bias[r];
  }
}

GradBuffer::GradBuffer(const NetworkSpec& spec) {
  layers.reserve(spec.layer_count());
  for (int l = 0; l < spec.layer_count(); ++l) {
    layers.emplace_back(spec.layer_sizes[l + 1], spec.layer_sizes[l]);
  }
}

void GradBuffer::zero() {
  for (auto& layer : layers) {
    std::fill(layer.weights.data.begin(), layer.weights.data.end(), 0.0);
    std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
  }
}

void GradBuffer::add(const GradBuffer& other) {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto& w = layers[l].weights.data;
    const auto& ow = other.layers[l].weights.data;
    for (std::size_t i = 0; i < w.size(); ++i) w[i] += ow[i];
    auto& b = layers[l].bias;
    const auto& ob = other.layers[l].bias;
    for (std::size_t i = 0; i < b.size(); ++i) b[i] += ob[i];
  }
}

void GradBuffer::scale(double s) {
  for (auto& layer : layers) {
    for (auto& v : layer.weights.data) v *= s;
    for (auto& v : layer.bias) v *= s;
  }
}

std::vector<TensorRef> GradBuffer::tensors(const std::string& prefix) {
  std::vector<TensorRef> out;
  out.reserve(layers.size() * 2);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    out.push_back({prefix + ".l" + std::to_string(l) + ".weight",
                   layers[l].weights.data.data(), layers[l].weights.size()});
    out.push_back({prefix + ".l" + std::to_string(l) + ".bias",
                   layers[l].bias.data(), layers[l].bias.size()});
  }
  return out;
}

Mlp::Mlp(NetworkSpec spec) : spec_(std::move(spec)) {
  layers_.reserve(spec_.layer_count());
  for (int l = 0; l < spec_.layer_count(); ++l) {
    layers_.emplace_back(spec_.layer_sizes[l + 1], spec_.layer_sizes[l]);
  }
}

Mlp Mlp::seeded(NetworkSpec spec, Rng& rng) {
  Mlp net(std::move(spec));
  for (auto& layer : net.layers_) {
    const double bound =
        std::sqrt(6.0 / (layer.in_dim() + layer.out_dim()));
    for (auto& w : layer.weights.data) w = rng.uniform(-bound, bound);
    // biases stay zero
  }
  return net;
}

std::size_t Mlp::param_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += layer.weights.size() + layer.bias.size();
  return n;
}

Vec Mlp::forward(std::span<const double> input) const {
  if (input.size() != static_cast<std::size_t>(spec_.input_dim())) {
    throw std::invalid_argument(shape_report("Mlp::forward input", input.size(),
                                             spec_.input_dim()));
  }
  Vec cur(input.begin(), input.end());
  Vec next;
  const int n_layers = static_cast<int>(layers_.size());
  for (int l = 0; l < n_layers; ++l) {
    const DenseLayer& layer = layers_[l];
    next.resize(layer.out_dim());
    matvec(layer.weights, layer.bias, cur, next.data());
    if (l + 1 < n_layers) {
      for (auto& v : next) v = gelu(v);
    }
    cur.swap(next);
  }
  return cur;
}

Vec Mlp::forward(std::span<const double> input, ForwardCache& cache) const {
  if (input.size() != static_cast<std::size_t>(spec_.input_dim())) {
    throw std::invalid_argument(shape_report("Mlp::forward input", input.size(),
                                             spec_.input_dim()));
  }
  const int n_layers = static_cast<int>(layers_.size());
  cache.activations.resize(n_layers + 1);
  cache.pre_activations.resize(n_layers);
  cache.activations[0].assign(input.begin(), input.end());
  for (int l = 0; l < n_layers; ++l) {
    const DenseLayer& layer = layers_[l];
    Vec& pre = cache.pre_activations[l];
    pre.resize(layer.out_dim());
    matvec(layer.weights, layer.bias, cache.activations[l], pre.data());
    Vec& act = cache.activations[l + 1];
    act.resize(layer.out_dim());
    if (l + 1 < n_layers) {
      for (int i = 0; i < layer.out_dim(); ++i) act[i] = gelu(pre[i]);
    } else {
      act = pre;
    }
  }
  cache.valid = true;
  return cache.activations.back();
}

Vec Mlp::backward(const ForwardCache& cache, std::span<const double> grad_output,
                  GradBuffer& grads) const {
  if (!cache.valid) {
    throw std::invalid_argument("Mlp::backward: cache missing (run forward first)");
  }
  const int n_layers = static_cast<int>(layers_.size());
  if (grad_output.size() != static_cast<std::size_t>(spec_.output_dim())) {
    throw std::invalid_argument(shape_report("Mlp::backward grad_output",
                                             grad_output.size(), spec_.output_dim()));
  }

  Vec delta(grad_output.begin(), grad_output.end());
  Vec prev_delta;
  for (int l = n_layers - 1; l >= 0; --l) {
    const DenseLayer& layer = layers_[l];
    const Vec& below = cache.activations[l];
    DenseLayer& g = grads.layers[l];

    // dW += delta outer below; db += delta
    for (int r = 0; r < layer.out_dim(); ++r) {
      const double d = delta[r];
      double* gw = g.weights.row(r);
      const double* a = below.data();
      for (int c = 0; c < layer.in_dim(); ++c) gw[c] += d * a[c];
      g.bias[r] += d;
    }

    // prev_delta = W^T delta, accumulated row by row to stay streaming
    prev_delta.assign(layer.in_dim(), 0.0);
    for (int r = 0; r < layer.out_dim(); ++r) {
      const double d = delta[r];
      const double* wr = layer.weights.row(r);
      double* pd = prev_delta.data();
      for (int c = 0; c < layer.in_dim(); ++c) pd[c] += wr[c] * d;
    }

    if (l > 0) {
      const Vec& pre_below = cache.pre_activations[l - 1];
      for (int c = 0; c < layer.in_dim(); ++c) {
        prev_delta[c] *= gelu_grad(pre_below[c]);
      }
    }
    delta.swap(prev_delta);
  }
  return delta;  // dL/dinput
}

std::vector<TensorRef> Mlp::tensors(const std::string& prefix) {
  std::vector<TensorRef> out;
  out.reserve(layers_.size() * 2);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    out.push_back({prefix + ".l" + std::to_string(l) + ".weight",
                   layers_[l].weights.data.data(), layers_[l].weights.size()});
    out.push_back({prefix + ".l" + std::to_string(l) + ".bias",
                   layers_[l].bias.data(), layers_[l].bias.size()});
  }
  return out;
}

std::vector<ConstTensorRef> Mlp::tensors(const std::string& prefix) const {
  std::vector<ConstTensorRef> out;
  out.reserve(layers_.size() * 2);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    out.push_back({prefix + ".l" + std::to_string(l) + ".weight",
                   layer.weights.data.data(), layer.weights.size(),
                   {layer.out_dim(), layer.in_dim()}});
    out.push_back({prefix + ".l" + std::to_string(l) + ".bias",
                   layer.bias.data(), layer.bias.size(),
                   {layer.out_dim()}});
  }
  return out;
}

MlpF32::MlpF32(const Mlp& source) : input_dim_(source.spec().input_dim()) {
  layers_.reserve(source.layers().size());
  for (const auto& src : source.layers()) {
    Layer l;
    l.rows = src.out_dim();
    l.cols = src.in_dim();
    l.weights.assign(src.weights.data.begin(), src.weights.data.end());
    l.bias.assign(src.bias.begin(), src.bias.end());
    layers_.push_back(std::move(l));
  }
}

int MlpF32::output_dim() const { return layers_.back().rows; }

std::vector<float> MlpF32::forward(std::span<const float> input) const {
  if (input.size() != static_cast<std::size_t>(input_dim_)) {
    throw std::invalid_argument(shape_report("MlpF32::forward input", input.size(),
                                             input_dim_));
  }
  std::vector<float> cur(input.begin(), input.end());
  std::vector<float> next;
  const int n_layers = static_cast<int>(layers_.size());
  for (int l = 0; l < n_layers; ++l) {
    const Layer& layer = layers_[l];
    next.resize(layer.rows);
    int r = 0;
    for (; r + 4 <= layer.rows; r += 4) {
      const float* w0 = layer.weights.data() + static_cast<std::size_t>(r + 0) * layer.cols;
      const float* w1 = layer.weights.data() + static_cast<std::size_t>(r + 1) * layer.cols;
      const float* w2 = layer.weights.data() + static_cast<std::size_t>(r + 2) * layer.cols;
      const float* w3 = layer.weights.data() + static_cast<std::size_t>(r + 3) * layer.cols;
      float a0 = 0.f, a1 = 0.f, a2 = 0.f, a3 = 0.f;
      for (int c = 0; c < layer.cols; ++c) {
        const float xc = cur[c];
        a0 += w0[c] * xc;
        a1 += w1[c] * xc;
        a2 += w2[c] * xc;
        a3 += w3[c] * xc;
      }
      next[r + 0] = a0 + layer.bias[r + 0];
      next[r + 1] = a1 + layer.bias[r + 1];
      next[r + 2] = a2 + layer.bias[r + 2];
      next[r + 3] = a3 + layer.bias[r + 3];
    }
    for (; r < layer.rows; ++r) {
      const float* wr = layer.weights.data() + static_cast<std::size_t>(r) * layer.cols;
      float acc = 0.f;
      for (int c = 0; c < layer.cols; ++c) acc += wr[c] * cur[c];
      next[r] = acc + layer.bias[r];
    }
    if (l + 1 < n_layers) {
      for (auto& v : next) {
        v = 0.5f * v * (1.0f + std::erff(v * static_cast<float>(M_SQRT1_2)));
      }
    }
    cur.swap(next);
  }
  return cur;
}

MseResult mse_loss(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size()) {
    throw std::invalid_argument(shape_report("mse_loss", pred.size(), target.size()));
  }
  if (pred.empty()) throw std::invalid_argument("mse_loss: empty vectors");
  MseResult res;
  res.grad_pred.resize(pred.size());
  const double inv_n = 1.0 / static_cast<double>(pred.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    acc += d * d;
    res.grad_pred[i] = 2.0 * d * inv_n;
  }
  res.loss = acc * inv_n;
  return res;
}

AdamState::AdamState(std::size_t total_params, AdamConfig cfg)
    : cfg_(cfg),
      first_moment_(total_params, 0.0),
      second_moment_(total_params, 0.0) {}

void AdamState::step(std::span<TensorRef> params, std::span<const TensorRef> grads) {
  if (params.size() != grads.size()) {
    throw std::invalid_argument("AdamState::step: param/grad tensor count mismatch");
  }
  std::size_t total = 0;
  for (const auto& p : params) total += p.size;
  if (total != first_moment_.size()) {
    throw std::invalid_argument(shape_report("AdamState::step", total,
                                             first_moment_.size()));
  }

  ++step_count_;
  const double b1 = cfg_.beta1;
  const double b2 = cfg_.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(step_count_));

  std::size_t offset = 0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (params[k].size != grads[k].size) {
      throw std::invalid_argument("AdamState::step: tensor " + params[k].name +
                                  " shape mismatch with gradient");
    }
    double* p = params[k].data;
    const double* g = grads[k].data;
    double* m = first_moment_.data() + offset;
    double* v = second_moment_.data() + offset;
    const std::size_t n = params[k].size;
    for (std::size_t i = 0; i < n; ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p[i] -= cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.eps_stab);
    }
    offset += n;
  }
}

}  // namespace locodiff::nn
