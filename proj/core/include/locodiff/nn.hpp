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

#ifndef LOCODIFF_NN_HPP_
#define LOCODIFF_NN_HPP_

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "locodiff/rng.hpp"

namespace locodiff::nn {

using Vec = std::vector<double>;

// Row-major dense matrix, 64-bit. All training math runs on these; a 32-bit
// copy exists only in the latency benchmark path (see Mlp32).
struct Matrix {
  int rows = 0;
  int cols = 0;
  Vec data;  // rows * cols, row-major

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  const double* row(int r) const { return data.data() + static_cast<std::size_t>(r) * cols; }
  double* row(int r) { return data.data() + static_cast<std::size_t>(r) * cols; }
  std::size_t size() const { return data.size(); }
};

struct DenseLayer {
  Matrix weights;  // out x in
  Vec bias;        // out

  DenseLayer() = default;
  DenseLayer(int out, int in) : weights(out, in), bias(static_cast<std::size_t>(out), 0.0) {}
  int in_dim() const { return weights.cols; }
  int out_dim() const { return weights.rows; }
};

// Hidden layers are GELU, the output layer is identity; noise estimates must
// be unbounded, so no squashing on the last layer.
struct NetworkSpec {
  std::vector<int> layer_sizes;  // input, hidden..., output

  static NetworkSpec make(std::vector<int> sizes);  // validates, throws on bad sizes
  int input_dim() const { return layer_sizes.front(); }
  int output_dim() const { return layer_sizes.back(); }
  int layer_count() const { return static_cast<int>(layer_sizes.size()) - 1; }
  bool operator==(const NetworkSpec&) const = default;
};

// Exact-erf GELU: 0.5 x (1 + erf(x / sqrt(2))). Not the tanh approximation.
inline double gelu(double x) {
  return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2));
}

// d/dx gelu(x) = Phi(x) + x phi(x), with Phi/phi the standard normal cdf/pdf.
inline double gelu_grad(double x) {
  constexpr double kInvSqrt2Pi = 0.3989422804014327;  // 1/sqrt(2*pi)
  const double cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
  const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
  return cdf + x * pdf;
}

// Named view over one parameter array; the common currency between the
// optimizer, checkpoints, and gradient checks. Iteration order is fixed by
// the owning network (layer 0 weight, layer 0 bias, layer 1 weight, ...).
struct TensorRef {
  std::string name;
  double* data = nullptr;
  std::size_t size = 0;
};

struct ConstTensorRef {
  std::string name;
  const double* data = nullptr;
  std::size_t size = 0;
  std::vector<int> dims;
};

// Per-pass activation cache; reusable across calls to avoid reallocation.
struct ForwardCache {
  std::vector<Vec> activations;     // acts[0] = input copy, acts[L] = output
  std::vector<Vec> pre_activations; // pre[l] = W a + b for layer l (1-based slot l-1)
  bool valid = false;
};

// Gradient accumulator shaped like an Mlp's parameters.
class Mlp;
struct GradBuffer {
  std::vector<DenseLayer> layers;

  explicit GradBuffer(const NetworkSpec& spec);
  void zero();
  void add(const GradBuffer& other);           // elementwise +=
  void scale(double s);
  std::vector<TensorRef> tensors(const std::string& prefix);
};

// Fully connected feed-forward network. GELU on hidden layers, identity out.
class Mlp {
 public:
  explicit Mlp(NetworkSpec spec);  // zero-initialized parameters

  // Uniform(-sqrt(6/(fan_in+fan_out)), +...) weights, zero biases.
  static Mlp seeded(NetworkSpec spec, Rng& rng);

  const NetworkSpec& spec() const { return spec_; }
  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::size_t param_count() const;

  // Inference forward; no cache retained.
  Vec forward(std::span<const double> input) const;

  // Training forward; cache feeds backward().
  Vec forward(std::span<const double> input, ForwardCache& cache) const;

  // Accumulates parameter gradients into grads, returns dL/dinput.
  // grad_output length must equal output_dim; cache must come from forward().
  Vec backward(const ForwardCache& cache, std::span<const double> grad_output,
               GradBuffer& grads) const;

  std::vector<TensorRef> tensors(const std::string& prefix);
  std::vector<ConstTensorRef> tensors(const std::string& prefix) const;

 private:
  NetworkSpec spec_;
  std::vector<DenseLayer> layers_;
};

// Mean squared error with gradient: loss = mean((pred-target)^2),
// grad = 2 (pred - target) / n.
struct MseResult {
  double loss = 0.0;
  Vec grad_pred;
};
MseResult mse_loss(std::span<const double> pred, std::span<const double> target);

// Bias-corrected Adam over a fixed-order list of parameter arrays.
struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_stab = 1e-8;
};

class AdamState {
 public:
  AdamState(std::size_t total_params, AdamConfig cfg);

  // params and grads must be flat views with matching total sizes and a call-
  // to-call stable order. One call = one optimizer step.
  void step(std::span<TensorRef> params, std::span<const TensorRef> grads);

  std::uint64_t step_count() const { return step_count_; }
  const AdamConfig& config() const { return cfg_; }
  void set_lr(double lr) { cfg_.lr = lr; }

 private:
  AdamConfig cfg_;
  Vec first_moment_;
  Vec second_moment_;
  std::uint64_t step_count_ = 0;
};

// y = W x + b, the hot kernel: 4-row blocked so the input vector loads are
// shared across independent accumulator chains.
void matvec(const Matrix& w, const Vec& bias, std::span<const double> x, double* y);

// 32-bit mirror of an Mlp for inference latency benchmarking only; training
// and the default sampling path stay 64-bit.
class MlpF32 {
 public:
  explicit MlpF32(const Mlp& source);

  int input_dim() const { return input_dim_; }
  int output_dim() const;
  std::vector<float> forward(std::span<const float> input) const;

 private:
  struct Layer {
    int rows = 0;
    int cols = 0;
    std::vector<float> weights;  // row-major
    std::vector<float> bias;
  };
  int input_dim_ = 0;
  std::vector<Layer> layers_;
};

// Throws if any entry of v is NaN or Inf; `what` names the offending array.
void check_finite(std::span<const double> v, const char* what);

}  // namespace locodiff::nn

#endif  // LOCODIFF_NN_HPP_
