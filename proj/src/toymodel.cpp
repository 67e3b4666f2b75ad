// Copyright 2026 The TreeQ Authors
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

#include "treeq/toymodel.hpp"

#include <cmath>
#include <string>

#include "treeq/linalg.hpp"
#include "treeq/rng.hpp"

namespace treeq {

namespace {

constexpr std::uint64_t kWeightStream = 1ULL << 32;
constexpr std::uint64_t kOutlierStream = 2ULL << 32;
constexpr std::uint64_t kCalibrationStream = 3ULL << 32;

}  // namespace

void ModelSpec::validate() const {
  if (n_layers < 1 || n_layers > 128) {
    throw ConfigError("n_layers", "must be in [1, 128], got " + std::to_string(n_layers));
  }
  if (dims.size() != n_layers + 1) {
    throw ConfigError("dims", "expected " + std::to_string(n_layers + 1) + " entries, got " +
                                  std::to_string(dims.size()));
  }
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (!linalg::is_power_of_two(dims[i]) || dims[i] < 8 || dims[i] > 1024) {
      throw ConfigError("dims[" + std::to_string(i) + "]",
                        "must be a power of two in [8, 1024], got " + std::to_string(dims[i]));
    }
  }
  if (!(outlier_fraction >= 0.0 && outlier_fraction <= 1.0)) {
    throw ConfigError("outlier_fraction", "must be in [0, 1]");
  }
  if (!(outlier_scale >= 1.0) || !std::isfinite(outlier_scale)) {
    throw ConfigError("outlier_scale", "must be >= 1");
  }
}

ToyModel gen_model(const ModelSpec& spec) {
  spec.validate();
  ToyModel m;
  m.spec = spec;
  for (std::size_t l = 0; l < spec.n_layers; ++l) {
    const std::size_t n_i = spec.dims[l];
    const std::size_t n_o = spec.dims[l + 1];
    const CounterRng values(spec.seed, kWeightStream + l);
    const CounterRng outliers(spec.seed, kOutlierStream + l);
    const double scale = 1.0 / std::sqrt(static_cast<double>(n_i));
    Matrix w(n_o, n_i);
    auto& data = w.data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      double v = values.normal(i) * scale;
      if (outliers.uniform(i) < spec.outlier_fraction) v *= spec.outlier_scale;
      data[i] = v;
    }
    m.weights.push_back(std::move(w));
    m.flops.push_back(2ULL * n_o * n_i);
  }
  return m;
}

void leaky_relu_inplace(std::span<double> x) {
  for (double& v : x) {
    if (v < 0.0) v *= kLeakySlope;
  }
}

Vector dense_forward(const ToyModel& model, std::span<const double> x) {
  Vector h(x.begin(), x.end());
  for (std::size_t l = 0; l < model.n_layers(); ++l) {
    h = linalg::matvec(model.weights[l], h);
    if (l + 1 < model.n_layers()) leaky_relu_inplace(h);
  }
  return h;
}

CalibrationSet gen_calibration(const ToyModel& model, std::size_t count, std::uint64_t seed) {
  if (count < 1) throw ConfigError("calib.count", "must be >= 1");
  CalibrationSet c;
  c.seed = seed;
  const std::size_t d = model.input_dim();
  for (std::size_t e = 0; e < count; ++e) {
    const CounterRng rng(seed, kCalibrationStream + e);
    Vector x(d);
    for (std::size_t i = 0; i < d; ++i) x[i] = rng.normal(i);
    c.fp_outputs.push_back(dense_forward(model, x));
    c.inputs.push_back(std::move(x));
  }
  return c;
}

BranchOptions QuantParams::options_for(std::size_t n_o, std::size_t n_i) const {
  BranchOptions o = BranchOptions::scaled_defaults(n_o, n_i);
  if (r_lrb) o.r_lrb = *r_lrb;
  if (r_gmb) o.r_gmb = *r_gmb;
  o.use_gmb = use_gmb;
  o.order = order;
  o.placement = placement;
  return o;
}

QuantContext::QuantContext(const ToyModel& model, QuantParams params, const DeltaTable& deltas)
    : model_(&model), params_(params), deltas_(&deltas) {}

const LayerDecomposition& QuantContext::decomposition(std::size_t layer) const {
  {
    std::lock_guard lock(mu_);
    auto it = decomps_.find(layer);
    if (it != decomps_.end()) return *it->second;
  }
  const Matrix& w = model_->weights.at(layer);
  const Matrix h = linalg::hadamard(w.cols());
  auto built = std::make_shared<const LayerDecomposition>(
      decompose_layer(w, params_.options_for(w.rows(), w.cols()), h));
  std::lock_guard lock(mu_);
  return *decomps_.emplace(layer, std::move(built)).first->second;
}

const QuantizedLinear& QuantContext::layer(std::size_t layer, int bits) const {
  const auto key = std::make_pair(layer, bits);
  {
    std::lock_guard lock(mu_);
    auto it = layers_.find(key);
    if (it != layers_.end()) return *it->second;
  }
  auto built = std::make_shared<const QuantizedLinear>(
      quantize_decomposed(decomposition(layer), bits, bits, *deltas_));
  std::lock_guard lock(mu_);
  return *layers_.emplace(key, std::move(built)).first->second;
}

Vector QuantContext::apply_layer(std::size_t layer, int bits, std::span<const double> x) const {
  if (bits == kFullPrecisionBits) return linalg::matvec(model_->weights.at(layer), x);
  return forward_quantized(this->layer(layer, bits), x, *deltas_);
}

void check_allocation(const ToyModel& model, const BitConfig& alloc) {
  for (std::size_t l = 0; l < model.n_layers(); ++l) {
    if (!alloc.contains(l)) {
      throw InvalidAllocation("allocation has no entry for layer " + std::to_string(l));
    }
    if (!is_valid_bits(alloc.at(l))) {
      throw InvalidAllocation("layer " + std::to_string(l) + " has unsupported bit-width " +
                              std::to_string(alloc.at(l)));
    }
  }
  if (alloc.size() != model.n_layers()) {
    throw InvalidAllocation("allocation references layers outside the model");
  }
}

Vector forward_range(const ToyModel& model, const BitConfig& alloc, std::span<const double> x,
                     const QuantContext& ctx, std::size_t begin, std::size_t end) {
  Vector h(x.begin(), x.end());
  for (std::size_t l = begin; l < end; ++l) {
    h = ctx.apply_layer(l, alloc.at(l), h);
    if (l + 1 < model.n_layers()) leaky_relu_inplace(h);
  }
  return h;
}

Vector forward(const ToyModel& model, const BitConfig& alloc, std::span<const double> x,
               const QuantContext& ctx) {
  if (&ctx.model() != &model) {
    throw InvalidAllocation("quantization context belongs to a different model");
  }
  check_allocation(model, alloc);
  return forward_range(model, alloc, x, ctx, 0, model.n_layers());
}

double end_to_end_mse(const ToyModel& model, const BitConfig& alloc,
                      const CalibrationSet& calib, const QuantContext& ctx) {
  check_allocation(model, alloc);
  double total = 0.0;
  for (std::size_t e = 0; e < calib.size(); ++e) {
    const Vector y = forward_range(model, alloc, calib.inputs[e], ctx, 0, model.n_layers());
    const Vector& ref = calib.fp_outputs[e];
    double se = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) se += (y[i] - ref[i]) * (y[i] - ref[i]);
    total += se / static_cast<double>(y.size());
  }
  return total / static_cast<double>(calib.size());
}

double mean_bitwidth(const BitConfig& alloc, const ToyModel& model) {
  std::uint64_t weighted = 0;
  std::uint64_t total = 0;
  for (const auto& [layer, bits] : alloc) {
    const std::uint64_t f = model.flops.at(layer);
    weighted += f * static_cast<std::uint64_t>(bits);
    total += f;
  }
  if (total == 0) return 0.0;
  return static_cast<double>(weighted) / static_cast<double>(total);
}

}  // namespace treeq
