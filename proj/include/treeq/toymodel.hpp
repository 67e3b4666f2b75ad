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

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

#include "treeq/bit_config.hpp"
#include "treeq/branches.hpp"
#include "treeq/matrix.hpp"
#include "treeq/quantizer.hpp"

namespace treeq {

inline constexpr double kLeakySlope = 0.1;

struct ModelSpec {
  std::size_t n_layers = 12;
  std::vector<std::size_t> dims = std::vector<std::size_t>(13, 64);
  std::uint64_t seed = 1;
  double outlier_fraction = 0.01;
  double outlier_scale = 8.0;

  // Throws ConfigError naming the offending field.
  void validate() const;
  bool operator==(const ModelSpec&) const = default;
};

// Chain of dense layers; layer i maps dims[i] -> dims[i + 1], with a leaky
// rectifier between consecutive layers (none after the last).
struct ToyModel {
  ModelSpec spec;
  std::vector<Matrix> weights;
  std::vector<std::uint64_t> flops;  // 2 * N_o * N_i

  std::size_t n_layers() const { return weights.size(); }
  std::size_t input_dim() const { return spec.dims.front(); }
  std::size_t output_dim() const { return spec.dims.back(); }
};

struct CalibrationSet {
  std::vector<Vector> inputs;
  std::vector<Vector> fp_outputs;
  std::uint64_t seed = 0;

  std::size_t size() const { return inputs.size(); }
};

// Entries N(0, 1/dims[i]); each entry independently becomes an outlier
// (scaled by outlier_scale) with probability outlier_fraction.
ToyModel gen_model(const ModelSpec& spec);

CalibrationSet gen_calibration(const ToyModel& model, std::size_t count, std::uint64_t seed);

// Exact full-precision forward pass.
Vector dense_forward(const ToyModel& model, std::span<const double> x);

void leaky_relu_inplace(std::span<double> x);

struct QuantParams {
  std::optional<std::size_t> r_lrb;  // nullopt => scaled per layer
  std::optional<std::size_t> r_gmb;
  bool use_gmb = true;
  BranchOrder order = BranchOrder::kLrbFirst;
  GmbPlacement placement = GmbPlacement::kPostHadamard;

  BranchOptions options_for(std::size_t n_o, std::size_t n_i) const;
};

// Quantization state bound to one model. Branch decompositions are cached
// per layer and quantized layers per (layer, bits); both caches are safe for
// concurrent read-through population.
class QuantContext {
 public:
  QuantContext(const ToyModel& model, QuantParams params,
               const DeltaTable& deltas = DeltaTable::standard());

  const ToyModel& model() const { return *model_; }
  const QuantParams& params() const { return params_; }
  const DeltaTable& deltas() const { return *deltas_; }

  const LayerDecomposition& decomposition(std::size_t layer) const;
  const QuantizedLinear& layer(std::size_t layer, int bits) const;

  // Applies layer `layer` at `bits` (bits_a = bits_w). 32 bits runs the
  // exact dense product. No nonlinearity.
  Vector apply_layer(std::size_t layer, int bits, std::span<const double> x) const;

 private:
  const ToyModel* model_;
  QuantParams params_;
  const DeltaTable* deltas_;
  mutable std::mutex mu_;
  mutable std::map<std::size_t, std::shared_ptr<const LayerDecomposition>> decomps_;
  mutable std::map<std::pair<std::size_t, int>, std::shared_ptr<const QuantizedLinear>> layers_;
};

// Applies layers [begin, end) to x, with the inter-layer nonlinearity, so
// `forward_range(..., 0, n)` is the whole model.
Vector forward_range(const ToyModel& model, const BitConfig& alloc, std::span<const double> x,
                     const QuantContext& ctx, std::size_t begin, std::size_t end);

// Throws InvalidAllocation if any layer is missing or has unsupported bits.
Vector forward(const ToyModel& model, const BitConfig& alloc, std::span<const double> x,
               const QuantContext& ctx);

void check_allocation(const ToyModel& model, const BitConfig& alloc);

// Mean over the calibration set of ||forward(x) - fp||^2 / len.
double end_to_end_mse(const ToyModel& model, const BitConfig& alloc,
                      const CalibrationSet& calib, const QuantContext& ctx);

// FLOPs-weighted mean over the layers present in `alloc`.
double mean_bitwidth(const BitConfig& alloc, const ToyModel& model);

}  // namespace treeq
