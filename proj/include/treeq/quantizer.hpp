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

#include <map>
#include <span>
#include <string>

#include "treeq/matrix.hpp"

namespace treeq {

// Bit-width that disables quantization entirely.
inline constexpr int kFullPrecisionBits = 32;

bool is_valid_bits(int bits);  // 2..8 or 32

// Symmetric uniform quantizer on the two's-complement integer grid
// [-2^(b-1), 2^(b-1) - 1], step `delta`.
struct QuantizerSpec {
  int bits = kFullPrecisionBits;
  double delta = 1.0;
  long qmin = 0;
  long qmax = 0;

  static QuantizerSpec make(int bits, double delta);
  bool passthrough() const { return bits == kFullPrecisionBits; }
};

// Mean squared error of Q_uni(X; delta) for X ~ N(0, 1), integrated with
// composite Gauss-Legendre over [-8, 8]. Panels are split at the
// quantizer's decision thresholds so every panel has a smooth integrand.
double gaussian_quant_mse(int bits, double delta);

// Step minimizing gaussian_quant_mse for 2 <= bits <= 8 (golden-section).
double calibrate_delta(int bits);

// Optimal N(0,1) steps for every supported bit-width, computed once.
class DeltaTable {
 public:
  DeltaTable() = default;
  explicit DeltaTable(std::map<int, double> deltas);

  static DeltaTable calibrated();
  // Process-wide calibrated table; thread-safe lazy init.
  static const DeltaTable& standard();

  double delta(int bits) const;
  QuantizerSpec spec(int bits) const;
  const std::map<int, double>& entries() const { return deltas_; }

 private:
  std::map<int, double> deltas_;
};

double quantize_scalar(double x, const QuantizerSpec& spec);
Vector quantize_uniform(std::span<const double> x, const QuantizerSpec& spec);

// Per-token quantization of a vector already in the Hadamard domain:
// sigma_t * Q(y / sigma_t), sigma_t = RMS(y). Zero vectors map to zero.
Vector quantize_gaussian_domain(std::span<const double> y, const QuantizerSpec& spec);

// Q_G(x) = sigma_t * Q(h^T x / sigma_t). Output stays in the Hadamard domain.
Vector quantize_activation(std::span<const double> x, int bits, const Matrix& h,
                           const DeltaTable& table = DeltaTable::standard());

// Row-wise (output channel) quantization scaled by the population standard
// deviation of each row. Constant rows scale by |v| instead; zero rows stay 0.
Matrix quantize_weight_channelwise(const Matrix& w_res, int bits,
                                   const DeltaTable& table = DeltaTable::standard());

}  // namespace treeq
