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
#include <string>
#include <vector>

#include "treeq/bit_config.hpp"
#include "treeq/toymodel.hpp"

namespace treeq {

enum class SensitivityMetric { kL1, kL2 };

std::string to_string(SensitivityMetric m);
SensitivityMetric parse_metric(const std::string& name);

// score(layer, bits): output distortion when only `layer` is quantized.
struct SensitivityTable {
  SensitivityMetric metric = SensitivityMetric::kL2;
  std::map<std::size_t, std::map<int, double>> scores;

  double score(std::size_t layer, int bits) const { return scores.at(layer).at(bits); }
  // Layers whose score increases with bits somewhere (a soft expectation).
  std::vector<std::size_t> non_monotone_layers() const;
};

// Mean over the calibration set of the per-element mean |dy| (L1) or dy^2
// (L2) between the single-layer-quantized and full-precision outputs.
double layer_sensitivity(const ToyModel& model, std::size_t layer, int bits,
                         SensitivityMetric metric, const CalibrationSet& calib,
                         const QuantContext& ctx);

SensitivityTable build_sensitivity_table(const ToyModel& model, const std::vector<int>& bits,
                                         SensitivityMetric metric, const CalibrationSet& calib,
                                         const QuantContext& ctx, std::size_t jobs = 1);

// Minimizes sum_i score(i, b_i) s.t. sum_i flops_i b_i <= target * sum_i flops_i
// by exact dynamic programming over integer budget units. Ties prefer lower
// total FLOPs-weighted bits, then lexicographically lower bits. Throws
// InfeasibleBudget when target is below the smallest candidate.
BitConfig ip_allocate(const SensitivityTable& table, const std::vector<std::uint64_t>& flops,
                      double target, const std::vector<int>& candidates);

BitConfig uniform_allocate(std::size_t n_layers, int bits);

}  // namespace treeq
