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

#include "treeq/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "treeq/search.hpp"

namespace treeq {

namespace {

constexpr std::uint64_t kMaxBudgetUnits = 1'000'000;

struct Cell {
  double score = std::numeric_limits<double>::infinity();
  std::uint64_t used = 0;
  bool feasible() const { return std::isfinite(score); }
  bool operator<(const Cell& o) const {
    if (score != o.score) return score < o.score;
    return used < o.used;
  }
  bool operator==(const Cell& o) const { return score == o.score && used == o.used; }
};

}  // namespace

std::string to_string(SensitivityMetric m) { return m == SensitivityMetric::kL1 ? "L1" : "L2"; }

SensitivityMetric parse_metric(const std::string& name) {
  if (name == "L1") return SensitivityMetric::kL1;
  if (name == "L2") return SensitivityMetric::kL2;
  throw ConfigError("metric", "expected L1 or L2, got " + name);
}

std::vector<std::size_t> SensitivityTable::non_monotone_layers() const {
  std::vector<std::size_t> out;
  for (const auto& [layer, by_bits] : scores) {
    double prev = std::numeric_limits<double>::infinity();
    for (const auto& [bits, s] : by_bits) {
      if (s > prev) {
        out.push_back(layer);
        break;
      }
      prev = s;
    }
  }
  return out;
}

double layer_sensitivity(const ToyModel& model, std::size_t layer, int bits,
                         SensitivityMetric metric, const CalibrationSet& calib,
                         const QuantContext& ctx) {
  if (layer >= model.n_layers()) {
    throw InvalidAllocation("sensitivity layer " + std::to_string(layer) + " out of range");
  }
  BitConfig alloc = uniform_allocate(model.n_layers(), kFullPrecisionBits);
  alloc.set(layer, bits);
  check_allocation(model, alloc);
  double total = 0.0;
  for (std::size_t e = 0; e < calib.size(); ++e) {
    const Vector y = forward_range(model, alloc, calib.inputs[e], ctx, 0, model.n_layers());
    const Vector& ref = calib.fp_outputs[e];
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double d = y[i] - ref[i];
      acc += metric == SensitivityMetric::kL1 ? std::abs(d) : d * d;
    }
    total += acc / static_cast<double>(y.size());
  }
  return total / static_cast<double>(calib.size());
}

SensitivityTable build_sensitivity_table(const ToyModel& model, const std::vector<int>& bits,
                                         SensitivityMetric metric, const CalibrationSet& calib,
                                         const QuantContext& ctx, std::size_t jobs) {
  const std::size_t n = model.n_layers();
  std::vector<double> flat(n * bits.size());
  parallel_for(flat.size(), jobs, [&](std::size_t i) {
    flat[i] = layer_sensitivity(model, i / bits.size(), bits[i % bits.size()], metric, calib, ctx);
  });
  SensitivityTable t;
  t.metric = metric;
  for (std::size_t i = 0; i < flat.size(); ++i) {
    t.scores[i / bits.size()][bits[i % bits.size()]] = flat[i];
  }
  return t;
}

BitConfig ip_allocate(const SensitivityTable& table, const std::vector<std::uint64_t>& flops,
                      double target, const std::vector<int>& candidates) {
  if (candidates.empty()) throw ConfigError("candidates", "must not be empty");
  std::vector<int> bits = candidates;
  std::sort(bits.begin(), bits.end());
  if (target < bits.front()) {
    throw InfeasibleBudget("target " + std::to_string(target) +
                           " is below the smallest candidate " + std::to_string(bits.front()));
  }
  const std::size_t n = flops.size();
  if (n == 0) return {};

  // Integer budget units: exact via the FLOPs gcd when small enough,
  // otherwise conservatively rounded so the real constraint still holds.
  std::uint64_t g = 0;
  long double total_flops = 0;
  for (auto f : flops) {
    g = std::gcd(g, f);
    total_flops += f;
  }
  std::vector<std::uint64_t> units(n);
  std::uint64_t unit_sum = 0;
  for (std::size_t i = 0; i < n; ++i) unit_sum += flops[i] / g;
  std::uint64_t budget = 0;
  if (unit_sum * static_cast<std::uint64_t>(bits.back()) <= kMaxBudgetUnits) {
    for (std::size_t i = 0; i < n; ++i) units[i] = flops[i] / g;
    budget = static_cast<std::uint64_t>(
        std::floor(static_cast<long double>(target) * unit_sum * (1 + 1e-12L)));
  } else {
    const long double scale = total_flops * bits.back() / kMaxBudgetUnits;
    for (std::size_t i = 0; i < n; ++i) {
      units[i] = static_cast<std::uint64_t>(std::ceil(flops[i] / scale));
    }
    budget = static_cast<std::uint64_t>(std::floor(target * total_flops / scale));
  }

  // best[i][u]: optimal (score, used) for layers i..n-1 within u units.
  std::vector<std::vector<Cell>> best(n + 1, std::vector<Cell>(budget + 1));
  for (auto& c : best[n]) c = Cell{0.0, 0};
  for (std::size_t ii = n; ii-- > 0;) {
    for (std::uint64_t u = 0; u <= budget; ++u) {
      Cell cell;
      for (int b : bits) {
        const std::uint64_t cost = units[ii] * static_cast<std::uint64_t>(b);
        if (cost > u) break;
        const Cell& rest = best[ii + 1][u - cost];
        if (!rest.feasible()) continue;
        const Cell cand{table.score(ii, b) + rest.score, cost + rest.used};
        if (cand < cell) cell = cand;
      }
      best[ii][u] = cell;
    }
  }
  if (!best[0][budget].feasible()) {
    throw InfeasibleBudget("no allocation meets target " + std::to_string(target));
  }

  BitConfig out;
  std::uint64_t u = budget;
  for (std::size_t i = 0; i < n; ++i) {
    for (int b : bits) {
      const std::uint64_t cost = units[i] * static_cast<std::uint64_t>(b);
      if (cost > u) break;
      const Cell& rest = best[i + 1][u - cost];
      if (!rest.feasible()) continue;
      if (Cell{table.score(i, b) + rest.score, cost + rest.used} == best[i][u]) {
        out.set(i, b);
        u -= cost;
        break;
      }
    }
  }
  return out;
}

BitConfig uniform_allocate(std::size_t n_layers, int bits) {
  if (!is_valid_bits(bits)) throw InvalidBits("unsupported bit-width " + std::to_string(bits));
  BitConfig c;
  for (std::size_t l = 0; l < n_layers; ++l) c.set(l, bits);
  return c;
}

}  // namespace treeq
