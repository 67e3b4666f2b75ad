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

// Tree-structured mixed-precision search over a layer chain.
//
// Each layer starts as a leaf Pareto queue over the candidate bit-widths.
// Adjacent queues are merged by re-scoring every union of their entries on
// the merged span, keeping the non-dominated set in the
// (indicator, mean bit-width) plane, and trimming to the k entries closest
// to the target. Layers outside the span being scored run at the
// environment bit-width.

#include <atomic>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <vector>

#include "treeq/bit_config.hpp"
#include "treeq/toymodel.hpp"

namespace treeq {

struct ParetoEntry {
  BitConfig config;
  double indicator = 0.0;
  double mean_bits = 0.0;
};

// a is no worse on both coordinates and strictly better on one.
bool dominates(const ParetoEntry& a, const ParetoEntry& b);

// Non-dominated entries over layers [first, last], sorted by mean_bits
// ascending (indicator therefore strictly descending).
struct ParetoQueue {
  std::size_t first = 0;
  std::size_t last = 0;
  std::vector<ParetoEntry> entries;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
};

// Exact non-dominated subset. Entries equal on both coordinates keep the
// earliest one in input order.
ParetoQueue build_frontier(std::vector<ParetoEntry> entries);

enum class MergeSchedule { kBalanced, kLeftFold };

struct SearchParams {
  std::vector<int> candidates{2, 3, 4, 5};
  std::size_t k = 16;
  double target = 3.0;
  int env_bits = 3;
  MergeSchedule schedule = MergeSchedule::kBalanced;
  std::size_t jobs = 1;

  // Throws ConfigError on an invalid combination.
  void validate() const;
};

// Full allocation: module layers keep their bits, every other layer of an
// n-layer model runs at env_bits.
BitConfig apply_eng(const BitConfig& module, int env_bits, std::size_t n_layers);

// Calibration-MSE performance indicator under an environment. Counts every
// evaluation. Activations entering a span are cached per span start, since
// everything before the span runs at the environment bit-width.
class Indicator {
 public:
  Indicator(const ToyModel& model, const QuantContext& ctx, const CalibrationSet& calib,
            int env_bits);

  double evaluate(const BitConfig& module) const;
  std::uint64_t evaluations() const { return evals_.load(); }

  const ToyModel& model() const { return *model_; }
  int env_bits() const { return env_bits_; }

 private:
  const std::vector<Vector>& prefix(std::size_t begin) const;

  const ToyModel* model_;
  const QuantContext* ctx_;
  const CalibrationSet* calib_;
  int env_bits_;
  mutable std::atomic<std::uint64_t> evals_{0};
  mutable std::mutex mu_;
  mutable std::map<std::size_t, std::vector<Vector>> prefixes_;
};

struct MergeRecord {
  std::size_t first = 0;
  std::size_t last = 0;
  std::size_t left_size = 0;
  std::size_t right_size = 0;
  std::size_t frontier_size = 0;  // before trimming to k
  std::size_t kept = 0;
  // The frontier is expected to be much smaller than the Cartesian product.
  bool sparse() const { return frontier_size < left_size * right_size; }
};

ParetoQueue leaf_queue(std::size_t layer, const SearchParams& params, const Indicator& indicator);

// Throws InvalidAllocation unless qb starts right after qa ends.
ParetoQueue merge(const ParetoQueue& qa, const ParetoQueue& qb, const SearchParams& params,
                  const Indicator& indicator, MergeRecord* record = nullptr);

// Closest mean_bits to target; ties prefer the lower indicator.
const ParetoEntry& select_closest(const ParetoQueue& queue, double target);

struct SearchResult {
  BitConfig final_alloc;  // module-local over all layers
  ParetoEntry selected;
  ParetoQueue root;
  std::uint64_t evals = 0;
  std::size_t merges = 0;
  std::vector<MergeRecord> trace;
};

SearchResult tss_search(const ToyModel& model, const SearchParams& params,
                        const QuantContext& ctx, const CalibrationSet& calib);

// n * |candidates| + (n - 1) * k^2.
std::uint64_t eval_bound(std::size_t n_layers, const SearchParams& params);

// Runs fn(0..count-1) on up to `jobs` threads; each index runs exactly once.
void parallel_for(std::size_t count, std::size_t jobs,
                  const std::function<void(std::size_t)>& fn);

}  // namespace treeq
