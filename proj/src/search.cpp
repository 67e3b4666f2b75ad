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

#include "treeq/search.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <set>
#include <string>
#include <thread>

namespace treeq {

bool dominates(const ParetoEntry& a, const ParetoEntry& b) {
  return a.indicator <= b.indicator && a.mean_bits <= b.mean_bits &&
         (a.indicator < b.indicator || a.mean_bits < b.mean_bits);
}

ParetoQueue build_frontier(std::vector<ParetoEntry> entries) {
  ParetoQueue q;
  if (entries.empty()) return q;
  q.first = entries.front().config.first();
  q.last = entries.front().config.last();
  std::stable_sort(entries.begin(), entries.end(), [](const ParetoEntry& a, const ParetoEntry& b) {
    if (a.mean_bits != b.mean_bits) return a.mean_bits < b.mean_bits;
    return a.indicator < b.indicator;
  });
  for (auto& e : entries) {
    if (q.entries.empty() || e.indicator < q.entries.back().indicator) {
      q.entries.push_back(std::move(e));
    }
  }
  return q;
}

void SearchParams::validate() const {
  if (candidates.empty()) throw ConfigError("search.candidates", "must not be empty");
  std::set<int> seen;
  for (int b : candidates) {
    if (b < 2 || b > 8) {
      throw ConfigError("search.candidates", "bit-width " + std::to_string(b) +
                                                 " outside [2, 8]");
    }
    if (!seen.insert(b).second) throw ConfigError("search.candidates", "duplicate entry");
  }
  if (k < candidates.size()) {
    throw ConfigError("search.k", "must be at least the number of candidates");
  }
  const auto [lo, hi] = std::minmax_element(candidates.begin(), candidates.end());
  if (!(target >= *lo && target <= *hi)) {
    throw ConfigError("search.target", "must lie within [" + std::to_string(*lo) + ", " +
                                           std::to_string(*hi) + "]");
  }
  if (!is_valid_bits(env_bits)) {
    throw ConfigError("search.env_bits", "must be in [2, 8] or 32");
  }
  if (jobs < 1) throw ConfigError("jobs", "must be >= 1");
}

BitConfig apply_eng(const BitConfig& module, int env_bits, std::size_t n_layers) {
  BitConfig full;
  for (std::size_t l = 0; l < n_layers; ++l) {
    full.set(l, module.contains(l) ? module.at(l) : env_bits);
  }
  return full;
}

Indicator::Indicator(const ToyModel& model, const QuantContext& ctx,
                     const CalibrationSet& calib, int env_bits)
    : model_(&model), ctx_(&ctx), calib_(&calib), env_bits_(env_bits) {
  if (&ctx.model() != &model) {
    throw InvalidAllocation("quantization context belongs to a different model");
  }
}

const std::vector<Vector>& Indicator::prefix(std::size_t begin) const {
  {
    std::lock_guard lock(mu_);
    auto it = prefixes_.find(begin);
    if (it != prefixes_.end()) return it->second;
  }
  const BitConfig env = apply_eng(BitConfig{}, env_bits_, model_->n_layers());
  std::vector<Vector> acts;
  acts.reserve(calib_->size());
  for (const Vector& x : calib_->inputs) {
    acts.push_back(forward_range(*model_, env, x, *ctx_, 0, begin));
  }
  std::lock_guard lock(mu_);
  return prefixes_.emplace(begin, std::move(acts)).first->second;
}

double Indicator::evaluate(const BitConfig& module) const {
  if (module.empty() || !module.contiguous() || module.last() >= model_->n_layers()) {
    throw InvalidAllocation("indicator needs a contiguous module inside the model");
  }
  evals_.fetch_add(1);
  const BitConfig full = apply_eng(module, env_bits_, model_->n_layers());
  check_allocation(*model_, full);
  const std::size_t begin = module.first();
  const auto& acts = prefix(begin);
  double total = 0.0;
  for (std::size_t e = 0; e < calib_->size(); ++e) {
    const Vector y = forward_range(*model_, full, acts[e], *ctx_, begin, model_->n_layers());
    const Vector& ref = calib_->fp_outputs[e];
    double se = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) se += (y[i] - ref[i]) * (y[i] - ref[i]);
    total += se / static_cast<double>(y.size());
  }
  return total / static_cast<double>(calib_->size());
}

void parallel_for(std::size_t count, std::size_t jobs,
                  const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min(std::max<std::size_t>(jobs, 1), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr err;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(err_mu);
          if (!err) err = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

namespace {

// Scores configs in order; results land at their input index.
std::vector<ParetoEntry> score_all(std::vector<BitConfig> configs, const SearchParams& params,
                                   const Indicator& indicator) {
  std::vector<ParetoEntry> out(configs.size());
  parallel_for(configs.size(), params.jobs, [&](std::size_t i) {
    out[i].indicator = indicator.evaluate(configs[i]);
    out[i].mean_bits = mean_bitwidth(configs[i], indicator.model());
    out[i].config = std::move(configs[i]);
  });
  return out;
}

void trim_to_target(ParetoQueue& q, const SearchParams& params) {
  if (q.entries.size() <= params.k) return;
  std::stable_sort(q.entries.begin(), q.entries.end(),
                   [&](const ParetoEntry& a, const ParetoEntry& b) {
                     const double da = std::abs(a.mean_bits - params.target);
                     const double db = std::abs(b.mean_bits - params.target);
                     if (da != db) return da < db;
                     if (a.indicator != b.indicator) return a.indicator < b.indicator;
                     return a.mean_bits < b.mean_bits;
                   });
  q.entries.resize(params.k);
  std::stable_sort(q.entries.begin(), q.entries.end(),
                   [](const ParetoEntry& a, const ParetoEntry& b) {
                     return a.mean_bits < b.mean_bits;
                   });
}

}  // namespace

ParetoQueue leaf_queue(std::size_t layer, const SearchParams& params,
                       const Indicator& indicator) {
  if (layer >= indicator.model().n_layers()) {
    throw InvalidAllocation("leaf layer " + std::to_string(layer) + " out of range");
  }
  std::vector<int> bits = params.candidates;
  std::sort(bits.begin(), bits.end());
  std::vector<BitConfig> configs;
  for (int b : bits) configs.push_back(BitConfig{{layer, b}});
  ParetoQueue q = build_frontier(score_all(std::move(configs), params, indicator));
  trim_to_target(q, params);
  return q;
}

ParetoQueue merge(const ParetoQueue& qa, const ParetoQueue& qb, const SearchParams& params,
                  const Indicator& indicator, MergeRecord* record) {
  if (qa.empty() || qb.empty() || qb.first != qa.last + 1) {
    throw InvalidAllocation("merge requires adjacent non-empty queues");
  }
  std::vector<BitConfig> unions;
  unions.reserve(qa.size() * qb.size());
  for (const auto& a : qa.entries) {
    for (const auto& b : qb.entries) unions.push_back(a.config.merged_with(b.config));
  }
  ParetoQueue q = build_frontier(score_all(std::move(unions), params, indicator));
  const std::size_t frontier = q.size();
  trim_to_target(q, params);
  if (record) {
    *record = MergeRecord{qa.first, qb.last, qa.size(), qb.size(), frontier, q.size()};
  }
  return q;
}

const ParetoEntry& select_closest(const ParetoQueue& queue, double target) {
  if (queue.empty()) throw InvalidAllocation("cannot select from an empty queue");
  const ParetoEntry* best = &queue.entries.front();
  for (const auto& e : queue.entries) {
    const double d = std::abs(e.mean_bits - target);
    const double db = std::abs(best->mean_bits - target);
    if (d < db || (d == db && e.indicator < best->indicator)) best = &e;
  }
  return *best;
}

std::uint64_t eval_bound(std::size_t n_layers, const SearchParams& params) {
  const std::uint64_t k = params.k;
  return n_layers * params.candidates.size() + (n_layers - 1) * k * k;
}

SearchResult tss_search(const ToyModel& model, const SearchParams& params,
                        const QuantContext& ctx, const CalibrationSet& calib) {
  params.validate();
  const std::size_t n = model.n_layers();
  const Indicator indicator(model, ctx, calib, params.env_bits);
  SearchResult result;

  std::vector<ParetoQueue> level;
  level.reserve(n);
  for (std::size_t l = 0; l < n; ++l) level.push_back(leaf_queue(l, params, indicator));

  auto merge_pair = [&](const ParetoQueue& a, const ParetoQueue& b) {
    MergeRecord rec;
    ParetoQueue m = merge(a, b, params, indicator, &rec);
    result.trace.push_back(rec);
    ++result.merges;
    return m;
  };

  if (params.schedule == MergeSchedule::kLeftFold) {
    ParetoQueue acc = std::move(level.front());
    for (std::size_t i = 1; i < level.size(); ++i) acc = merge_pair(acc, level[i]);
    level.assign(1, std::move(acc));
  } else {
    while (level.size() > 1) {
      std::vector<ParetoQueue> next;
      next.reserve((level.size() + 1) / 2);
      for (std::size_t i = 0; i + 1 < level.size(); i += 2) {
        next.push_back(merge_pair(level[i], level[i + 1]));
      }
      if (level.size() % 2 == 1) next.push_back(std::move(level.back()));
      level = std::move(next);
    }
  }

  result.root = std::move(level.front());
  result.selected = select_closest(result.root, params.target);
  result.final_alloc = result.selected.config;
  result.evals = indicator.evaluations();
  return result;
}

}  // namespace treeq
