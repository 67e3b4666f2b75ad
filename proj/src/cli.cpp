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

#include "treeq/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <numeric>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "treeq/baselines.hpp"

namespace treeq::cli {

namespace fs = std::filesystem;

namespace {

std::string format(const char* fmt, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, fmt);
  std::vsnprintf(buf, sizeof(buf), fmt, ap);
  va_end(ap);
  return buf;
}

double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
      .count();
}

template <typename T>
T read_field(const Json& j, const std::string& field) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(field, "has the wrong type");
  }
}

std::string schedule_name(MergeSchedule s) {
  return s == MergeSchedule::kBalanced ? "balanced" : "left_fold";
}

Json load_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UserError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw UserError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const Json& j) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  if (ec) throw UserError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw UserError("cannot write " + path.string());
  out << j.dump(2) << "\n";
  if (!out) throw UserError("write failed for " + path.string());
}

// Model, contexts and calibration sets for one command invocation.
struct Session {
  RunConfig cfg;
  ToyModel model;
  std::unique_ptr<QuantContext> ctx;

  explicit Session(RunConfig c) : cfg(std::move(c)), model(gen_model(cfg.model)) {
    ctx = std::make_unique<QuantContext>(model, cfg.quant);
  }

  CalibrationSet search_calib() const {
    return gen_calibration(model, cfg.calib.count, cfg.calib.seed);
  }
  CalibrationSet eval_calib() const {
    return gen_calibration(model, cfg.calib.eval_count, cfg.calib.eval_seed);
  }
};

BitConfig load_allocation(const fs::path& path) {
  const Json j = load_json(path);
  for (const char* key : {"final_alloc", "per_layer_bits", "alloc"}) {
    if (j.is_object() && j.contains(key)) return bit_config_from_json(j.at(key), key);
  }
  return bit_config_from_json(j, "alloc");
}

BitConfig allocation_from_flags(const Session& s, const std::string& alloc_path,
                                std::optional<int> bits) {
  BitConfig alloc;
  if (!alloc_path.empty()) {
    alloc = load_allocation(alloc_path);
  } else {
    const int b = bits ? *bits : static_cast<int>(std::lround(s.cfg.search.target));
    alloc = uniform_allocate(s.model.n_layers(), b);
  }
  check_allocation(s.model, alloc);
  return alloc;
}

Json eval_row(const Session& s, const BitConfig& alloc, const CalibrationSet& eval) {
  const auto start = std::chrono::steady_clock::now();
  const double mse = end_to_end_mse(s.model, alloc, eval, *s.ctx);
  return Json{{"mse", mse},
              {"mean_bits", mean_bitwidth(alloc, s.model)},
              {"per_layer_bits", bit_config_to_json(alloc)},
              {"wall_ms", elapsed_ms(start)}};
}

int cmd_gen_model(const Session& s, std::ostream& out) {
  const fs::path path = s.cfg.output_dir / "model.json";
  write_json(path, model_to_json(s.model));
  out << format("%-6s %-10s %-10s %-12s\n", "layer", "n_in", "n_out", "flops");
  for (std::size_t l = 0; l < s.model.n_layers(); ++l) {
    out << format("%-6zu %-10zu %-10zu %-12llu\n", l, s.model.weights[l].cols(),
                  s.model.weights[l].rows(),
                  static_cast<unsigned long long>(s.model.flops[l]));
  }
  out << "wrote " << path.string() << "\n";
  return kExitOk;
}

int cmd_calibrate_delta(const Session& s, std::ostream& out) {
  const DeltaTable& t = s.ctx->deltas();
  const fs::path path = s.cfg.output_dir / "deltas.json";
  write_json(path, delta_table_to_json(t));
  out << format("%-5s %-12s %-14s\n", "bits", "delta", "mse(N(0,1))");
  for (const auto& [bits, d] : t.entries()) {
    out << format("%-5d %-12.8f %-14.8e\n", bits, d, gaussian_quant_mse(bits, d));
  }
  out << "wrote " << path.string() << "\n";
  return kExitOk;
}

int cmd_search(const Session& s, std::ostream& out, std::ostream& err) {
  const CalibrationSet calib = s.search_calib();
  const auto start = std::chrono::steady_clock::now();
  const SearchResult r = tss_search(s.model, s.cfg.search, *s.ctx, calib);
  Json j = search_result_to_json(r, s.cfg.search);
  j["schedule"] = schedule_name(s.cfg.search.schedule);
  j["wall_ms"] = elapsed_ms(start);
  for (const auto& m : r.trace) {
    if (m.left_size >= 2 && m.right_size >= 2 && !m.sparse()) {
      err << format("warning: merge over [%zu, %zu] kept %zu of %zu unions on the frontier\n",
                    m.first, m.last, m.frontier_size, m.left_size * m.right_size);
    }
  }
  const fs::path path = s.cfg.output_dir / "search.json";
  write_json(path, j);
  out << format("target %.3f env %d k %zu: mean_bits %.4f indicator %.6e evals %llu (bound %llu)\n",
                s.cfg.search.target, s.cfg.search.env_bits, s.cfg.search.k, r.selected.mean_bits,
                r.selected.indicator, static_cast<unsigned long long>(r.evals),
                static_cast<unsigned long long>(eval_bound(s.model.n_layers(), s.cfg.search)));
  out << "alloc:";
  for (const auto& [layer, bits] : r.final_alloc) out << " " << bits;
  out << "\nwrote " << path.string() << "\n";
  return kExitOk;
}

int cmd_quantize(const Session& s, const BitConfig& alloc, std::ostream& out) {
  Json layers = Json::array();
  for (const auto& [layer, bits] : alloc) {
    Json lj = quantized_linear_to_json(s.ctx->layer(layer, bits));
    lj["index"] = layer;
    layers.push_back(std::move(lj));
  }
  const fs::path path = s.cfg.output_dir / "quantized.json";
  write_json(path, Json{{"alloc", bit_config_to_json(alloc)}, {"layers", std::move(layers)}});
  out << "wrote " << path.string() << "\n";
  return kExitOk;
}

int cmd_eval(const Session& s, const BitConfig& alloc, std::ostream& out) {
  const Json j = eval_row(s, alloc, s.eval_calib());
  const fs::path path = s.cfg.output_dir / "eval.json";
  write_json(path, j);
  out << format("mse %.6e mean_bits %.4f\n", j["mse"].get<double>(),
                j["mean_bits"].get<double>());
  out << "wrote " << path.string() << "\n";
  return kExitOk;
}

int cmd_baseline(const Session& s, std::ostream& out) {
  const SearchParams& sp = s.cfg.search;
  sp.validate();
  const CalibrationSet calib = s.search_calib();
  const CalibrationSet eval = s.eval_calib();

  struct Row {
    std::string method;
    BitConfig alloc;
    double search_ms = 0.0;
  };
  std::vector<Row> rows;
  rows.push_back({"uniform", uniform_allocate(s.model.n_layers(),
                                              static_cast<int>(std::floor(sp.target))), 0.0});
  for (SensitivityMetric m : {SensitivityMetric::kL1, SensitivityMetric::kL2}) {
    const auto start = std::chrono::steady_clock::now();
    const SensitivityTable t =
        build_sensitivity_table(s.model, sp.candidates, m, calib, *s.ctx, sp.jobs);
    rows.push_back({"IP+" + to_string(m), ip_allocate(t, s.model.flops, sp.target, sp.candidates),
                    elapsed_ms(start)});
  }
  {
    const auto start = std::chrono::steady_clock::now();
    const SearchResult r = tss_search(s.model, sp, *s.ctx, calib);
    rows.push_back({"TSS", r.final_alloc, elapsed_ms(start)});
  }

  Json table = Json::array();
  out << format("%-8s %-14s %-10s %-8s\n", "method", "mse", "mean_bits", "budget");
  for (const Row& r : rows) {
    const double mse = end_to_end_mse(s.model, r.alloc, eval, *s.ctx);
    const double mb = mean_bitwidth(r.alloc, s.model);
    const bool ok = std::abs(mb - sp.target) <= 0.25;
    table.push_back({{"method", r.method},
                     {"mse", mse},
                     {"mean_bits", mb},
                     {"within_budget", ok},
                     {"alloc", bit_config_to_json(r.alloc)},
                     {"wall_ms", r.search_ms}});
    out << format("%-8s %-14.6e %-10.4f %-8s\n", r.method.c_str(), mse, mb, ok ? "ok" : "FLAG");
  }
  const double tss = table.back()["mse"].get<double>();
  for (std::size_t i = 1; i + 1 < table.size(); ++i) {
    if (tss > table[i]["mse"].get<double>()) {
      out << "note: TSS above " << table[i]["method"].get<std::string>() << " on this seed\n";
    }
  }
  const fs::path path = s.cfg.output_dir / "baseline.json";
  write_json(path, Json{{"target", sp.target},
                        {"env_bits", sp.env_bits},
                        {"calib", calib.size()},
                        {"eval_calib", eval.size()},
                        {"rows", std::move(table)}});
  out << "wrote " << path.string() << "\n";
  return kExitOk;
}

std::vector<std::string> split_values(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::size_t parse_count(const std::string& v, const std::string& field) {
  try {
    std::size_t pos = 0;
    const unsigned long n = std::stoul(v, &pos);
    if (pos != v.size() || n == 0) throw std::invalid_argument(v);
    return n;
  } catch (const std::exception&) {
    throw ConfigError(field, "expected a positive integer, got '" + v + "'");
  }
}

int cmd_ablate(const Session& s, const std::string& axis, const std::string& values,
               std::ostream& out) {
  const CalibrationSet eval = s.eval_calib();
  Json rows = Json::array();
  if (axis == "k") {
    const auto vals = split_values(values.empty() ? "4,8,16,32" : values);
    const CalibrationSet calib = s.search_calib();
    out << format("%-6s %-14s %-10s %-8s %-8s\n", "k", "mse", "mean_bits", "evals", "bound");
    for (const auto& v : vals) {
      SearchParams sp = s.cfg.search;
      sp.k = parse_count(v, "values");
      const auto start = std::chrono::steady_clock::now();
      const SearchResult r = tss_search(s.model, sp, *s.ctx, calib);
      const double ms = elapsed_ms(start);
      const double mse = end_to_end_mse(s.model, r.final_alloc, eval, *s.ctx);
      const auto bound = eval_bound(s.model.n_layers(), sp);
      rows.push_back({{"k", sp.k},
                      {"mse", mse},
                      {"mean_bits", r.selected.mean_bits},
                      {"evals", r.evals},
                      {"eval_bound", bound},
                      {"wall_ms", ms}});
      out << format("%-6zu %-14.6e %-10.4f %-8llu %-8llu\n", sp.k, mse, r.selected.mean_bits,
                    static_cast<unsigned long long>(r.evals),
                    static_cast<unsigned long long>(bound));
    }
  } else if (axis == "calib") {
    constexpr std::size_t kDraws = 8;
    const auto vals = split_values(values.empty() ? "4,8,16,32,64" : values);
    const BitConfig probe =
        uniform_allocate(s.model.n_layers(), static_cast<int>(std::lround(s.cfg.search.target)));
    out << format("%-6s %-14s %-14s %-14s %-8s\n", "count", "mse", "ind_mean", "ind_var", "evals");
    for (const auto& v : vals) {
      const std::size_t count = parse_count(v, "values");
      // Indicator spread across independent calibration draws of this size.
      std::vector<double> ind;
      for (std::size_t d = 0; d < kDraws; ++d) {
        const CalibrationSet draw =
            gen_calibration(s.model, count, s.cfg.calib.seed + 7919 * (d + 1));
        ind.push_back(end_to_end_mse(s.model, probe, draw, *s.ctx));
      }
      const double mean = std::accumulate(ind.begin(), ind.end(), 0.0) / kDraws;
      double var = 0.0;
      for (double x : ind) var += (x - mean) * (x - mean);
      var /= kDraws - 1;
      const auto start = std::chrono::steady_clock::now();
      const CalibrationSet calib = gen_calibration(s.model, count, s.cfg.calib.seed);
      const SearchResult r = tss_search(s.model, s.cfg.search, *s.ctx, calib);
      const double ms = elapsed_ms(start);
      const double mse = end_to_end_mse(s.model, r.final_alloc, eval, *s.ctx);
      rows.push_back({{"count", count},
                      {"mse", mse},
                      {"mean_bits", r.selected.mean_bits},
                      {"evals", r.evals},
                      {"indicator_mean", mean},
                      {"indicator_variance", var},
                      {"draws", kDraws},
                      {"wall_ms", ms}});
      out << format("%-6zu %-14.6e %-14.6e %-14.6e %-8llu\n", count, mse, mean, var,
                    static_cast<unsigned long long>(r.evals));
    }
  } else if (axis == "gmb") {
    const auto vals = split_values(values.empty() ? "off,r2,r4,r8,gmb_first,pre" : values);
    const int bits = static_cast<int>(std::lround(s.cfg.search.target));
    const BitConfig alloc = uniform_allocate(s.model.n_layers(), bits);
    out << format("%-10s %-6s %-10s %-6s %-14s\n", "setting", "r_gmb", "order", "place", "mse");
    for (const auto& v : vals) {
      QuantParams qp = s.cfg.quant;
      if (v == "off") {
        qp.use_gmb = false;
      } else if (v.size() > 1 && v[0] == 'r') {
        qp.use_gmb = true;
        qp.r_gmb = parse_count(v.substr(1), "values");
      } else if (v == "gmb_first") {
        qp.use_gmb = true;
        qp.order = BranchOrder::kGmbFirst;
      } else if (v == "pre") {
        qp.use_gmb = true;
        qp.placement = GmbPlacement::kPreHadamard;
      } else {
        throw ConfigError("values", "unknown gmb setting '" + v + "'");
      }
      const QuantContext ctx(s.model, qp);
      const auto start = std::chrono::steady_clock::now();
      const double mse = end_to_end_mse(s.model, alloc, eval, ctx);
      const double ms = elapsed_ms(start);
      const BranchOptions o = qp.options_for(s.model.weights[0].rows(), s.model.weights[0].cols());
      const std::size_t r_gmb = qp.use_gmb ? o.r_gmb : 0;
      const char* order = qp.order == BranchOrder::kLrbFirst ? "lrb_first" : "gmb_first";
      const char* place = qp.placement == GmbPlacement::kPostHadamard ? "post" : "pre";
      rows.push_back({{"setting", v},
                      {"r_gmb", r_gmb},
                      {"order", order},
                      {"placement", place},
                      {"bits", bits},
                      {"mse", mse},
                      {"evals", 1},
                      {"wall_ms", ms}});
      out << format("%-10s %-6zu %-10s %-6s %-14.6e\n", v.c_str(), r_gmb, order, place, mse);
    }
  } else {
    throw ConfigError("axis", "unknown ablation axis '" + axis + "' (expected k, calib, gmb)");
  }
  const fs::path path = s.cfg.output_dir / ("ablate_" + axis + ".json");
  write_json(path, Json{{"axis", axis}, {"rows", std::move(rows)}});
  out << "wrote " << path.string() << "\n";
  return kExitOk;
}

}  // namespace

RunConfig RunConfig::defaults() { return RunConfig{}; }

RunConfig config_from_json(const Json& j) {
  RunConfig c;
  if (!j.is_object()) throw ConfigError("config", "expected an object");
  for (const auto& [key, value] : j.items()) {
    if (key == "model") {
      c.model = model_spec_from_json(value, c.model, "model");
    } else if (key == "search") {
      if (!value.is_object()) throw ConfigError("search", "expected an object");
      bool env_given = false;
      for (const auto& [k, v] : value.items()) {
        const std::string f = "search." + k;
        if (k == "candidates") {
          c.search.candidates = read_field<std::vector<int>>(v, f);
        } else if (k == "k") {
          c.search.k = read_field<std::size_t>(v, f);
        } else if (k == "target") {
          c.search.target = read_field<double>(v, f);
        } else if (k == "env_bits") {
          c.search.env_bits = read_field<int>(v, f);
          env_given = true;
        } else if (k == "schedule") {
          const auto s = read_field<std::string>(v, f);
          if (s == "balanced") {
            c.search.schedule = MergeSchedule::kBalanced;
          } else if (s == "left_fold") {
            c.search.schedule = MergeSchedule::kLeftFold;
          } else {
            throw ConfigError(f, "expected balanced or left_fold");
          }
        } else {
          throw ConfigError(f, "unknown field");
        }
      }
      if (!env_given) c.search.env_bits = static_cast<int>(std::lround(c.search.target));
    } else if (key == "quant") {
      if (!value.is_object()) throw ConfigError("quant", "expected an object");
      for (const auto& [k, v] : value.items()) {
        const std::string f = "quant." + k;
        if (k == "r_lrb" || k == "r_gmb") {
          std::optional<std::size_t> r;
          if (!v.is_null()) r = read_field<std::size_t>(v, f);
          (k == "r_lrb" ? c.quant.r_lrb : c.quant.r_gmb) = r;
        } else if (k == "use_gmb") {
          c.quant.use_gmb = read_field<bool>(v, f);
        } else if (k == "order") {
          const auto s = read_field<std::string>(v, f);
          if (s != "lrb_first" && s != "gmb_first") throw ConfigError(f, "expected lrb_first or gmb_first");
          c.quant.order = s == "lrb_first" ? BranchOrder::kLrbFirst : BranchOrder::kGmbFirst;
        } else if (k == "placement") {
          const auto s = read_field<std::string>(v, f);
          if (s != "post" && s != "pre") throw ConfigError(f, "expected post or pre");
          c.quant.placement = s == "post" ? GmbPlacement::kPostHadamard : GmbPlacement::kPreHadamard;
        } else {
          throw ConfigError(f, "unknown field");
        }
      }
    } else if (key == "calib") {
      if (!value.is_object()) throw ConfigError("calib", "expected an object");
      for (const auto& [k, v] : value.items()) {
        const std::string f = "calib." + k;
        if (k == "count") {
          c.calib.count = read_field<std::size_t>(v, f);
        } else if (k == "seed") {
          c.calib.seed = read_field<std::uint64_t>(v, f);
        } else if (k == "eval_count") {
          c.calib.eval_count = read_field<std::size_t>(v, f);
        } else if (k == "eval_seed") {
          c.calib.eval_seed = read_field<std::uint64_t>(v, f);
        } else {
          throw ConfigError(f, "unknown field");
        }
        if ((k == "count" || k == "eval_count") && v.get<std::size_t>() == 0) {
          throw ConfigError(f, "must be >= 1");
        }
      }
    } else if (key == "output_dir") {
      c.output_dir = read_field<std::string>(value, "output_dir");
    } else if (key == "jobs") {
      c.search.jobs = read_field<std::size_t>(value, "jobs");
    } else {
      throw ConfigError(key, "unknown field");
    }
  }
  return c;
}

Json config_to_json(const RunConfig& c) {
  auto opt = [](const std::optional<std::size_t>& v) { return v ? Json(*v) : Json(nullptr); };
  return Json{
      {"model", model_spec_to_json(c.model)},
      {"search",
       {{"candidates", c.search.candidates},
        {"k", c.search.k},
        {"target", c.search.target},
        {"env_bits", c.search.env_bits},
        {"schedule", schedule_name(c.search.schedule)}}},
      {"quant",
       {{"r_lrb", opt(c.quant.r_lrb)},
        {"r_gmb", opt(c.quant.r_gmb)},
        {"use_gmb", c.quant.use_gmb},
        {"order", c.quant.order == BranchOrder::kLrbFirst ? "lrb_first" : "gmb_first"},
        {"placement", c.quant.placement == GmbPlacement::kPostHadamard ? "post" : "pre"}}},
      {"calib",
       {{"count", c.calib.count},
        {"seed", c.calib.seed},
        {"eval_count", c.calib.eval_count},
        {"eval_seed", c.calib.eval_seed}}},
      {"output_dir", c.output_dir.string()},
      {"jobs", c.search.jobs}};
}

RunConfig load_config(const fs::path& path) { return config_from_json(load_json(path)); }

Json strip_volatile(Json j) {
  if (j.is_object()) {
    j.erase("wall_ms");
    for (auto& [key, value] : j.items()) value = strip_volatile(value);
  } else if (j.is_array()) {
    for (auto& value : j) value = strip_volatile(value);
  }
  return j;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"treeq: mixed-precision quantization search on a synthetic layer chain"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<double> target;
  std::optional<int> env;
  std::optional<std::size_t> k;
  std::optional<std::size_t> jobs;
  std::string out_dir;
  app.add_option("--config", config_path, "JSON run config");
  app.add_option("--seed", seed, "model seed (overrides TREEQ_SEED and the config)");
  app.add_option("--target", target, "target mean bit-width");
  app.add_option("--env", env, "environment bit-width (ENG)");
  app.add_option("--k", k, "maximum Pareto queue length");
  app.add_option("--jobs", jobs, "evaluation worker threads");
  app.add_option("--out", out_dir, "output directory");

  std::string alloc_path;
  std::optional<int> bits;
  std::string axis;
  std::string values;

  auto* gen = app.add_subcommand("gen-model", "generate the synthetic model");
  auto* cal = app.add_subcommand("calibrate-delta", "optimal N(0,1) quantizer steps");
  auto* search = app.add_subcommand("search", "tree-structured bit allocation search");
  auto* quant = app.add_subcommand("quantize", "quantize every layer under an allocation");
  auto* eval = app.add_subcommand("eval", "end-to-end MSE of an allocation");
  auto* base = app.add_subcommand("baseline", "uniform / IP+L1 / IP+L2 / TSS comparison");
  auto* abl = app.add_subcommand("ablate", "sweep one axis: k, calib or gmb");
  for (auto* sub : {quant, eval}) {
    sub->add_option("--alloc", alloc_path, "allocation JSON ({layer: bits} or a search result)");
    sub->add_option("--bits", bits, "uniform bit-width when no --alloc is given");
  }
  abl->add_option("--axis", axis, "k | calib | gmb")->required();
  abl->add_option("--values", values, "comma-separated settings for the axis");
  for (auto* sub : {gen, cal, search, quant, eval, base, abl}) sub->fallthrough();

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUser;
  }

  try {
    RunConfig cfg = config_path.empty() ? RunConfig::defaults() : load_config(config_path);
    if (const char* env_seed = std::getenv("TREEQ_SEED"); env_seed && *env_seed) {
      try {
        cfg.model.seed = std::stoull(env_seed);
      } catch (const std::exception&) {
        throw ConfigError("TREEQ_SEED", "expected an unsigned integer");
      }
    }
    if (seed) cfg.model.seed = *seed;
    if (target) {
      cfg.search.target = *target;
      if (!env) cfg.search.env_bits = static_cast<int>(std::lround(*target));
    }
    if (env) cfg.search.env_bits = *env;
    if (k) cfg.search.k = *k;
    if (jobs) cfg.search.jobs = *jobs;
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    cfg.model.validate();
    cfg.search.validate();

    const Session session(std::move(cfg));
    if (gen->parsed()) return cmd_gen_model(session, out);
    if (cal->parsed()) return cmd_calibrate_delta(session, out);
    if (search->parsed()) return cmd_search(session, out, err);
    if (quant->parsed()) {
      return cmd_quantize(session, allocation_from_flags(session, alloc_path, bits), out);
    }
    if (eval->parsed()) {
      return cmd_eval(session, allocation_from_flags(session, alloc_path, bits), out);
    }
    if (base->parsed()) return cmd_baseline(session, out);
    if (abl->parsed()) return cmd_ablate(session, axis, values, out);
    err << "no command given\n";
    return kExitUser;
  } catch (const UserError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUser;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}

}  // namespace treeq::cli
