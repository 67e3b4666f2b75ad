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

#include "treeq/serialize.hpp"

#include <cmath>

namespace treeq {

namespace {

const Json& require(const Json& j, const char* key, const std::string& field) {
  if (!j.is_object() || !j.contains(key)) {
    throw ConfigError(field.empty() ? key : field + "." + key, "missing");
  }
  return j.at(key);
}

template <typename T>
T get_as(const Json& j, const std::string& field) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(field, "has the wrong type");
  }
}

}  // namespace

Json matrix_to_json(const Matrix& m) {
  return Json{{"shape", {m.rows(), m.cols()}}, {"data", m.data()}};
}

Matrix matrix_from_json(const Json& j, const std::string& field) {
  const auto shape = get_as<std::vector<std::size_t>>(require(j, "shape", field), field + ".shape");
  if (shape.size() != 2) throw ConfigError(field + ".shape", "expected [rows, cols]");
  auto data = get_as<std::vector<double>>(require(j, "data", field), field + ".data");
  if (data.size() != shape[0] * shape[1]) {
    throw ConfigError(field + ".data", "length does not match shape");
  }
  return Matrix(shape[0], shape[1], std::move(data));
}

Json delta_table_to_json(const DeltaTable& t) {
  Json j = Json::object();
  for (const auto& [bits, d] : t.entries()) j[std::to_string(bits)] = d;
  return j;
}

DeltaTable delta_table_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("deltas", "expected an object");
  std::map<int, double> m;
  for (const auto& [key, value] : j.items()) {
    int bits = 0;
    try {
      bits = std::stoi(key);
    } catch (const std::exception&) {
      throw ConfigError("deltas." + key, "key is not a bit-width");
    }
    m[bits] = get_as<double>(value, "deltas." + key);
  }
  return DeltaTable(std::move(m));
}

Json quantized_linear_to_json(const QuantizedLinear& q) {
  Json j;
  j["bits_w"] = q.bits_w();
  j["bits_a"] = q.bits_a();
  j["n"] = q.hadamard_size();
  j["lrb"] = {{"a", matrix_to_json(q.lrb().a)}, {"b", matrix_to_json(q.lrb().b)}};
  if (q.gmb()) {
    const GmbFactors& g = *q.gmb();
    Matrix u(g.u.size(), g.b_o);
    Matrix v(g.v.size(), g.b_i);
    for (std::size_t id = 0; id < g.u.size(); ++id) {
      for (std::size_t a = 0; a < g.b_o; ++a) u(id, a) = g.u[id][a];
      for (std::size_t b = 0; b < g.b_i; ++b) v(id, b) = g.v[id][b];
    }
    j["gmb"] = {{"n_o", g.n_o},
                {"n_i", g.n_i},
                {"sigma", g.sigma},
                {"u", matrix_to_json(u)},
                {"v", matrix_to_json(v)}};
  } else {
    j["gmb"] = nullptr;
  }
  if (q.placement() == GmbPlacement::kPreHadamard) j["gmb_placement"] = "pre";
  j["q_res"] = matrix_to_json(q.q_res());
  return j;
}

QuantizedLinear quantized_linear_from_json(const Json& j) {
  const int bits_w = get_as<int>(require(j, "bits_w", ""), "bits_w");
  const int bits_a = get_as<int>(require(j, "bits_a", ""), "bits_a");
  const auto n = get_as<std::size_t>(require(j, "n", ""), "n");
  const Json& lj = require(j, "lrb", "");
  LrbFactors lrb;
  lrb.a = matrix_from_json(require(lj, "a", "lrb"), "lrb.a");
  lrb.b = matrix_from_json(require(lj, "b", "lrb"), "lrb.b");
  lrb.rank = lrb.a.cols();
  std::optional<GmbFactors> gmb;
  const Json& gj = require(j, "gmb", "");
  Matrix q_res = matrix_from_json(require(j, "q_res", ""), "q_res");
  if (!gj.is_null()) {
    GmbFactors g;
    g.n_o = get_as<std::size_t>(require(gj, "n_o", "gmb"), "gmb.n_o");
    g.n_i = get_as<std::size_t>(require(gj, "n_i", "gmb"), "gmb.n_i");
    g.sigma = get_as<std::vector<double>>(require(gj, "sigma", "gmb"), "gmb.sigma");
    const Matrix u = matrix_from_json(require(gj, "u", "gmb"), "gmb.u");
    const Matrix v = matrix_from_json(require(gj, "v", "gmb"), "gmb.v");
    if (g.n_o == 0 || g.n_i == 0 || u.rows() != g.n_o * g.n_i || v.rows() != u.rows() ||
        g.sigma.size() != u.rows()) {
      throw ConfigError("gmb", "block counts do not match factor arrays");
    }
    g.b_o = u.cols();
    g.b_i = v.cols();
    for (std::size_t id = 0; id < u.rows(); ++id) {
      g.u.push_back(Vector(u.row(id).begin(), u.row(id).end()));
      g.v.push_back(Vector(v.row(id).begin(), v.row(id).end()));
    }
    gmb = std::move(g);
  }
  const GmbPlacement placement =
      j.contains("gmb_placement") && j.at("gmb_placement") == "pre"
          ? GmbPlacement::kPreHadamard
          : GmbPlacement::kPostHadamard;
  return QuantizedLinear(std::move(q_res), std::move(lrb), std::move(gmb), placement, bits_w,
                         bits_a, n);
}

Json model_spec_to_json(const ModelSpec& s) {
  return Json{{"n_layers", s.n_layers},
              {"dims", s.dims},
              {"seed", s.seed},
              {"outlier_fraction", s.outlier_fraction},
              {"outlier_scale", s.outlier_scale}};
}

ModelSpec model_spec_from_json(const Json& j, const ModelSpec& base, const std::string& prefix) {
  if (!j.is_object()) throw ConfigError(prefix.empty() ? "model" : prefix, "expected an object");
  auto name = [&](const char* key) { return prefix.empty() ? std::string(key) : prefix + "." + key; };
  ModelSpec s = base;
  bool dims_given = false;
  for (const auto& [key, value] : j.items()) {
    if (key == "n_layers") {
      s.n_layers = get_as<std::size_t>(value, name("n_layers"));
    } else if (key == "dims") {
      if (value.is_number_unsigned()) {
        s.dims.assign(1, get_as<std::size_t>(value, name("dims")));
      } else {
        s.dims = get_as<std::vector<std::size_t>>(value, name("dims"));
      }
      dims_given = true;
    } else if (key == "seed") {
      s.seed = get_as<std::uint64_t>(value, name("seed"));
    } else if (key == "outlier_fraction") {
      s.outlier_fraction = get_as<double>(value, name("outlier_fraction"));
    } else if (key == "outlier_scale") {
      s.outlier_scale = get_as<double>(value, name("outlier_scale"));
    } else {
      throw ConfigError(name(key.c_str()), "unknown field");
    }
  }
  // A scalar dim, or dims left at the default, broadcast to n_layers + 1.
  if (s.dims.size() == 1 || (!dims_given && s.dims.size() != s.n_layers + 1)) {
    s.dims.assign(s.n_layers + 1, s.dims.front());
  }
  try {
    s.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(name(e.field().c_str()), std::string(e.what()).substr(e.field().size() + 2));
  }
  return s;
}

Json model_to_json(const ToyModel& m) {
  Json layers = Json::array();
  for (std::size_t l = 0; l < m.n_layers(); ++l) {
    layers.push_back({{"index", l},
                      {"n_o", m.weights[l].rows()},
                      {"n_i", m.weights[l].cols()},
                      {"flops", m.flops[l]},
                      {"w", matrix_to_json(m.weights[l])}});
  }
  return Json{{"spec", model_spec_to_json(m.spec)}, {"layers", std::move(layers)}};
}

Json bit_config_to_json(const BitConfig& c) {
  Json j = Json::object();
  for (const auto& [layer, bits] : c) j[std::to_string(layer)] = bits;
  return j;
}

BitConfig bit_config_from_json(const Json& j, const std::string& field) {
  if (!j.is_object()) throw ConfigError(field, "expected an object {layer: bits}");
  BitConfig c;
  for (const auto& [key, value] : j.items()) {
    std::size_t layer = 0;
    try {
      std::size_t pos = 0;
      layer = std::stoul(key, &pos);
      if (pos != key.size()) throw std::invalid_argument(key);
    } catch (const std::exception&) {
      throw ConfigError(field + "." + key, "key is not a layer index");
    }
    const int bits = get_as<int>(value, field + "." + key);
    if (!is_valid_bits(bits)) throw ConfigError(field + "." + key, "unsupported bit-width");
    c.set(layer, bits);
  }
  return c;
}

Json sensitivity_to_json(const SensitivityTable& t) {
  Json scores = Json::object();
  for (const auto& [layer, by_bits] : t.scores) {
    Json row = Json::object();
    for (const auto& [bits, s] : by_bits) row[std::to_string(bits)] = s;
    scores[std::to_string(layer)] = std::move(row);
  }
  return Json{{"metric", to_string(t.metric)}, {"scores", std::move(scores)}};
}

SensitivityTable sensitivity_from_json(const Json& j) {
  SensitivityTable t;
  t.metric = parse_metric(get_as<std::string>(require(j, "metric", ""), "metric"));
  const Json& scores = require(j, "scores", "");
  for (const auto& [layer_key, row] : scores.items()) {
    const std::size_t layer = std::stoul(layer_key);
    for (const auto& [bits_key, value] : row.items()) {
      t.scores[layer][std::stoi(bits_key)] = get_as<double>(value, "scores." + layer_key);
    }
  }
  return t;
}

Json search_result_to_json(const SearchResult& r, const SearchParams& p) {
  Json trace = Json::array();
  for (const auto& m : r.trace) {
    trace.push_back({{"span", {m.first, m.last}},
                     {"left", m.left_size},
                     {"right", m.right_size},
                     {"frontier", m.frontier_size},
                     {"kept", m.kept}});
  }
  Json root = Json::array();
  for (const auto& e : r.root.entries) {
    root.push_back({{"mean_bits", e.mean_bits},
                    {"indicator", e.indicator},
                    {"alloc", bit_config_to_json(e.config)}});
  }
  return Json{{"target", p.target},
              {"env_bits", p.env_bits},
              {"k", p.k},
              {"candidates", p.candidates},
              {"final_alloc", bit_config_to_json(r.final_alloc)},
              {"mean_bits", r.selected.mean_bits},
              {"indicator", r.selected.indicator},
              {"evals", r.evals},
              {"eval_bound", eval_bound(r.final_alloc.size(), p)},
              {"merges", r.merges},
              {"merge_trace", std::move(trace)},
              {"root_frontier", std::move(root)}};
}

}  // namespace treeq
