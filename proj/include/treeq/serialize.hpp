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

// JSON layouts for every machine-readable artifact. Matrices are written as
// {"shape": [rows, cols], "data": [row-major values]}.

#include <string>

#include "json.hpp"
#include "treeq/baselines.hpp"
#include "treeq/branches.hpp"
#include "treeq/quantizer.hpp"
#include "treeq/search.hpp"
#include "treeq/toymodel.hpp"

namespace treeq {

using Json = nlohmann::ordered_json;

Json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const Json& j, const std::string& field);

// {"2": delta_2, ..., "8": delta_8}
Json delta_table_to_json(const DeltaTable& t);
DeltaTable delta_table_from_json(const Json& j);

// {"bits_w", "bits_a", "n", "lrb": {"a", "b"},
//  "gmb": {"n_o", "n_i", "sigma", "u", "v"} | null, "q_res"}
// Non-default GMB placement adds "gmb_placement": "pre".
Json quantized_linear_to_json(const QuantizedLinear& q);
QuantizedLinear quantized_linear_from_json(const Json& j);

// {"n_layers", "dims", "seed", "outlier_fraction", "outlier_scale"}
Json model_spec_to_json(const ModelSpec& s);
// Missing keys keep the defaults of `base`; wrong types raise ConfigError.
ModelSpec model_spec_from_json(const Json& j, const ModelSpec& base = {},
                               const std::string& prefix = "");

// {"spec": {...}, "layers": [{"index", "n_o", "n_i", "flops", "w"}]}
Json model_to_json(const ToyModel& m);

// {layer: bits} with decimal string keys.
Json bit_config_to_json(const BitConfig& c);
BitConfig bit_config_from_json(const Json& j, const std::string& field);

// {"metric", "scores": {layer: {bits: score}}}
Json sensitivity_to_json(const SensitivityTable& t);
SensitivityTable sensitivity_from_json(const Json& j);

// {"target", "env_bits", "k", "candidates", "final_alloc", "mean_bits",
//  "indicator", "evals", "merge_trace"}
Json search_result_to_json(const SearchResult& r, const SearchParams& p);

}  // namespace treeq
