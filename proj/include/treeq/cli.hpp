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

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "treeq/search.hpp"
#include "treeq/serialize.hpp"
#include "treeq/toymodel.hpp"

namespace treeq::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitUser = 2;

struct CalibConfig {
  std::size_t count = 64;         // search indicator and IP sensitivity tables
  std::uint64_t seed = 1000;
  std::size_t eval_count = 256;   // held-out set used for reported MSE
  std::uint64_t eval_seed = 2000;
};

struct RunConfig {
  ModelSpec model;
  SearchParams search;
  QuantParams quant;
  CalibConfig calib;
  std::filesystem::path output_dir = "out";

  static RunConfig defaults();
};

// Parses a config document; unknown or mistyped fields raise ConfigError
// naming the JSON path.
RunConfig config_from_json(const Json& j);
Json config_to_json(const RunConfig& c);
RunConfig load_config(const std::filesystem::path& path);

// Removes every "wall_ms" key, recursively. Everything else in a command's
// output is a pure function of the config.
Json strip_volatile(Json j);

// Entry point shared by the executable and the tests. args excludes argv[0].
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace treeq::cli
