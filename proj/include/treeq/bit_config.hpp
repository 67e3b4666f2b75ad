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

#include <cstddef>
#include <initializer_list>
#include <map>
#include <utility>

namespace treeq {

// Layer index -> bit-width. Module-local configs cover a contiguous span;
// full allocations cover every layer of a model.
class BitConfig {
 public:
  using Map = std::map<std::size_t, int>;

  BitConfig() = default;
  explicit BitConfig(Map bits) : bits_(std::move(bits)) {}
  BitConfig(std::initializer_list<std::pair<const std::size_t, int>> init) : bits_(init) {}

  void set(std::size_t layer, int bits) { bits_[layer] = bits; }
  bool contains(std::size_t layer) const { return bits_.count(layer) != 0; }
  int at(std::size_t layer) const { return bits_.at(layer); }
  std::size_t size() const { return bits_.size(); }
  bool empty() const { return bits_.empty(); }

  std::size_t first() const { return bits_.begin()->first; }
  std::size_t last() const { return bits_.rbegin()->first; }
  // Keys form one gap-free interval.
  bool contiguous() const {
    return bits_.empty() || last() - first() + 1 == bits_.size();
  }

  // Union of two configs on disjoint layer sets.
  BitConfig merged_with(const BitConfig& other) const {
    BitConfig out = *this;
    for (const auto& [l, b] : other.bits_) out.bits_[l] = b;
    return out;
  }

  Map::const_iterator begin() const { return bits_.begin(); }
  Map::const_iterator end() const { return bits_.end(); }
  const Map& map() const { return bits_; }

  bool operator==(const BitConfig&) const = default;

 private:
  Map bits_;
};

}  // namespace treeq
