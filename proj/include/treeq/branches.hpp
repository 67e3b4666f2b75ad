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
#include <optional>
#include <span>
#include <vector>

#include "treeq/matrix.hpp"
#include "treeq/quantizer.hpp"

namespace treeq {

// Full-precision rank-r branch, a = U_r Sigma_r and b = V_r^T.
struct LrbFactors {
  Matrix a;  // N_o x r
  Matrix b;  // r x N_i
  std::size_t rank = 0;

  // Dense a * b, or an all-zero N_o x N_i matrix when rank == 0.
  Matrix product(std::size_t n_o, std::size_t n_i) const;
};

// Block-wise rank-1 factors. Block (j, k) is index j * n_i + k in the flat
// arrays and approximates rows [j*b_o, (j+1)*b_o) x cols [k*b_i, (k+1)*b_i).
struct GmbFactors {
  std::size_t n_o = 0;
  std::size_t n_i = 0;
  std::size_t b_o = 0;
  std::size_t b_i = 0;
  std::vector<Vector> u;       // unit vectors in R^{b_o}
  std::vector<Vector> v;       // unit vectors in R^{b_i}
  std::vector<double> sigma;   // non-negative

  std::size_t block(std::size_t j, std::size_t k) const { return j * n_i + k; }
  std::size_t rows() const { return n_o * b_o; }
  std::size_t cols() const { return n_i * b_i; }
  std::size_t parameter_count() const { return n_i * n_o * (b_i + b_o); }
};

// Block-diagonal factors with an inner grid-transpose permutation:
// l * P * r reproduces the assembled GMB matrix. `perm[m]` is the column of
// l that row m of r feeds, i.e. perm[k * n_o + j] = j * n_i + k.
struct MonarchFactors {
  Matrix l;                       // (n_o b_o) x (n_o n_i)
  std::vector<std::size_t> perm;  // length n_o n_i
  Matrix r;                       // (n_i n_o) x (n_i b_i)
  std::size_t n_o = 0;
  std::size_t n_i = 0;

  Matrix permutation_matrix() const;
  Matrix product() const;
  // Entries inside the block-diagonal support of l and r.
  std::size_t structural_nonzeros() const;
};

struct Partition {
  std::size_t n_o = 0;
  std::size_t n_i = 0;
  bool operator==(const Partition&) const = default;
};

enum class BranchOrder { kLrbFirst, kGmbFirst };
enum class GmbPlacement { kPostHadamard, kPreHadamard };

struct BranchOptions {
  std::size_t r_lrb = 16;
  std::size_t r_gmb = 4;
  bool use_gmb = true;
  BranchOrder order = BranchOrder::kLrbFirst;
  GmbPlacement placement = GmbPlacement::kPostHadamard;

  // Defaults scaled to the layer: r_lrb = min(16, N/4), r_gmb = min(4, N/16),
  // both floored at 1, with N = min(N_o, N_i).
  static BranchOptions scaled_defaults(std::size_t n_o, std::size_t n_i);
};

// Branches of one layer before residual quantization. Depends only on the
// weight and the options, so it can be shared across bit-widths.
struct LayerDecomposition {
  Matrix w_h;                 // W * H
  LrbFactors lrb;
  std::optional<GmbFactors> gmb;
  GmbPlacement placement = GmbPlacement::kPostHadamard;
  Matrix gmb_h;               // GMB contribution in the Hadamard domain (zeros if none)
  Matrix w_res;               // w_h - lrb - gmb_h
};

class QuantizedLinear {
 public:
  QuantizedLinear(Matrix q_res, LrbFactors lrb, std::optional<GmbFactors> gmb,
                  GmbPlacement placement, int bits_w, int bits_a, std::size_t hadamard_size);

  const Matrix& q_res() const { return q_res_; }
  const LrbFactors& lrb() const { return lrb_; }
  const std::optional<GmbFactors>& gmb() const { return gmb_; }
  GmbPlacement placement() const { return placement_; }
  int bits_w() const { return bits_w_; }
  int bits_a() const { return bits_a_; }
  std::size_t hadamard_size() const { return hadamard_size_; }
  std::size_t out_features() const { return q_res_.rows(); }
  std::size_t in_features() const { return q_res_.cols(); }

  // LRB + GMB in the Hadamard domain.
  const Matrix& branch_matrix() const { return branch_; }
  // W_hat_H = LRB + GMB + Q_w(W_res).
  Matrix reconstructed_hadamard_weight() const;
  // W_hat = W_hat_H * H^T.
  Matrix reconstructed_weight() const;

 private:
  Matrix q_res_;
  LrbFactors lrb_;
  std::optional<GmbFactors> gmb_;
  GmbPlacement placement_;
  int bits_w_;
  int bits_a_;
  std::size_t hadamard_size_;
  Matrix branch_;
};

LrbFactors init_lrb(const Matrix& w_h, std::size_t r);

GmbFactors gmb_decompose(const Matrix& m, std::size_t n_o, std::size_t n_i);
Matrix gmb_reconstruct_blocks(const GmbFactors& f);
MonarchFactors gmb_build_factored(const GmbFactors& f);

// Partition satisfying n_i n_o (b_i + b_o) = r (n_o b_o + n_i b_i); nullopt
// for r == 0 (no GMB).
std::optional<Partition> gmb_budget_partitions(std::size_t n_out, std::size_t n_in,
                                               std::size_t r_lrb);

LayerDecomposition decompose_layer(const Matrix& w, const BranchOptions& options,
                                   const Matrix& h);

QuantizedLinear quantize_decomposed(const LayerDecomposition& d, int bits_w, int bits_a,
                                    const DeltaTable& table = DeltaTable::standard());

QuantizedLinear quantize_layer(const Matrix& w, int bits_w, std::size_t r_lrb,
                               std::size_t r_gmb, const Matrix& h, bool use_gmb,
                               const DeltaTable& table = DeltaTable::standard());

// y = Q_w(W_res) Q_G(x) + (LRB + GMB) H^T x.
Vector forward_quantized(const QuantizedLinear& layer, std::span<const double> x,
                         const DeltaTable& table = DeltaTable::standard());

}  // namespace treeq
