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

#include "treeq/branches.hpp"

#include <algorithm>

#include "treeq/linalg.hpp"

namespace treeq {

namespace {

Matrix gmb_to_hadamard_domain(const Matrix& g, GmbPlacement placement, const Matrix& h) {
  return placement == GmbPlacement::kPreHadamard ? linalg::matmul(g, h) : g;
}

}  // namespace

Matrix LrbFactors::product(std::size_t n_o, std::size_t n_i) const {
  if (rank == 0) return Matrix(n_o, n_i);
  return linalg::matmul(a, b);
}

Matrix MonarchFactors::permutation_matrix() const {
  Matrix p(perm.size(), perm.size());
  for (std::size_t m = 0; m < perm.size(); ++m) p(perm[m], m) = 1.0;
  return p;
}

Matrix MonarchFactors::product() const {
  // l * P * r without materializing P: column perm[m] of l meets row m of r.
  Matrix out(l.rows(), r.cols());
  for (std::size_t i = 0; i < l.rows(); ++i) {
    auto dst = out.row(i);
    for (std::size_t m = 0; m < perm.size(); ++m) {
      const double lv = l(i, perm[m]);
      if (lv == 0.0) continue;
      auto src = r.row(m);
      for (std::size_t c = 0; c < src.size(); ++c) dst[c] += lv * src[c];
    }
  }
  return out;
}

std::size_t MonarchFactors::structural_nonzeros() const {
  const std::size_t b_o = n_o == 0 ? 0 : l.rows() / n_o;
  const std::size_t b_i = n_i == 0 ? 0 : r.cols() / n_i;
  return n_o * b_o * n_i + n_i * n_o * b_i;
}

BranchOptions BranchOptions::scaled_defaults(std::size_t n_o, std::size_t n_i) {
  const std::size_t n = std::min(n_o, n_i);
  BranchOptions o;
  o.r_lrb = std::max<std::size_t>(1, std::min<std::size_t>(16, n / 4));
  o.r_gmb = std::max<std::size_t>(1, std::min<std::size_t>(4, n / 16));
  return o;
}

QuantizedLinear::QuantizedLinear(Matrix q_res, LrbFactors lrb, std::optional<GmbFactors> gmb,
                                 GmbPlacement placement, int bits_w, int bits_a,
                                 std::size_t hadamard_size)
    : q_res_(std::move(q_res)),
      lrb_(std::move(lrb)),
      gmb_(std::move(gmb)),
      placement_(placement),
      bits_w_(bits_w),
      bits_a_(bits_a),
      hadamard_size_(hadamard_size) {
  if (q_res_.cols() != hadamard_size_) {
    throw InvalidDimension("quantized layer input size does not match the transform");
  }
  if (!is_valid_bits(bits_w_) || !is_valid_bits(bits_a_)) {
    throw InvalidBits("quantized layer bit-widths out of range");
  }
  branch_ = lrb_.product(q_res_.rows(), q_res_.cols());
  if (gmb_) {
    const Matrix g = gmb_reconstruct_blocks(*gmb_);
    branch_ += gmb_to_hadamard_domain(g, placement_, linalg::hadamard(hadamard_size_));
  }
}

Matrix QuantizedLinear::reconstructed_hadamard_weight() const { return branch_ + q_res_; }

Matrix QuantizedLinear::reconstructed_weight() const {
  return linalg::matmul(reconstructed_hadamard_weight(),
                        linalg::hadamard(hadamard_size_).transposed());
}

LrbFactors init_lrb(const Matrix& w_h, std::size_t r) {
  if (r > std::min(w_h.rows(), w_h.cols())) {
    throw InvalidRank("init_lrb: rank " + std::to_string(r) + " exceeds matrix dimensions");
  }
  LrbFactors f;
  f.rank = r;
  if (r == 0) {
    f.a = Matrix(w_h.rows(), 0);
    f.b = Matrix(0, w_h.cols());
    return f;
  }
  const linalg::SvdTriple t = linalg::truncated_svd(w_h, r);
  f.a = Matrix(w_h.rows(), r);
  f.b = Matrix(r, w_h.cols());
  for (std::size_t k = 0; k < r; ++k) {
    for (std::size_t i = 0; i < w_h.rows(); ++i) f.a(i, k) = t.u(i, k) * t.sigma[k];
    for (std::size_t j = 0; j < w_h.cols(); ++j) f.b(k, j) = t.v(j, k);
  }
  return f;
}

GmbFactors gmb_decompose(const Matrix& m, std::size_t n_o, std::size_t n_i) {
  if (n_o == 0 || n_i == 0 || m.rows() % n_o != 0 || m.cols() % n_i != 0) {
    throw InvalidPartition("gmb partition " + std::to_string(n_o) + "x" +
                           std::to_string(n_i) + " does not divide " +
                           std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
  GmbFactors f;
  f.n_o = n_o;
  f.n_i = n_i;
  f.b_o = m.rows() / n_o;
  f.b_i = m.cols() / n_i;
  f.u.reserve(n_o * n_i);
  f.v.reserve(n_o * n_i);
  f.sigma.reserve(n_o * n_i);
  Matrix blk(f.b_o, f.b_i);
  for (std::size_t j = 0; j < n_o; ++j) {
    for (std::size_t k = 0; k < n_i; ++k) {
      for (std::size_t a = 0; a < f.b_o; ++a)
        for (std::size_t b = 0; b < f.b_i; ++b) blk(a, b) = m(j * f.b_o + a, k * f.b_i + b);
      linalg::SingularPair p = linalg::top_singular_pair(blk);
      f.sigma.push_back(p.sigma);
      f.u.push_back(std::move(p.u));
      f.v.push_back(std::move(p.v));
    }
  }
  return f;
}

Matrix gmb_reconstruct_blocks(const GmbFactors& f) {
  Matrix out(f.rows(), f.cols());
  for (std::size_t j = 0; j < f.n_o; ++j) {
    for (std::size_t k = 0; k < f.n_i; ++k) {
      const std::size_t id = f.block(j, k);
      for (std::size_t a = 0; a < f.b_o; ++a) {
        const double ua = f.sigma[id] * f.u[id][a];
        for (std::size_t b = 0; b < f.b_i; ++b) {
          out(j * f.b_o + a, k * f.b_i + b) = ua * f.v[id][b];
        }
      }
    }
  }
  return out;
}

MonarchFactors gmb_build_factored(const GmbFactors& f) {
  MonarchFactors mf;
  mf.n_o = f.n_o;
  mf.n_i = f.n_i;
  const std::size_t mid = f.n_o * f.n_i;
  mf.l = Matrix(f.rows(), mid);
  mf.r = Matrix(mid, f.cols());
  mf.perm.resize(mid);
  for (std::size_t j = 0; j < f.n_o; ++j) {
    for (std::size_t k = 0; k < f.n_i; ++k) {
      const std::size_t id = f.block(j, k);
      // l block j, column k holds sigma_jk u_jk.
      for (std::size_t a = 0; a < f.b_o; ++a) {
        mf.l(j * f.b_o + a, j * f.n_i + k) = f.sigma[id] * f.u[id][a];
      }
      // r block k, row j holds v_jk^T.
      for (std::size_t b = 0; b < f.b_i; ++b) {
        mf.r(k * f.n_o + j, k * f.b_i + b) = f.v[id][b];
      }
      mf.perm[k * f.n_o + j] = j * f.n_i + k;
    }
  }
  return mf;
}

std::optional<Partition> gmb_budget_partitions(std::size_t n_out, std::size_t n_in,
                                               std::size_t r_lrb) {
  if (r_lrb == 0) return std::nullopt;
  if (n_out % r_lrb != 0 || n_in % r_lrb != 0) {
    throw InvalidPartition("rank " + std::to_string(r_lrb) + " does not divide " +
                           std::to_string(n_out) + "x" + std::to_string(n_in));
  }
  const Partition p{r_lrb, r_lrb};
  const std::size_t b_o = n_out / p.n_o;
  const std::size_t b_i = n_in / p.n_i;
  const std::size_t gmb_params = p.n_i * p.n_o * (b_i + b_o);
  const std::size_t lrb_params = r_lrb * (p.n_o * b_o + p.n_i * b_i);
  if (gmb_params != lrb_params) {
    throw InvalidPartition("budget identity violated");
  }
  return p;
}

LayerDecomposition decompose_layer(const Matrix& w, const BranchOptions& options,
                                   const Matrix& h) {
  if (w.cols() != h.rows()) {
    throw InvalidDimension("decompose_layer: weight columns do not match the transform");
  }
  LayerDecomposition d;
  d.placement = options.placement;
  d.w_h = linalg::matmul(w, h);
  const std::size_t n_o = w.rows();
  const std::size_t n_i = w.cols();
  const bool with_gmb = options.use_gmb && options.r_gmb > 0;

  auto fit_gmb = [&](const Matrix& target_h) {
    const Partition p = *gmb_budget_partitions(n_o, n_i, options.r_gmb);
    // Pre-transform placement fits the branch in the original weight domain.
    const Matrix target = options.placement == GmbPlacement::kPreHadamard
                              ? linalg::matmul(target_h, h.transposed())
                              : target_h;
    d.gmb = gmb_decompose(target, p.n_o, p.n_i);
    d.gmb_h = gmb_to_hadamard_domain(gmb_reconstruct_blocks(*d.gmb), options.placement, h);
  };

  d.gmb_h = Matrix(n_o, n_i);
  if (options.order == BranchOrder::kLrbFirst || !with_gmb) {
    d.lrb = init_lrb(d.w_h, options.r_lrb);
    Matrix rest = d.w_h - d.lrb.product(n_o, n_i);
    if (with_gmb) fit_gmb(rest);
    d.w_res = std::move(rest);
    d.w_res -= d.gmb_h;
  } else {
    fit_gmb(d.w_h);
    const Matrix rest = d.w_h - d.gmb_h;
    d.lrb = init_lrb(rest, options.r_lrb);
    d.w_res = rest - d.lrb.product(n_o, n_i);
  }
  return d;
}

QuantizedLinear quantize_decomposed(const LayerDecomposition& d, int bits_w, int bits_a,
                                    const DeltaTable& table) {
  return QuantizedLinear(quantize_weight_channelwise(d.w_res, bits_w, table), d.lrb, d.gmb,
                         d.placement, bits_w, bits_a, d.w_h.cols());
}

QuantizedLinear quantize_layer(const Matrix& w, int bits_w, std::size_t r_lrb,
                               std::size_t r_gmb, const Matrix& h, bool use_gmb,
                               const DeltaTable& table) {
  BranchOptions o;
  o.r_lrb = r_lrb;
  o.r_gmb = r_gmb;
  o.use_gmb = use_gmb;
  return quantize_decomposed(decompose_layer(w, o, h), bits_w, bits_w, table);
}

Vector forward_quantized(const QuantizedLinear& layer, std::span<const double> x,
                         const DeltaTable& table) {
  if (x.size() != layer.in_features()) {
    throw InvalidDimension("forward_quantized: input length " + std::to_string(x.size()) +
                           " != " + std::to_string(layer.in_features()));
  }
  Vector xh(x.begin(), x.end());
  linalg::hadamard_transform(xh);
  const Vector xq = quantize_gaussian_domain(xh, table.spec(layer.bits_a()));
  const Matrix& q = layer.q_res();
  const Matrix& br = layer.branch_matrix();
  Vector y(layer.out_features());
  for (std::size_t i = 0; i < y.size(); ++i) {
    auto qrow = q.row(i);
    auto brow = br.row(i);
    double acc = 0.0;
    for (std::size_t c = 0; c < xh.size(); ++c) acc += qrow[c] * xq[c] + brow[c] * xh[c];
    y[i] = acc;
  }
  return y;
}

}  // namespace treeq
