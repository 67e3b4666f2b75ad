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

// Shared fixtures and independent oracles for the unit tests.

#include <Eigen/Dense>
#include <cstdint>

#include "treeq/matrix.hpp"
#include "treeq/rng.hpp"

namespace treeq::testing {

inline Matrix seeded_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  const CounterRng rng(seed, 0xC0FFEE);
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows * cols; ++i) m.data()[i] = rng.normal(i);
  return m;
}

inline Vector seeded_vector(std::size_t n, std::uint64_t seed) {
  const CounterRng rng(seed, 0xBEEF);
  Vector v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = rng.normal(i);
  return v;
}

inline Eigen::MatrixXd to_eigen(const Matrix& m) {
  Eigen::MatrixXd e(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) e(i, j) = m(i, j);
  }
  return e;
}

inline Eigen::VectorXd singular_values(const Matrix& m) {
  return Eigen::JacobiSVD<Eigen::MatrixXd>(to_eigen(m)).singularValues();
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
  }
  return worst;
}

inline double max_abs_diff(const Vector& a, const Vector& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

// Closed-form N(0,1) quantizer MSE for levels q*delta, q in [-2^(b-1), 2^(b-1)-1].
inline double erf_quant_mse(int bits, double delta) {
  const long qmin = -(1L << (bits - 1));
  const long qmax = (1L << (bits - 1)) - 1;
  auto Phi = [](double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); };
  auto phi = [](double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); };
  auto prim = [&](double x, double c) {
    if (std::isinf(x)) return x > 0 ? 1.0 + c * c : 0.0;
    return (1.0 + c * c) * Phi(x) + (2.0 * c - x) * phi(x);
  };
  double total = 0.0;
  for (long q = qmin; q <= qmax; ++q) {
    const double c = q * delta;
    const double a = q == qmin ? -INFINITY : (q - 0.5) * delta;
    const double b = q == qmax ? INFINITY : (q + 0.5) * delta;
    total += prim(b, c) - prim(a, c);
  }
  return total;
}

}  // namespace treeq::testing
