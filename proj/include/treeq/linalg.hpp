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
#include <span>
#include <vector>

#include "treeq/matrix.hpp"

namespace treeq::linalg {

// Truncated singular value decomposition m ~= u * diag(sigma) * v^T.
struct SvdTriple {
  Matrix u;             // m x r, orthonormal columns
  std::vector<double> sigma;  // r entries, non-increasing
  Matrix v;             // n x r, orthonormal columns

  std::size_t rank() const { return sigma.size(); }
  Matrix reconstruct() const;
};

struct SingularPair {
  double sigma = 0.0;
  Vector u;
  Vector v;
};

bool is_power_of_two(std::size_t n);

// Normalized Sylvester Hadamard matrix; symmetric, H H^T = I.
// Throws InvalidDimension unless n is a power of two in [1, 4096].
Matrix hadamard(std::size_t n);

// In-place H_n^T x for the normalized Sylvester H_n (fast Walsh-Hadamard,
// natural ordering). Same result as hadamard(n) * x up to rounding.
void hadamard_transform(std::span<double> x);

// Fixed left-to-right accumulation per output element.
Matrix matmul(const Matrix& a, const Matrix& b);
Vector matvec(const Matrix& a, std::span<const double> x);

double frobenius_norm(const Matrix& m);
double norm2(std::span<const double> x);
double dot(std::span<const double> a, std::span<const double> b);

// Full thin SVD by one-sided (Hestenes) Jacobi. Zero singular directions
// are completed to an orthonormal basis, so u and v always have
// orthonormal columns.
SvdTriple svd(const Matrix& m);

// Best rank-r approximation. Throws InvalidRank for r == 0 or
// r > min(rows, cols); ConvergenceError if Jacobi fails to converge.
SvdTriple truncated_svd(const Matrix& m, std::size_t r);

// Dominant singular triple with unit u, v. The first nonzero entry of u is
// non-negative. A zero matrix yields sigma = 0 with u = e1, v = e1.
SingularPair top_singular_pair(const Matrix& m);

}  // namespace treeq::linalg
