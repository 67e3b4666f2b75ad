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

#include "treeq/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace treeq::linalg {

namespace {

constexpr int kMaxJacobiSweeps = 100;
constexpr double kJacobiTolerance = 1e-15;

// Columns stored contiguously; rotations touch two columns at a time.
using Columns = std::vector<Vector>;

Columns to_columns(const Matrix& m) {
  Columns cols(m.cols(), Vector(m.rows()));
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) cols[c][r] = m(r, c);
  return cols;
}

// Gram-Schmidt the canonical basis against the already-filled columns to
// fill the columns flagged in `missing`.
void complete_basis(Columns& cols, const std::vector<bool>& missing) {
  const std::size_t dim = cols.empty() ? 0 : cols[0].size();
  std::size_t next_axis = 0;
  for (std::size_t c = 0; c < cols.size(); ++c) {
    if (!missing[c]) continue;
    while (next_axis < dim) {
      Vector cand(dim, 0.0);
      cand[next_axis++] = 1.0;
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t o = 0; o < cols.size(); ++o) {
          if (o == c || (missing[o] && o > c)) continue;
          const double proj = dot(cand, cols[o]);
          for (std::size_t i = 0; i < dim; ++i) cand[i] -= proj * cols[o][i];
        }
      }
      const double n = norm2(cand);
      if (n > 1e-6) {
        for (double& x : cand) x /= n;
        cols[c] = std::move(cand);
        break;
      }
    }
  }
}

// Flip each (u, v) column pair so the first significant entry of u is >= 0.
void canonicalize_signs(Matrix& u, Matrix& v) {
  for (std::size_t c = 0; c < u.cols(); ++c) {
    for (std::size_t r = 0; r < u.rows(); ++r) {
      const double x = u(r, c);
      if (std::abs(x) > 1e-12) {
        if (x < 0) {
          for (std::size_t i = 0; i < u.rows(); ++i) u(i, c) = -u(i, c);
          for (std::size_t i = 0; i < v.rows(); ++i) v(i, c) = -v(i, c);
        }
        break;
      }
    }
  }
}

// One-sided Jacobi for rows >= cols.
SvdTriple jacobi_tall(const Matrix& m) {
  const std::size_t rows = m.rows();
  const std::size_t n = m.cols();
  Columns work = to_columns(m);
  Columns right(n, Vector(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) right[i][i] = 1.0;

  bool converged = n < 2;
  double worst = 0.0;
  for (int sweep = 0; sweep < kMaxJacobiSweeps && !converged; ++sweep) {
    bool rotated = false;
    worst = 0.0;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double alpha = dot(work[p], work[p]);
        const double beta = dot(work[q], work[q]);
        const double gamma = dot(work[p], work[q]);
        if (alpha == 0.0 || beta == 0.0 || gamma == 0.0) continue;
        const double off = std::abs(gamma) / std::sqrt(alpha * beta);
        worst = std::max(worst, off);
        if (off <= kJacobiTolerance) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) /
                         (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < rows; ++i) {
          const double a = work[p][i];
          const double b = work[q][i];
          work[p][i] = c * a - s * b;
          work[q][i] = s * a + c * b;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double a = right[p][i];
          const double b = right[q][i];
          right[p][i] = c * a - s * b;
          right[q][i] = s * a + c * b;
        }
      }
    }
    converged = !rotated;
  }
  if (!converged && worst > 1e-10) {
    throw ConvergenceError("one-sided Jacobi SVD did not converge", worst);
  }

  std::vector<double> sig(n);
  for (std::size_t c = 0; c < n; ++c) sig[c] = norm2(work[c]);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return sig[a] > sig[b]; });

  const double cutoff =
      (n > 0 ? sig[order[0]] : 0.0) * static_cast<double>(std::max(rows, n)) * 1e-15;
  Columns left(n);
  Columns right_sorted(n);
  std::vector<double> sigma(n);
  std::vector<bool> missing(n, false);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t c = order[k];
    right_sorted[k] = right[c];
    if (sig[c] > cutoff && sig[c] > 0.0) {
      sigma[k] = sig[c];
      left[k] = work[c];
      for (double& x : left[k]) x /= sig[c];
    } else {
      sigma[k] = 0.0;
      left[k] = Vector(rows, 0.0);
      missing[k] = true;
    }
  }
  complete_basis(left, missing);

  SvdTriple out{Matrix(rows, n), std::move(sigma), Matrix(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < rows; ++i) out.u(i, k) = left[k][i];
    for (std::size_t i = 0; i < n; ++i) out.v(i, k) = right_sorted[k][i];
  }
  canonicalize_signs(out.u, out.v);
  return out;
}

}  // namespace

Matrix SvdTriple::reconstruct() const {
  Matrix out(u.rows(), v.rows());
  for (std::size_t k = 0; k < sigma.size(); ++k) {
    for (std::size_t i = 0; i < u.rows(); ++i) {
      const double ui = sigma[k] * u(i, k);
      for (std::size_t j = 0; j < v.rows(); ++j) out(i, j) += ui * v(j, k);
    }
  }
  return out;
}

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

Matrix hadamard(std::size_t n) {
  if (!is_power_of_two(n) || n > 4096) {
    throw InvalidDimension("hadamard size must be a power of two <= 4096, got " +
                           std::to_string(n));
  }
  Matrix h(n, n);
  h(0, 0) = 1.0;
  for (std::size_t len = 1; len < n; len <<= 1) {
    for (std::size_t r = 0; r < len; ++r) {
      for (std::size_t c = 0; c < len; ++c) {
        const double v = h(r, c);
        h(r, c + len) = v;
        h(r + len, c) = v;
        h(r + len, c + len) = -v;
      }
    }
  }
  h *= 1.0 / std::sqrt(static_cast<double>(n));
  return h;
}

void hadamard_transform(std::span<double> x) {
  const std::size_t n = x.size();
  if (!is_power_of_two(n) || n > 4096) {
    throw InvalidDimension("hadamard size must be a power of two <= 4096, got " +
                           std::to_string(n));
  }
  for (std::size_t len = 1; len < n; len <<= 1) {
    for (std::size_t i = 0; i < n; i += len << 1) {
      for (std::size_t j = i; j < i + len; ++j) {
        const double a = x[j];
        const double b = x[j + len];
        x[j] = a + b;
        x[j + len] = a - b;
      }
    }
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (double& v : x) v *= scale;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw InvalidDimension("matmul: inner dimensions differ (" +
                           std::to_string(a.cols()) + " vs " +
                           std::to_string(b.rows()) + ")");
  }
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out = c.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      auto brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) out[j] += aik * brow[j];
    }
  }
  return c;
}

Vector matvec(const Matrix& a, std::span<const double> x) {
  if (a.cols() != x.size()) {
    throw InvalidDimension("matvec: dimension mismatch");
  }
  Vector y(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto row = a.row(i);
    double acc = 0.0;
    for (std::size_t k = 0; k < row.size(); ++k) acc += row[k] * x[k];
    y[i] = acc;
  }
  return y;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double norm2(std::span<const double> x) { return std::sqrt(dot(x, x)); }

double frobenius_norm(const Matrix& m) { return norm2(m.data()); }

SvdTriple svd(const Matrix& m) {
  if (m.rows() == 0 || m.cols() == 0) {
    throw InvalidDimension("svd of an empty matrix");
  }
  if (m.rows() >= m.cols()) return jacobi_tall(m);
  SvdTriple t = jacobi_tall(m.transposed());
  std::swap(t.u, t.v);
  canonicalize_signs(t.u, t.v);
  return t;
}

SvdTriple truncated_svd(const Matrix& m, std::size_t r) {
  if (r == 0 || r > std::min(m.rows(), m.cols())) {
    throw InvalidRank("truncated_svd: rank " + std::to_string(r) +
                      " outside [1, " +
                      std::to_string(std::min(m.rows(), m.cols())) + "]");
  }
  SvdTriple full = svd(m);
  SvdTriple out{Matrix(m.rows(), r), {}, Matrix(m.cols(), r)};
  out.sigma.assign(full.sigma.begin(), full.sigma.begin() + static_cast<std::ptrdiff_t>(r));
  for (std::size_t k = 0; k < r; ++k) {
    for (std::size_t i = 0; i < m.rows(); ++i) out.u(i, k) = full.u(i, k);
    for (std::size_t i = 0; i < m.cols(); ++i) out.v(i, k) = full.v(i, k);
  }
  return out;
}

SingularPair top_singular_pair(const Matrix& m) {
  if (m.rows() == 0 || m.cols() == 0) {
    throw InvalidDimension("top_singular_pair of an empty matrix");
  }
  const bool zero =
      std::all_of(m.data().begin(), m.data().end(), [](double x) { return x == 0.0; });
  if (zero) {
    SingularPair p{0.0, Vector(m.rows(), 0.0), Vector(m.cols(), 0.0)};
    p.u[0] = 1.0;
    p.v[0] = 1.0;
    return p;
  }
  SvdTriple t = truncated_svd(m, 1);
  return {t.sigma[0], t.u.column(0), t.v.column(0)};
}

}  // namespace treeq::linalg
