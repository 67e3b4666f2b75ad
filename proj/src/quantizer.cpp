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

#include "treeq/quantizer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "treeq/linalg.hpp"

namespace treeq {

namespace {

constexpr int kGaussNodes = 16;
constexpr double kIntegrationBound = 8.0;
constexpr double kMaxPanelWidth = 1.0 / 8.0;  // 128 panels => >= 2048 nodes

struct GaussRule {
  std::array<double, kGaussNodes> nodes{};
  std::array<double, kGaussNodes> weights{};
};

// Legendre roots by Newton iteration from the Chebyshev guess.
GaussRule make_gauss_rule() {
  GaussRule rule;
  constexpr int n = kGaussNodes;
  for (int i = 0; i < n; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    rule.nodes[i] = x;
    rule.weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return rule;
}

const GaussRule& gauss_rule() {
  static const GaussRule rule = make_gauss_rule();
  return rule;
}

// Integral over [a, b] of (x - level)^2 * phi(x).
double piece_mse(double a, double b, double level) {
  const GaussRule& rule = gauss_rule();
  const int panels = std::max(1, static_cast<int>(std::ceil((b - a) / kMaxPanelWidth)));
  const double width = (b - a) / panels;
  const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  double total = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double lo = a + p * width;
    const double mid = lo + 0.5 * width;
    double acc = 0.0;
    for (int i = 0; i < kGaussNodes; ++i) {
      const double x = mid + 0.5 * width * rule.nodes[i];
      const double e = x - level;
      acc += rule.weights[i] * e * e * std::exp(-0.5 * x * x);
    }
    total += 0.5 * width * acc;
  }
  return total * norm;
}

}  // namespace

bool is_valid_bits(int bits) {
  return (bits >= 2 && bits <= 8) || bits == kFullPrecisionBits;
}

QuantizerSpec QuantizerSpec::make(int bits, double delta) {
  if (!is_valid_bits(bits)) {
    throw InvalidBits("unsupported bit-width " + std::to_string(bits));
  }
  QuantizerSpec s;
  s.bits = bits;
  s.delta = delta;
  if (bits != kFullPrecisionBits) {
    if (!(delta > 0.0)) throw InvalidBits("quantizer step must be positive");
    s.qmin = -(1L << (bits - 1));
    s.qmax = (1L << (bits - 1)) - 1;
  }
  return s;
}

double gaussian_quant_mse(int bits, double delta) {
  const QuantizerSpec spec = QuantizerSpec::make(bits, delta);
  if (spec.passthrough()) return 0.0;
  // Interval q covers (q - 1/2, q + 1/2) * delta, clamped at both ends.
  double total = 0.0;
  double lo = -kIntegrationBound;
  for (long q = spec.qmin; q <= spec.qmax && lo < kIntegrationBound; ++q) {
    double hi = q == spec.qmax ? kIntegrationBound
                               : std::min(kIntegrationBound, (q + 0.5) * delta);
    if (hi <= lo) continue;
    total += piece_mse(lo, hi, q * delta);
    lo = hi;
  }
  return total;
}

double calibrate_delta(int bits) {
  if (bits < 2 || bits > 8) {
    throw InvalidBits("calibrate_delta: bits must be in [2, 8], got " +
                      std::to_string(bits));
  }
  const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = 0.0;
  double hi = 4.0;
  double x1 = hi - ratio * (hi - lo);
  double x2 = lo + ratio * (hi - lo);
  double f1 = gaussian_quant_mse(bits, x1);
  double f2 = gaussian_quant_mse(bits, x2);
  while (hi - lo > 1e-12) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - ratio * (hi - lo);
      f1 = gaussian_quant_mse(bits, x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + ratio * (hi - lo);
      f2 = gaussian_quant_mse(bits, x2);
    }
  }
  return 0.5 * (lo + hi);
}

DeltaTable::DeltaTable(std::map<int, double> deltas) : deltas_(std::move(deltas)) {
  double prev = 0.0;
  bool first = true;
  for (const auto& [bits, d] : deltas_) {
    if (bits < 2 || bits > 8 || !(d > 0.0)) {
      throw InvalidBits("delta table entry for " + std::to_string(bits) + " bits is invalid");
    }
    if (!first && !(d < prev)) {
      throw InvalidBits("delta table must decrease strictly with bits");
    }
    prev = d;
    first = false;
  }
}

DeltaTable DeltaTable::calibrated() {
  std::map<int, double> d;
  for (int b = 2; b <= 8; ++b) d[b] = calibrate_delta(b);
  return DeltaTable(std::move(d));
}

const DeltaTable& DeltaTable::standard() {
  static const DeltaTable table = calibrated();
  return table;
}

double DeltaTable::delta(int bits) const {
  if (bits == kFullPrecisionBits) return 1.0;
  auto it = deltas_.find(bits);
  if (it == deltas_.end()) {
    throw InvalidBits("no calibrated step for " + std::to_string(bits) + " bits");
  }
  return it->second;
}

QuantizerSpec DeltaTable::spec(int bits) const {
  return QuantizerSpec::make(bits, delta(bits));
}

double quantize_scalar(double x, const QuantizerSpec& spec) {
  if (spec.passthrough()) return x;
  const double level = std::clamp(std::round(x / spec.delta),
                                  static_cast<double>(spec.qmin),
                                  static_cast<double>(spec.qmax));
  return level * spec.delta;
}

Vector quantize_uniform(std::span<const double> x, const QuantizerSpec& spec) {
  Vector out(x.begin(), x.end());
  if (spec.passthrough()) return out;
  for (double& v : out) v = quantize_scalar(v, spec);
  return out;
}

Vector quantize_gaussian_domain(std::span<const double> y, const QuantizerSpec& spec) {
  Vector out(y.begin(), y.end());
  if (spec.passthrough() || y.empty()) return out;
  const double rms = std::sqrt(linalg::dot(y, y) / static_cast<double>(y.size()));
  if (rms == 0.0) return out;
  const double inv = 1.0 / rms;
  for (double& v : out) v = rms * quantize_scalar(v * inv, spec);
  return out;
}

Vector quantize_activation(std::span<const double> x, int bits, const Matrix& h,
                           const DeltaTable& table) {
  if (h.rows() != x.size() || h.cols() != x.size()) {
    throw InvalidDimension("quantize_activation: token length does not match transform");
  }
  Vector y(h.cols(), 0.0);
  for (std::size_t j = 0; j < h.rows(); ++j) {
    auto row = h.row(j);
    for (std::size_t c = 0; c < h.cols(); ++c) y[c] += row[c] * x[j];
  }
  return quantize_gaussian_domain(y, table.spec(bits));
}

Matrix quantize_weight_channelwise(const Matrix& w_res, int bits, const DeltaTable& table) {
  const QuantizerSpec spec = table.spec(bits);
  if (spec.passthrough()) return w_res;
  Matrix out(w_res.rows(), w_res.cols());
  const double n = static_cast<double>(w_res.cols());
  for (std::size_t r = 0; r < w_res.rows(); ++r) {
    auto row = w_res.row(r);
    double mean = 0.0;
    for (double v : row) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : row) var += (v - mean) * (v - mean);
    double scale = std::sqrt(var / n);
    if (scale <= 1e-12 * std::abs(mean)) scale = std::abs(mean);
    if (scale == 0.0) continue;
    auto dst = out.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      dst[c] = scale * quantize_scalar(row[c] / scale, spec);
    }
  }
  return out;
}

}  // namespace treeq
