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

#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"
#include "treeq/linalg.hpp"

namespace treeq {
namespace {

using testing::erf_quant_mse;
using testing::seeded_matrix;
using testing::seeded_vector;

Vector normal_samples(std::size_t n, std::uint64_t seed) {
  const CounterRng rng(seed, 17);
  Vector x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = rng.normal(i);
  return x;
}

TEST(QuantizerSpecTest, IntegerRange) {
  const QuantizerSpec s = QuantizerSpec::make(4, 0.3);
  EXPECT_EQ(s.qmin, -8);
  EXPECT_EQ(s.qmax, 7);
  EXPECT_TRUE(QuantizerSpec::make(32, 1.0).passthrough());
  EXPECT_THROW(QuantizerSpec::make(1, 1.0), InvalidBits);
  EXPECT_THROW(QuantizerSpec::make(4, 0.0), InvalidBits);
}

TEST(QuantizerSpecTest, ValidBits) {
  for (int b : {2, 3, 4, 5, 6, 7, 8, 32}) EXPECT_TRUE(is_valid_bits(b)) << b;
  for (int b : {0, 1, 9, 16, 31, 33}) EXPECT_FALSE(is_valid_bits(b)) << b;
}

TEST(GaussianMseTest, MatchesClosedFormErf) {
  for (int bits = 2; bits <= 8; ++bits) {
    for (double delta : {0.01, 0.1, 0.5, 1.0, 2.5}) {
      EXPECT_NEAR(gaussian_quant_mse(bits, delta), erf_quant_mse(bits, delta), 1e-10)
          << bits << " " << delta;
    }
  }
}

TEST(CalibrateDeltaTest, TwoBitMatchesGridOracle) {
  double best = 0.0;
  double best_mse = INFINITY;
  for (int i = 1; i <= 40000; ++i) {
    const double d = i * 1e-4;
    const double mse = erf_quant_mse(2, d);
    if (mse < best_mse) {
      best_mse = mse;
      best = d;
    }
  }
  EXPECT_NEAR(calibrate_delta(2), best, 1e-3 * best);
}

TEST(CalibrateDeltaTest, FourBitIsLocalMinimum) {
  const double d = calibrate_delta(4);
  const double mse = gaussian_quant_mse(4, d);
  EXPECT_LE(mse, gaussian_quant_mse(4, 0.9 * d));
  EXPECT_LE(mse, gaussian_quant_mse(4, 1.1 * d));
}

TEST(CalibrateDeltaTest, MoreBitsLowerMse) {
  for (int b = 2; b < 8; ++b) {
    EXPECT_LT(gaussian_quant_mse(b + 1, calibrate_delta(b + 1)),
              gaussian_quant_mse(b, calibrate_delta(b)))
        << b;
  }
}

TEST(CalibrateDeltaTest, RejectsUnsupportedBits) {
  EXPECT_THROW(calibrate_delta(1), InvalidBits);
  EXPECT_THROW(calibrate_delta(9), InvalidBits);
  EXPECT_THROW(calibrate_delta(32), InvalidBits);
}

TEST(DeltaTableTest, StandardIsCalibratedAndDecreasing) {
  const DeltaTable& t = DeltaTable::standard();
  double prev = INFINITY;
  for (int b = 2; b <= 8; ++b) {
    EXPECT_EQ(t.delta(b), calibrate_delta(b));
    EXPECT_LT(t.delta(b), prev);
    prev = t.delta(b);
  }
  EXPECT_TRUE(t.spec(32).passthrough());
}

TEST(DeltaTableTest, RejectsNonDecreasingSteps) {
  EXPECT_THROW(DeltaTable({{2, 1.0}, {3, 1.0}}), InvalidBits);
  EXPECT_THROW(DeltaTable({{2, -1.0}}), InvalidBits);
  const DeltaTable t({{2, 1.0}});
  EXPECT_THROW(t.delta(3), InvalidBits);
}

TEST(QuantizeUniformTest, ZeroMapsToZero) {
  for (int b = 2; b <= 8; ++b) {
    EXPECT_EQ(quantize_scalar(0.0, QuantizerSpec::make(b, calibrate_delta(b))), 0.0);
  }
}

TEST(QuantizeUniformTest, SaturatesAtQmax) {
  const QuantizerSpec s = QuantizerSpec::make(4, 0.25);
  EXPECT_EQ(quantize_scalar(100 * 0.25, s), 7 * 0.25);
  EXPECT_EQ(quantize_scalar(-100 * 0.25, s), -8 * 0.25);
}

TEST(QuantizeUniformTest, EmpiricalMseMatchesQuadrature) {
  const QuantizerSpec s = QuantizerSpec::make(3, calibrate_delta(3));
  const Vector x = normal_samples(1'000'000, 3);
  const Vector q = quantize_uniform(x, s);
  double mse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) mse += (x[i] - q[i]) * (x[i] - q[i]);
  mse /= x.size();
  const double expected = gaussian_quant_mse(3, s.delta);
  EXPECT_NEAR(mse, expected, 0.02 * expected);
}

TEST(QuantizeUniformTest, IdempotentAndOnGrid) {
  for (int b : {2, 3, 5, 8}) {
    const QuantizerSpec s = QuantizerSpec::make(b, calibrate_delta(b));
    const Vector x = normal_samples(2000, b);
    const Vector q = quantize_uniform(x, s);
    EXPECT_EQ(quantize_uniform(q, s), q);
    for (double v : q) {
      const double k = v / s.delta;
      EXPECT_NEAR(k, std::round(k), 1e-9);
      EXPECT_GE(std::round(k), s.qmin);
      EXPECT_LE(std::round(k), s.qmax);
    }
  }
}

TEST(QuantizeUniformTest, PassthroughAtFullPrecision) {
  const Vector x{1.234, -5.6, 1e9};
  EXPECT_EQ(quantize_uniform(x, QuantizerSpec::make(32, 1.0)), x);
}

TEST(QuantizeActivationTest, ZeroInput) {
  const Matrix h = linalg::hadamard(16);
  EXPECT_EQ(quantize_activation(Vector(16, 0.0), 4, h), Vector(16, 0.0));
}

TEST(QuantizeActivationTest, FullPrecisionIsRotation) {
  const Matrix h = linalg::hadamard(32);
  const Vector x = seeded_vector(32, 3);
  const Vector expected = linalg::matvec(h.transposed(), x);
  EXPECT_LT(testing::max_abs_diff(quantize_activation(x, 32, h), expected), 1e-14);
}

TEST(QuantizeActivationTest, RelativeErrorNearGaussianPrediction) {
  const Matrix h = linalg::hadamard(64);
  const double predicted = gaussian_quant_mse(4, calibrate_delta(4));
  const Vector x = seeded_vector(64, 11);
  const Vector ref = linalg::matvec(h.transposed(), x);
  const Vector q = quantize_activation(x, 4, h);
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < 64; ++i) {
    num += (q[i] - ref[i]) * (q[i] - ref[i]);
    den += ref[i] * ref[i];
  }
  EXPECT_NEAR(num / den, predicted, 0.2 * predicted);
}

TEST(QuantizeActivationTest, RejectsMismatchedLength) {
  EXPECT_THROW(quantize_activation(Vector(8, 1.0), 4, linalg::hadamard(16)), InvalidDimension);
}

TEST(QuantizeWeightTest, ConstantRowsUseFallbackScale) {
  Matrix w(3, 4);
  for (std::size_t j = 0; j < 4; ++j) {
    w(0, j) = 0.7;
    w(1, j) = 0.0;
    w(2, j) = -2.0;
  }
  const Matrix q = quantize_weight_channelwise(w, 3);
  const double d = calibrate_delta(3);
  for (std::size_t j = 0; j < 4; ++j) {
    // Scale |v| maps every entry to +-1, which rounds to the nearest grid level times |v|.
    EXPECT_DOUBLE_EQ(q(0, j), 0.7 * std::round(1.0 / d) * d);
    EXPECT_EQ(q(1, j), 0.0);
    EXPECT_DOUBLE_EQ(q(2, j), -2.0 * std::round(1.0 / d) * d);
  }
}

TEST(QuantizeWeightTest, FullPrecisionUnchanged) {
  const Matrix w = seeded_matrix(5, 8, 2);
  EXPECT_EQ(quantize_weight_channelwise(w, 32), w);
}

TEST(QuantizeWeightTest, PerRowMseMatchesScaledPrediction) {
  // Eight Gaussian rows with distinct scales; long rows keep the 2% band meaningful.
  constexpr std::size_t kCols = 1 << 16;
  Matrix w(8, kCols);
  for (std::size_t r = 0; r < 8; ++r) {
    const Vector row = normal_samples(kCols, 100 + r);
    for (std::size_t j = 0; j < kCols; ++j) w(r, j) = (0.5 + r) * row[j];
  }
  const Matrix q = quantize_weight_channelwise(w, 3);
  const double unit = gaussian_quant_mse(3, calibrate_delta(3));
  for (std::size_t r = 0; r < 8; ++r) {
    double mean = 0.0;
    for (std::size_t j = 0; j < kCols; ++j) mean += w(r, j);
    mean /= kCols;
    double var = 0.0;
    double mse = 0.0;
    for (std::size_t j = 0; j < kCols; ++j) {
      var += (w(r, j) - mean) * (w(r, j) - mean);
      mse += (w(r, j) - q(r, j)) * (w(r, j) - q(r, j));
    }
    var /= kCols;
    mse /= kCols;
    EXPECT_NEAR(mse, var * unit, 0.02 * var * unit) << r;
  }
}

}  // namespace
}  // namespace treeq
