// Copyright 2026 The rpm Authors.
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

#include <gtest/gtest.h>

#include <cmath>

#include "rpm/positive_matrix.hpp"
#include "rpm/simplex_geometry.hpp"
#include "test_support.hpp"

namespace rpm {
namespace {

using testing::random_allowable;
using testing::random_face_point;
using testing::random_point;
using testing::random_positive;

const AllowableMatrix kOnes = AllowableMatrix::all_ones(2);
const AllowableMatrix kSym = AllowableMatrix::from_rows({{2, 1}, {1, 2}});
const AllowableMatrix kDiag = AllowableMatrix::from_rows({{1, 0}, {0, 0.25}});

TEST(AllowableMatrix, NamesTheViolation) {
  Matrix m(3, 3);
  m << 1, 0, 1, 1, 0, 1, 0, 0, 1;
  try {
    AllowableMatrix g(m);
    FAIL() << "accepted a zero column";
  } catch (const InvalidInput& e) {
    EXPECT_NE(std::string(e.what()).find("column 1"), std::string::npos) << e.what();
  }
  m << 1, 1, 1, 1, -1, 1, 1, 1, 1;
  EXPECT_THROW(AllowableMatrix{m}, InvalidInput);
  EXPECT_THROW(AllowableMatrix{Matrix::Ones(65, 65)}, InvalidInput);
}

TEST(Gauges, Examples) {
  auto g = gauges(kOnes);
  EXPECT_EQ(g.op_norm, 2.0);
  EXPECT_EQ(g.v, 2.0);
  EXPECT_EQ(g.L, 1.0);
  g = gauges(kSym);
  EXPECT_EQ(g.op_norm, 3.0);
  EXPECT_EQ(g.v, 3.0);
  EXPECT_EQ(g.L, 1.0);
  g = gauges(kDiag);
  EXPECT_EQ(g.op_norm, 1.0);
  EXPECT_EQ(g.v, 0.25);
  EXPECT_EQ(g.N, 4.0);
  EXPECT_EQ(g.L, 4.0);
}

TEST(Gauges, InvariantsAndBruteForce) {
  RandomStream rng(10);
  for (int t = 0; t < 500; ++t) {
    const int d = 2 + t % 4;
    const auto g = random_allowable(rng, d);
    const auto ga = gauges(g);
    EXPECT_GE(ga.op_norm, ga.v);
    EXPECT_GE(ga.N * ga.N, ga.L * (1 - 1e-15));
    EXPECT_GE(ga.L, 1.0);
    double lo = INFINITY, hi = 0;
    for (int s = 0; s < 200; ++s) {
      const double n = (g.entries() * random_point(rng, d).coords()).lpNorm<1>();
      lo = std::min(lo, n);
      hi = std::max(hi, n);
    }
    EXPECT_GE(lo, ga.v * (1 - 1e-14));
    EXPECT_LE(hi, ga.op_norm * (1 + 1e-14));
    const Vector e = SimplexPoint::center(d).coords();
    const double ge = (g.entries() * e).lpNorm<1>();
    EXPECT_LE(ge, ga.op_norm * (1 + 1e-14));
    EXPECT_LE(ga.op_norm, d * ge * (1 + 1e-14));
    EXPECT_LE(ga.op_norm, d * gauges(g.transpose()).op_norm * (1 + 1e-14));
  }
}

TEST(Act, Examples) {
  const auto x = SimplexPoint::normalized(Vector::LinSpaced(3, 1, 3));
  EXPECT_TRUE(act(AllowableMatrix::identity(3), x).coords().isApprox(x.coords(), 1e-15));
  EXPECT_TRUE(act(kOnes, SimplexPoint::vertex(2, 0)).coords().isApprox(Vector::Constant(2, 0.5)));
  const Vector expected = (Vector(2) << 2.0 / 3, 1.0 / 3).finished();
  EXPECT_TRUE(act(kSym, SimplexPoint::vertex(2, 0)).coords().isApprox(expected, 1e-15));
}

TEST(Act, StrictlyPositiveGivesInterior) {
  RandomStream rng(11);
  for (int t = 0; t < 200; ++t) {
    const auto g = random_positive(rng, 4);
    EXPECT_TRUE(act(g, random_face_point(rng, 4)).strictly_interior());
  }
}

TEST(Cocycle, ExamplesAndProperty) {
  EXPECT_EQ(cocycle(AllowableMatrix::identity(2), SimplexPoint::center(2)), 0.0);
  EXPECT_NEAR(cocycle(kOnes, SimplexPoint::center(2)), std::log(2.0), 1e-15);
  RandomStream rng(12);
  for (int t = 0; t < 1000; ++t) {
    const int d = 2 + t % 5;
    const auto g = random_allowable(rng, d), h = random_allowable(rng, d);
    const auto x = random_face_point(rng, d);
    EXPECT_NEAR(cocycle(h * g, x), cocycle(g, x) + cocycle(h, act(g, x)), 1e-12);
    EXPECT_LE(std::abs(cocycle(g, x)), std::log(gauges(g).N) + 1e-12);
  }
}

TEST(Cocycle, LipschitzBounds) {
  RandomStream rng(13);
  for (int t = 0; t < 10000; ++t) {
    const int d = 2 + t % 4;
    const auto g = random_allowable(rng, d);
    const auto x = random_point(rng, d), y = random_point(rng, d);
    const double diff = std::abs(cocycle(g, x) - cocycle(g, y));
    const double dist = hilbert_distance(x, y).value();
    const double logL = std::log(gauges(g).L);
    EXPECT_LE(diff, logL + 1e-12);
    EXPECT_LE(diff, 2.0 * (2.0 + logL) * dist + 1e-12);
    if (dist < 1.0) {
      EXPECT_LE(diff, 2.0 * std::log(1.0 / (1.0 - dist)) + 1e-12);
    }
  }
}

TEST(SpectralRadius, Examples) {
  EXPECT_NEAR(spectral_radius(kSym), 3.0, 1e-12);
  EXPECT_NEAR(spectral_radius(AllowableMatrix::identity(2)), 1.0, 1e-12);
  EXPECT_NEAR(spectral_radius(kDiag), 1.0, 1e-12);
}

TEST(SpectralRadius, BetweenVAndNormAndMatchesDense) {
  RandomStream rng(14);
  for (int t = 0; t < 300; ++t) {
    const int d = 2 + t % 5;
    const auto g = random_allowable(rng, d);
    const double k = spectral_radius(g);
    const auto ga = gauges(g);
    EXPECT_GE(k, ga.v * (1 - 1e-10));
    EXPECT_LE(k, ga.op_norm * (1 + 1e-10));
    EXPECT_NEAR(k, detail::dense_spectral_radius(g.entries()), 1e-8 * k);
  }
}

TEST(SpectralRadius, PeriodicMatrixFlagsNonConvergence) {
  const auto swap = AllowableMatrix::from_rows({{0, 1}, {1, 0}});
  const auto r = spectral_radius_power(swap);
  // From e the swap is already fixed; start elsewhere to see the 2-cycle.
  const auto off = detail::power_iteration(swap.entries(), (Vector(2) << 0.3, 0.7).finished(), 1e-12, 1000);
  EXPECT_TRUE(r.converged);
  EXPECT_FALSE(off.converged);
  EXPECT_NEAR(detail::spectral_radius(swap.entries(), (Vector(2) << 0.3, 0.7).finished()), 1.0, 1e-12);
}

TEST(PerronVector, Examples) {
  EXPECT_TRUE(perron_vector(kSym).coords().isApprox(Vector::Constant(2, 0.5), 1e-12));
  EXPECT_TRUE(perron_vector(kOnes).coords().isApprox(Vector::Constant(2, 0.5), 1e-12));
  // (3 - k) v1 + v2 = 0 with k = 2 + sqrt 2 gives v = (1, sqrt2 - 1) / sqrt2.
  const auto g = AllowableMatrix::from_rows({{3, 1}, {1, 1}});
  const double k = 2.0 + std::sqrt(2.0);
  Vector v(2);
  v << 1.0, k - 3.0;
  v /= v.sum();
  EXPECT_TRUE(perron_vector(g).coords().isApprox(v, 1e-11));
  EXPECT_NEAR(spectral_radius(g), k, 1e-12);
  EXPECT_THROW(perron_vector(kDiag), InvalidInput);
}

TEST(PerronVector, Residual) {
  RandomStream rng(15);
  for (int t = 0; t < 200; ++t) {
    const auto g = random_positive(rng, 2 + t % 5);
    const auto v = perron_vector(g);
    EXPECT_LE((g.entries() * v.coords() - spectral_radius(g) * v.coords()).lpNorm<1>(), 1e-10);
  }
}

TEST(Classifiers, Examples) {
  EXPECT_TRUE(classify_G_delta(kOnes, 0.5));
  EXPECT_FALSE(classify_G_delta(kOnes, 0.5 + 1e-9));
  EXPECT_FALSE(classify_G_delta(AllowableMatrix::identity(2), 1e-9));
  EXPECT_THROW(classify_G_delta(kOnes, 0.0), InvalidInput);
  EXPECT_THROW(classify_G_C_gamma(kOnes, 1.0, 1.0), InvalidInput);
}

// Largest delta with g in G_delta, by direct evaluation of g . e_j.
double best_delta(const AllowableMatrix& g) {
  double best = 1.0;
  for (int j = 0; j < g.dim(); ++j) {
    const Vector col = act(g, SimplexPoint::vertex(g.dim(), j)).coords();
    best = std::min(best, col.minCoeff());
  }
  return best;
}

TEST(Classifiers, InclusionLemmaBothDirections) {
  RandomStream rng(16);
  for (int t = 0; t < 1000; ++t) {
    const int d = 2 + t % 4;
    const auto g = random_positive(rng, d);
    const double delta = best_delta(g) * (1.0 - 1e-12);
    ASSERT_TRUE(classify_G_delta(g, delta));
    EXPECT_TRUE(classify_G_C_gamma(g, 1.0 / delta, (1.0 - delta * delta) / (1.0 + delta * delta)));
    const double gamma = std::min(contraction_coefficient(g).value() * (1 + 1e-12), 1.0 - 1e-15);
    const double C = gauges(g).op_norm / g.entries().rowwise().sum().minCoeff() * (1 + 1e-12);
    ASSERT_TRUE(classify_G_C_gamma(g, C, gamma));
    EXPECT_TRUE(classify_G_delta(g, (1.0 - gamma) / (C * d * (1.0 + gamma))));
  }
}

}  // namespace
}  // namespace rpm
