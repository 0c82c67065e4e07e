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

SimplexPoint pt(std::initializer_list<double> xs) {
  Vector v(static_cast<int>(xs.size()));
  int i = 0;
  for (double x : xs) v[i++] = x;
  return SimplexPoint(v);
}

TEST(SimplexPoint, RejectsBadInput) {
  EXPECT_THROW(SimplexPoint(Vector::Constant(2, 0.4)), InvalidInput);
  EXPECT_THROW(pt({1.5, -0.5}), InvalidInput);
  EXPECT_THROW(pt({1.0}), InvalidInput);
  EXPECT_THROW(SimplexPoint::normalized(Vector::Zero(3)), InvalidInput);
  EXPECT_NO_THROW(pt({0.5, 0.5 + 5e-13}));
}

TEST(SimplexPoint, InteriorFlag) {
  EXPECT_TRUE(SimplexPoint::center(3).strictly_interior());
  EXPECT_FALSE(SimplexPoint::vertex(3, 1).strictly_interior());
}

TEST(MRatio, Examples) {
  const auto e = SimplexPoint::center(2);
  EXPECT_DOUBLE_EQ(m_ratio(e, e), 1.0);
  EXPECT_DOUBLE_EQ(m_ratio(pt({1, 0}), pt({0, 1})), 0.0);
  EXPECT_NEAR(m_ratio(pt({0.5, 0.5}), pt({0.75, 0.25})), 2.0 / 3.0, 1e-15);
}

TEST(MRatio, RangeAndProduct) {
  RandomStream rng(1);
  for (int t = 0; t < 1000; ++t) {
    const int d = 2 + t % 5;
    const auto u = random_face_point(rng, d), v = random_face_point(rng, d);
    const double a = m_ratio(u, v), b = m_ratio(v, u);
    EXPECT_GE(a, 0.0);
    EXPECT_LE(a, d);
    EXPECT_LE(a * b, 1.0 + 1e-15);
  }
}

TEST(HilbertDistance, Examples) {
  const auto e = SimplexPoint::center(2);
  EXPECT_EQ(hilbert_distance(e, e).value(), 0.0);
  EXPECT_EQ(hilbert_distance(pt({1, 0}), pt({0, 1})).value(), 1.0);
  // m((1/2,1/2),(3/4,1/4)) = min(2/3, 2) and m((3/4,1/4),(1/2,1/2)) = min(3/2, 1/2).
  const double prod = (2.0 / 3.0) * 0.5;
  EXPECT_NEAR(hilbert_distance(pt({0.5, 0.5}), pt({0.75, 0.25})).value(), (1 - prod) / (1 + prod), 1e-15);
  EXPECT_NEAR(hilbert_distance(pt({0.5, 0.5}), pt({0.75, 0.25})).value(), 0.5, 1e-15);
}

TEST(HilbertDistance, OneIffSupportsDiffer) {
  EXPECT_EQ(hilbert_distance(pt({0.5, 0.5, 0}), pt({0.2, 0.3, 0.5})).value(), 1.0);
  EXPECT_LT(hilbert_distance(pt({0.5, 0.5, 0}), pt({0.1, 0.9, 0})).value(), 1.0);
}

TEST(HilbertDistance, MetricAxioms) {
  RandomStream rng(2);
  for (int t = 0; t < 10000; ++t) {
    const int d = 2 + t % 4;
    const auto x = random_point(rng, d), y = random_point(rng, d), z = random_point(rng, d);
    const double dxy = hilbert_distance(x, y).value();
    EXPECT_LE(dxy, hilbert_distance(x, z).value() + hilbert_distance(z, y).value() + 1e-10);
    EXPECT_EQ(dxy, hilbert_distance(y, x).value());
    EXPECT_EQ(hilbert_distance(x, x).value(), 0.0);
    EXPECT_LE((x.coords() - y.coords()).lpNorm<1>(), 2.0 * dxy + 1e-12);
  }
}

// Independent brute force: every 2x2 minor of every pair of rows/columns.
double brute_contraction(const Matrix& g) {
  double best = 0.0;
  const int d = static_cast<int>(g.rows());
  for (int i = 0; i < d; ++i)
    for (int k = 0; k < d; ++k)
      for (int j = 0; j < d; ++j)
        for (int l = 0; l < d; ++l) {
          const double a = g(i, j) * g(k, l), b = g(i, l) * g(k, j);
          if (a + b > 0.0) best = std::max(best, std::abs(a - b) / (a + b));
        }
  return best;
}

TEST(ContractionCoefficient, Examples) {
  EXPECT_EQ(contraction_coefficient(AllowableMatrix::all_ones(2)).value(), 0.0);
  EXPECT_EQ(contraction_coefficient(AllowableMatrix::identity(2)).value(), 1.0);
  EXPECT_NEAR(contraction_coefficient(AllowableMatrix::from_rows({{2, 1}, {1, 2}})).value(), 0.6, 1e-15);
}

TEST(ContractionCoefficient, MatchesBruteForceAndPositivity) {
  RandomStream rng(3);
  for (int t = 0; t < 300; ++t) {
    const int d = 2 + t % 4;
    const auto g = (t % 2) ? random_positive(rng, d) : random_allowable(rng, d);
    const double c = contraction_coefficient(g).value();
    EXPECT_NEAR(c, brute_contraction(g.entries()), 1e-15);
    EXPECT_EQ(c < 1.0, g.strictly_positive());
  }
}

TEST(ContractionCoefficient, ScaleInvariantExactly) {
  RandomStream rng(4);
  for (int t = 0; t < 200; ++t) {
    const auto g = random_positive(rng, 3);
    const double c = contraction_coefficient(g).value();
    EXPECT_EQ(contraction_coefficient(g.scaled(4.0)).value(), c);
    EXPECT_EQ(contraction_coefficient(g.scaled(0.25)).value(), c);
  }
}

TEST(ContractionCoefficient, Submultiplicative) {
  RandomStream rng(5);
  for (int t = 0; t < 1000; ++t) {
    const int d = 2 + t % 3;
    const auto g = random_positive(rng, d), h = random_positive(rng, d);
    EXPECT_LE(contraction_coefficient(g * h).value(),
              contraction_coefficient(g).value() * contraction_coefficient(h).value() + 1e-12);
  }
}

TEST(ContractionCoefficient, BirkhoffAndSampledSupremum) {
  RandomStream rng(6);
  for (int t = 0; t < 20; ++t) {
    const int d = 2 + t % 3;
    const auto g = random_positive(rng, d);
    const double c = contraction_coefficient(g).value();
    double best = 0.0;
    for (int s = 0; s < 1000; ++s) {
      // Mixing in faces pushes images towards the extreme columns.
      const auto x = s % 2 ? random_point(rng, d) : random_face_point(rng, d);
      const auto y = random_face_point(rng, d);
      const double dxy = hilbert_distance(x, y).value();
      const double dg = hilbert_distance(act(g, x), act(g, y)).value();
      EXPECT_LE(dg, c * dxy + 1e-12);
      if (dxy > 0.0) best = std::max(best, dg / dxy);
    }
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        best = std::max(best, hilbert_distance(act(g, SimplexPoint::vertex(d, i)), act(g, SimplexPoint::vertex(d, j)))
                                  .value());
    EXPECT_GE(best, 0.99 * c);
  }
}

TEST(ContractionCoefficient, RejectsNonAllowable) {
  Matrix m(2, 2);
  m << 1, 0, 1, 0;
  EXPECT_THROW(AllowableMatrix{m}, InvalidInput);
}

}  // namespace
}  // namespace rpm
