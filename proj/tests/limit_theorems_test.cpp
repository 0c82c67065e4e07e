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

#include <algorithm>
#include <cmath>

#include "rpm/fixtures.hpp"
#include "rpm/limit_theorems.hpp"
#include "test_support.hpp"

namespace rpm {
namespace {

const auto kG = AllowableMatrix::from_rows({{3, 1}, {1, 1}});

TEST(Functionals, NamesRoundTrip) {
  for (auto f : all_functionals()) EXPECT_EQ(parse_functional(functional_name(f)), f);
  EXPECT_THROW(parse_functional("trace"), InvalidInput);
}

TEST(Functionals, OrderingHoldsAndThreadsAgree) {
  const auto pts = FunctionalPoints::centred(2);
  const auto a = sample_functionals(reference_spec(), all_functionals(), {1, 7, 64}, 300, 5, pts, 1);
  const auto b = sample_functionals(reference_spec(), all_functionals(), {64, 7, 1}, 300, 5, pts, 3);
  EXPECT_EQ(a.ordering_violations, 0u);
  EXPECT_EQ(a.values, b.values);
  // Independent check of the sandwich v <= kappa <= |A_n| on every sample.
  const auto iv = *a.index_of(Functional::kV), ik = *a.index_of(Functional::kKappa),
             in = *a.index_of(Functional::kNorm), ic = *a.index_of(Functional::kInfCoeff);
  for (std::size_t g = 0; g < a.grid.size(); ++g) {
    for (std::size_t r = 0; r < a.replicas; ++r) {
      EXPECT_LE(a.at(iv, g)[r], a.at(ik, g)[r] + 1e-9);
      EXPECT_LE(a.at(ik, g)[r], a.at(in, g)[r] + 1e-9);
      EXPECT_LE(a.at(ic, g)[r], a.at(in, g)[r] + 1e-9);
    }
  }
}

TEST(Normality, ReferenceSpecApproachesGaussian) {
  const auto pts = FunctionalPoints::centred(2);
  const auto samples = sample_functionals(reference_spec(), {Functional::kSigma}, {2, 512}, 4000, 6, pts);
  const auto last = samples.at(0, 1);
  const double lambda = mean(last) / 512.0;
  const double s = std::sqrt(sample_variance(last) / 512.0);
  const auto early = normality_from_values(samples.at(0, 0), 2, Functional::kSigma, lambda, s);
  const auto late = normality_from_values(last, 512, Functional::kSigma, lambda, s);
  EXPECT_LT(late.ks_distance, early.ks_distance);
  EXPECT_LT(late.ks_distance, 2.0 * ks_noise_floor(4000));
}

TEST(Normality, VanishingCoefficientsAreCounted) {
  FunctionalPoints pts{SimplexPoint::vertex(2, 1).coords(), SimplexPoint::vertex(2, 0).coords()};
  const auto rep = empirical_normality(fixture_b(), Functional::kCoeff, 2, 2000, 0.0, 1.0, 7, pts);
  EXPECT_GT(rep.neg_inf, 0u);
  EXPECT_EQ(rep.neg_inf + rep.replicas, 2000u);
  EXPECT_NEAR(static_cast<double>(rep.neg_inf) / 2000.0, 0.25, 4 * std::sqrt(0.25 * 0.75 / 2000));
}

TEST(BerryEsseen, DeterministicLawIsDegenerate) {
  const auto pts = FunctionalPoints::centred(2);
  const auto samples = sample_functionals(MeasureSpec::single(kG), all_functionals(), {4, 8}, 20, 1, pts);
  const auto res = berry_esseen_from_samples(samples, 3.0);
  for (const auto& f : res.fits) EXPECT_EQ(f.verdict, "degenerate");
}

TEST(BerryEsseen, ReferenceSpecPasses) {
  const auto res = berry_esseen_fit(reference_spec(), {Functional::kSigma, Functional::kNorm}, 3.0,
                                    {16, 64, 256}, 4000, 8, FunctionalPoints::centred(2));
  EXPECT_TRUE(res.moments.stable);
  EXPECT_EQ(res.ordering_violations, 0u);
  for (const auto& f : res.fits) {
    EXPECT_EQ(f.verdict, "pass") << functional_name(f.functional) << " tau " << f.tau;
    EXPECT_EQ(f.scaled.size(), 3u);
  }
  EXPECT_THROW(berry_esseen_fit(reference_spec(), {}, 2.0, {4}, 10, 1, FunctionalPoints::centred(2)),
               InvalidInput);
}

TEST(PathHull, MatchesBruteForce) {
  RandomStream rng(9);
  detail::PathHull hull;
  std::vector<double> s;
  double acc = 0.0;
  for (int k = 1; k <= 500; ++k) {
    acc += 0.3 + rng.normal();
    s.push_back(acc);
    hull.add(k, acc);
  }
  for (double lambda : {-1.0, 0.0, 0.3, 0.31, 2.0}) {
    double best = 0.0;
    for (int k = 1; k <= 500; ++k) best = std::max(best, std::abs(s[k - 1] - k * lambda));
    EXPECT_NEAR(hull.max_abs_deviation(lambda), best, 1e-9 * std::max(1.0, best)) << lambda;
  }
}

TEST(Asip, SingleAtomStaysInsideEnvelope) {
  const auto rep = asip_proxy(MeasureSpec::single(kG), 4096, 2, 1.0, 1, FunctionalPoints::centred(2));
  EXPECT_EQ(rep.verdict, "pass");
  for (double v : rep.statistic) EXPECT_LT(v, 0.05);
  EXPECT_EQ(rep.tag, "property proxy");
}

TEST(Asip, ReferenceSpec) {
  const auto pts = FunctionalPoints::centred(2);
  const auto d = sample_functionals(reference_spec(), {Functional::kSigma}, {2048}, 2000, 10, pts);
  const double s2 = sample_variance(d.at(0, 0)) / 2048.0;
  const auto rep = asip_proxy(reference_spec(), 1 << 13, 400, s2, 11, pts);
  EXPECT_GE(rep.fraction_within, 0.95);
  EXPECT_GE(rep.fraction_within_coeff, 0.95);
  ASSERT_FALSE(rep.blocks.empty());
  EXPECT_EQ(rep.blocks[0].length, 256);
  EXPECT_EQ(rep.blocks[0].count, 400u * 32u);
}

TEST(Deviation, DeterministicLawHasNoLargeDeviations) {
  const auto rep = deviation_tail_sums(MeasureSpec::single(kG), 1.0, 2.0, 0.5, 200, 3, 1,
                                       FunctionalPoints::centred(2));
  EXPECT_EQ(rep.verdict, "pass");
  EXPECT_EQ(rep.probability.back(), 0.0);
  EXPECT_EQ(rep.partial_sum.size(), 200u);
}

TEST(Deviation, ProbabilitiesAreMonotoneSums) {
  const auto rep =
      deviation_tail_sums(reference_spec(), 1.0, 2.0, 0.5, 256, 2000, 12, FunctionalPoints::centred(2));
  for (std::size_t k = 1; k < rep.partial_sum.size(); ++k) EXPECT_GE(rep.partial_sum[k], rep.partial_sum[k - 1]);
  EXPECT_EQ(rep.verdict, "pass");
  EXPECT_THROW(deviation_tail_sums(reference_spec(), 0.4, 2.0, 0.5, 10, 10, 1, FunctionalPoints::centred(2)),
               InvalidInput);
}

double column_delta(const Matrix& g) {
  double best = INFINITY;
  const Vector c = g.colwise().sum().transpose();
  for (int i = 0; i < g.rows(); ++i)
    for (int j = 0; j < g.cols(); ++j) best = std::min(best, g(i, j) / c[j]);
  return best;
}

TEST(CoefficientGap, HoldsPathwise) {
  RandomStream rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    const int d = 2 + trial % 3;
    const std::size_t n = 2 + trial % 63;
    std::vector<AllowableMatrix> path;
    for (std::size_t k = 0; k < n; ++k) path.push_back(testing::random_positive(rng, d, 4.0));
    const std::size_t m = 1 + trial % (n - 1);
    const double n0 = 1.0 / column_delta(path[m - 1].entries());
    const auto [lhs, rhs] = coefficient_gap(path, m, n0);
    EXPECT_GE(lhs, rhs - 1e-9) << "trial " << trial;
  }
}

double enumerated_zero_probability(int n) {
  // Words over {identity, positive atom}, each of weight 2^-n.
  const Matrix atoms[2] = {Matrix::Identity(2, 2), AllowableMatrix::from_rows({{2, 1}, {1, 1}}).entries()};
  double p = 0.0;
  for (int w = 0; w < (1 << n); ++w) {
    Matrix a = Matrix::Identity(2, 2);
    for (int k = 0; k < n; ++k) a = atoms[(w >> k) & 1] * a;
    if (a(0, 1) == 0.0) p += std::ldexp(1.0, -n);
  }
  return p;
}

TEST(Fixtures, CoefficientVanishesWithEnumeratedProbability) {
  const double expected = enumerated_zero_probability(3);
  EXPECT_EQ(expected, 0.125);
  const auto est = coefficient_zero_probability(fixture_b(), 3, 20000, 14);
  EXPECT_NEAR(est.value, expected, 4 * std::sqrt(expected * (1 - expected) / 20000));
  EXPECT_GE(est.value, 0.0);
}

TEST(Fixtures, HeavyLowerTailWithStableLambda) {
  const auto a = fixture_a();
  EXPECT_EQ(a.atoms.size(), 1001u);
  const auto diag = fixture_a_diagnostics(a, 128, 2000, 15);
  EXPECT_TRUE(diag.lambda_stable);
  EXPECT_TRUE(diag.heavy_tail) << diag.hill_index;
  EXPECT_EQ(pathology_fixtures().size(), 2u);
}

}  // namespace
}  // namespace rpm
