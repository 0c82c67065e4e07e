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
#include "rpm/random_walk.hpp"
#include "test_support.hpp"

namespace rpm {
namespace {

const auto kA = AllowableMatrix::from_rows({{3, 2}, {2, 3}});
const auto kB = AllowableMatrix::from_rows({{0.5, 0.5}, {0.5, 1}});
const auto kG = AllowableMatrix::from_rows({{3, 1}, {1, 1}});

MeasureSpec two_atoms() { return MeasureSpec::atomic({0.5, 0.5}, {kA, kB}); }

TEST(ForwardStream, FirstStepIsTheCocycle) {
  const auto x = SimplexPoint::normalized((Vector(2) << 1, 3).finished());
  const auto recs = forward_stream(MeasureSpec::single(kG), 1, 1, {x});
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_NEAR(recs[0].sigma_x[0], cocycle(kG, x), 1e-15);
  EXPECT_NEAR(recs[0].increment[0], cocycle(kG, x), 1e-15);
}

TEST(ForwardStream, SingleAtomMatchesDensePowers) {
  const auto x = SimplexPoint::vertex(2, 1);
  const auto recs = forward_stream(MeasureSpec::single(kG), 1, 30, {x}, {.with_kappa = true});
  Matrix p = Matrix::Identity(2, 2);
  for (int n = 1; n <= 30; ++n) {
    p = kG.entries() * p;  // entries stay below 2^53 for n <= 30
    const auto& r = recs[n - 1];
    EXPECT_NEAR(r.log_norm, std::log(p.colwise().sum().maxCoeff()), 1e-9);
    EXPECT_NEAR(r.log_v, std::log(p.colwise().sum().minCoeff()), 1e-9);
    EXPECT_NEAR(r.sigma_x[0], std::log((p * x.coords()).sum()), 1e-9);
    EXPECT_NEAR(*r.log_kappa, n * std::log(2.0 + std::sqrt(2.0)), 1e-9);
  }
  const auto far = forward_stream(MeasureSpec::single(kG), 1, 400, {x});
  // sigma(g^n, x) / n -> log kappa at rate O(1/n); the increments converge
  // geometrically.
  EXPECT_NEAR(far.back().increment[0], std::log(2.0 + std::sqrt(2.0)), 1e-12);
  EXPECT_NEAR(far.back().sigma_x[0] / 400.0, std::log(2.0 + std::sqrt(2.0)), 1e-2);
}

TEST(ForwardStream, TelescopingAndOrdering) {
  RandomStream rng(30);
  const auto spec = MeasureSpec::lognormal(3, 0.0, 1.0);
  const std::vector<SimplexPoint> starts{SimplexPoint::center(3), SimplexPoint::vertex(3, 2),
                                         testing::random_point(rng, 3)};
  std::vector<double> acc(starts.size(), 0.0);
  forward_stream(
      spec, 9, 2000, starts,
      [&](const StepRecord& r) {
        for (std::size_t s = 0; s < starts.size(); ++s) {
          acc[s] += r.increment[s];
          EXPECT_NEAR(r.sigma_x[s], acc[s], 1e-9);
          EXPECT_GE(r.sigma_x[s], r.log_v - 1e-9);
          EXPECT_LE(r.sigma_x[s], r.log_norm + 1e-9);
        }
        EXPECT_GE(r.log_norm - r.log_v, 0.0);
        ASSERT_TRUE(r.log_kappa.has_value());
        EXPECT_LE(*r.log_kappa, r.log_norm + 1e-9);
        EXPECT_GE(*r.log_kappa, r.log_v - 1e-9);
      },
      {.with_kappa = true});
}

TEST(ForwardStream, NoOverflowOnLongRuns) {
  const auto recs = forward_stream(MeasureSpec::single(AllowableMatrix::all_ones(2).scaled(1e10)), 1, 100000,
                                   {SimplexPoint::center(2)});
  EXPECT_NEAR(recs.back().log_norm, 100000 * std::log(2e10), 1e-6 * recs.back().log_norm);
  EXPECT_TRUE(std::isfinite(recs.back().sigma_x[0]));
}

TEST(ForwardStream, ReplicaDeterminism) {
  const auto spec = two_atoms();
  const auto a = forward_stream(spec, replica_seed(5, 3), 100, {SimplexPoint::center(2)});
  const auto b = forward_stream(spec, replica_seed(5, 3), 100, {SimplexPoint::center(2)});
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].sigma_x[0], b[i].sigma_x[0]);
  std::vector<double> serial(8), parallel(8);
  auto run = [&](std::vector<double>& out, int threads) {
    for_each_replica(8, threads, [&](std::size_t i) {
      out[i] = forward_stream(spec, replica_seed(5, i), 200, {SimplexPoint::center(2)}).back().sigma_x[0];
    });
  };
  run(serial, 1);
  run(parallel, 4);
  EXPECT_EQ(serial, parallel);
}

TEST(ProductState, ContractionBoundNonIncreasingAndValid) {
  RandomStream rng(31);
  const auto spec = MeasureSpec::atomic({0.5, 0.5}, {AllowableMatrix::from_rows({{1, 1}, {0, 1}}),
                                                     AllowableMatrix::from_rows({{1, 0}, {1, 1}})});
  MeasureSampler sampler(spec);
  ProductState st(2, ProductOrder::kForward, true);
  Matrix exact = Matrix::Identity(2, 2);
  double prev = 0.0;
  for (int n = 0; n < 60; ++n) {
    const auto& y = sampler.draw(rng);
    st.multiply(y, sampler.last_contraction());
    exact = y.entries() * exact;
    exact /= exact.maxCoeff();
    EXPECT_LE(st.contraction_log(), prev);
    prev = st.contraction_log();
    EXPECT_LE(detail::contraction_coefficient(exact), st.contraction_bound() + 1e-12);
  }
  EXPECT_LT(st.contraction_bound(), 1.0);
}

TEST(BackwardSampler, SingleAtomConvergesToPerronVector) {
  const auto spec = MeasureSpec::single(kG);
  const auto s = backward_invariant_sample(spec, 1, 1e-10);
  EXPECT_LE(s.certificate, 1e-10);
  EXPECT_LE(hilbert_distance(s.point, perron_vector(kG)).value(), 1e-10);
}

TEST(BackwardSampler, ToleranceOneReturnsImmediately) {
  const auto s = backward_invariant_sample(two_atoms(), 1, 1.0);
  EXPECT_EQ(s.steps, 0);
  EXPECT_EQ(s.certificate, 1.0);
  EXPECT_THROW(backward_invariant_sample(two_atoms(), 1, 0.0), InvalidInput);
}

TEST(BackwardSampler, StartsCoincideUnderCommonSeed) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto a = backward_invariant_sample(two_atoms(), seed, 1e-10, SimplexPoint::vertex(2, 0));
    const auto b = backward_invariant_sample(two_atoms(), seed, 1e-10, SimplexPoint::vertex(2, 1));
    EXPECT_LE(hilbert_distance(a.point, b.point).value(), 1e-10);
  }
}

TEST(BackwardSampler, FailsOnNonContractingLaw) {
  const auto spec = MeasureSpec::single(AllowableMatrix::identity(2));
  EXPECT_THROW(backward_invariant_sample(spec, 1, 0.5), std::runtime_error);
}

TEST(DetectContraction, Examples) {
  auto w = detect_contraction(two_atoms(), 5, 100, 1);
  ASSERT_TRUE(w);
  EXPECT_EQ(w->r, 1);
  const auto perm = MeasureSpec::atomic(
      {0.5, 0.5}, {AllowableMatrix::from_rows({{0, 1}, {1, 0}}), AllowableMatrix::identity(2)});
  EXPECT_FALSE(detect_contraction(perm, 8, 200, 1).has_value());
  const auto fa = MeasureSpec::atomic(
      {5.0 / 6, 1.0 / 6}, {AllowableMatrix::all_ones(2), AllowableMatrix::from_rows({{1, 0}, {0, 0.5}})});
  w = detect_contraction(fa, 3, 100, 1);
  ASSERT_TRUE(w);
  EXPECT_EQ(w->r, 1);
  EXPECT_NEAR(w->frequency, 5.0 / 6, 0.15);
}

TEST(HittingTime, Examples) {
  EXPECT_EQ(hitting_time(MeasureSpec::single(AllowableMatrix::all_ones(2)), 1, 0.5, 1), 1);
  // G_{1/3} holds for kA (columns (0.6, 0.4)) but not for diag-ish kD.
  const auto kD = AllowableMatrix::from_rows({{1, 0}, {0, 1}});
  const double q = 0.25;
  const auto spec = MeasureSpec::atomic({q, 1 - q}, {kA, kD});
  std::vector<double> t;
  for (std::uint64_t s = 0; s < 4000; ++s) t.push_back(static_cast<double>(*hitting_time(spec, s, 1.0 / 3, 1)));
  double m = 0, v = 0;
  for (double x : t) m += x;
  m /= t.size();
  for (double x : t) v += (x - m) * (x - m);
  const double se = std::sqrt(v / (t.size() - 1) / t.size());
  EXPECT_NEAR(m, 1.0 / q, 3 * se);
}

}  // namespace
}  // namespace rpm
