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

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "rpm/allowable_matrix.hpp"
#include "rpm/estimators.hpp"
#include "rpm/limit_theorems.hpp"
#include "rpm/measure.hpp"
#include "rpm/random.hpp"
#include "rpm/random_walk.hpp"
#include "rpm/statistics.hpp"

namespace rpm {

/// Two strictly positive 2 x 2 atoms with equal weights. Bounded support,
/// log kappa = log 5 and log((3 + sqrt 5) / 4), and non-constant column sums
/// so the cocycle genuinely depends on the direction.
inline MeasureSpec reference_spec() {
  return MeasureSpec::atomic({0.5, 0.5}, {AllowableMatrix::from_rows({{3.0, 2.0}, {2.0, 3.0}}),
                                          AllowableMatrix::from_rows({{0.5, 0.5}, {0.5, 1.0}})});
}

/// g_n = diag(1, 2^-n) with weight 1/(pi^2 n^2) for n <= truncation, and the
/// all-ones matrix with weight 5/6; weights renormalized after truncation.
/// log v(g_n) = -n log 2 has a first moment only through the truncation.
inline MeasureSpec fixture_a(int truncation = 1000) {
  std::vector<double> w{5.0 / 6.0};
  std::vector<AllowableMatrix> atoms{AllowableMatrix::all_ones(2)};
  for (int n = 1; n <= truncation; ++n) {
    w.push_back(1.0 / (std::numbers::pi * std::numbers::pi * n * n));
    atoms.push_back(AllowableMatrix::from_rows({{1.0, 0.0}, {0.0, std::ldexp(1.0, -n)}}));
  }
  double total = 0.0;
  for (double x : w) total += x;
  for (double& x : w) x /= total;
  return MeasureSpec::atomic(std::move(w), std::move(atoms));
}

/// Identity w.p. 1/2, a strictly positive atom w.p. 1/2. The coefficient
/// <e_1, A_n e_2> vanishes exactly on the all-identity words.
inline MeasureSpec fixture_b() {
  return MeasureSpec::atomic({0.5, 0.5},
                             {AllowableMatrix::identity(2), AllowableMatrix::from_rows({{2.0, 1.0}, {1.0, 1.0}})});
}

struct PathologyFixture {
  std::string name;
  MeasureSpec spec;
  std::string expected;
};

inline std::vector<PathologyFixture> pathology_fixtures() {
  return {
      {"fixture_a", fixture_a(),
       "lambda from log |A_n| is finite and stable; log v(A_n) has a heavy lower tail (Hill index < 2), so "
       "convergence of log v(A_n)/n holds a.s. but not in L^1"},
      {"fixture_b", fixture_b(), "P(<e_1, A_n e_2> = 0) >= 2^-n > 0, so log <e_1, A_n e_2> can be -inf"},
  };
}

/// Frequency of <e_1, A_n e_2> == 0 exactly.
inline EstimateWithError coefficient_zero_probability(const MeasureSpec& spec, std::int64_t n,
                                                      std::size_t replicas, std::uint64_t seed, int threads = 0) {
  if (n < 1 || replicas < 2) throw InvalidInput("coefficient_zero_probability: need n >= 1 and replicas >= 2");
  std::vector<double> hit(replicas);
  for_each_replica(replicas, threads, [&](std::size_t r) {
    MeasureSampler sampler(spec);
    RandomStream stream(replica_seed(seed, r, stream_tag::kFixture));
    ProductState state(spec.d, ProductOrder::kForward);
    for (std::int64_t k = 0; k < n; ++k) state.multiply(sampler.draw(stream));
    hit[r] = state.normalized()(0, 1) == 0.0 ? 1.0 : 0.0;
  });
  return estimate_from_contributions(hit, "coefficient-zero");
}

struct FixtureADiagnostics {
  std::int64_t n = 0;
  EstimateWithError lambda_n;   // log |A_n| / n
  EstimateWithError lambda_2n;  // log |A_2n| / 2n
  EstimateWithError log_v_n;    // log v(A_n) / n
  EstimateWithError log_v_2n;
  double hill_index = 0.0;  // of log |A_2n| - log v(A_2n), top 1%
  bool heavy_tail = false;
  bool lambda_stable = false;
};

inline FixtureADiagnostics fixture_a_diagnostics(const MeasureSpec& spec, std::int64_t n, std::size_t replicas,
                                                 std::uint64_t seed, int threads = 0) {
  if (n < 1 || replicas < 200) throw InvalidInput("fixture_a_diagnostics: need n >= 1 and replicas >= 200");
  std::vector<double> ln(replicas), l2n(replicas), vn(replicas), v2n(replicas), gap(replicas);
  for_each_replica(replicas, threads, [&](std::size_t r) {
    MeasureSampler sampler(spec);
    RandomStream stream(replica_seed(seed, r, stream_tag::kFixture + 1));
    ProductState state(spec.d, ProductOrder::kForward);
    for (std::int64_t k = 1; k <= 2 * n; ++k) {
      state.multiply(sampler.draw(stream));
      if (k == n) {
        ln[r] = state.log_norm() / static_cast<double>(n);
        vn[r] = state.log_v() / static_cast<double>(n);
      }
    }
    l2n[r] = state.log_norm() / static_cast<double>(2 * n);
    v2n[r] = state.log_v() / static_cast<double>(2 * n);
    gap[r] = state.log_norm() - state.log_v();
  });
  FixtureADiagnostics out;
  out.n = n;
  out.lambda_n = estimate_from_contributions(ln, "lambda-n");
  out.lambda_2n = estimate_from_contributions(l2n, "lambda-2n");
  out.log_v_n = estimate_from_contributions(vn, "log-v-n");
  out.log_v_2n = estimate_from_contributions(v2n, "log-v-2n");
  out.hill_index = hill_tail_index(gap, replicas / 100);
  out.heavy_tail = out.hill_index < 2.0;
  out.lambda_stable = agree_within(out.lambda_n, out.lambda_2n);
  return out;
}

}  // namespace rpm
