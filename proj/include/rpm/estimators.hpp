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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "rpm/measure.hpp"
#include "rpm/positive_matrix.hpp"
#include "rpm/random.hpp"
#include "rpm/random_walk.hpp"
#include "rpm/simplex_geometry.hpp"
#include "rpm/statistics.hpp"
#include "rpm/types.hpp"

namespace rpm {

// Stream tags keep the estimators' random numbers disjoint, so estimates of
// the same quantity by different routes are independent.
namespace stream_tag {
inline constexpr std::uint64_t kLyapunov = 0x11;
inline constexpr std::uint64_t kCoupling = 0x12;
inline constexpr std::uint64_t kDirect = 0x13;
inline constexpr std::uint64_t kSeries = 0x14;
inline constexpr std::uint64_t kPsi = 0x15;
inline constexpr std::uint64_t kMartingale = 0x16;
inline constexpr std::uint64_t kRegularity = 0x17;
inline constexpr std::uint64_t kMoment = 0x18;
inline constexpr std::uint64_t kContraction = 0x19;
}  // namespace stream_tag

/// Throws unless some product of at most r_max draws is strictly positive.
inline ContractionWitness require_strict_contraction(const MeasureSpec& spec, std::uint64_t seed = 0,
                                                     int r_max = 16) {
  auto w = detect_contraction(spec, r_max, 256, replica_seed(seed, 0, stream_tag::kContraction));
  if (!w) {
    throw InvalidInput("no strictly positive product of length <= " + std::to_string(r_max) +
                       " was observed; the law does not look strictly contracting");
  }
  return *w;
}

// ---------------------------------------------------------------------------
// Lyapunov exponent.

struct LyapunovEstimate {
  EstimateWithError sigma;           // sigma(A_n, x) / n
  EstimateWithError norm;            // log |A_n| / n
  EstimateWithError last_increment;  // sigma(Y_n, A_{n-1} . x)
  // max over replicas of (log |A_n| - log v(A_n)) / n; bounds the spread of
  // sigma(A_n, .) / n over all starts.
  double max_spread = 0.0;
  std::int64_t n = 0;
};

inline LyapunovEstimate estimate_lyapunov(const MeasureSpec& spec, std::int64_t n, std::size_t replicas,
                                          const SimplexPoint& start, std::uint64_t seed, int threads = 0) {
  if (n < 1 || replicas < 1) throw InvalidInput("estimate_lyapunov: n and replicas must be >= 1");
  if (start.dim() != spec.d) throw InvalidInput("estimate_lyapunov: start dimension differs from d");
  require_strict_contraction(spec, seed);
  std::vector<double> sig(replicas), nrm(replicas), inc(replicas), spread(replicas);
  const Vector& x = start.coords();
  for_each_replica(replicas, threads, [&](std::size_t r) {
    MeasureSampler sampler(spec);
    RandomStream stream(replica_seed(seed, r, stream_tag::kLyapunov));
    ProductState state(spec.d, ProductOrder::kForward);
    double prev = 0.0;
    for (std::int64_t k = 1; k <= n; ++k) {
      if (k == n) prev = state.sigma(x);
      state.multiply(sampler.draw(stream));
    }
    const double s = state.sigma(x);
    sig[r] = s / static_cast<double>(n);
    nrm[r] = state.log_norm() / static_cast<double>(n);
    inc[r] = s - prev;
    spread[r] = (state.log_norm() - state.log_v()) / static_cast<double>(n);
  });
  LyapunovEstimate out;
  out.sigma = estimate_from_contributions(sig, "sigma");
  out.norm = estimate_from_contributions(nrm, "norm");
  out.last_increment = estimate_from_contributions(inc, "increment");
  out.max_spread = *std::max_element(spread.begin(), spread.end());
  out.n = n;
  return out;
}

// ---------------------------------------------------------------------------
// Coupling coefficients.

struct CouplingCurve {
  double p = 1.0;
  std::vector<std::int64_t> grid;
  std::vector<double> values;  // delta_tilde_hat(n)
  std::vector<double> std_errors;
  double rate = 0.0;       // a_hat, from log values ~ log C + n log a
  double prefactor = 0.0;  // C
  double r_squared = std::numeric_limits<double>::quiet_NaN();
  std::size_t replicas = 0;
  // Paths on which sup_x,y |increment difference| exceeded
  // (4 + 2 log L(Y_n)) * prod c(blocks of A_{n-1}) at some n.
  std::size_t bound_violations = 0;
  double max_bound_ratio = 0.0;

  double envelope(double n) const { return prefactor * std::pow(rate, n); }
  /// Sum of envelope(n) over n > n0.
  double envelope_tail(double n0) const {
    if (rate <= 0.0) return 0.0;
    if (rate >= 1.0) return std::numeric_limits<double>::infinity();
    return prefactor * std::pow(rate, n0 + 1.0) / (1.0 - rate);
  }
};

namespace detail {

/// Tracks A_n . e_j for every vertex e_j as z_1 plus differences
/// z_j - z_1, so discrepancies far below machine epsilon stay resolved.
class VertexCoupling {
 public:
  explicit VertexCoupling(int d) : z1_(Vector::Zero(d)), deltas_(d, d), image_(d), cd_(d) {
    z1_[0] = 1.0;
    deltas_.setZero();
    for (int j = 1; j < d; ++j) {
      deltas_(0, j) = -1.0;
      deltas_(j, j) = 1.0;
    }
  }

  /// Advances by y and returns max_j - min_j of sigma(y, A_{n-1} . e_j).
  double step(const AllowableMatrix& y) {
    const Vector& c = y.column_sums();
    const double s1 = c.dot(z1_);
    cd_.noalias() = deltas_.transpose() * c;
    double hi = 0.0, lo = 0.0;
    for (Eigen::Index j = 1; j < cd_.size(); ++j) {
      const double diff = std::log1p(cd_[j] / s1);
      hi = std::max(hi, diff);
      lo = std::min(lo, diff);
    }
    image_.noalias() = y.entries() * z1_;
    z1_ = image_ / s1;
    scratch_.noalias() = y.entries() * deltas_;
    for (Eigen::Index j = 1; j < cd_.size(); ++j) {
      deltas_.col(j) = (scratch_.col(j) - z1_ * cd_[j]) / (s1 + cd_[j]);
    }
    return hi - lo;
  }

 private:
  Vector z1_;
  Matrix deltas_;  // column j holds z_j - z_1; column 0 unused
  Matrix scratch_;
  Vector image_;
  Vector cd_;
};

inline void fit_envelope(CouplingCurve& curve) {
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < curve.grid.size(); ++i) {
    if (curve.values[i] > 0.0 && std::isfinite(std::log(curve.values[i]))) {
      xs.push_back(static_cast<double>(curve.grid[i]));
      ys.push_back(std::log(curve.values[i]));
    }
  }
  if (xs.size() < 2) {
    // Identically zero discrepancies: nothing to fit, the envelope is 0.
    curve.rate = 0.0;
    curve.prefactor = xs.empty() ? 0.0 : curve.values.front();
    curve.r_squared = 1.0;
    return;
  }
  const LinearFit f = linear_fit(xs, ys);
  curve.rate = std::exp(f.slope);
  curve.prefactor = std::exp(f.intercept);
  curve.r_squared = f.r_squared;
}

}  // namespace detail

/// Exact per-path sup over S+ x S+ of the increment discrepancy: the
/// increment sigma(Y_n, A_{n-1} . x) is linear-fractional in x, so its
/// extrema sit at vertices.
inline CouplingCurve coupling_decay(const MeasureSpec& spec, double p, std::vector<std::int64_t> n_grid,
                                    std::size_t replicas, std::uint64_t seed, int threads = 0) {
  if (!(p >= 1.0)) throw InvalidInput("coupling_decay: p must be >= 1");
  if (n_grid.empty() || replicas < 1) throw InvalidInput("coupling_decay: empty grid or no replicas");
  std::sort(n_grid.begin(), n_grid.end());
  n_grid.erase(std::unique(n_grid.begin(), n_grid.end()), n_grid.end());
  if (n_grid.front() < 1) throw InvalidInput("coupling_decay: grid entries must be >= 1");
  require_strict_contraction(spec, seed);
  const std::size_t g = n_grid.size();
  const std::int64_t n_max = n_grid.back();
  std::vector<double> samples(g * replicas);
  std::vector<double> ratio(replicas, 0.0);
  std::vector<char> violated(replicas, 0);
  for_each_replica(replicas, threads, [&](std::size_t r) {
    MeasureSampler sampler(spec);
    RandomStream stream(replica_seed(seed, r, stream_tag::kCoupling));
    detail::VertexCoupling coupling(spec.d);
    ProductState blocks(spec.d, ProductOrder::kForward, /*track_contraction=*/true);
    std::size_t next = 0;
    for (std::int64_t n = 1; n <= n_max; ++n) {
      const AllowableMatrix& y = sampler.draw(stream);
      const double disc = coupling.step(y);
      const auto gy = gauges(y);
      const double bound = (4.0 + 2.0 * std::log(gy.L)) * blocks.contraction_bound();
      if (disc > bound * (1.0 + 1e-9) + 1e-300) violated[r] = 1;
      if (bound > 0.0) ratio[r] = std::max(ratio[r], disc / bound);
      blocks.multiply(y, sampler.last_contraction());
      if (next < g && n == n_grid[next]) {
        samples[next * replicas + r] = std::pow(disc, p);
        ++next;
      }
    }
  });
  CouplingCurve curve;
  curve.p = p;
  curve.grid = n_grid;
  curve.replicas = replicas;
  for (std::size_t i = 0; i < g; ++i) {
    const auto e = estimate_from_contributions(std::span<const double>(samples).subspan(i * replicas, replicas),
                                               "coupling");
    curve.values.push_back(e.value);
    curve.std_errors.push_back(e.std_error);
  }
  curve.bound_violations = static_cast<std::size_t>(std::count(violated.begin(), violated.end(), 1));
  curve.max_bound_ratio = *std::max_element(ratio.begin(), ratio.end());
  detail::fit_envelope(curve);
  return curve;
}

inline std::vector<std::int64_t> integer_range(std::int64_t lo, std::int64_t hi) {
  std::vector<std::int64_t> out;
  for (std::int64_t n = lo; n <= hi; ++n) out.push_back(n);
  return out;
}

// ---------------------------------------------------------------------------
// Asymptotic variance: direct route.

struct DirectVariance {
  EstimateWithError sigma, norm, v, kappa;
  EstimateWithError lambda;  // from sigma(A_n, x) / n on the same paths
  std::int64_t n = 0;

  std::vector<EstimateWithError> all() const { return {sigma, norm, v, kappa}; }
};

/// Sample variances of f(A_n) / sqrt(n) for f = sigma(., x), log |.|,
/// log v, log kappa.
inline DirectVariance estimate_variance_direct(const MeasureSpec& spec, std::int64_t n, std::size_t replicas,
                                               const SimplexPoint& start, std::uint64_t seed, int threads = 0) {
  if (n < 1 || replicas < 2) throw InvalidInput("estimate_variance_direct: need n >= 1 and replicas >= 2");
  require_strict_contraction(spec, seed);
  std::vector<double> sig(replicas), nrm(replicas), lv(replicas), lk(replicas);
  for_each_replica(replicas, threads, [&](std::size_t r) {
    MeasureSampler sampler(spec);
    RandomStream stream(replica_seed(seed, r, stream_tag::kDirect));
    ProductState state(spec.d, ProductOrder::kForward);
    for (std::int64_t k = 0; k < n; ++k) state.multiply(sampler.draw(stream));
    sig[r] = state.sigma(start.coords());
    nrm[r] = state.log_norm();
    lv[r] = state.log_v();
    lk[r] = state.log_kappa();
  });
  const double nd = static_cast<double>(n);
  DirectVariance out;
  out.n = n;
  out.sigma = variance_estimate(sig, nd, "direct-sigma");
  out.norm = variance_estimate(nrm, nd, "direct-norm");
  out.v = variance_estimate(lv, nd, "direct-v");
  out.kappa = variance_estimate(lk, nd, "direct-kappa");
  std::vector<double> lam(replicas);
  std::transform(sig.begin(), sig.end(), lam.begin(), [nd](double s) { return s / nd; });
  out.lambda = estimate_from_contributions(lam, "lambda");
  return out;
}

// ---------------------------------------------------------------------------
// Asymptotic variance: autocovariance series with a stationary start.

struct SeriesVariance {
  EstimateWithError estimate;            // truncated at `lag`
  std::vector<EstimateWithError> by_lag;  // truncation at 0, 1, ..., lag_max
  int lag = 0;
  // Bound on the neglected sum 2 sum_{h > lag} |gamma(h)| from the coupling
  // envelope: |gamma(h)| <= E|X_0| delta_tilde_1(h).
  double truncation_bound = 0.0;
  double mean_abs_increment = 0.0;
  double lambda = 0.0;
};

/// Smallest lag H with 2 E|X| envelope_tail(H) below `target`.
inline int choose_lag(const CouplingCurve& curve_p1, double mean_abs_increment, double target, int cap = 1000) {
  for (int h = 0; h <= cap; ++h) {
    if (2.0 * mean_abs_increment * curve_p1.envelope_tail(h) < target) return h;
  }
  return cap;
}

/// gamma(0) + 2 sum_{h=1}^{H} gamma(h) for the centred increments
/// X_k = sigma(Y_k, A_{k-1} . W0) - lambda, W0 ~ nu. Each replica averages
/// the lagged products over `positions` consecutive stationary positions.
inline SeriesVariance estimate_variance_series(const MeasureSpec& spec, int lag_max, std::int64_t positions,
                                               std::size_t replicas, double lambda, std::uint64_t seed,
                                               double tol = 1e-10, int threads = 0) {
  if (lag_max < 0 || positions < 1 || replicas < 2) {
    throw InvalidInput("estimate_variance_series: need lag_max >= 0, positions >= 1, replicas >= 2");
  }
  require_strict_contraction(spec, seed);
  const std::size_t lags = static_cast<std::size_t>(lag_max) + 1;
  std::vector<double> gam(lags * replicas);
  std::vector<double> absx(replicas);
  const Vector e = SimplexPoint::center(spec.d).coords();
  for_each_replica(replicas, threads, [&](std::size_t r) {
    MeasureSampler sampler(spec);
    RandomStream stream(replica_seed(seed, r, stream_tag::kSeries));
    Vector z = detail::backward_draw(sampler, stream, tol, e).point.coords();
    const std::int64_t len = positions + lag_max;
    std::vector<double> x(static_cast<std::size_t>(len));
    for (std::int64_t k = 0; k < len; ++k) {
      const AllowableMatrix& y = sampler.draw(stream);
      const double s = y.column_sums().dot(z);
      x[static_cast<std::size_t>(k)] = std::log(s) - lambda;
      z = y.entries() * z / s;
    }
    for (std::size_t h = 0; h < lags; ++h) {
      double acc = 0.0;
      for (std::int64_t t = 0; t < positions; ++t) acc += x[t] * x[t + h];
      gam[h * replicas + r] = acc / static_cast<double>(positions);
    }
    double a = 0.0;
    for (std::int64_t t = 0; t < positions; ++t) a += std::abs(x[t]);
    absx[r] = a / static_cast<double>(positions);
  });
  SeriesVariance out;
  out.lambda = lambda;
  out.lag = lag_max;
  out.mean_abs_increment = mean(absx);
  std::vector<double> running(replicas, 0.0);
  for (std::size_t h = 0; h < lags; ++h) {
    for (std::size_t r = 0; r < replicas; ++r) running[r] += (h == 0 ? 1.0 : 2.0) * gam[h * replicas + r];
    out.by_lag.push_back(estimate_from_contributions(running, "series-lag-" + std::to_string(h)));
  }
  out.estimate = out.by_lag.back();
  out.estimate.method = "series";
  return out;
}

/// Attaches the envelope truncation bound to a series estimate.
inline void attach_truncation_bound(SeriesVariance& s, const CouplingCurve& curve_p1) {
  s.truncation_bound = 2.0 * s.mean_abs_increment * curve_p1.envelope_tail(s.lag);
}

// ---------------------------------------------------------------------------
// Asymptotic variance: martingale route.

/// psi_hat(x) = sum_{n=1}^{N} (E sigma(Y_n, A_{n-1} . x) - lambda), with the
/// expectations replaced by means over M stored paths. By the cocycle
/// identity the level sums telescope to mean_m sigma(A^m_N, x) - N lambda,
/// so one set of paths serves every x.
class PsiEstimate {
 public:
  PsiEstimate() = default;

  int truncation() const { return truncation_; }
  std::size_t inner() const { return inner_; }
  double lambda() const { return lambda_; }
  double tail_bound() const { return tail_bound_; }
  // N se(lambda): bias carried by the plugged-in lambda.
  double lambda_bias() const { return lambda_bias_; }

  double operator()(const Vector& x) const { return mean_sigma(truncation_, x) - truncation_ * lambda_; }

  /// Without the N lambda constant, which cancels in every difference.
  double centred_sum(const Vector& x) const { return mean_sigma(truncation_, x); }

  /// Level-n term and its Monte Carlo standard error.
  EstimateWithError level_term(int n, const Vector& x) const {
    if (n < 1 || n > truncation_) throw InvalidInput("PsiEstimate: level out of range");
    std::vector<double> c(inner_);
    for (std::size_t m = 0; m < inner_; ++m) c[m] = sigma(m, n, x) - sigma(m, n - 1, x) - lambda_;
    return estimate_from_contributions(c, "psi-level-" + std::to_string(n));
  }

 private:
  friend PsiEstimate estimate_psi(const MeasureSpec&, int, std::size_t, double, double, const CouplingCurve&,
                                  std::uint64_t, int);

  double sigma(std::size_t m, int n, const Vector& x) const {
    const std::size_t row = m * (truncation_ + 1) + static_cast<std::size_t>(n);
    double dot = 0.0;
    for (int i = 0; i < d_; ++i) dot += sums_[row * d_ + i] * x[i];
    return log_scale_[row] + std::log(dot);
  }

  double mean_sigma(int n, const Vector& x) const {
    double acc = 0.0;
    for (std::size_t m = 0; m < inner_; ++m) acc += sigma(m, n, x);
    return acc / static_cast<double>(inner_);
  }

  int d_ = 0;
  int truncation_ = 0;
  std::size_t inner_ = 0;
  double lambda_ = 0.0;
  double tail_bound_ = 0.0;
  double lambda_bias_ = 0.0;
  std::vector<double> log_scale_;  // (M, N + 1)
  std::vector<double> sums_;       // (M, N + 1, d)
};

/// Smallest N with envelope tail below tol.
inline int choose_psi_truncation(const CouplingCurve& curve_p1, double tol, int cap = 1000) {
  for (int n = 1; n <= cap; ++n) {
    if (curve_p1.envelope_tail(n) < tol) return n;
  }
  return cap;
}

inline PsiEstimate estimate_psi(const MeasureSpec& spec, int truncation, std::size_t inner, double lambda,
                                double lambda_std_error, const CouplingCurve& curve_p1, std::uint64_t seed,
                                int threads = 0) {
  if (truncation < 1 || inner < 2) throw InvalidInput("estimate_psi: need N >= 1 and M >= 2");
  PsiEstimate psi;
  psi.d_ = spec.d;
  psi.truncation_ = truncation;
  psi.inner_ = inner;
  psi.lambda_ = lambda;
  psi.tail_bound_ = curve_p1.envelope_tail(truncation);
  psi.lambda_bias_ = truncation * lambda_std_error;
  const std::size_t levels = static_cast<std::size_t>(truncation) + 1;
  psi.log_scale_.assign(inner * levels, 0.0);
  psi.sums_.assign(inner * levels * spec.d, 0.0);
  for_each_replica(inner, threads, [&](std::size_t m) {
    MeasureSampler sampler(spec);
    RandomStream stream(replica_seed(seed, m, stream_tag::kPsi));
    ProductState state(spec.d, ProductOrder::kForward);
    for (std::size_t n = 0; n < levels; ++n) {
      if (n > 0) state.multiply(sampler.draw(stream));
      const std::size_t row = m * levels + n;
      psi.log_scale_[row] = state.log_scale();
      for (int i = 0; i < spec.d; ++i) psi.sums_[row * spec.d + i] = state.column_sums()[i];
    }
  });
  return psi;
}

struct MartingaleVariance {
  EstimateWithError estimate;  // mean of D_k^2
  EstimateWithError mean_difference;
  EstimateWithError lag1;  // mean of D_k D_{k+1}
  double lag1_autocorrelation = 0.0;
  std::int64_t steps = 0;
};

/// D_k = sigma(Y_k, A_{k-1} . W0) - lambda + psi(A_k . W0) - psi(A_{k-1} . W0)
/// over `steps` stationary steps per replica.
inline MartingaleVariance variance_via_martingale(const MeasureSpec& spec, const PsiEstimate& psi,
                                                  std::int64_t steps, std::size_t replicas, std::uint64_t seed,
                                                  double tol = 1e-10, int threads = 0) {
  if (steps < 2 || replicas < 2) throw InvalidInput("variance_via_martingale: need steps >= 2, replicas >= 2");
  std::vector<double> sq(replicas), first(replicas), lag(replicas);
  const Vector e = SimplexPoint::center(spec.d).coords();
  for_each_replica(replicas, threads, [&](std::size_t r) {
    MeasureSampler sampler(spec);
    RandomStream stream(replica_seed(seed, r, stream_tag::kMartingale));
    Vector z = detail::backward_draw(sampler, stream, tol, e).point.coords();
    double psi_prev = psi.centred_sum(z);
    double acc_sq = 0.0, acc_lag = 0.0, prev_d = 0.0;
    for (std::int64_t k = 0; k < steps; ++k) {
      const AllowableMatrix& y = sampler.draw(stream);
      const double s = y.column_sums().dot(z);
      z = y.entries() * z / s;
      const double psi_next = psi.centred_sum(z);
      const double dk = std::log(s) - psi.lambda() + psi_next - psi_prev;
      psi_prev = psi_next;
      acc_sq += dk * dk;
      if (k == 0) first[r] = dk;
      if (k > 0) acc_lag += prev_d * dk;
      prev_d = dk;
    }
    sq[r] = acc_sq / static_cast<double>(steps);
    lag[r] = acc_lag / static_cast<double>(steps - 1);
  });
  MartingaleVariance out;
  out.steps = steps;
  out.estimate = estimate_from_contributions(sq, "martingale");
  out.mean_difference = estimate_from_contributions(first, "martingale-mean");
  out.lag1 = estimate_from_contributions(lag, "martingale-lag1");
  out.lag1_autocorrelation = out.estimate.value > 0.0 ? out.lag1.value / out.estimate.value : 0.0;
  return out;
}

// ---------------------------------------------------------------------------
// Moment sanity and invariant-measure regularity.

struct MomentCheck {
  EstimateWithError moment;   // E (log N(Y_1))^p from `samples` draws
  EstimateWithError doubled;  // from 2 x `samples` fresh draws
  double hill_index = std::numeric_limits<double>::quiet_NaN();
  bool stable = false;
};

/// Finite-and-stable check on the p-th moment of log N(Y_1): the two
/// estimates agree within 3 combined se and the Hill tail index of
/// log N(Y_1) (top 1%) exceeds p when it is defined.
inline MomentCheck moment_sanity(const MeasureSpec& spec, double p, std::size_t samples, std::uint64_t seed) {
  if (!(p > 0.0) || samples < 100) throw InvalidInput("moment_sanity: need p > 0 and samples >= 100");
  auto draw = [&](std::size_t count, std::uint64_t tag) {
    MeasureSampler sampler(spec);
    RandomStream stream(replica_seed(seed, tag, stream_tag::kMoment));
    std::vector<double> out(count);
    for (auto& v : out) v = std::log(gauges(sampler.draw(stream)).N);
    return out;
  };
  const auto a = draw(samples, 1);
  const auto b = draw(2 * samples, 2);
  auto powered = [p](std::vector<double> xs) {
    for (auto& x : xs) x = std::pow(x, p);
    return xs;
  };
  MomentCheck out;
  out.moment = estimate_from_contributions(powered(a), "moment");
  out.doubled = estimate_from_contributions(powered(b), "moment-doubled");
  out.hill_index = hill_tail_index(b, std::max<std::size_t>(2, b.size() / 100));
  const bool tail_ok = std::isnan(out.hill_index) || out.hill_index > p;
  out.stable = std::isfinite(out.moment.value) && agree_within(out.moment, out.doubled) && tail_ok;
  return out;
}

/// Monte Carlo mean over W0 ~ nu of sup_{y in S+} |log <y, W0>|^p. The
/// pairing with y is linear, so the sup sits at the smallest coordinate.
inline EstimateWithError invariant_regularity(const MeasureSpec& spec, double p, std::size_t samples,
                                              double tol, std::uint64_t seed, int threads = 0) {
  if (!(p > 0.0) || samples < 2) throw InvalidInput("invariant_regularity: need p > 0 and samples >= 2");
  std::vector<double> c(samples);
  const Vector e = SimplexPoint::center(spec.d).coords();
  for_each_replica(samples, threads, [&](std::size_t i) {
    MeasureSampler sampler(spec);
    RandomStream stream(replica_seed(seed, i, stream_tag::kRegularity));
    const Vector w = detail::backward_draw(sampler, stream, tol, e).point.coords();
    c[i] = std::pow(std::abs(std::log(w.minCoeff())), p);
  });
  return estimate_from_contributions(c, "regularity");
}

struct RegularityReport {
  EstimateWithError base;
  EstimateWithError doubled;
  bool stable = false;
};

/// `samples` against 2 x `samples` independent draws.
inline RegularityReport regularity_doubling(const MeasureSpec& spec, double p, std::size_t samples, double tol,
                                            std::uint64_t seed, int threads = 0) {
  RegularityReport out;
  out.base = invariant_regularity(spec, p, samples, tol, replica_seed(seed, 1), threads);
  out.doubled = invariant_regularity(spec, p, 2 * samples, tol, replica_seed(seed, 2), threads);
  out.stable = std::isfinite(out.base.value) && agree_within(out.base, out.doubled);
  return out;
}

// ---------------------------------------------------------------------------
// Aperiodicity heuristic.

struct RationalApproximation {
  std::int64_t p = 0;
  std::int64_t q = 1;
  double error = std::numeric_limits<double>::infinity();
};

/// Best convergent p/q of x with q <= q_max.
inline RationalApproximation best_convergent(double x, std::int64_t q_max) {
  RationalApproximation best;
  // h/k recurrences for the convergents of the continued fraction of x.
  double h0 = 1.0, h1 = std::floor(x), k0 = 0.0, k1 = 1.0;
  double rem = x - std::floor(x);
  auto consider = [&](double h, double k) {
    const double err = std::abs(x - h / k);
    if (err < best.error) best = {static_cast<std::int64_t>(h), static_cast<std::int64_t>(k), err};
  };
  consider(h1, k1);
  for (int it = 0; it < 64 && rem > 1e-300; ++it) {
    const double inv = 1.0 / rem;
    const double a = std::floor(inv);
    rem = inv - a;
    const double h2 = a * h1 + h0, k2 = a * k1 + k0;
    if (k2 > static_cast<double>(q_max)) break;
    consider(h2, k2);
    h0 = h1;
    h1 = h2;
    k0 = k1;
    k1 = k2;
  }
  return best;
}

struct AperiodicityReport {
  std::vector<double> log_kappas;  // distinct log kappa(w), words with c(w) < 1
  std::size_t words_examined = 0;
  double base = 0.0;  // generator the others are compared against
  struct Ratio {
    double value;
    RationalApproximation approximation;
    bool commensurable;
  };
  std::vector<Ratio> ratios;
  bool aperiodic_evidence = false;
  std::string verdict;
};

inline constexpr std::size_t kMaxAperiodicityWords = 1000000;

/// Heuristic only: log kappa(w) over words up to max_word_len, each
/// compared with the generator of smallest |log kappa| by continued
/// fractions. Any ratio without a convergent p/q (q <= q_max) within
/// tol * max(1, |ratio|) counts as evidence of a dense group.
inline AperiodicityReport aperiodicity_report(const MeasureSpec& spec, int max_word_len,
                                              std::int64_t q_max = 1000, double tol = 1e-9) {
  if (!spec.is_atomic()) throw InvalidInput("aperiodicity_report: atomic spec required");
  if (max_word_len < 1) throw InvalidInput("aperiodicity_report: max_word_len must be >= 1");
  const auto atoms = spec.effective_atoms();
  std::vector<std::size_t> support;
  for (std::size_t i = 0; i < atoms.size(); ++i)
    if (spec.weights[i] > 0.0) support.push_back(i);
  double total = 0.0, layer = 1.0;
  for (int l = 0; l < max_word_len; ++l) {
    layer *= static_cast<double>(support.size());
    total += layer;
  }
  if (total > static_cast<double>(kMaxAperiodicityWords)) {
    throw InvalidInput("aperiodicity_report: " + std::to_string(static_cast<long long>(total)) +
                       " words exceed the enumeration cap; lower max_word_len");
  }
  AperiodicityReport rep;
  std::vector<double> values;
  // Depth-first over words; prefix products are kept normalized with a
  // log scale so long words neither overflow nor underflow.
  struct Frame {
    Matrix m;
    double log_scale;
    int len;
  };
  std::vector<Frame> stack{{Matrix::Identity(spec.d, spec.d), 0.0, 0}};
  while (!stack.empty()) {
    Frame f = std::move(stack.back());
    stack.pop_back();
    if (f.len == max_word_len) continue;
    for (std::size_t a : support) {
      Matrix m = atoms[a].entries() * f.m;
      const double scale = m.maxCoeff();
      m /= scale;
      const double ls = f.log_scale + std::log(scale);
      ++rep.words_examined;
      if ((m.array() > 0.0).all() && detail::contraction_coefficient(m) < 1.0) {
        values.push_back(ls + std::log(detail::spectral_radius(m, Vector::Constant(spec.d, 1.0 / spec.d))));
      }
      stack.push_back({std::move(m), ls, f.len + 1});
    }
  }
  std::sort(values.begin(), values.end());
  for (double v : values) {
    if (rep.log_kappas.empty() || std::abs(v - rep.log_kappas.back()) > 1e-12 * std::max(1.0, std::abs(v)))
      rep.log_kappas.push_back(v);
  }
  double base = 0.0;
  for (double v : rep.log_kappas)
    if (std::abs(v) > 1e-12 && (base == 0.0 || std::abs(v) < std::abs(base))) base = v;
  rep.base = base;
  if (base != 0.0) {
    for (double v : rep.log_kappas) {
      if (std::abs(v) <= 1e-12 || v == base) continue;
      const double ratio = v / base;
      const auto approx = best_convergent(ratio, q_max);
      const bool comm = approx.error <= tol * std::max(1.0, std::abs(ratio));
      rep.ratios.push_back({ratio, approx, comm});
      if (!comm) rep.aperiodic_evidence = true;
    }
  }
  rep.verdict = rep.aperiodic_evidence ? "aperiodic evidence" : "possibly arithmetic";
  return rep;
}

}  // namespace rpm
