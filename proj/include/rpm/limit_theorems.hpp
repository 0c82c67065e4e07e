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

#include "rpm/estimators.hpp"
#include "rpm/measure.hpp"
#include "rpm/random.hpp"
#include "rpm/random_walk.hpp"
#include "rpm/simplex_geometry.hpp"
#include "rpm/statistics.hpp"
#include "rpm/types.hpp"

namespace rpm {

namespace stream_tag {
inline constexpr std::uint64_t kFunctionals = 0x21;
inline constexpr std::uint64_t kAsip = 0x22;
inline constexpr std::uint64_t kDeviation = 0x23;
inline constexpr std::uint64_t kFixture = 0x24;
}  // namespace stream_tag

enum class Functional { kSigma, kNorm, kV, kKappa, kCoeff, kInfCoeff };

inline std::string functional_name(Functional f) {
  switch (f) {
    case Functional::kSigma: return "sigma";
    case Functional::kNorm: return "norm";
    case Functional::kV: return "v";
    case Functional::kKappa: return "kappa";
    case Functional::kCoeff: return "coeff";
    case Functional::kInfCoeff: return "inf_coeff";
  }
  return "unknown";
}

inline Functional parse_functional(const std::string& s) {
  for (auto f : {Functional::kSigma, Functional::kNorm, Functional::kV, Functional::kKappa, Functional::kCoeff,
                 Functional::kInfCoeff}) {
    if (functional_name(f) == s) return f;
  }
  throw InvalidInput("unknown functional '" + s + "' (sigma, norm, v, kappa, coeff, inf_coeff)");
}

inline const std::vector<Functional>& all_functionals() {
  static const std::vector<Functional> all{Functional::kSigma, Functional::kNorm,  Functional::kV,
                                           Functional::kKappa, Functional::kCoeff, Functional::kInfCoeff};
  return all;
}

/// Start x and test vector y for sigma and the coefficient functional.
struct FunctionalPoints {
  Vector x;
  Vector y;

  static FunctionalPoints centred(int d) {
    return {SimplexPoint::center(d).coords(), SimplexPoint::center(d).coords()};
  }
};

/// Values f(A_n) for each functional and grid point, one path per replica.
struct FunctionalSamples {
  std::vector<Functional> functionals;
  std::vector<std::int64_t> grid;
  std::size_t replicas = 0;
  std::vector<double> values;  // [functional][grid][replica]
  // Per-sample breaches of log v <= log kappa <= log |A_n| and
  // inf_coeff <= log |A_n| (only checked for the requested functionals).
  std::size_t ordering_violations = 0;

  std::span<const double> at(std::size_t f, std::size_t g) const {
    return std::span<const double>(values).subspan((f * grid.size() + g) * replicas, replicas);
  }
  std::optional<std::size_t> index_of(Functional f) const {
    for (std::size_t i = 0; i < functionals.size(); ++i)
      if (functionals[i] == f) return i;
    return std::nullopt;
  }
};

inline FunctionalSamples sample_functionals(const MeasureSpec& spec, std::vector<Functional> functionals,
                                            std::vector<std::int64_t> grid, std::size_t replicas,
                                            std::uint64_t seed, const FunctionalPoints& pts, int threads = 0) {
  if (functionals.empty() || grid.empty() || replicas < 1) {
    throw InvalidInput("sample_functionals: need functionals, grid and replicas");
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  if (grid.front() < 1) throw InvalidInput("sample_functionals: grid entries must be >= 1");
  if (pts.x.size() != spec.d || pts.y.size() != spec.d) throw InvalidInput("sample_functionals: bad x or y");
  FunctionalSamples out;
  out.functionals = functionals;
  out.grid = grid;
  out.replicas = replicas;
  const std::size_t nf = functionals.size(), ng = grid.size();
  out.values.assign(nf * ng * replicas, 0.0);
  std::vector<std::size_t> violations(replicas, 0);
  for_each_replica(replicas, threads, [&](std::size_t r) {
    MeasureSampler sampler(spec);
    RandomStream stream(replica_seed(seed, r, stream_tag::kFunctionals));
    ProductState state(spec.d, ProductOrder::kForward);
    std::size_t next = 0;
    for (std::int64_t n = 1; next < ng; ++n) {
      state.multiply(sampler.draw(stream));
      if (n != grid[next]) continue;
      const double ln = state.log_norm(), lv = state.log_v();
      const double slack = 1e-9 * std::max(1.0, std::abs(ln));
      for (std::size_t f = 0; f < nf; ++f) {
        double val = 0.0;
        switch (functionals[f]) {
          case Functional::kSigma: val = state.sigma(pts.x); break;
          case Functional::kNorm: val = ln; break;
          case Functional::kV: val = lv; break;
          case Functional::kKappa:
            val = state.log_kappa();
            if (val > ln + slack || val < lv - slack) ++violations[r];
            break;
          case Functional::kCoeff: val = state.log_coefficient(pts.y, pts.x); break;
          case Functional::kInfCoeff:
            val = state.log_inf_coefficient();
            if (val > ln + slack) ++violations[r];
            break;
        }
        out.values[(f * ng + next) * replicas + r] = val;
      }
      ++next;
    }
  });
  for (auto v : violations) out.ordering_violations += v;
  return out;
}

// ---------------------------------------------------------------------------
// Normality and Berry-Esseen rates.

struct NormalityReport {
  std::int64_t n = 0;
  Functional functional = Functional::kSigma;
  double ks_distance = 0.0;
  std::size_t replicas = 0;  // finite samples used
  double s_used = 0.0;
  double lambda_used = 0.0;
  std::size_t neg_inf = 0;  // vanishing coefficients, excluded from the CDF
};

/// KS distance of Z = (f - n lambda) / sqrt(n) against Phi(t / s).
inline NormalityReport normality_from_values(std::span<const double> values, std::int64_t n, Functional f,
                                             double lambda, double s) {
  if (!(s > 0.0)) throw InvalidInput("empirical_normality: s must be > 0");
  NormalityReport rep;
  rep.n = n;
  rep.functional = f;
  rep.s_used = s;
  rep.lambda_used = lambda;
  std::vector<double> z;
  z.reserve(values.size());
  const double rn = std::sqrt(static_cast<double>(n));
  for (double v : values) {
    if (std::isinf(v) && v < 0.0) {
      ++rep.neg_inf;
      continue;
    }
    z.push_back((v - static_cast<double>(n) * lambda) / rn);
  }
  rep.replicas = z.size();
  rep.ks_distance = z.empty() ? 1.0 : ks_normal(std::move(z), 0.0, s);
  return rep;
}

inline NormalityReport empirical_normality(const MeasureSpec& spec, Functional f, std::int64_t n,
                                           std::size_t replicas, double lambda, double s, std::uint64_t seed,
                                           const FunctionalPoints& pts, int threads = 0) {
  if (!(s > 0.0)) throw InvalidInput("empirical_normality: s must be > 0");
  const auto samples = sample_functionals(spec, {f}, {n}, replicas, seed, pts, threads);
  return normality_from_values(samples.at(0, 0), n, f, lambda, s);
}

struct RateFit {
  Functional functional = Functional::kSigma;
  double p = 3.0;
  double target = 0.5;  // p/2 - 1
  std::vector<std::int64_t> grid;
  std::vector<double> ks;
  std::vector<double> scaled;  // ks * n^target
  std::vector<std::size_t> neg_inf;
  double slope = 0.0;  // of log scaled against log n
  double tau = 0.0;    // noise-aware Kendall tau of scaled against n
  double lambda = 0.0;
  double s = 0.0;
  double noise_floor = 0.0;
  std::string verdict;  // pass | fail | degenerate

  const std::vector<double>& values() const { return scaled; }
};

struct BerryEsseenResult {
  std::vector<RateFit> fits;
  MomentCheck moments;
  std::size_t ordering_violations = 0;
};

/// lambda and s are the direct estimates at the largest grid point, from
/// the sigma functional on the same paths.
inline BerryEsseenResult berry_esseen_from_samples(const FunctionalSamples& samples, double p,
                                                   std::optional<MomentCheck> moments = std::nullopt) {
  BerryEsseenResult res;
  res.ordering_violations = samples.ordering_violations;
  if (moments) res.moments = *moments;
  const std::size_t ng = samples.grid.size();
  const auto fs = samples.index_of(Functional::kSigma);
  if (!fs) throw InvalidInput("berry_esseen_fit: the sigma functional is required for lambda and s");
  const double nmax = static_cast<double>(samples.grid.back());
  const auto last = samples.at(*fs, ng - 1);
  std::vector<double> scaled(last.begin(), last.end());
  const double lambda = mean(scaled) / nmax;
  const double s2 = sample_variance(scaled) / nmax;
  const double s = std::sqrt(std::max(0.0, s2));
  const bool degenerate = !(s > 1e-10 * std::max(1.0, std::abs(lambda)));
  const double target = p / 2.0 - 1.0;
  const double floor = ks_noise_floor(samples.replicas);
  for (std::size_t f = 0; f < samples.functionals.size(); ++f) {
    RateFit fit;
    fit.functional = samples.functionals[f];
    fit.p = p;
    fit.target = target;
    fit.grid = samples.grid;
    fit.lambda = lambda;
    fit.s = s;
    fit.noise_floor = floor;
    if (degenerate) {
      fit.verdict = "degenerate";
      res.fits.push_back(std::move(fit));
      continue;
    }
    std::vector<double> logn, logv, noise;
    for (std::size_t g = 0; g < ng; ++g) {
      const auto rep = normality_from_values(samples.at(f, g), samples.grid[g], fit.functional, lambda, s);
      const double w = std::pow(static_cast<double>(samples.grid[g]), target);
      fit.ks.push_back(rep.ks_distance);
      fit.scaled.push_back(rep.ks_distance * w);
      fit.neg_inf.push_back(rep.neg_inf);
      noise.push_back(floor * w);
      logn.push_back(std::log(static_cast<double>(samples.grid[g])));
      logv.push_back(std::log(std::max(rep.ks_distance * w, 1e-300)));
    }
    if (ng >= 2) fit.slope = linear_fit(logn, logv).slope;
    fit.tau = kendall_tau_within_noise(fit.scaled, noise);
    fit.verdict = fit.tau <= 0.0 ? "pass" : "fail";
    if (moments && !moments->stable) fit.verdict = "fail";
    res.fits.push_back(std::move(fit));
  }
  return res;
}

inline BerryEsseenResult berry_esseen_fit(const MeasureSpec& spec, std::vector<Functional> functionals, double p,
                                          std::vector<std::int64_t> grid, std::size_t replicas, std::uint64_t seed,
                                          const FunctionalPoints& pts, int threads = 0) {
  if (!(p > 2.0)) throw InvalidInput("berry_esseen_fit: p must exceed 2");
  if (std::find(functionals.begin(), functionals.end(), Functional::kSigma) == functionals.end()) {
    functionals.insert(functionals.begin(), Functional::kSigma);
  }
  const MomentCheck moments = moment_sanity(spec, p, 10000, seed);
  const auto samples = sample_functionals(spec, functionals, std::move(grid), replicas, seed, pts, threads);
  return berry_esseen_from_samples(samples, p, moments);
}

// ---------------------------------------------------------------------------
// ASIP proxy.

namespace detail {

/// Upper and lower convex hulls of (k, S_k) fed in increasing k, so that
/// max_k (S_k - k lambda) and min_k (S_k - k lambda) can be read off for a
/// lambda chosen after the path is gone.
class PathHull {
 public:
  void add(double k, double s) {
    push(upper_, k, s, /*upper=*/true);
    push(lower_, k, s, /*upper=*/false);
  }

  double max_abs_deviation(double lambda) const {
    double hi = -std::numeric_limits<double>::infinity();
    double lo = std::numeric_limits<double>::infinity();
    for (const auto& [k, s] : upper_) hi = std::max(hi, s - k * lambda);
    for (const auto& [k, s] : lower_) lo = std::min(lo, s - k * lambda);
    return std::max(std::abs(hi), std::abs(lo));
  }

 private:
  using Point = std::pair<double, double>;

  static void push(std::vector<Point>& h, double k, double s, bool upper) {
    while (h.size() >= 2) {
      const auto& [k1, s1] = h[h.size() - 2];
      const auto& [k2, s2] = h[h.size() - 1];
      const double cross = (k2 - k1) * (s - s1) - (s2 - s1) * (k - k1);
      if ((upper && cross >= 0.0) || (!upper && cross <= 0.0)) {
        h.pop_back();
      } else {
        break;
      }
    }
    h.emplace_back(k, s);
  }

  std::vector<Point> upper_;
  std::vector<Point> lower_;
};

}  // namespace detail

struct AsipReport {
  std::string tag = "property proxy";
  std::int64_t n = 0;
  std::size_t replicas = 0;
  double lambda = 0.0;
  double s = 0.0;
  double epsilon = 0.2;
  // max_{k<=n} |f_k - k lambda| / sqrt(2 s^2 n log log n) per replica.
  std::vector<double> statistic;
  std::vector<double> statistic_coeff;
  double fraction_within = 0.0;
  double fraction_within_coeff = 0.0;
  struct Block {
    std::int64_t length;
    std::size_t count;
    double ks;
  };
  std::vector<Block> blocks;  // normality of dyadic block increments
  std::string verdict;
};

/// Law-of-iterated-logarithm envelope and block normality; not a coupling.
/// lambda is re-estimated from the same paths; s^2 is supplied.
inline AsipReport asip_proxy(const MeasureSpec& spec, std::int64_t n, std::size_t replicas, double s2,
                             std::uint64_t seed, const FunctionalPoints& pts, double epsilon = 0.2,
                             int threads = 0) {
  if (n < 16 || replicas < 1) throw InvalidInput("asip_proxy: need n >= 16 and replicas >= 1");
  if (!(s2 > 0.0)) throw InvalidInput("asip_proxy: s^2 must be > 0");
  std::vector<std::int64_t> lengths;
  for (std::int64_t len = 256; len * 8 <= n; len *= 4) lengths.push_back(len);
  std::vector<detail::PathHull> hulls(replicas), hulls_c(replicas);
  std::vector<double> final_sigma(replicas);
  std::vector<std::vector<std::vector<double>>> block_sums(replicas, std::vector<std::vector<double>>(lengths.size()));
  for_each_replica(replicas, threads, [&](std::size_t r) {
    MeasureSampler sampler(spec);
    RandomStream stream(replica_seed(seed, r, stream_tag::kAsip));
    ProductState state(spec.d, ProductOrder::kForward);
    std::vector<double> last_mark(lengths.size(), 0.0);
    for (std::int64_t k = 1; k <= n; ++k) {
      state.multiply(sampler.draw(stream));
      const double s = state.sigma(pts.x);
      hulls[r].add(static_cast<double>(k), s);
      hulls_c[r].add(static_cast<double>(k), state.log_coefficient(pts.y, pts.x));
      for (std::size_t b = 0; b < lengths.size(); ++b) {
        if (k % lengths[b] == 0) {
          block_sums[r][b].push_back(s - last_mark[b]);
          last_mark[b] = s;
        }
      }
    }
    final_sigma[r] = state.sigma(pts.x);
  });
  AsipReport rep;
  rep.n = n;
  rep.replicas = replicas;
  rep.epsilon = epsilon;
  rep.s = std::sqrt(s2);
  rep.lambda = mean(final_sigma) / static_cast<double>(n);
  const double nd = static_cast<double>(n);
  const double denom = std::sqrt(2.0 * s2 * nd * std::log(std::log(nd)));
  std::size_t within = 0, within_c = 0;
  for (std::size_t r = 0; r < replicas; ++r) {
    rep.statistic.push_back(hulls[r].max_abs_deviation(rep.lambda) / denom);
    rep.statistic_coeff.push_back(hulls_c[r].max_abs_deviation(rep.lambda) / denom);
    if (rep.statistic.back() <= 1.0 + epsilon) ++within;
    if (rep.statistic_coeff.back() <= 1.0 + epsilon) ++within_c;
  }
  rep.fraction_within = static_cast<double>(within) / static_cast<double>(replicas);
  rep.fraction_within_coeff = static_cast<double>(within_c) / static_cast<double>(replicas);
  for (std::size_t b = 0; b < lengths.size(); ++b) {
    std::vector<double> z;
    const double len = static_cast<double>(lengths[b]);
    for (std::size_t r = 0; r < replicas; ++r) {
      for (double v : block_sums[r][b]) z.push_back((v - len * rep.lambda) / std::sqrt(len));
    }
    rep.blocks.push_back({lengths[b], z.size(), z.empty() ? 1.0 : ks_normal(std::move(z), 0.0, rep.s)});
  }
  rep.verdict = (rep.fraction_within >= 0.95 && rep.fraction_within_coeff >= 0.95) ? "pass" : "fail";
  return rep;
}

// ---------------------------------------------------------------------------
// Deviation tail sums.

struct DeviationReport {
  double alpha = 1.0, p = 2.0, epsilon = 0.5;
  std::int64_t n_max = 0;
  std::size_t replicas = 0;
  double lambda = 0.0;
  // Index n - 1 holds n.
  std::vector<double> probability;  // P(max_{k<=n} |sigma(A_k, x) - k lambda| >= n^alpha eps)
  std::vector<double> partial_sum;  // sum_{m<=n} m^{alpha p - 2} probability(m)
  std::vector<double> probability_coeff;  // P(|log <y, A_n x> - n lambda| >= n^alpha eps)
  std::vector<double> partial_sum_coeff;
  double floor = 0.0;  // increment equivalent of 3 / replicas at n_max
  double final_increment = 0.0;
  double final_increment_coeff = 0.0;
  std::string verdict;
};

inline constexpr std::size_t kMaxDeviationStorage = 50000000;

inline DeviationReport deviation_tail_sums(const MeasureSpec& spec, double alpha, double p, double epsilon,
                                           std::int64_t n_max, std::size_t replicas, std::uint64_t seed,
                                           const FunctionalPoints& pts, int threads = 0) {
  if (!(alpha > 0.5 && alpha <= 1.0)) throw InvalidInput("deviation_tail_sums: alpha must be in (1/2, 1]");
  if (!(alpha * p >= 1.0)) throw InvalidInput("deviation_tail_sums: alpha must be >= 1/p");
  if (!(epsilon > 0.0) || n_max < 1 || replicas < 1) throw InvalidInput("deviation_tail_sums: bad sizes");
  const auto n = static_cast<std::size_t>(n_max);
  if (n * replicas > kMaxDeviationStorage) throw InvalidInput("deviation_tail_sums: n_max * replicas too large");
  std::vector<double> sig(n * replicas), coef(n * replicas);
  for_each_replica(replicas, threads, [&](std::size_t r) {
    MeasureSampler sampler(spec);
    RandomStream stream(replica_seed(seed, r, stream_tag::kDeviation));
    ProductState state(spec.d, ProductOrder::kForward);
    for (std::size_t k = 0; k < n; ++k) {
      state.multiply(sampler.draw(stream));
      sig[r * n + k] = state.sigma(pts.x);
      coef[r * n + k] = state.log_coefficient(pts.y, pts.x);
    }
  });
  DeviationReport rep;
  rep.alpha = alpha;
  rep.p = p;
  rep.epsilon = epsilon;
  rep.n_max = n_max;
  rep.replicas = replicas;
  std::vector<double> last(replicas);
  for (std::size_t r = 0; r < replicas; ++r) last[r] = sig[r * n + n - 1];
  rep.lambda = mean(last) / static_cast<double>(n_max);
  std::vector<std::size_t> hits(n, 0), hits_c(n, 0);
  for (std::size_t r = 0; r < replicas; ++r) {
    double running = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double kk = static_cast<double>(k + 1);
      const double threshold = std::pow(kk, alpha) * epsilon;
      running = std::max(running, std::abs(sig[r * n + k] - kk * rep.lambda));
      if (running >= threshold) ++hits[k];
      if (std::abs(coef[r * n + k] - kk * rep.lambda) >= threshold) ++hits_c[k];
    }
  }
  double acc = 0.0, acc_c = 0.0;
  const double rd = static_cast<double>(replicas);
  for (std::size_t k = 0; k < n; ++k) {
    const double w = std::pow(static_cast<double>(k + 1), alpha * p - 2.0);
    rep.probability.push_back(static_cast<double>(hits[k]) / rd);
    rep.probability_coeff.push_back(static_cast<double>(hits_c[k]) / rd);
    acc += w * rep.probability.back();
    acc_c += w * rep.probability_coeff.back();
    rep.partial_sum.push_back(acc);
    rep.partial_sum_coeff.push_back(acc_c);
  }
  const double w_last = std::pow(static_cast<double>(n_max), alpha * p - 2.0);
  rep.floor = w_last * 3.0 / rd;
  rep.final_increment = w_last * rep.probability.back();
  rep.final_increment_coeff = w_last * rep.probability_coeff.back();
  rep.verdict = (rep.final_increment <= rep.floor && rep.final_increment_coeff <= rep.floor) ? "pass" : "fail";
  return rep;
}

// ---------------------------------------------------------------------------
// Coefficient-versus-norm gap, checked pathwise on short paths.

/// For a path Y_1..Y_n with Y_m in G_{1/n0} (block length 1):
///   inf_{x,y} (log <y, A_n x> - log |A_n x|)
///     >= -log n0 + min_{m <= l <= n-1} (log v(S_l) - log |S_l|),
/// S_l = Y_{l+1}^t ... Y_n^t. Returns (lhs, rhs).
inline std::pair<double, double> coefficient_gap(const std::vector<AllowableMatrix>& path, std::size_t m,
                                                 double n0) {
  const std::size_t n = path.size();
  if (m < 1 || m >= n) throw InvalidInput("coefficient_gap: need 1 <= m < n");
  Matrix a = Matrix::Identity(path[0].dim(), path[0].dim());
  for (const auto& y : path) {
    a = y.entries() * a;
    a /= a.maxCoeff();
  }
  double lhs = std::numeric_limits<double>::infinity();
  const Vector cols = a.colwise().sum().transpose();
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) lhs = std::min(lhs, std::log(a(i, j)) - std::log(cols[j]));
  double best = std::numeric_limits<double>::infinity();
  Matrix suffix = Matrix::Identity(a.rows(), a.cols());
  // l runs down from n - 1 to m; S_l = S_{l+1} Y_{l+1}^t, with path[l] = Y_{l+1}.
  for (std::size_t l = n; l-- > m;) {
    suffix = path[l].entries().transpose() * suffix;
    suffix /= suffix.maxCoeff();
    const Vector cs = suffix.colwise().sum().transpose();
    best = std::min(best, std::log(cs.minCoeff()) - std::log(cs.maxCoeff()));
  }
  return {lhs, -std::log(n0) + best};
}

}  // namespace rpm
