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
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rpm/types.hpp"

namespace rpm {

/// A Monte Carlo estimate: the mean of per-replica contributions and its
/// standard error (sample standard deviation / sqrt(replicas)).
struct EstimateWithError {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t replicas = 0;
  std::string method;
};

/// Pairwise (cascade) summation; the result does not depend on how the
/// contributions were produced, only on their order.
inline double pairwise_sum(std::span<const double> xs) {
  if (xs.size() <= 16) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s;
  }
  const std::size_t half = xs.size() / 2;
  return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

inline double mean(std::span<const double> xs) {
  if (xs.empty()) throw InvalidInput("mean: empty sample");
  return pairwise_sum(xs) / static_cast<double>(xs.size());
}

/// Unbiased sample variance.
inline double sample_variance(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  std::vector<double> sq(xs.size());
  std::transform(xs.begin(), xs.end(), sq.begin(), [m](double x) { return (x - m) * (x - m); });
  return pairwise_sum(sq) / static_cast<double>(xs.size() - 1);
}

inline EstimateWithError estimate_from_contributions(std::span<const double> contributions,
                                                     std::string method) {
  EstimateWithError e;
  e.value = mean(contributions);
  e.replicas = contributions.size();
  e.std_error = std::sqrt(sample_variance(contributions) / static_cast<double>(contributions.size()));
  e.method = std::move(method);
  return e;
}

/// Unbiased sample variance of `xs` scaled by 1/scale, with the delta-method
/// standard error: the contributions are ((x_i - mean)^2 R/(R-1)) / scale.
inline EstimateWithError variance_estimate(std::span<const double> xs, double scale, std::string method) {
  if (xs.size() < 2) throw InvalidInput("variance_estimate: need at least two samples");
  const double m = mean(xs);
  const double r = static_cast<double>(xs.size());
  std::vector<double> c(xs.size());
  std::transform(xs.begin(), xs.end(), c.begin(),
                 [&](double x) { return (x - m) * (x - m) * r / (r - 1.0) / scale; });
  return estimate_from_contributions(c, std::move(method));
}

inline double combined_std_error(const EstimateWithError& a, const EstimateWithError& b) {
  return std::hypot(a.std_error, b.std_error);
}

/// |a - b| <= k combined standard errors.
inline bool agree_within(const EstimateWithError& a, const EstimateWithError& b, double k = 3.0) {
  return std::abs(a.value - b.value) <= k * combined_std_error(a, b);
}

/// Standard normal CDF.
inline double normal_cdf(double t) { return 0.5 * std::erfc(-t / std::sqrt(2.0)); }

/// sup_t |F_n(t) - Phi((t - mu) / s)| for the empirical step CDF of `sample`,
/// evaluated exactly at the step corners. Non-finite samples are rejected.
inline double ks_normal(std::vector<double> sample, double mu, double s) {
  if (!(s > 0.0)) throw InvalidInput("ks_normal: scale must be positive");
  if (sample.empty()) throw InvalidInput("ks_normal: empty sample");
  for (double x : sample)
    if (!std::isfinite(x)) throw InvalidInput("ks_normal: non-finite sample");
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double worst = 0.0;
  std::size_t i = 0;
  while (i < sample.size()) {
    std::size_t j = i;
    while (j < sample.size() && sample[j] == sample[i]) ++j;
    const double f = normal_cdf((sample[i] - mu) / s);
    worst = std::max({worst, f - static_cast<double>(i) / n, static_cast<double>(j) / n - f});
    i = j;
  }
  return worst;
}

/// Two-sample KS distance sup_t |F_a(t) - F_b(t)|.
inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw InvalidInput("ks_two_sample: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double worst = 0.0;
  while (i < a.size() || j < b.size()) {
    double t;
    if (j >= b.size() || (i < a.size() && a[i] <= b[j])) {
      t = a[i];
    } else {
      t = b[j];
    }
    while (i < a.size() && a[i] == t) ++i;
    while (j < b.size() && b[j] == t) ++j;
    worst = std::max(worst, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return worst;
}

/// Two-sided 95% Monte Carlo band for a KS distance at R samples.
inline double ks_noise_floor(std::size_t replicas) {
  return 1.36 / std::sqrt(static_cast<double>(replicas));
}

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

/// Ordinary least squares y = intercept + slope x.
inline LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidInput("linear_fit: need >= 2 paired points");
  const double mx = mean(x);
  const double my = mean(y);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LinearFit f;
  f.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  f.intercept = my - f.slope * mx;
  f.r_squared = (sxx > 0.0 && syy > 0.0) ? (sxy * sxy) / (sxx * syy) : 1.0;
  return f;
}

/// Kendall tau between the index order and `values`, counting a pair only
/// when the difference exceeds noise_i + noise_j; ties within noise count
/// as neither concordant nor discordant.
inline double kendall_tau_within_noise(std::span<const double> values, std::span<const double> noise) {
  if (values.size() != noise.size()) throw InvalidInput("kendall_tau_within_noise: size mismatch");
  const std::size_t n = values.size();
  if (n < 2) return 0.0;
  double concordant = 0.0, discordant = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double diff = values[j] - values[i];
      const double band = noise[i] + noise[j];
      if (diff > band) concordant += 1.0;
      if (diff < -band) discordant += 1.0;
    }
  }
  return (concordant - discordant) / (0.5 * static_cast<double>(n * (n - 1)));
}

/// Hill estimator of the tail index from the k largest positive values.
/// A tail P(X > x) ~ x^{-alpha} gives roughly alpha.
inline double hill_tail_index(std::vector<double> xs, std::size_t k) {
  xs.erase(std::remove_if(xs.begin(), xs.end(), [](double x) { return !(x > 0.0) || !std::isfinite(x); }),
           xs.end());
  if (xs.size() <= k || k < 2) return std::numeric_limits<double>::quiet_NaN();
  std::sort(xs.begin(), xs.end(), std::greater<>());
  const double threshold = std::log(xs[k]);
  double acc = 0.0;
  for (std::size_t i = 0; i < k; ++i) acc += std::log(xs[i]) - threshold;
  return static_cast<double>(k) / acc;
}

}  // namespace rpm
