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
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rpm/measure.hpp"
#include "rpm/positive_matrix.hpp"
#include "rpm/random.hpp"
#include "rpm/simplex_geometry.hpp"
#include "rpm/types.hpp"

namespace rpm {

/// Forward products A_n = Y_n ... Y_1 multiply new factors on the left;
/// backward products B_n = Y_1 ... Y_n multiply them on the right.
enum class ProductOrder { kForward, kBackward };

/// Overflow-free running product: a copy normalized to operator norm 1 plus
/// an additive log-scale, so log |A_n| == log_scale exactly.
///
/// Optionally tracks an upper bound on c(A_n) by greedy consecutive blocks:
/// factors accumulate into a block until it is strictly positive, then
/// log c(block) is committed. The bound never increases.
class ProductState {
 public:
  ProductState(int d, ProductOrder order, bool track_contraction = false)
      : order_(order),
        track_contraction_(track_contraction),
        normalized_(Matrix::Identity(d, d)),
        scratch_(d, d),
        column_sums_(Vector::Ones(d)),
        perron_(Vector::Constant(d, 1.0 / d)) {
    if (track_contraction_) block_ = Matrix::Identity(d, d);
  }

  void multiply(const AllowableMatrix& y, std::optional<double> y_contraction = std::nullopt) {
    const Matrix& f = y.entries();
    if (order_ == ProductOrder::kForward) {
      scratch_.noalias() = f * normalized_;
    } else {
      scratch_.noalias() = normalized_ * f;
    }
    column_sums_ = scratch_.colwise().sum().transpose();
    const double scale = column_sums_.maxCoeff();
    normalized_.swap(scratch_);
    normalized_ /= scale;
    column_sums_ /= scale;
    log_scale_ += std::log(scale);
    ++step_;
    if (track_contraction_) update_block(y, y_contraction);
  }

  int dim() const { return static_cast<int>(normalized_.rows()); }
  ProductOrder order() const { return order_; }
  std::int64_t step() const { return step_; }

  /// Product scaled to operator norm 1.
  const Matrix& normalized() const { return normalized_; }
  /// Column sums of `normalized()`; the largest equals 1.
  const Vector& column_sums() const { return column_sums_; }

  double log_scale() const { return log_scale_; }
  double log_norm() const { return log_scale_; }
  double log_v() const { return log_scale_ + std::log(column_sums_.minCoeff()); }

  /// sigma(A_n, x) for x in S+.
  double sigma(const Vector& x) const { return log_scale_ + std::log(column_sums_.dot(x)); }

  /// A_n . x.
  Vector direction(const Vector& x) const {
    Vector y = normalized_ * x;
    y /= y.sum();
    return y;
  }

  /// log <y, A_n x>; -inf when the coefficient vanishes.
  double log_coefficient(const Vector& y, const Vector& x) const {
    return log_scale_ + std::log(y.dot(normalized_ * x));
  }

  /// min over vertex pairs of log <e_i, A_n e_j>, i.e. inf over S+ x S+.
  double log_inf_coefficient() const { return log_scale_ + std::log(normalized_.minCoeff()); }
  double log_sup_coefficient() const { return log_scale_ + std::log(normalized_.maxCoeff()); }

  /// log kappa(A_n); power iteration warm-started from the previous Perron
  /// direction, dense fallback when it does not settle.
  double log_kappa() {
    auto r = detail::power_iteration(normalized_, perron_);
    if (r.converged) {
      perron_ = r.vector;
      return log_scale_ + std::log(r.radius);
    }
    perron_ = Vector::Constant(dim(), 1.0 / dim());
    return log_scale_ + std::log(detail::dense_spectral_radius(normalized_));
  }

  /// log of the committed block bound on c(A_n) (0 until a block closes).
  double contraction_log() const { return contraction_log_; }
  double contraction_bound() const { return std::exp(contraction_log_); }

 private:
  void update_block(const AllowableMatrix& y, std::optional<double> y_contraction) {
    if (block_len_ == 0 && y_contraction) {
      if (*y_contraction < 1.0) {
        contraction_log_ += std::log(*y_contraction);
        return;
      }
    }
    if (order_ == ProductOrder::kForward) {
      block_scratch_.noalias() = y.entries() * block_;
    } else {
      block_scratch_.noalias() = block_ * y.entries();
    }
    block_.swap(block_scratch_);
    block_ /= block_.maxCoeff();
    ++block_len_;
    if ((block_.array() > 0.0).all()) {
      const double c = detail::contraction_coefficient(block_);
      if (c < 1.0) contraction_log_ += std::log(c);
      block_.setIdentity();
      block_len_ = 0;
    }
  }

  ProductOrder order_;
  bool track_contraction_;
  Matrix normalized_;
  Matrix scratch_;
  Vector column_sums_;
  Vector perron_;
  double log_scale_ = 0.0;
  std::int64_t step_ = 0;
  Matrix block_;
  Matrix block_scratch_;
  int block_len_ = 0;
  double contraction_log_ = 0.0;
};

/// What is known about the forward product after step n, per tracked start.
struct StepRecord {
  std::int64_t n = 0;
  std::vector<double> sigma_x;       // sigma(A_n, x)
  double log_norm = 0.0;             // log |A_n|
  double log_v = 0.0;                // log v(A_n)
  std::optional<double> log_kappa;   // log kappa(A_n)
  std::vector<Vector> direction;     // A_n . x
  std::vector<double> increment;     // sigma(Y_n, A_{n-1} . x)
};

struct StreamOptions {
  bool with_kappa = false;
};

/// Streams records 1..n_max of A_n = Y_n ... Y_1 driven by `seed`. The
/// increment is evaluated from the stored previous direction, independently
/// of sigma_x, so the cocycle telescoping can be audited.
inline void forward_stream(const MeasureSpec& spec, std::uint64_t seed, std::int64_t n_max,
                           const std::vector<SimplexPoint>& tracked_starts,
                           const std::function<void(const StepRecord&)>& sink,
                           StreamOptions options = {}) {
  if (n_max < 1) throw InvalidInput("forward_stream: n_max must be >= 1");
  if (tracked_starts.empty()) throw InvalidInput("forward_stream: at least one start is required");
  for (const auto& x : tracked_starts) {
    if (x.dim() != spec.d) throw InvalidInput("forward_stream: start dimension differs from d");
  }
  MeasureSampler sampler(spec);
  RandomStream stream(seed);
  ProductState state(spec.d, ProductOrder::kForward);
  const std::size_t k = tracked_starts.size();
  StepRecord rec;
  rec.sigma_x.resize(k);
  rec.increment.resize(k);
  rec.direction.reserve(k);
  for (const auto& x : tracked_starts) rec.direction.push_back(x.coords());
  for (std::int64_t n = 1; n <= n_max; ++n) {
    const AllowableMatrix& y = sampler.draw(stream);
    for (std::size_t s = 0; s < k; ++s) {
      rec.increment[s] = std::log(y.column_sums().dot(rec.direction[s]));
    }
    state.multiply(y);
    rec.n = n;
    for (std::size_t s = 0; s < k; ++s) {
      rec.sigma_x[s] = state.sigma(tracked_starts[s].coords());
      rec.direction[s] = state.direction(tracked_starts[s].coords());
    }
    rec.log_norm = state.log_norm();
    rec.log_v = state.log_v();
    if (options.with_kappa) {
      rec.log_kappa = state.log_kappa();
    } else {
      rec.log_kappa.reset();
    }
    sink(rec);
  }
}

inline std::vector<StepRecord> forward_stream(const MeasureSpec& spec, std::uint64_t seed,
                                              std::int64_t n_max,
                                              const std::vector<SimplexPoint>& tracked_starts,
                                              StreamOptions options = {}) {
  std::vector<StepRecord> out;
  out.reserve(static_cast<std::size_t>(n_max));
  forward_stream(
      spec, seed, n_max, tracked_starts, [&](const StepRecord& r) { out.push_back(r); }, options);
  return out;
}

/// A draw from (approximately) the invariant measure nu.
struct InvariantSample {
  SimplexPoint point = SimplexPoint::center(2);
  // Bound on d(B_n . x, B_n . y) for all x, y in S+.
  double certificate = 1.0;
  std::int64_t steps = 0;
};

inline constexpr std::int64_t kBackwardStepCap = 1000000;

namespace detail {

inline InvariantSample backward_draw(MeasureSampler& sampler, RandomStream& stream, double tol,
                                     const Vector& start) {
  const int d = sampler.spec().d;
  ProductState state(d, ProductOrder::kBackward, /*track_contraction=*/true);
  while (state.contraction_bound() > tol) {
    if (state.step() >= kBackwardStepCap) {
      throw std::runtime_error(
          "backward_invariant_sample: contraction bound " + std::to_string(state.contraction_bound()) +
          " after " + std::to_string(state.step()) +
          " steps; the law may not be strictly contracting");
    }
    const AllowableMatrix& y = sampler.draw(stream);
    state.multiply(y, sampler.last_contraction());
  }
  InvariantSample out;
  out.point = SimplexPoint::normalized(state.direction(start));
  out.certificate = state.contraction_bound();
  out.steps = state.step();
  return out;
}

}  // namespace detail

/// Iterates B_n . x with B_n = Y_1 ... Y_n until the block bound on c(B_n)
/// is at most tol. Every start is then within `certificate` of the limit
/// point in d, so the returned point has the law of nu up to that error.
inline InvariantSample backward_invariant_sample(const MeasureSpec& spec, std::uint64_t seed, double tol,
                                                 const SimplexPoint& start) {
  if (!(tol > 0.0 && tol <= 1.0)) throw InvalidInput("backward_invariant_sample: tol must be in (0,1]");
  if (start.dim() != spec.d) throw InvalidInput("backward_invariant_sample: start dimension differs from d");
  MeasureSampler sampler(spec);
  RandomStream stream(seed);
  return detail::backward_draw(sampler, stream, tol, start.coords());
}

inline InvariantSample backward_invariant_sample(const MeasureSpec& spec, std::uint64_t seed, double tol) {
  return backward_invariant_sample(spec, seed, tol, SimplexPoint::center(spec.d));
}

/// `count` independent draws from nu; draw i uses replica stream i of `seed`.
inline std::vector<SimplexPoint> sample_invariant(const MeasureSpec& spec, std::size_t count,
                                                  std::uint64_t seed, double tol, int threads = 0) {
  std::vector<SimplexPoint> out(count, SimplexPoint::center(spec.d));
  const Vector e = SimplexPoint::center(spec.d).coords();
  for_each_replica(count, threads, [&](std::size_t i) {
    MeasureSampler sampler(spec);
    RandomStream stream(replica_seed(seed, i));
    out[i] = detail::backward_draw(sampler, stream, tol, e).point;
  });
  return out;
}

struct ContractionWitness {
  int r = 0;
  // Empirical mu^{*r}(G+).
  double frequency = 0.0;
};

/// Smallest r <= r_max such that some of `samples` products of length r is
/// strictly positive. nullopt is inconclusive, not a disproof.
inline std::optional<ContractionWitness> detect_contraction(const MeasureSpec& spec, int r_max,
                                                            std::size_t samples, std::uint64_t seed) {
  if (r_max < 1) throw InvalidInput("detect_contraction: r_max must be >= 1");
  if (samples < 1) throw InvalidInput("detect_contraction: samples must be >= 1");
  MeasureSampler sampler(spec);
  for (int r = 1; r <= r_max; ++r) {
    RandomStream stream(replica_seed(seed, static_cast<std::uint64_t>(r), 0xC0));
    std::size_t hits = 0;
    for (std::size_t s = 0; s < samples; ++s) {
      ProductState state(spec.d, ProductOrder::kForward);
      for (int k = 0; k < r; ++k) state.multiply(sampler.draw(stream));
      if ((state.normalized().array() > 0.0).all()) ++hits;
    }
    if (hits > 0) return ContractionWitness{r, static_cast<double>(hits) / static_cast<double>(samples)};
  }
  return std::nullopt;
}

inline constexpr std::int64_t kHittingBlockCap = 1000000;

/// First block index m with Y_{mr} ... Y_{(m-1)r+1} in G_delta, or nullopt
/// if no block hits within the cap.
inline std::optional<std::int64_t> hitting_time(const MeasureSpec& spec, std::uint64_t seed, double delta,
                                                int block_len) {
  if (!(delta > 0.0 && delta <= 1.0)) throw InvalidInput("hitting_time: delta must be in (0,1]");
  if (block_len < 1) throw InvalidInput("hitting_time: block length must be >= 1");
  MeasureSampler sampler(spec);
  RandomStream stream(seed);
  for (std::int64_t m = 1; m <= kHittingBlockCap; ++m) {
    ProductState block(spec.d, ProductOrder::kForward);
    for (int k = 0; k < block_len; ++k) block.multiply(sampler.draw(stream));
    if (classify_G_delta(AllowableMatrix(block.normalized()), delta)) return m;
  }
  return std::nullopt;
}

}  // namespace rpm
