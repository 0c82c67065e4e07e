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
#include <limits>
#include <string>
#include <utility>

#include "rpm/allowable_matrix.hpp"
#include "rpm/types.hpp"

namespace rpm {

/// A point of the unit simplex S+ = {x >= 0, |x|_1 = 1}, the projective
/// state of a positive matrix product.
///
/// Coordinates must sum to 1 within 1e-12 on admission; the stored vector is
/// renormalized once so later arithmetic starts from an exact l1 sum.
class SimplexPoint {
 public:
  static constexpr double kNormalizationTolerance = 1e-12;

  explicit SimplexPoint(Vector coords) : coords_(std::move(coords)) {
    validate_entries(coords_);
    const double sum = coords_.sum();
    if (std::abs(sum - 1.0) > kNormalizationTolerance) {
      throw InvalidInput("SimplexPoint: coordinates sum to " + std::to_string(sum) +
                         ", expected 1");
    }
    coords_ /= sum;
  }

  /// Projects any nonnegative nonzero vector onto S+ by l1 normalization.
  static SimplexPoint normalized(const Vector& v) {
    validate_entries(v);
    const double sum = v.sum();
    if (!(sum > 0.0)) throw InvalidInput("SimplexPoint: zero vector has no direction");
    return SimplexPoint(Vector(v / sum), Trusted{});
  }

  static SimplexPoint vertex(int dim, int j) {
    if (j < 0 || j >= dim) throw InvalidInput("SimplexPoint::vertex: index out of range");
    Vector v = Vector::Zero(dim);
    v[j] = 1.0;
    return SimplexPoint(std::move(v), Trusted{});
  }

  /// The barycenter e = (1/d, ..., 1/d).
  static SimplexPoint center(int dim) {
    if (dim < 2) throw InvalidInput("SimplexPoint: dimension must be at least 2");
    return SimplexPoint(Vector::Constant(dim, 1.0 / dim), Trusted{});
  }

  int dim() const { return static_cast<int>(coords_.size()); }
  const Vector& coords() const { return coords_; }
  double operator[](int i) const { return coords_[i]; }

  bool strictly_interior() const { return (coords_.array() > 0.0).all(); }

 private:
  struct Trusted {};
  SimplexPoint(Vector coords, Trusted) : coords_(std::move(coords)) {}

  static void validate_entries(const Vector& v) {
    if (v.size() < 2) throw InvalidInput("SimplexPoint: dimension must be at least 2");
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (!std::isfinite(v[i]) || v[i] < 0.0) {
        throw InvalidInput("SimplexPoint: coordinate " + std::to_string(i) +
                           " is negative or not finite");
      }
    }
  }

  Vector coords_;
};

/// A value of the projective metric d, always in [0, 1].
class MetricValue {
 public:
  constexpr MetricValue() = default;
  explicit MetricValue(double value) : value_(std::clamp(value, 0.0, 1.0)) {}

  constexpr double value() const { return value_; }

  friend constexpr bool operator==(MetricValue a, MetricValue b) { return a.value_ == b.value_; }
  friend constexpr auto operator<=>(MetricValue a, MetricValue b) { return a.value_ <=> b.value_; }

 private:
  double value_ = 0.0;
};

/// phi(s) = (1 - s) / (1 + s) on [0, 1].
inline double phi(double s) {
  s = std::clamp(s, 0.0, 1.0);
  return (1.0 - s) / (1.0 + s);
}

namespace detail {

// inf { u_i / v_i : v_i > 0 } on raw nonnegative vectors.
inline double m_ratio(const Vector& u, const Vector& v) {
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (v[i] > 0.0) best = std::min(best, u[i] / v[i]);
  }
  return best;
}

// d(x, y) on raw nonnegative nonzero vectors; 0-homogeneous in each argument.
inline double hilbert_distance(const Vector& x, const Vector& y) {
  const double product = m_ratio(x, y) * m_ratio(y, x);
  return phi(product);
}

}  // namespace detail

inline double m_ratio(const SimplexPoint& u, const SimplexPoint& v) {
  if (u.dim() != v.dim()) throw InvalidInput("m_ratio: dimension mismatch");
  return detail::m_ratio(u.coords(), v.coords());
}

/// d(x, y) = phi(m(x, y) m(y, x)). Equals 1 exactly when the supports differ.
inline MetricValue hilbert_distance(const SimplexPoint& x, const SimplexPoint& y) {
  if (x.dim() != y.dim()) throw InvalidInput("hilbert_distance: dimension mismatch");
  return MetricValue(detail::hilbert_distance(x.coords(), y.coords()));
}

namespace detail {

inline double contraction_coefficient(const Matrix& g) {
  const auto d = g.rows();
  double best = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index k = i + 1; k < d; ++k) {
      for (Eigen::Index j = 0; j < d; ++j) {
        for (Eigen::Index l = j + 1; l < d; ++l) {
          const double a = g(i, j) * g(k, l);
          const double b = g(i, l) * g(k, j);
          const double den = a + b;
          // Both products vanish: the pair imposes no distortion.
          if (den == 0.0) continue;
          best = std::max(best, std::abs(a - b) / den);
        }
      }
    }
  }
  return std::min(best, 1.0);
}

}  // namespace detail

/// Birkhoff contraction coefficient c(g) = sup d(g.x, g.y), by direct
/// enumeration of the quadruple formula. O(d^4).
///
/// Quadruples with i == k or j == l contribute 0 and the remaining ones are
/// symmetric under (i,k) and (j,l) swaps, so only i < k, j < l are visited.
inline MetricValue contraction_coefficient(const AllowableMatrix& g) {
  return MetricValue(detail::contraction_coefficient(g.entries()));
}

}  // namespace rpm
