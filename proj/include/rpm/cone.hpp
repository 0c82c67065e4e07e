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
#include <concepts>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "rpm/allowable_matrix.hpp"
#include "rpm/positive_matrix.hpp"
#include "rpm/random.hpp"
#include "rpm/simplex_geometry.hpp"
#include "rpm/types.hpp"

// Closed solid cones K with a base functional x0* in int(K*) and a base
// point x0 in int(K), <x0*, x0> = 1. The slice S+ = {x in K : <x0*, x> = 1}
// plays the role of the simplex; the orthant with x0* = (1, ..., 1) recovers
// it exactly.

namespace rpm {

namespace detail {

inline double eigen_min(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

inline Eigen::VectorXd eigenvalues_sym(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

inline Vector unit_gaussian(RandomStream& rng, int n) {
  Vector v(n);
  for (;;) {
    for (int i = 0; i < n; ++i) v[i] = rng.normal();
    const double norm = v.norm();
    if (norm > 1e-12) return v / norm;
  }
}

}  // namespace detail

/// The nonnegative orthant of R^d with x0* = (1, ..., 1), x0 = e.
class OrthantCone {
 public:
  explicit OrthantCone(int d) : d_(d) {
    if (d < 1) throw InvalidInput("OrthantCone: dimension must be positive");
    base_functional_ = Vector::Ones(d);
    base_point_ = Vector::Constant(d, 1.0 / d);
  }

  std::string name() const { return "orthant:" + std::to_string(d_); }
  int ambient_dim() const { return d_; }
  const Vector& base_functional() const { return base_functional_; }
  const Vector& base_point() const { return base_point_; }

  bool contains(const Vector& x) const { return (x.array() >= 0.0).all(); }
  bool interior(const Vector& x) const { return (x.array() > 0.0).all(); }

  std::optional<double> m_closed(const Vector& x, const Vector& y) const { return detail::m_ratio(x, y); }

  /// sup over 0 <= x* <= x0* of |<x*, x>|.
  double monotone_norm(const Vector& x) const {
    return std::max(x.cwiseMax(0.0).sum(), (-x).cwiseMax(0.0).sum());
  }

  std::pair<double, double> slice_extrema(const Vector& w) const { return {w.minCoeff(), w.maxCoeff()}; }

  Vector sample_slice(RandomStream& rng) const {
    Vector x(d_);
    for (int i = 0; i < d_; ++i) x[i] = rng.exponential();
    return x / x.sum();
  }

  Vector sample_boundary(RandomStream& rng) const {
    Vector x = sample_slice(rng);
    const int zeros = 1 + static_cast<int>(rng.uniform() * (d_ - 1));
    for (int k = 0; k < zeros; ++k) x[static_cast<int>(rng.uniform() * d_)] = 0.0;
    if (!(x.sum() > 0.0)) x[static_cast<int>(rng.uniform() * d_)] = 1.0;
    return x / x.sum();
  }

  Vector sample_dual_cap(RandomStream& rng) const {
    Vector v(d_);
    for (int i = 0; i < d_; ++i) v[i] = rng.uniform();
    return v;
  }

  /// Vertices of the slice.
  std::vector<Vector> extreme_points() const {
    std::vector<Vector> out;
    for (int j = 0; j < d_; ++j) out.push_back(SimplexPoint::vertex(d_, j).coords());
    return out;
  }

 private:
  int d_;
  Vector base_functional_;
  Vector base_point_;
};

/// The Lorentz cone {(x_1..x_n, z) : z >= |(x_1..x_n)|_2} with
/// x0* = x0 = (0, ..., 0, 1).
class LorentzCone {
 public:
  static constexpr double kTolerance = 1e-12;

  explicit LorentzCone(int n) : n_(n) {
    if (n < 1) throw InvalidInput("LorentzCone: n must be positive");
    base_functional_ = Vector::Zero(n + 1);
    base_functional_[n] = 1.0;
    base_point_ = base_functional_;
  }

  std::string name() const { return "lorentz:" + std::to_string(n_); }
  int ambient_dim() const { return n_ + 1; }
  const Vector& base_functional() const { return base_functional_; }
  const Vector& base_point() const { return base_point_; }

  double margin(const Vector& x) const { return x[n_] - x.head(n_).norm(); }
  bool contains(const Vector& x) const { return margin(x) >= -kTolerance * (1.0 + std::abs(x[n_])); }
  bool interior(const Vector& x) const { return margin(x) > kTolerance * (1.0 + std::abs(x[n_])); }

  /// No closed form is used for m; callers bisect on membership.
  std::optional<double> m_closed(const Vector&, const Vector&) const { return std::nullopt; }

  /// The dual cap {(v, t) : |v| <= min(t, 1 - t)} has extreme points 0, x0*
  /// and the sphere t = 1/2, |v| = 1/2, so the supremum is closed-form.
  double monotone_norm(const Vector& x) const {
    auto one_sided = [this](const Vector& w) {
      const double z = w[n_];
      return std::max({0.0, z, 0.5 * (z + w.head(n_).norm())});
    };
    return std::max(one_sided(x), one_sided(Vector(-x)));
  }

  std::pair<double, double> slice_extrema(const Vector& w) const {
    const double r = w.head(n_).norm();
    return {w[n_] - r, w[n_] + r};
  }

  Vector sample_slice(RandomStream& rng) const {
    Vector x(n_ + 1);
    const double radius = std::pow(rng.uniform(), 1.0 / n_);
    x.head(n_) = detail::unit_gaussian(rng, n_) * radius;
    x[n_] = 1.0;
    return x;
  }

  Vector sample_boundary(RandomStream& rng) const {
    Vector x(n_ + 1);
    x.head(n_) = detail::unit_gaussian(rng, n_);
    x[n_] = 1.0;
    return x;
  }

  Vector sample_dual_cap(RandomStream& rng) const {
    Vector v(n_ + 1);
    const double t = rng.uniform();
    const double radius = std::min(t, 1.0 - t) * std::pow(rng.uniform(), 1.0 / n_);
    v.head(n_) = detail::unit_gaussian(rng, n_) * radius;
    v[n_] = t;
    return v;
  }

  std::vector<Vector> extreme_points() const { return {}; }

 private:
  int n_;
  Vector base_functional_;
  Vector base_point_;
};

/// Positive semi-definite n x n matrices inside the symmetric matrices with
/// the Frobenius inner product. Coordinates use the orthonormal basis
/// {E_ii} U {(E_ij + E_ji)/sqrt 2, i < j}, row by row, so the Euclidean dot
/// product of coordinates is the trace inner product. x0* = I, x0 = I/n.
class PsdCone {
 public:
  static constexpr double kTolerance = 1e-12;

  explicit PsdCone(int n) : n_(n) {
    if (n < 1) throw InvalidInput("PsdCone: n must be positive");
    base_functional_ = from_matrix(Eigen::MatrixXd::Identity(n, n));
    base_point_ = from_matrix(Eigen::MatrixXd::Identity(n, n) / n);
  }

  std::string name() const { return "psd:" + std::to_string(n_); }
  int order() const { return n_; }
  int ambient_dim() const { return n_ * (n_ + 1) / 2; }
  const Vector& base_functional() const { return base_functional_; }
  const Vector& base_point() const { return base_point_; }

  Vector from_matrix(const Eigen::MatrixXd& m) const {
    Vector v(ambient_dim());
    int k = 0;
    for (int i = 0; i < n_; ++i) {
      for (int j = i; j < n_; ++j) v[k++] = (i == j) ? m(i, i) : std::sqrt(2.0) * 0.5 * (m(i, j) + m(j, i));
    }
    return v;
  }

  Eigen::MatrixXd to_matrix(const Vector& v) const {
    Eigen::MatrixXd m(n_, n_);
    int k = 0;
    for (int i = 0; i < n_; ++i) {
      for (int j = i; j < n_; ++j) {
        if (i == j) {
          m(i, i) = v[k++];
        } else {
          m(i, j) = m(j, i) = v[k++] / std::sqrt(2.0);
        }
      }
    }
    return m;
  }

  bool contains(const Vector& x) const { return detail::eigen_min(to_matrix(x)) >= -kTolerance; }
  bool interior(const Vector& x) const { return detail::eigen_min(to_matrix(x)) > kTolerance; }

  /// lambda_min(y^{-1/2} x y^{-1/2}) when y is positive definite.
  std::optional<double> m_closed(const Vector& x, const Vector& y) const {
    const Eigen::MatrixXd ym = to_matrix(y);
    if (detail::eigen_min(ym) <= kTolerance) return std::nullopt;
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(to_matrix(x), ym, Eigen::EigenvaluesOnly);
    return std::max(0.0, es.eigenvalues().minCoeff());
  }

  /// Sum of the positive (or negative) eigenvalues, whichever is larger.
  double monotone_norm(const Vector& x) const {
    const auto ev = detail::eigenvalues_sym(to_matrix(x));
    return std::max(ev.cwiseMax(0.0).sum(), (-ev).cwiseMax(0.0).sum());
  }

  std::pair<double, double> slice_extrema(const Vector& w) const {
    const auto ev = detail::eigenvalues_sym(to_matrix(w));
    return {ev.minCoeff(), ev.maxCoeff()};
  }

  Vector sample_slice(RandomStream& rng) const { return sample_rank(rng, n_); }

  Vector sample_boundary(RandomStream& rng) const {
    const int rank = 1 + static_cast<int>(rng.uniform() * std::max(1, n_ - 1));
    return sample_rank(rng, std::min(rank, std::max(1, n_ - 1)));
  }

  Vector sample_dual_cap(RandomStream& rng) const {
    Eigen::MatrixXd g(n_, n_);
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) g(i, j) = rng.normal();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    const Eigen::MatrixXd q = qr.householderQ();
    Eigen::VectorXd lambda(n_);
    for (int i = 0; i < n_; ++i) lambda[i] = rng.uniform();
    return from_matrix(q * lambda.asDiagonal() * q.transpose());
  }

  std::vector<Vector> extreme_points() const { return {}; }

 private:
  Vector sample_rank(RandomStream& rng, int rank) const {
    Eigen::MatrixXd g(n_, rank);
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < rank; ++j) g(i, j) = rng.normal();
    Eigen::MatrixXd m = g * g.transpose();
    m /= m.trace();
    return from_matrix(m);
  }

  int n_;
  Vector base_functional_;
  Vector base_point_;
};

template <class C>
concept ClosedSolidCone = requires(const C& c, const Vector& v, RandomStream& rng) {
  { c.ambient_dim() } -> std::convertible_to<int>;
  { c.base_functional() } -> std::convertible_to<const Vector&>;
  { c.base_point() } -> std::convertible_to<const Vector&>;
  { c.contains(v) } -> std::same_as<bool>;
  { c.interior(v) } -> std::same_as<bool>;
  { c.m_closed(v, v) } -> std::same_as<std::optional<double>>;
  { c.monotone_norm(v) } -> std::convertible_to<double>;
  { c.slice_extrema(v) } -> std::same_as<std::pair<double, double>>;
  { c.sample_slice(rng) } -> std::same_as<Vector>;
  { c.sample_boundary(rng) } -> std::same_as<Vector>;
  { c.sample_dual_cap(rng) } -> std::same_as<Vector>;
  { c.name() } -> std::convertible_to<std::string>;
};

enum class ConeMembership { kUnrestricted, kMember, kInterior };

/// Coordinates certified against a cone at construction.
struct ConeVector {
  Vector coords;
  ConeMembership membership = ConeMembership::kUnrestricted;
};

template <ClosedSolidCone C>
ConeVector make_cone_vector(const C& cone, Vector coords) {
  if (coords.size() != cone.ambient_dim()) throw InvalidInput("make_cone_vector: dimension mismatch");
  ConeVector v{std::move(coords), ConeMembership::kUnrestricted};
  if (cone.interior(v.coords)) {
    v.membership = ConeMembership::kInterior;
  } else if (cone.contains(v.coords)) {
    v.membership = ConeMembership::kMember;
  }
  return v;
}

template <ClosedSolidCone C>
double monotone_norm(const C& cone, const Vector& x) {
  return cone.monotone_norm(x);
}

inline constexpr double kBisectionTolerance = 1e-10;

/// m(x, y) = sup {lambda >= 0 : lambda y <=_K x} by bisection on the
/// membership of x - lambda y, which is monotone in lambda for y in K.
template <ClosedSolidCone C>
double m_bisection(const C& cone, const Vector& x, const Vector& y, double tol = kBisectionTolerance) {
  const Vector& w = cone.base_functional();
  double lo = 0.0;
  double hi = 2.0 * w.dot(x) / w.dot(y);
  for (int k = 0; k < 200 && cone.contains(Vector(x - hi * y)); ++k) hi *= 2.0;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (cone.contains(Vector(x - mid * y))) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

namespace detail {

template <ClosedSolidCone C>
double m_cone(const C& cone, const Vector& x, const Vector& y) {
  if (auto closed = cone.m_closed(x, y)) return *closed;
  return m_bisection(cone, x, y);
}

template <ClosedSolidCone C>
double cone_distance(const C& cone, const Vector& x, const Vector& y) {
  return phi(m_cone(cone, x, y) * m_cone(cone, y, x));
}

}  // namespace detail

template <ClosedSolidCone C>
double m_cone(const C& cone, const ConeVector& x, const ConeVector& y) {
  if (x.membership == ConeMembership::kUnrestricted || y.membership == ConeMembership::kUnrestricted) {
    throw InvalidInput("m_cone: both vectors must be certified members of K");
  }
  if (x.coords.isZero(0.0) || y.coords.isZero(0.0)) throw InvalidInput("m_cone: zero vector");
  return detail::m_cone(cone, x.coords, y.coords);
}

/// d(x, y) = phi(m(x, y) m(y, x)); 1 exactly when x, y lie in different parts.
template <ClosedSolidCone C>
MetricValue cone_distance(const C& cone, const ConeVector& x, const ConeVector& y) {
  return MetricValue(phi(m_cone(cone, x, y) * m_cone(cone, y, x)));
}

/// g . x = gx / <x0*, gx> on the slice.
template <ClosedSolidCone C>
Vector cone_act(const C& cone, const Matrix& g, const Vector& x) {
  Vector y = g * x;
  return y / cone.base_functional().dot(y);
}

/// sigma(g, x) = log |gx|_{x0*} = log <x0*, gx> for x in K.
template <ClosedSolidCone C>
double cone_cocycle(const C& cone, const Matrix& g, const Vector& x) {
  return std::log(cone.base_functional().dot(g * x));
}

/// |g|, v(g), N, L relative to the monotone norm. For g preserving K,
/// <x0*, gx> = <g^t x0*, x> is linear on the slice, so the cone's slice
/// extrema give both gauges exactly.
template <ClosedSolidCone C>
MatrixGauges cone_gauges(const C& cone, const Matrix& g) {
  const Vector w = g.transpose() * cone.base_functional();
  const auto [lo, hi] = cone.slice_extrema(w);
  MatrixGauges out;
  out.op_norm = hi;
  out.v = lo;
  out.N = std::max(hi, 1.0 / lo);
  out.L = hi / lo;
  return out;
}

struct CertificationResult {
  bool ok = true;
  std::optional<Vector> witness;
  std::string reason;
};

/// Sampled check that g maps members of K into K \ {0} and interior samples
/// into int(K). Probabilistic, not a proof.
template <ClosedSolidCone C>
CertificationResult certify_cone_preserving(const C& cone, const Matrix& g, std::size_t samples,
                                            RandomStream& rng) {
  if (g.rows() != cone.ambient_dim() || g.cols() != cone.ambient_dim()) {
    return {false, std::nullopt, "map dimension differs from the cone's ambient dimension"};
  }
  for (std::size_t s = 0; s < samples; ++s) {
    const Vector boundary = cone.sample_boundary(rng);
    const Vector gb = g * boundary;
    if (!cone.contains(gb) || gb.isZero(0.0)) return {false, boundary, "member mapped outside K or to 0"};
    const Vector inside = cone.sample_slice(rng);
    if (!cone.interior(g * inside)) return {false, inside, "interior point mapped out of int(K)"};
  }
  return {};
}

/// Lower bound on c(g) = sup d(gx, gy): the largest distance over sampled
/// slice pairs mixing interior and boundary points, plus all pairs of the
/// cone's listed extreme points.
template <ClosedSolidCone C>
MetricValue contraction_estimate(const C& cone, const Matrix& g, std::size_t n_pairs, RandomStream& rng) {
  double best = 0.0;
  const auto extremes = cone.extreme_points();
  for (std::size_t i = 0; i < extremes.size(); ++i) {
    for (std::size_t j = i + 1; j < extremes.size(); ++j) {
      best = std::max(best, detail::cone_distance(cone, Vector(g * extremes[i]), Vector(g * extremes[j])));
    }
  }
  for (std::size_t s = 0; s < n_pairs; ++s) {
    const int mode = static_cast<int>(s % 3);
    const Vector x = mode == 1 ? cone.sample_boundary(rng) : cone.sample_slice(rng);
    const Vector y = mode == 0 ? cone.sample_slice(rng) : cone.sample_boundary(rng);
    best = std::max(best, detail::cone_distance(cone, Vector(g * x), Vector(g * y)));
  }
  return MetricValue(best);
}

/// Largest sampled |x - y|_{x0*} (1 - d) / d over slice pairs with d < 1.
template <ClosedSolidCone C>
double sampled_norm_metric_ratio(const C& cone, std::size_t n_pairs, RandomStream& rng) {
  double best = 0.0;
  for (std::size_t s = 0; s < n_pairs; ++s) {
    const Vector x = cone.sample_slice(rng);
    const Vector y = cone.sample_slice(rng);
    const double d = detail::cone_distance(cone, x, y);
    if (d <= 0.0 || d >= 1.0) continue;
    best = std::max(best, cone.monotone_norm(Vector(x - y)) * (1.0 - d) / d);
  }
  return best;
}

/// For interior x: the largest eps with y <=_K x / eps for every sampled slice
/// point y (slice points have unit monotone norm), i.e. min_y m(x, y).
template <ClosedSolidCone C>
double cone_scaling_epsilon(const C& cone, const Vector& x, std::size_t samples, RandomStream& rng) {
  double eps = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < samples; ++s) {
    const Vector y = (s % 2 == 0) ? cone.sample_boundary(rng) : cone.sample_slice(rng);
    eps = std::min(eps, m_bisection(cone, x, y));
  }
  return eps;
}

// ---------------------------------------------------------------------------
// Cone-preserving maps as matrices on the ambient coordinates.

/// Matrix of a linear map given by its action on coordinate vectors.
inline Matrix linear_map_matrix(int dim, const std::function<Vector(const Vector&)>& f) {
  Matrix m(dim, dim);
  for (int j = 0; j < dim; ++j) {
    Vector e = Vector::Zero(dim);
    e[j] = 1.0;
    m.col(j) = f(e);
  }
  return m;
}

/// M -> A^t M A.
inline Matrix psd_congruence_map(const PsdCone& cone, const Eigen::MatrixXd& a) {
  return linear_map_matrix(cone.ambient_dim(), [&](const Vector& v) {
    return cone.from_matrix(a.transpose() * cone.to_matrix(v) * a);
  });
}

/// M -> tr(M R0) S0.
inline Matrix psd_trace_map(const PsdCone& cone, const Eigen::MatrixXd& r0, const Eigen::MatrixXd& s0) {
  return linear_map_matrix(cone.ambient_dim(), [&](const Vector& v) {
    return Vector(cone.from_matrix(s0) * (cone.to_matrix(v) * r0).trace());
  });
}

/// (u, z) -> (a u, z) for |a| <= 1; strictly contracting for |a| < 1.
inline Matrix lorentz_squeeze_map(const LorentzCone& cone, double a) {
  Matrix m = Matrix::Identity(cone.ambient_dim(), cone.ambient_dim());
  for (int i = 0; i + 1 < cone.ambient_dim(); ++i) m(i, i) = a;
  return m;
}

/// Hyperbolic rotation mixing coordinate `axis` with z.
inline Matrix lorentz_boost_map(const LorentzCone& cone, int axis, double rapidity) {
  const int z = cone.ambient_dim() - 1;
  Matrix m = Matrix::Identity(cone.ambient_dim(), cone.ambient_dim());
  m(axis, axis) = m(z, z) = std::cosh(rapidity);
  m(axis, z) = m(z, axis) = std::sinh(rapidity);
  return m;
}

/// Runtime selection among the three instantiations.
using AnyCone = std::variant<OrthantCone, LorentzCone, PsdCone>;

/// Parses "orthant:d", "lorentz:n" or "psd:n".
inline AnyCone parse_cone(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw InvalidInput("cone must look like orthant:d, lorentz:n or psd:n");
  const std::string kind = text.substr(0, colon);
  int size = 0;
  try {
    size = std::stoi(text.substr(colon + 1));
  } catch (const std::exception&) {
    throw InvalidInput("cone size is not an integer: " + text);
  }
  if (size < 1 || size > kMaxDimension) throw InvalidInput("cone size out of range: " + text);
  if (kind == "orthant") {
    if (size < 2) throw InvalidInput("orthant cone needs d >= 2");
    return OrthantCone(size);
  }
  if (kind == "lorentz") return LorentzCone(size);
  if (kind == "psd") return PsdCone(size);
  throw InvalidInput("unknown cone kind '" + kind + "'");
}

}  // namespace rpm
