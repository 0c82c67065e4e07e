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
#include <complex>

#include "rpm/allowable_matrix.hpp"
#include "rpm/simplex_geometry.hpp"
#include "rpm/types.hpp"

namespace rpm {

/// Norm gauges of g in G: operator l1 norm, v(g) = inf_{S+} |gx|,
/// N = max(|g|, 1/v) and L = |g| / v.
struct MatrixGauges {
  double op_norm = 0.0;
  double v = 0.0;
  double N = 0.0;
  double L = 0.0;
};

/// |g| is the largest column sum and v(g) the smallest: x -> |gx| is linear
/// on S+ and so extremal at the vertices.
inline MatrixGauges gauges(const AllowableMatrix& g) {
  MatrixGauges out;
  out.op_norm = g.column_sums().maxCoeff();
  out.v = g.column_sums().minCoeff();
  out.N = std::max(out.op_norm, 1.0 / out.v);
  out.L = out.op_norm / out.v;
  return out;
}

/// g . x = gx / |gx|.
inline SimplexPoint act(const AllowableMatrix& g, const SimplexPoint& x) {
  if (g.dim() != x.dim()) throw InvalidInput("act: dimension mismatch");
  return SimplexPoint::normalized(g.entries() * x.coords());
}

/// sigma(g, x) = log |gx|_1. For x in S+ this is log <colsum(g), x>.
inline double cocycle(const AllowableMatrix& g, const SimplexPoint& x) {
  if (g.dim() != x.dim()) throw InvalidInput("cocycle: dimension mismatch");
  return std::log(g.column_sums().dot(x.coords()));
}

struct PowerIterationResult {
  double radius = 0.0;
  Vector vector;  // on S+
  int iterations = 0;
  bool converged = false;
};

namespace detail {

inline PowerIterationResult power_iteration(const Matrix& g, Vector x, double rel_tol = 1e-12,
                                            int max_iterations = 100000) {
  PowerIterationResult out;
  Vector y(x.size());
  double previous = -1.0;
  for (int it = 1; it <= max_iterations; ++it) {
    y.noalias() = g * x;
    const double s = y.sum();
    y /= s;
    const double step = (y - x).lpNorm<1>();
    x.swap(y);
    if (previous > 0.0 && std::abs(s - previous) <= rel_tol * s && step <= rel_tol) {
      out.radius = s;
      out.vector = std::move(x);
      out.iterations = it;
      out.converged = true;
      return out;
    }
    previous = s;
  }
  out.radius = previous;
  out.vector = std::move(x);
  out.iterations = max_iterations;
  return out;
}

inline double dense_spectral_radius(const Matrix& g) {
  Eigen::EigenSolver<Eigen::MatrixXd> solver(Eigen::MatrixXd(g), /*computeEigenvectors=*/false);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

// kappa(g), warm-started from `start`; falls back to the dense eigensolver
// when power iteration does not settle (non-primitive g).
inline double spectral_radius(const Matrix& g, const Vector& start) {
  auto r = power_iteration(g, start);
  if (r.converged) return r.radius;
  return dense_spectral_radius(g);
}

}  // namespace detail

/// Power iteration on the simplex starting from e, to relative tolerance
/// 1e-12 with at most 1e5 iterations. `converged == false` certifies that the
/// iterates did not settle, as happens for periodic (non-primitive) g.
inline PowerIterationResult spectral_radius_power(const AllowableMatrix& g) {
  return detail::power_iteration(g.entries(), SimplexPoint::center(g.dim()).coords());
}

/// kappa(g), with v(g) <= kappa(g) <= |g|.
inline double spectral_radius(const AllowableMatrix& g) {
  const auto r = spectral_radius_power(g);
  if (r.converged) return r.radius;
  return detail::dense_spectral_radius(g.entries());
}

/// The Perron vector v_g in S++ of a strictly positive g.
inline SimplexPoint perron_vector(const AllowableMatrix& g) {
  if (!g.strictly_positive()) {
    throw InvalidInput("perron_vector: matrix has a zero entry (c(g) = 1)");
  }
  auto r = spectral_radius_power(g);
  if (!r.converged) throw std::runtime_error("perron_vector: power iteration did not converge");
  return SimplexPoint::normalized(r.vector);
}

/// g in G_delta: every coordinate of every g . e_j is at least delta. The
/// form <x, g.y> is bilinear over S+ x S+, so vertex pairs are exhaustive.
inline bool classify_G_delta(const AllowableMatrix& g, double delta) {
  if (!(delta > 0.0 && delta <= 1.0)) throw InvalidInput("classify_G_delta: delta must be in (0,1]");
  const auto& e = g.entries();
  for (int j = 0; j < g.dim(); ++j) {
    if (e.col(j).minCoeff() / g.column_sums()[j] < delta) return false;
  }
  return true;
}

/// g in G_{C,gamma}: c(g) <= gamma and |g| <= C v(g^t).
inline bool classify_G_C_gamma(const AllowableMatrix& g, double C, double gamma) {
  if (!(C > 0.0)) throw InvalidInput("classify_G_C_gamma: C must be positive");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw InvalidInput("classify_G_C_gamma: gamma must be in [0,1)");
  if (contraction_coefficient(g).value() > gamma) return false;
  const double min_row_sum = g.entries().rowwise().sum().minCoeff();
  return g.column_sums().maxCoeff() <= C * min_row_sum;
}

}  // namespace rpm
