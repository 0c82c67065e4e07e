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
#include <initializer_list>
#include <optional>
#include <string>
#include <utility>

#include "rpm/types.hpp"

namespace rpm {

/// Describes why `entries` is not a positive allowable matrix, or nullopt if
/// it is one: square, 2 <= d <= kMaxDimension, finite nonnegative entries,
/// and a strictly positive entry in every row and every column.
inline std::optional<std::string> allowability_violation(const Matrix& entries) {
  if (entries.rows() != entries.cols()) return "matrix is not square";
  const auto d = entries.rows();
  if (d < 2) return "dimension must be at least 2";
  if (d > kMaxDimension) {
    return "dimension " + std::to_string(d) + " exceeds the limit " + std::to_string(kMaxDimension);
  }
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      const double x = entries(i, j);
      if (!std::isfinite(x) || x < 0.0) {
        return "entry (" + std::to_string(i) + "," + std::to_string(j) +
               ") is negative or not finite";
      }
    }
  }
  for (Eigen::Index i = 0; i < d; ++i) {
    if (!(entries.row(i).maxCoeff() > 0.0)) return "row " + std::to_string(i) + " has no positive entry";
  }
  for (Eigen::Index j = 0; j < d; ++j) {
    if (!(entries.col(j).maxCoeff() > 0.0)) {
      return "column " + std::to_string(j) + " has no positive entry";
    }
  }
  return std::nullopt;
}

/// A dense nonnegative d x d matrix certified allowable, with cached column
/// sums. Products of allowable matrices are allowable, so the semigroup
/// operations below never re-validate.
class AllowableMatrix {
 public:
  explicit AllowableMatrix(Matrix entries) : entries_(std::move(entries)) {
    if (auto why = allowability_violation(entries_)) {
      throw InvalidInput("AllowableMatrix: " + *why);
    }
    column_sums_ = entries_.colwise().sum().transpose();
  }

  static AllowableMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const auto d = static_cast<Eigen::Index>(rows.size());
    Matrix m(d, d);
    Eigen::Index i = 0;
    for (const auto& row : rows) {
      if (static_cast<Eigen::Index>(row.size()) != d) {
        throw InvalidInput("AllowableMatrix::from_rows: ragged rows");
      }
      Eigen::Index j = 0;
      for (double x : row) m(i, j++) = x;
      ++i;
    }
    return AllowableMatrix(std::move(m));
  }

  static AllowableMatrix identity(int d) { return AllowableMatrix(Matrix::Identity(d, d)); }
  static AllowableMatrix all_ones(int d) { return AllowableMatrix(Matrix::Ones(d, d)); }

  int dim() const { return static_cast<int>(entries_.rows()); }
  const Matrix& entries() const { return entries_; }
  const Vector& column_sums() const { return column_sums_; }
  double operator()(int i, int j) const { return entries_(i, j); }

  bool strictly_positive() const { return (entries_.array() > 0.0).all(); }

  AllowableMatrix transpose() const { return AllowableMatrix(Matrix(entries_.transpose()), Trusted{}); }

  AllowableMatrix scaled(double factor) const {
    if (!(factor > 0.0) || !std::isfinite(factor)) {
      throw InvalidInput("AllowableMatrix::scaled: factor must be positive");
    }
    return AllowableMatrix(Matrix(entries_ * factor), Trusted{});
  }

  friend AllowableMatrix operator*(const AllowableMatrix& a, const AllowableMatrix& b) {
    if (a.dim() != b.dim()) throw InvalidInput("AllowableMatrix product: dimension mismatch");
    return AllowableMatrix(Matrix(a.entries_ * b.entries_), Trusted{});
  }

  friend bool operator==(const AllowableMatrix& a, const AllowableMatrix& b) {
    return a.entries_ == b.entries_;
  }

 private:
  struct Trusted {};
  AllowableMatrix(Matrix entries, Trusted) : entries_(std::move(entries)) {
    column_sums_ = entries_.colwise().sum().transpose();
  }

  Matrix entries_;
  Vector column_sums_;
};

}  // namespace rpm
