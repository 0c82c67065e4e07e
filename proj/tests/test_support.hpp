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
#include <vector>

#include "rpm/allowable_matrix.hpp"
#include "rpm/random.hpp"
#include "rpm/simplex_geometry.hpp"
#include "rpm/types.hpp"

namespace rpm::testing {

/// Entries exp(N(0,1)), so ratios spread over a couple of decades.
inline AllowableMatrix random_positive(RandomStream& rng, int d, double spread = 1.0) {
  Matrix m(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = std::exp(spread * rng.normal());
  return AllowableMatrix(m);
}

/// Positive entries on a random permutation plus each other entry with
/// probability 1/2; allowable but usually not strictly positive.
inline AllowableMatrix random_allowable(RandomStream& rng, int d) {
  Matrix m = Matrix::Zero(d, d);
  std::vector<int> perm(d);
  for (int i = 0; i < d; ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng.engine());
  for (int i = 0; i < d; ++i) m(i, perm[i]) = std::exp(rng.normal());
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (rng.uniform() < 0.5) m(i, j) = std::exp(rng.normal());
  return AllowableMatrix(m);
}

inline SimplexPoint random_point(RandomStream& rng, int d) {
  Vector v(d);
  for (int i = 0; i < d; ++i) v[i] = rng.exponential();
  return SimplexPoint::normalized(v);
}

/// A point with a random nonempty set of zero coordinates (never all).
inline SimplexPoint random_face_point(RandomStream& rng, int d) {
  Vector v(d);
  for (int i = 0; i < d; ++i) v[i] = rng.uniform() < 0.4 ? 0.0 : rng.exponential();
  if (!(v.sum() > 0.0)) v[static_cast<int>(rng.uniform() * d)] = 1.0;
  return SimplexPoint::normalized(v);
}

}  // namespace rpm::testing
