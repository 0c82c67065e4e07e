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

#include <gtest/gtest.h>

#include <cmath>
#include <string>

#include "rpm/measure.hpp"
#include "test_support.hpp"

namespace rpm {
namespace {

const auto kA = AllowableMatrix::from_rows({{3, 2}, {2, 3}});
const auto kB = AllowableMatrix::from_rows({{0.5, 0.25}, {0.125, 1}});

std::string field_of(const std::string& text) {
  try {
    measure_from_string(text);
  } catch (const SpecError& e) {
    return e.field();
  }
  return "<accepted>";
}

TEST(MeasureSpec, ValidatesWeights) {
  EXPECT_THROW(MeasureSpec::atomic({0.5, 0.4}, {kA, kB}), SpecError);
  EXPECT_THROW(MeasureSpec::atomic({1.0, 0.0}, {kA, kB}), SpecError);
  EXPECT_THROW(MeasureSpec::atomic({1.0}, {kA, kB}), SpecError);
  EXPECT_NO_THROW(MeasureSpec::atomic({0.5, 0.5 + 1e-13}, {kA, kB}));
}

TEST(MeasureJson, AtomicRoundTripIsBitExact) {
  RandomStream rng(20);
  for (int t = 0; t < 50; ++t) {
    const int d = 2 + t % 4;
    std::vector<AllowableMatrix> atoms{testing::random_allowable(rng, d), testing::random_positive(rng, d)};
    const double w = rng.uniform(0.01, 0.99);
    const auto spec = MeasureSpec::atomic({w, 1.0 - w}, atoms, t % 2 == 1);
    const auto back = measure_from_string(to_json_string(spec));
    EXPECT_TRUE(back == spec);
    EXPECT_EQ(to_json_string(back), to_json_string(spec));
  }
}

TEST(MeasureJson, ParametricRoundTrip) {
  for (const auto& spec : {MeasureSpec::lognormal(3, 0.1, 0.7), MeasureSpec::uniform(4, 0.0, 2.5)}) {
    EXPECT_TRUE(measure_from_string(to_json_string(spec)) == spec);
  }
}

TEST(MeasureJson, StrictParsingNamesTheField) {
  EXPECT_EQ(field_of(R"({"kind":"atomic","d":2,"weights":[1],"atoms":[[[1,0],[0,1]]],"extra":1})"), "extra");
  EXPECT_EQ(field_of(R"({"kind":"atomic","d":2,"weights":[1],"atoms":[[[1,0],[1,0]]]})"), "atoms[0]");
  EXPECT_EQ(field_of(R"({"kind":"atomic","d":2,"weights":[0.5,0.5],"atoms":[[[1,1],[1,1]],[[1,0],[2]]]})"),
            "atoms[1][1]");
  EXPECT_EQ(field_of(R"({"kind":"atomic","d":2,"weights":["x"],"atoms":[[[1,1],[1,1]]]})"), "weights[0]");
  EXPECT_EQ(field_of(R"({"kind":"parametric","d":2,"family":"lognormal","params":{"mu":0,"sd":1}})"),
            "params.sd");
  EXPECT_EQ(field_of(R"({"kind":"parametric","d":2,"family":"cauchy","params":{}})"), "family");
  EXPECT_EQ(field_of(R"({"kind":"atomic","d":1,"weights":[1],"atoms":[[[1]]]})"), "d");
  EXPECT_EQ(field_of(R"({"kind":"mixture","d":2})"), "kind");
}

TEST(MeasureJson, MalformedReportsLine) {
  try {
    measure_from_string("{\n  \"kind\": \"atomic\",\n  \"d\": 2,\n  \"weights\": [1,,]\n}");
    FAIL();
  } catch (const SpecError& e) {
    ASSERT_TRUE(e.line().has_value());
    EXPECT_EQ(*e.line(), 4u);
  }
}

TEST(Sampler, SingleAtomAlways) {
  MeasureSampler s(MeasureSpec::single(kB));
  RandomStream rng(1);
  for (int i = 0; i < 100; ++i) EXPECT_TRUE(s.draw(rng) == kB);
}

TEST(Sampler, FrequenciesMatchWeights) {
  MeasureSampler s(MeasureSpec::atomic({0.5, 0.5}, {kA, kB}));
  RandomStream rng(2);
  int hits = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) hits += s.draw(rng) == kA;
  EXPECT_NEAR(static_cast<double>(hits) / n, 0.5, 0.01);
}

TEST(Sampler, TransposeView) {
  const auto spec = MeasureSpec::atomic({0.5, 0.5}, {kA, kB}).transposed();
  MeasureSampler s(spec);
  RandomStream rng(3);
  for (int i = 0; i < 100; ++i) {
    const auto& g = s.draw(rng);
    EXPECT_TRUE(g == kA.transpose() || g == kB.transpose());
  }
}

TEST(Sampler, DeterministicGivenStream) {
  const auto spec = MeasureSpec::lognormal(3, 0.0, 1.0);
  MeasureSampler a(spec), b(spec);
  RandomStream ra(77), rb(77);
  for (int i = 0; i < 50; ++i) EXPECT_TRUE(a.draw(ra) == b.draw(rb));
}

TEST(Sampler, ParametricDrawsAreAllowable) {
  RandomStream rng(4);
  MeasureSampler u(MeasureSpec::uniform(3, 0.0, 1.0));
  for (int i = 0; i < 1000; ++i) {
    EXPECT_FALSE(allowability_violation(u.draw(rng).entries()).has_value());
  }
  // lo == hi is a constant matrix.
  MeasureSampler c(MeasureSpec::uniform(2, 2.0, 2.0));
  EXPECT_TRUE(c.draw(rng) == AllowableMatrix::from_rows({{2, 2}, {2, 2}}));
}

}  // namespace
}  // namespace rpm
