// Copyright 2026 The vectok Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <cmath>

#include "vectok/normalizer.hpp"
#include "vectok/rng.hpp"

using namespace vectok;

namespace {

FeatureMatrix random_matrix(uint32_t dim, size_t frames, uint64_t seed,
                            double scale = 1.0) {
  SplitMix64 rng(seed);
  FeatureMatrix m;
  m.dim = dim;
  m.data.resize(frames * dim);
  for (double& v : m.data) v = rng.gaussian() * scale;
  return m;
}

}  // namespace

TEST_SUITE("normalizer") {

TEST_CASE("two-frame mean and normalization") {
  FeatureMatrix m;
  m.dim = 2;
  m.data = {1, 2, 3, 4};
  UtteranceMean mean = compute_mean(m);
  CHECK(mean.mean == std::vector<double>{2, 3});

  NormalizedFeatures norm = normalize(m);
  CHECK(norm.features.data == std::vector<double>{-1, -1, 1, 1});
  CHECK(norm.mean.mean == std::vector<double>{2, 3});
}

TEST_CASE("constant matrix has itself as mean") {
  FeatureMatrix m;
  m.dim = 3;
  m.data = {5, -1, 2, 5, -1, 2, 5, -1, 2};
  CHECK(compute_mean(m).mean == std::vector<double>{5, -1, 2});
}

// Independent oracle: Kahan-compensated summation.
TEST_CASE("mean matches a compensated-summation oracle") {
  FeatureMatrix m = random_matrix(8, 100, 21, 3.0);
  UtteranceMean mean = compute_mean(m);
  for (uint32_t d = 0; d < m.dim; ++d) {
    double sum = 0.0, comp = 0.0;
    for (size_t t = 0; t < m.frames(); ++t) {
      double y = m.at(t, d) - comp;
      double s = sum + y;
      comp = (s - sum) - y;
      sum = s;
    }
    double expected = sum / static_cast<double>(m.frames());
    CHECK(mean.mean[d] ==
          doctest::Approx(expected).epsilon(1e-6));
  }
}

TEST_CASE("zero-mean input passes through unchanged") {
  FeatureMatrix m;
  m.dim = 1;
  m.data = {-2, 0, 2};
  NormalizedFeatures norm = normalize(m);
  for (size_t i = 0; i < m.data.size(); ++i)
    CHECK(norm.features.data[i] == doctest::Approx(m.data[i]).epsilon(1e-12));
  CHECK(std::abs(norm.mean.mean[0]) < 1e-12);
}

TEST_CASE("offset invariance") {
  FeatureMatrix m = random_matrix(6, 50, 33);
  SplitMix64 rng(99);
  std::vector<double> offset(m.dim);
  for (double& v : offset) v = rng.gaussian() * 10.0;

  FeatureMatrix shifted = m;
  for (size_t t = 0; t < m.frames(); ++t)
    for (uint32_t d = 0; d < m.dim; ++d) shifted.at(t, d) += offset[d];

  NormalizedFeatures a = normalize(m);
  NormalizedFeatures b = normalize(shifted);
  for (size_t i = 0; i < m.data.size(); ++i)
    CHECK(std::abs(a.features.data[i] - b.features.data[i]) < 1e-5);
  for (uint32_t d = 0; d < m.dim; ++d)
    CHECK(b.mean.mean[d] - a.mean.mean[d] ==
          doctest::Approx(offset[d]).epsilon(1e-9));
}

TEST_CASE("idempotence") {
  FeatureMatrix m = random_matrix(4, 30, 44);
  FeatureMatrix once = normalize(m).features;
  FeatureMatrix twice = normalize(once).features;
  for (size_t i = 0; i < m.data.size(); ++i)
    CHECK(std::abs(once.data[i] - twice.data[i]) < 1e-5);
}

TEST_CASE("normalized plus mean reconstructs the input") {
  FeatureMatrix m = random_matrix(4, 77, 55, 5.0);
  NormalizedFeatures norm = normalize(m);
  for (size_t t = 0; t < m.frames(); ++t)
    for (uint32_t d = 0; d < m.dim; ++d)
      CHECK(std::abs(norm.features.at(t, d) + norm.mean.mean[d] -
                     m.at(t, d)) < 1e-5);
}

TEST_CASE("empty matrix is an error") {
  FeatureMatrix m;
  m.dim = 4;
  CHECK_THROWS_AS(compute_mean(m), std::invalid_argument);
  CHECK_THROWS_AS(normalize(m), std::invalid_argument);
}

}  // TEST_SUITE
