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
#include <limits>

#include "vectok/featureio.hpp"
#include "vectok/normalizer.hpp"
#include "vectok/reconstructor.hpp"
#include "vectok/rng.hpp"

using namespace vectok;

namespace {

Codebook simple_codebook() {
  Codebook cb;
  cb.k = 4;
  cb.dim = 2;
  cb.centers = {0, 0, 1, 2, -3, 4, 10, -10};
  return cb;
}

// Codebook whose centers sum to zero, so balanced token sequences have a
// zero center-mean and the prompt mean can carry the whole offset.
Codebook zero_sum_codebook() {
  Codebook cb;
  cb.k = 4;
  cb.dim = 2;
  cb.centers = {2, 1, -2, -1, 4, -3, -4, 3};
  return cb;
}

}  // namespace

TEST_SUITE("reconstructor") {

TEST_CASE("lookup emits center rows in token order") {
  Codebook cb = simple_codebook();
  FeatureMatrix out = lookup_reconstruct({4, {0, 0, 1}}, cb);
  CHECK(out.data == std::vector<double>{0, 0, 0, 0, 1, 2});
  CHECK_THROWS_AS(lookup_reconstruct({8, {5}}, cb), std::invalid_argument);
}

TEST_CASE("tokenizing the centers themselves is a fixed point") {
  Codebook cb = simple_codebook();
  FeatureMatrix centers_as_frames;
  centers_as_frames.dim = cb.dim;
  centers_as_frames.data = cb.centers;
  TokenSequence tokens = tokenize(centers_as_frames, cb);
  CHECK(tokens.tokens == std::vector<uint32_t>{0, 1, 2, 3});
  FeatureMatrix back = lookup_reconstruct(tokens, cb);
  CHECK(back.data == cb.centers);
}

TEST_CASE("reconstruction residual equals the assignment inertia") {
  SplitMix64 rng(7);
  Codebook cb = simple_codebook();
  FeatureMatrix x;
  x.dim = 2;
  x.data.resize(2 * 50);
  for (double& v : x.data) v = rng.gaussian() * 3.0;

  TokenSequence tokens = tokenize(x, cb);
  FeatureMatrix rec = lookup_reconstruct(tokens, cb);

  double residual = 0.0;
  for (size_t i = 0; i < x.data.size(); ++i) {
    double d = rec.data[i] - x.data[i];
    residual += d * d;
  }
  // Oracle: per-frame minimum squared distance to any center.
  double inertia = 0.0;
  for (size_t t = 0; t < x.frames(); ++t) {
    double best = std::numeric_limits<double>::infinity();
    for (uint32_t j = 0; j < cb.k; ++j) {
      double d2 = 0.0;
      for (uint32_t d = 0; d < cb.dim; ++d) {
        double diff = x.at(t, d) - cb.center(j)[d];
        d2 += diff * diff;
      }
      best = std::min(best, d2);
    }
    inertia += best;
  }
  CHECK(residual == doctest::Approx(inertia).epsilon(1e-12));
}

TEST_CASE("zero-mean prompt reduces to the plain lookup") {
  Codebook cb = simple_codebook();
  FeatureMatrix prompt;
  prompt.dim = 2;
  prompt.data = {1, -2, -1, 2};  // column means are zero
  TokenSequence tokens{4, {3, 2, 1}};
  FeatureMatrix a = reconstruct_with_prompt(tokens, cb, prompt);
  FeatureMatrix b = lookup_reconstruct(tokens, cb);
  CHECK(a.data == b.data);
}

TEST_CASE("prompt restores exactly the offset normalization removed") {
  Codebook cb = zero_sum_codebook();
  const std::vector<double> offset{7.5, -3.25};

  // Balanced token usage keeps the used-center mean at zero.
  TokenSequence truth{4, {0, 1, 2, 3, 0, 1, 2, 3}};
  FeatureMatrix x;
  x.dim = 2;
  x.data.resize(truth.tokens.size() * 2);
  for (size_t t = 0; t < truth.tokens.size(); ++t)
    for (uint32_t d = 0; d < 2; ++d)
      x.at(t, d) = cb.center(truth.tokens[t])[d] + offset[d];

  // The pipeline's own tokens: normalization removes exactly the offset.
  TokenSequence tokens = tokenize(normalize(x).features, cb);
  CHECK(tokens.tokens == truth.tokens);

  FeatureMatrix rec = reconstruct_with_prompt(tokens, cb, /*prompt=*/x);
  REQUIRE(rec.data.size() == x.data.size());
  for (size_t i = 0; i < x.data.size(); ++i)
    CHECK(std::abs(rec.data[i] - x.data[i]) <= 1e-5);
}

TEST_CASE("prompt shift is one constant row") {
  SplitMix64 rng(31);
  Codebook cb = simple_codebook();
  FeatureMatrix prompt;
  prompt.dim = 2;
  prompt.data.resize(2 * 20);
  for (double& v : prompt.data) v = rng.gaussian() * 4.0;
  UtteranceMean pm = compute_mean(prompt);

  TokenSequence tokens{4, {1, 3, 0, 2, 2, 1}};
  FeatureMatrix with = reconstruct_with_prompt(tokens, cb, prompt);
  FeatureMatrix without = lookup_reconstruct(tokens, cb);
  for (size_t t = 0; t < with.frames(); ++t)
    for (uint32_t d = 0; d < 2; ++d)
      CHECK(with.at(t, d) - without.at(t, d) ==
            doctest::Approx(pm.mean[d]).epsilon(1e-12));
}

TEST_CASE("anonymize endpoints and midpoint") {
  FeatureMatrix spe;
  spe.dim = 2;
  spe.data = {2, 2};
  FeatureMatrix agn;
  agn.dim = 2;
  agn.data = {0, 0};

  CHECK(anonymize(spe, agn, 1.0).data == spe.data);
  CHECK(anonymize(spe, agn, 0.0).data == agn.data);
  CHECK(anonymize(spe, agn, 0.5).data == std::vector<double>{1, 1});

  CHECK_THROWS_AS(anonymize(spe, agn, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(anonymize(spe, agn, -0.1), std::invalid_argument);
  FeatureMatrix other;
  other.dim = 1;
  other.data = {0};
  CHECK_THROWS_AS(anonymize(spe, other, 0.5), std::invalid_argument);
}

TEST_CASE("deidentify is the lookup under a task name") {
  Codebook cb = simple_codebook();
  TokenSequence tokens{4, {2, 0, 3, 3}};
  CHECK(deidentify(tokens, cb).data == lookup_reconstruct(tokens, cb).data);
}

TEST_CASE("deidentified output depends on tokens alone") {
  Codebook cb = simple_codebook();
  TokenSequence tokens{4, {1, 1, 2, 0}};
  // Two "speakers" with identical token sequences: the reconstruction is
  // the same regardless of any source features.
  FeatureMatrix a = deidentify(tokens, cb);
  FeatureMatrix b = deidentify(tokens, cb);
  CHECK(a.data == b.data);
}

TEST_CASE("prompt preconditions") {
  Codebook cb = simple_codebook();
  FeatureMatrix empty;
  empty.dim = 2;
  CHECK_THROWS_AS(reconstruct_with_prompt({4, {0}}, cb, empty),
                  std::invalid_argument);
  FeatureMatrix wrong;
  wrong.dim = 3;
  wrong.data = {1, 2, 3};
  CHECK_THROWS_AS(reconstruct_with_prompt({4, {0}}, cb, wrong),
                  std::invalid_argument);
}

}  // TEST_SUITE
