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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "vectok/featureio.hpp"
#include "vectok/invk.hpp"
#include "vectok/normalizer.hpp"
#include "vectok/quantizer.hpp"

using namespace vectok;

namespace {

Codebook tiny_codebook(uint32_t k, uint32_t dim, uint64_t seed) {
  SplitMix64 rng(seed);
  Codebook cb;
  cb.k = k;
  cb.dim = dim;
  cb.centers.resize(static_cast<size_t>(k) * dim);
  for (double& v : cb.centers) v = rng.gaussian();
  return cb;
}

FeatureMatrix random_matrix(uint32_t dim, size_t frames, uint64_t seed) {
  SplitMix64 rng(seed);
  FeatureMatrix m;
  m.dim = dim;
  m.data.resize(frames * dim);
  for (double& v : m.data) v = rng.gaussian();
  return m;
}

TokenSequence random_tokens(uint32_t k, size_t len, uint64_t seed) {
  SplitMix64 rng(seed);
  TokenSequence t;
  t.vocab_size = k;
  for (size_t i = 0; i < len; ++i)
    t.tokens.push_back(static_cast<uint32_t>(rng.uniform_index(k)));
  return t;
}

}  // namespace

TEST_SUITE("invk") {

TEST_CASE("augment is the identity at zero rates and all-MASK at alpha=1") {
  TokenSequence tokens = random_tokens(10, 50, 1);
  TokenSequence same = augment(tokens, {.mask_prob = 0, .replace_prob = 0}, 7);
  CHECK(same.tokens == tokens.tokens);
  CHECK(same.vocab_size == 11);

  TokenSequence masked =
      augment(tokens, {.mask_prob = 1.0, .replace_prob = 0.0}, 7);
  for (uint32_t t : masked.tokens) CHECK(t == 10);
}

TEST_CASE("augment hits its rates over a long stream") {
  TokenSequence tokens = random_tokens(50, 100000, 2);
  TokenSequence noisy =
      augment(tokens, {.mask_prob = 0.1, .replace_prob = 0.1}, 3);
  size_t masked = 0, replaced = 0;
  for (size_t i = 0; i < tokens.tokens.size(); ++i) {
    if (noisy.tokens[i] == 50) ++masked;
    else if (noisy.tokens[i] != tokens.tokens[i]) ++replaced;
  }
  double mask_rate = static_cast<double>(masked) / tokens.tokens.size();
  double replace_rate = static_cast<double>(replaced) / tokens.tokens.size();
  CHECK(std::abs(mask_rate - 0.1) < 0.005);
  CHECK(std::abs(replace_rate - 0.1) < 0.005);

  // Replacement always lands on a *different* base token.
  TokenSequence all_replaced =
      augment(tokens, {.mask_prob = 0.0, .replace_prob = 1.0}, 4);
  for (size_t i = 0; i < tokens.tokens.size(); ++i) {
    CHECK(all_replaced.tokens[i] != tokens.tokens[i]);
    CHECK(all_replaced.tokens[i] < 50);
  }
}

TEST_CASE("augment is deterministic and validates the policy") {
  TokenSequence tokens = random_tokens(10, 100, 5);
  AugmentationPolicy policy;
  CHECK(augment(tokens, policy, 9).tokens == augment(tokens, policy, 9).tokens);
  CHECK_THROWS_AS(
      augment(tokens, {.mask_prob = 0.7, .replace_prob = 0.7}, 1),
      std::invalid_argument);
}

TEST_CASE("embedding rows start as exact copies of the centers") {
  Codebook cb = tiny_codebook(6, 4, 11);
  InvKModel model({.k = 6, .dim = 4, .d_model = 8, .heads = 2, .layers = 1,
                   .d_ff = 16},
                  cb, /*seed=*/3);
  for (uint32_t j = 0; j < cb.k; ++j) {
    std::vector<double> row = model.embed_only(j);
    for (uint32_t d = 0; d < cb.dim; ++d) CHECK(row[d] == cb.center(j)[d]);
  }
}

TEST_CASE("forward has one row per prompt frame and token") {
  Codebook cb = tiny_codebook(6, 4, 13);
  InvKModel model({.k = 6, .dim = 4, .d_model = 8, .heads = 2, .layers = 1,
                   .d_ff = 16},
                  cb, 3);
  TokenSequence tokens = random_tokens(6, 9, 17);
  FeatureMatrix prompt = random_matrix(4, 5, 19);
  nn::TensorPtr out = model.forward(tokens, prompt);
  CHECK(out->rows == 14);
  CHECK(out->cols == 4);
  FeatureMatrix pred = model.predict(tokens, prompt);
  CHECK(pred.frames() == 9);

  // Deterministic: the same inputs give the same outputs.
  nn::TensorPtr again = model.forward(tokens, prompt);
  CHECK(out->value == again->value);
}

TEST_CASE("token outputs are invariant to prompt frame order") {
  Codebook cb = tiny_codebook(5, 3, 23);
  InvKModel model({.k = 5, .dim = 3, .d_model = 8, .heads = 2, .layers = 2,
                   .d_ff = 16},
                  cb, 29);
  TokenSequence tokens = random_tokens(5, 7, 31);
  FeatureMatrix prompt = random_matrix(3, 6, 37);

  FeatureMatrix permuted = prompt;
  // Rotate the prompt frames by two.
  std::rotate(permuted.data.begin(), permuted.data.begin() + 2 * 3,
              permuted.data.end());

  FeatureMatrix a = model.predict(tokens, prompt);
  FeatureMatrix b = model.predict(tokens, permuted);
  for (size_t i = 0; i < a.data.size(); ++i)
    CHECK(a.data[i] == doctest::Approx(b.data[i]).epsilon(1e-9));
}

TEST_CASE("loss is zero at the target and decomposes") {
  FeatureMatrix target = random_matrix(4, 10, 41);
  nn::TensorPtr exact = nn::make_constant(10, 4, target.data);
  InvKLoss at_target = loss_invk(exact, target, 0);
  CHECK(at_target.mse_term == 0.0);
  CHECK(at_target.ssim_value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(at_target.total == doctest::Approx(0.0).epsilon(1e-12));

  // Constant target, prediction one above it: the MSE term is exactly 1.
  FeatureMatrix flat;
  flat.dim = 4;
  flat.data.assign(40, 2.0);
  std::vector<double> above(40, 3.0);
  InvKLoss shifted = loss_invk(nn::make_constant(10, 4, above), flat, 0);
  CHECK(shifted.mse_term == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(shifted.total == doctest::Approx(1.0 + (1.0 - shifted.ssim_value)));
}

TEST_CASE("full-model gradients pass central finite differences") {
  Codebook cb = tiny_codebook(5, 3, 43);
  InvKModel model({.k = 5, .dim = 3, .d_model = 4, .heads = 2, .layers = 1,
                   .d_ff = 8},
                  cb, 47);
  TokenSequence tokens = random_tokens(5, 4, 53);
  FeatureMatrix prompt = random_matrix(3, 3, 59);
  FeatureMatrix target = random_matrix(3, 4, 61);

  auto build = [&]() {
    return loss_invk(model.forward(tokens, prompt), target, prompt.frames())
        .node;
  };
  nn::TensorPtr loss = build();
  for (const auto& p : model.params()) p->zero_grad();
  nn::backward(loss);

  const double h = 1e-4;
  double worst = 0.0;
  for (const auto& p : model.params()) {
    for (size_t i = 0; i < p->value.size(); ++i) {
      double orig = p->value[i];
      p->value[i] = orig + h;
      double up = build()->value[0];
      p->value[i] = orig - h;
      double down = build()->value[0];
      p->value[i] = orig;
      double fd = (up - down) / (2.0 * h);
      double ad = p->grad[i];
      double denom = std::max({std::abs(fd), std::abs(ad), 1e-6});
      worst = std::max(worst, std::abs(fd - ad) / denom);
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("a single triple is overfit within 500 steps") {
  Codebook cb = tiny_codebook(6, 4, 67);
  InvKModel model({.k = 6, .dim = 4, .d_model = 16, .heads = 2, .layers = 1,
                   .d_ff = 32},
                  cb, 71);
  std::vector<InvKTriple> corpus{{random_tokens(6, 8, 73),
                                  random_matrix(4, 8, 79),
                                  random_matrix(4, 4, 83)}};
  TrainCurve curve = train_invk(model, corpus,
                                {.mask_prob = 0, .replace_prob = 0},
                                {.steps = 500, .lr = 3e-3, .seed = 1});
  REQUIRE(curve.losses.size() == 500);
  CHECK(curve.losses.back() < 0.01 * curve.losses.front());

  // Moving average of the curve never rises on an overfit-one-batch run.
  double early = std::accumulate(curve.losses.begin(),
                                 curve.losses.begin() + 50, 0.0);
  double late = std::accumulate(curve.losses.end() - 50,
                                curve.losses.end(), 0.0);
  CHECK(late < early);
}

TEST_CASE("training trajectories are bit-reproducible") {
  Codebook cb = tiny_codebook(5, 3, 87);
  std::vector<InvKTriple> corpus{{random_tokens(5, 6, 89),
                                  random_matrix(3, 6, 91),
                                  random_matrix(3, 3, 93)}};
  auto run = [&]() {
    InvKModel model({.k = 5, .dim = 3, .d_model = 8, .heads = 2, .layers = 1,
                     .d_ff = 16},
                    cb, 95);
    return train_invk(model, corpus, {}, {.steps = 40, .lr = 1e-3, .seed = 5})
        .losses;
  };
  CHECK(run() == run());
}

TEST_CASE("divergence aborts with the failing step") {
  Codebook cb = tiny_codebook(5, 3, 97);
  InvKModel model({.k = 5, .dim = 3, .d_model = 8, .heads = 2, .layers = 1,
                   .d_ff = 16},
                  cb, 99);
  // Finite but enormous targets overflow the squared error immediately.
  FeatureMatrix huge = random_matrix(3, 6, 103);
  for (double& v : huge.data) v *= 1e200;
  std::vector<InvKTriple> corpus{{random_tokens(5, 6, 101), huge,
                                  random_matrix(3, 3, 107)}};
  try {
    train_invk(model, corpus, {}, {.steps = 5, .lr = 1e-3, .seed = 2});
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("step 0") != std::string::npos);
  }
}

TEST_CASE("checkpoints reload to identical behavior") {
  Codebook cb = tiny_codebook(6, 4, 109);
  InvKModel model({.k = 6, .dim = 4, .d_model = 8, .heads = 2, .layers = 1,
                   .d_ff = 16},
                  cb, 113);
  std::vector<InvKTriple> corpus{{random_tokens(6, 6, 127),
                                  random_matrix(4, 6, 131),
                                  random_matrix(4, 3, 137)}};
  train_invk(model, corpus, {}, {.steps = 30, .lr = 1e-3, .seed = 3});

  const std::string path = "invk_ckpt_test.vtkm";
  model.save(path);
  InvKModel a = InvKModel::from_checkpoint(path);
  InvKModel b = InvKModel::from_checkpoint(path);
  TokenSequence tokens = random_tokens(6, 5, 139);
  FeatureMatrix prompt = random_matrix(4, 3, 149);
  CHECK(a.predict(tokens, prompt).data == b.predict(tokens, prompt).data);

  // Save -> load -> save is a bit-exact fixed point of the f32 blob.
  const std::string path2 = "invk_ckpt_test2.vtkm";
  a.save(path2);
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  std::string bytes1((std::istreambuf_iterator<char>(f1)), {});
  std::string bytes2((std::istreambuf_iterator<char>(f2)), {});
  CHECK(bytes1 == bytes2);
  std::remove(path.c_str());
  std::remove(path2.c_str());
}

TEST_CASE("mask and replace noise does not hurt held-out loss") {
  // Paired seeds: a tiny noisy training set the plain run can memorize,
  // against a same-distribution held-out set.
  SyntheticCorpusSpec base;
  base.num_speakers = 2;
  base.utterances_per_speaker = 4;
  base.frames_per_utterance = 24;
  base.dim = 6;
  base.num_content_units = 5;
  base.noise_scale = 0.8;
  base.speaker_offset_scale = 2.0;

  double aug_total = 0.0, plain_total = 0.0;
  for (uint64_t seed = 0; seed < 5; ++seed) {
    SyntheticCorpusSpec spec = base;
    spec.seed = 200 + seed;
    auto corpus = generate_synthetic_corpus(spec);
    std::vector<FeatureMatrix> mats;
    for (const auto& u : corpus)
      mats.push_back(normalize(u.record.features).features);
    KmeansTraining tr = train_kmeans(mats, {.k = 5, .seed = seed});

    auto make_triples = [&](size_t from, size_t to) {
      std::vector<InvKTriple> out;
      for (size_t i = from; i < to; ++i) {
        InvKTriple t;
        t.tokens = tokenize(mats[i], tr.codebook);
        t.target = corpus[i].record.features;
        t.prompt = corpus[i].record.features;
        t.prompt.data.resize(8 * spec.dim);  // first 8 frames
        out.push_back(std::move(t));
      }
      return out;
    };
    auto train_set = make_triples(0, 2);
    auto held_set = make_triples(2, 8);

    auto held_loss = [&](const InvKModel& m) {
      double acc = 0.0;
      for (const auto& t : held_set)
        acc += loss_invk(m.forward(t.tokens, t.prompt), t.target,
                         t.prompt.frames())
                   .total;
      return acc / held_set.size();
    };

    InvKConfig config{.k = 5, .dim = 6, .d_model = 16, .heads = 2,
                      .layers = 1, .d_ff = 32};
    InvKTrainOptions opts{.steps = 400, .lr = 3e-3, .seed = seed};

    InvKModel plain(config, tr.codebook, 300 + seed);
    train_invk(plain, train_set, {.mask_prob = 0, .replace_prob = 0}, opts);
    plain_total += held_loss(plain);

    InvKModel augged(config, tr.codebook, 300 + seed);
    train_invk(augged, train_set, {.mask_prob = 0.1, .replace_prob = 0.1},
               opts);
    aug_total += held_loss(augged);
  }
  CHECK(aug_total / 5.0 <= plain_total / 5.0);
}

}  // TEST_SUITE
