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
#include <functional>
#include <vector>

#include "vectok/autograd.hpp"

using namespace vectok;
using namespace vectok::nn;

namespace {

// Central finite differences over every element of `params`, compared to
// the reverse-mode gradients of the scalar produced by `build`.
void check_gradients(const std::vector<TensorPtr>& params,
                     const std::function<TensorPtr()>& build,
                     double tolerance = 1e-4, double h = 1e-4) {
  TensorPtr loss = build();
  for (const auto& p : params) p->zero_grad();
  backward(loss);
  for (const auto& p : params) {
    REQUIRE(p->grad.size() == p->value.size());
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
      CHECK(std::abs(fd - ad) / denom < tolerance);
    }
  }
}

// Direct windowed-SSIM reference, written independently of the graph op:
// accumulates raw moments per window instead of centered ones.
double ssim_reference(const std::vector<double>& x,
                      const std::vector<double>& y, size_t rows, size_t cols,
                      size_t win) {
  size_t wr = std::min(win, rows), wc = std::min(win, cols);
  double lo = y[0], hi = y[0];
  for (double v : y) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  double range = hi - lo;
  if (range == 0.0) range = 1.0;
  double c1 = (0.01 * range) * (0.01 * range);
  double c2 = (0.03 * range) * (0.03 * range);
  double total = 0.0;
  size_t count = 0;
  for (size_t r0 = 0; r0 + wr <= rows; ++r0)
    for (size_t c0 = 0; c0 + wc <= cols; ++c0) {
      double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
      for (size_t r = r0; r < r0 + wr; ++r)
        for (size_t c = c0; c < c0 + wc; ++c) {
          double a = x[r * cols + c], b = y[r * cols + c];
          sx += a;
          sy += b;
          sxx += a * a;
          syy += b * b;
          sxy += a * b;
        }
      double n = static_cast<double>(wr * wc);
      double mx = sx / n, my = sy / n;
      double vx = sxx / n - mx * mx;
      double vy = syy / n - my * my;
      double cov = sxy / n - mx * my;
      total += ((2 * mx * my + c1) * (2 * cov + c2)) /
               ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++count;
    }
  return total / static_cast<double>(count);
}

}  // namespace

TEST_SUITE("autograd") {

TEST_CASE("d/dx of x squared at 3 is 6") {
  TensorPtr x = make_param(1, 1);
  x->value[0] = 3.0;
  TensorPtr zero = make_constant(1, 1, {0.0});
  TensorPtr loss = mse(x, zero);  // (x - 0)^2
  CHECK(loss->value[0] == 9.0);
  backward(loss);
  CHECK(x->grad[0] == doctest::Approx(6.0));
}

TEST_CASE("zero loss yields zero gradients") {
  TensorPtr x = make_param(2, 3);
  SplitMix64 rng(1);
  init_gaussian(x, rng, 1.0);
  TensorPtr target = make_constant(2, 3, x->value);
  TensorPtr loss = mse(x, target);
  CHECK(loss->value[0] == 0.0);
  backward(loss);
  for (double g : x->grad) CHECK(g == 0.0);
}

TEST_CASE("single-token attention block matches a hand computation") {
  // d=2, one head, one row. Every weight is set explicitly and the
  // expected output is recomputed below with plain scalar arithmetic.
  AttentionBlock block;
  SplitMix64 rng(0);
  block.init(2, 4, rng);
  // Overwrite with fixed values.
  auto set = [](const TensorPtr& t, std::vector<double> v) {
    t->value = std::move(v);
  };
  set(block.wq, {0.1, -0.2, 0.3, 0.4});
  set(block.bq, {0.01, 0.02});
  set(block.wk, {-0.5, 0.6, 0.7, -0.8});
  set(block.bk, {0.0, 0.0});
  set(block.wv, {0.9, 0.2, -0.1, 0.5});
  set(block.bv, {-0.03, 0.04});
  set(block.wo, {0.3, -0.3, 0.2, 0.6});
  set(block.bo, {0.05, -0.05});
  set(block.w1, {0.4, -0.1, 0.2, 0.3, -0.2, 0.1, 0.5, -0.4});
  set(block.b1, {0.0, 0.1, -0.1, 0.2});
  set(block.w2, {0.3, 0.1, -0.2, 0.4, 0.2, -0.5, 0.1, 0.3});
  set(block.b2, {-0.01, 0.02});

  TensorPtr x = make_constant(1, 2, {0.7, -0.3});
  TensorPtr y = block.forward(x, 1, false);

  // Hand computation.
  const double eps = 1e-5;
  double a = 0.7, b = -0.3;
  double mu = (a + b) / 2.0;
  double var = ((a - mu) * (a - mu) + (b - mu) * (b - mu)) / 2.0;
  double is = 1.0 / std::sqrt(var + eps);
  double h0 = (a - mu) * is, h1 = (b - mu) * is;
  // Softmax over a single position is 1, so ctx == v.
  double v0 = h0 * 0.9 + h1 * -0.1 - 0.03;
  double v1 = h0 * 0.2 + h1 * 0.5 + 0.04;
  double att0 = v0 * 0.3 + v1 * 0.2 + 0.05;
  double att1 = v0 * -0.3 + v1 * 0.6 - 0.05;
  double x1a = a + att0, x1b = b + att1;
  double mu2 = (x1a + x1b) / 2.0;
  double var2 = ((x1a - mu2) * (x1a - mu2) + (x1b - mu2) * (x1b - mu2)) / 2.0;
  double is2 = 1.0 / std::sqrt(var2 + eps);
  double g0 = (x1a - mu2) * is2, g1 = (x1b - mu2) * is2;
  auto gelu_ref = [](double z) {
    return z * 0.5 * (1.0 + std::erf(z / std::sqrt(2.0)));
  };
  double f0 = gelu_ref(g0 * 0.4 + g1 * -0.2 + 0.0);
  double f1 = gelu_ref(g0 * -0.1 + g1 * 0.1 + 0.1);
  double f2 = gelu_ref(g0 * 0.2 + g1 * 0.5 - 0.1);
  double f3 = gelu_ref(g0 * 0.3 + g1 * -0.4 + 0.2);
  double ff0 = f0 * 0.3 + f1 * -0.2 + f2 * 0.2 + f3 * 0.1 - 0.01;
  double ff1 = f0 * 0.1 + f1 * 0.4 + f2 * -0.5 + f3 * 0.3 + 0.02;

  CHECK(y->value[0] == doctest::Approx(x1a + ff0).epsilon(1e-12));
  CHECK(y->value[1] == doctest::Approx(x1b + ff1).epsilon(1e-12));
}

TEST_CASE("attention block gradients match finite differences") {
  AttentionBlock block;
  SplitMix64 rng(5);
  block.init(4, 8, rng);
  std::vector<TensorPtr> params;
  block.collect_params(params);
  TensorPtr x = make_param(3, 4);
  init_gaussian(x, rng, 0.5);
  params.push_back(x);

  std::vector<double> target(3 * 4);
  for (double& v : target) v = rng.gaussian();
  TensorPtr target_t = make_constant(3, 4, target);

  SUBCASE("bidirectional") {
    check_gradients(params, [&]() {
      return mse(block.forward(x, 2, false), target_t);
    });
  }
  SUBCASE("causal") {
    check_gradients(params, [&]() {
      return mse(block.forward(x, 2, true), target_t);
    });
  }
}

TEST_CASE("gather, concat, slice, and rowvec gradients") {
  SplitMix64 rng(9);
  TensorPtr table = make_param(5, 3);
  init_gaussian(table, rng, 1.0);
  TensorPtr bias = make_param(1, 3);
  init_gaussian(bias, rng, 1.0);
  TensorPtr extra = make_param(2, 3);
  init_gaussian(extra, rng, 1.0);
  std::vector<double> target(6 * 3);
  for (double& v : target) v = rng.gaussian();
  TensorPtr target_t = make_constant(6, 3, target);

  check_gradients({table, bias, extra}, [&]() {
    TensorPtr g = gather_rows(table, {4, 0, 0, 2});  // repeated index
    TensorPtr c = concat_rows(g, extra);
    TensorPtr shifted = add_rowvec_range(c, bias, 1, 4);
    TensorPtr left = slice_cols(shifted, 0, 2);
    TensorPtr right = slice_cols(shifted, 2, 3);
    return mse(concat_cols({left, right}), target_t);
  });
}

TEST_CASE("ssim matches the independent reference and is 1 at identity") {
  SplitMix64 rng(13);
  const size_t rows = 12, cols = 9;
  std::vector<double> x(rows * cols), y(rows * cols);
  for (double& v : x) v = rng.gaussian();
  for (double& v : y) v = rng.gaussian();

  TensorPtr xp = make_param(rows, cols);
  xp->value = x;
  TensorPtr yt = make_constant(rows, cols, y);
  TensorPtr s = ssim(xp, yt);
  CHECK(s->value[0] ==
        doctest::Approx(ssim_reference(x, y, rows, cols, 8)).epsilon(1e-5));
  CHECK(s->value[0] > -1.0);
  CHECK(s->value[0] < 1.0);

  TensorPtr self_t = make_constant(rows, cols, x);
  CHECK(ssim(xp, self_t)->value[0] == doctest::Approx(1.0).epsilon(1e-12));

  check_gradients({xp}, [&]() { return one_minus(ssim(xp, yt)); });
}

TEST_CASE("ssim window clamps to small matrices") {
  SplitMix64 rng(15);
  std::vector<double> x(3 * 4), y(3 * 4);
  for (double& v : x) v = rng.gaussian();
  for (double& v : y) v = rng.gaussian();
  TensorPtr xp = make_param(3, 4);
  xp->value = x;
  TensorPtr yt = make_constant(3, 4, y);
  CHECK(ssim(xp, yt)->value[0] ==
        doctest::Approx(ssim_reference(x, y, 3, 4, 8)).epsilon(1e-10));
}

TEST_CASE("constant-target ssim stays defined") {
  // Dynamic range 0 falls back to 1, keeping the statistic finite.
  TensorPtr xp = make_param(4, 4);
  init_constant(xp, 3.0);
  TensorPtr yt = make_constant(4, 4, std::vector<double>(16, 2.0));
  TensorPtr s = ssim(xp, yt);
  CHECK(std::isfinite(s->value[0]));
  CHECK(s->value[0] < 1.0);
}

TEST_CASE("nll matches -log softmax and its gradient checks out") {
  TensorPtr logits = make_param(3, 4);
  logits->value = {0.5, -0.2, 1.0, 0.0, 2.0, 2.0, 2.0, 2.0,
                   -1.0, 3.0, 0.0, 0.5};
  std::vector<uint32_t> targets{2, 1, 1};
  std::vector<uint8_t> include{1, 1, 0};

  double expected = 0.0;
  for (size_t r : {0, 1}) {
    double denom = 0.0;
    for (size_t j = 0; j < 4; ++j)
      denom += std::exp(logits->value[r * 4 + j]);
    expected += std::log(denom) - logits->value[r * 4 + targets[r]];
  }
  expected /= 2.0;
  TensorPtr loss = nll_rows(logits, targets, include);
  CHECK(loss->value[0] == doctest::Approx(expected).epsilon(1e-12));

  check_gradients({logits},
                  [&]() { return nll_rows(logits, targets, include); });
  // Uniform logits: NLL is ln(vocab).
  TensorPtr flat = make_param(1, 8);
  TensorPtr l2 = nll_rows(flat, {5}, {1});
  CHECK(l2->value[0] == doctest::Approx(std::log(8.0)).epsilon(1e-12));
}

TEST_CASE("softmax rows are normalized and causality is bit-exact") {
  SplitMix64 rng(21);
  TensorPtr a = make_param(5, 5);
  init_gaussian(a, rng, 2.0);
  TensorPtr sm = softmax_rows(a);
  for (size_t r = 0; r < 5; ++r) {
    double sum = 0.0;
    for (size_t c = 0; c < 5; ++c) sum += sm->v(r, c);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
  }

  // A -1e30 additive mask zeroes the future exactly: row r of the masked
  // softmax is bit-identical however the future scores change.
  std::vector<double> mask(25, 0.0);
  for (size_t r = 0; r < 5; ++r)
    for (size_t c = r + 1; c < 5; ++c) mask[r * 5 + c] = -1e30;
  TensorPtr mask_t = make_constant(5, 5, mask);
  TensorPtr masked1 = softmax_rows(add(a, mask_t));

  TensorPtr b = make_param(5, 5);
  b->value = a->value;
  b->v(2, 4) = 99.0;  // future of row <= 3
  b->v(1, 3) = -5.0;
  TensorPtr masked2 = softmax_rows(add(b, mask_t));
  for (size_t c = 0; c < 5; ++c) {
    CHECK(masked1->v(0, c) == masked2->v(0, c));
    CHECK(masked1->v(1, c) == masked2->v(1, c));
  }
}

TEST_CASE("adamw minimizes a quadratic") {
  TensorPtr x = make_param(1, 1);
  x->value[0] = 10.0;
  TensorPtr target = make_constant(1, 1, {3.0});
  AdamW opt;
  opt.lr = 0.1;
  for (int step = 0; step < 500; ++step) {
    x->zero_grad();
    TensorPtr loss = mse(x, target);
    backward(loss);
    opt.step({x});
  }
  CHECK(x->value[0] == doctest::Approx(3.0).epsilon(1e-3));
}

TEST_CASE("cosine schedule endpoints") {
  CHECK(cosine_lr(1.0, 0, 100) == doctest::Approx(1.0));
  CHECK(cosine_lr(1.0, 99, 100) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(cosine_lr(1.0, 50, 100) < 1.0);
}

}  // TEST_SUITE
