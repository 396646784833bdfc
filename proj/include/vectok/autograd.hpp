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

#ifndef VECTOK_AUTOGRAD_HPP_
#define VECTOK_AUTOGRAD_HPP_

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "vectok/rng.hpp"

namespace vectok::nn {

// Reverse-mode differentiable 2-D tensor. Graphs are built define-by-run;
// every value is double precision so gradients can be checked against
// central finite differences at tight tolerances.
struct Tensor {
  size_t rows = 0;
  size_t cols = 0;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Tensor>> parents;
  std::function<void(const Tensor&)> backward_fn;

  size_t size() const { return rows * cols; }
  double& v(size_t r, size_t c) { return value[r * cols + c]; }
  double v(size_t r, size_t c) const { return value[r * cols + c]; }
  double& g(size_t r, size_t c) { return grad[r * cols + c]; }

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
  void zero_grad() { grad.assign(value.size(), 0.0); }
};

using TensorPtr = std::shared_ptr<Tensor>;

TensorPtr make_tensor(size_t rows, size_t cols, bool requires_grad);
TensorPtr make_constant(size_t rows, size_t cols,
                        const std::vector<double>& value);
// Parameters track gradients and are what optimizers update.
TensorPtr make_param(size_t rows, size_t cols);

void init_gaussian(const TensorPtr& t, SplitMix64& rng, double stddev);
void init_constant(const TensorPtr& t, double value);

// --- graph ops -------------------------------------------------------------

TensorPtr matmul(const TensorPtr& a, const TensorPtr& b);     // [m,k]x[k,n]
TensorPtr matmul_nt(const TensorPtr& a, const TensorPtr& b);  // a x b^T
TensorPtr add(const TensorPtr& a, const TensorPtr& b);
TensorPtr sub(const TensorPtr& a, const TensorPtr& b);
TensorPtr scale(const TensorPtr& a, double s);
// Broadcast-add a [1,c] row vector to rows [r0, r1) of a.
TensorPtr add_rowvec(const TensorPtr& a, const TensorPtr& v);
TensorPtr add_rowvec_range(const TensorPtr& a, const TensorPtr& v, size_t r0,
                           size_t r1);
TensorPtr gelu(const TensorPtr& a);
TensorPtr layer_norm(const TensorPtr& a, const TensorPtr& gamma,
                     const TensorPtr& beta, double eps = 1e-5);
// Row-wise softmax. Mask by adding large negative constants beforehand.
TensorPtr softmax_rows(const TensorPtr& a);
TensorPtr gather_rows(const TensorPtr& table,
                      const std::vector<uint32_t>& indices);
TensorPtr concat_rows(const TensorPtr& a, const TensorPtr& b);
TensorPtr slice_rows(const TensorPtr& a, size_t r0, size_t r1);
TensorPtr slice_cols(const TensorPtr& a, size_t c0, size_t c1);
TensorPtr concat_cols(const std::vector<TensorPtr>& parts);

// Mean squared error over all elements; target carries no gradient.
TensorPtr mse(const TensorPtr& pred, const TensorPtr& target);

// Mean windowed structural similarity in [-1, 1], sliding uniform window
// (8x8, clamped to the matrix extent), stabilizers C1=(0.01 R)^2,
// C2=(0.03 R)^2 with R the target's dynamic range (1 when degenerate).
TensorPtr ssim(const TensorPtr& pred, const TensorPtr& target,
               size_t window = 8);

// Mean negative log-likelihood of `targets[r]` under row-softmax of the
// logits, restricted to rows with include[r] != 0.
TensorPtr nll_rows(const TensorPtr& logits,
                   const std::vector<uint32_t>& targets,
                   const std::vector<uint8_t>& include);

// Elementwise 1 - a (used for SSIM loss terms).
TensorPtr one_minus(const TensorPtr& a);

// Accumulates gradients of every reachable requires_grad tensor.
// `root` must be scalar.
void backward(const TensorPtr& root);

// --- shared transformer machinery -------------------------------------

struct AttentionBlock {
  TensorPtr ln1_gamma, ln1_beta;
  TensorPtr wq, bq, wk, bk, wv, bv, wo, bo;
  TensorPtr ln2_gamma, ln2_beta;
  TensorPtr w1, b1, w2, b2;

  void init(size_t d_model, size_t d_ff, SplitMix64& rng);
  void collect_params(std::vector<TensorPtr>& out) const;
  // Pre-norm residual block: x + MHA(LN(x)) then + FF(LN(.)).
  TensorPtr forward(const TensorPtr& x, size_t heads, bool causal) const;
};

// Rows [0, n): standard sinusoidal encoding of positions offset..offset+n.
std::vector<double> sinusoid_rows(size_t n, size_t d_model, size_t offset = 0);

struct AdamW {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
  double weight_decay = 0.0;

  void step(const std::vector<TensorPtr>& params, double lr_now);
  void step(const std::vector<TensorPtr>& params) { step(params, lr); }

 private:
  size_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

// Cosine decay from base_lr to min_lr over total_steps.
double cosine_lr(double base_lr, size_t step, size_t total_steps,
                 double min_lr = 0.0);

}  // namespace vectok::nn

#endif  // VECTOK_AUTOGRAD_HPP_
