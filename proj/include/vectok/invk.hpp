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

#ifndef VECTOK_INVK_HPP_
#define VECTOK_INVK_HPP_

#include <string>
#include <vector>

#include "vectok/autograd.hpp"
#include "vectok/quantizer.hpp"
#include "vectok/types.hpp"

namespace vectok {

// Token mask/replace augmentation rates; both default to the 10% operating
// point and may not overlap past certainty.
struct AugmentationPolicy {
  double mask_prob = 0.10;     // alpha
  double replace_prob = 0.10;  // beta
};

// Each position independently becomes MASK with prob alpha, a uniformly
// random *different* base token with prob beta, else stays. The MASK id is
// tokens.vocab_size; the output vocab is therefore one larger.
TokenSequence augment(const TokenSequence& tokens,
                      const AugmentationPolicy& policy, uint64_t seed);

struct InvKConfig {
  uint32_t k = 0;    // base token vocabulary (codebook size)
  uint32_t dim = 0;  // feature dimensionality
  uint32_t d_model = 64;
  uint32_t heads = 2;
  uint32_t layers = 2;
  uint32_t d_ff = 256;
};

// Prompt-conditioned token-to-vector decoder. The embedding table holds
// k + 2 rows (base tokens, MASK, padding); base rows start as exact copies
// of the codebook centers. Prompt frames are concatenated ahead of the
// token embeddings; attention is bidirectional. Token positions carry
// sinusoidal encodings, prompt positions a learned segment embedding.
class InvKModel {
 public:
  InvKModel(const InvKConfig& config, uint64_t seed);
  InvKModel(const InvKConfig& config, const Codebook& codebook, uint64_t seed);

  static InvKModel from_checkpoint(const std::string& path);
  void save(const std::string& path) const;

  // Output node has one row per prompt frame and token; rows [prompt, end)
  // are the per-token predictions.
  nn::TensorPtr forward(const TokenSequence& tokens,
                        const FeatureMatrix& prompt) const;
  // Token-position predictions only.
  FeatureMatrix predict(const TokenSequence& tokens,
                        const FeatureMatrix& prompt) const;

  // Test hook: raw embedding row, bypassing every block.
  std::vector<double> embed_only(uint32_t token) const;

  const InvKConfig& config() const { return config_; }
  const std::vector<nn::TensorPtr>& params() const { return params_; }
  uint32_t mask_token() const { return config_.k; }

 private:
  void build(uint64_t seed);

  InvKConfig config_;
  nn::TensorPtr embedding_;            // (k+2) x dim
  nn::TensorPtr input_w_, input_b_;    // dim -> d_model
  nn::TensorPtr prompt_segment_;       // 1 x d_model
  std::vector<nn::AttentionBlock> blocks_;
  nn::TensorPtr out_w_, out_b_;  // d_model -> dim
  std::vector<nn::TensorPtr> params_;
};

// MSE over non-prompt rows plus (1 - SSIM) over the same region.
// `predicted` covers prompt and token positions; `target` only the tokens.
struct InvKLoss {
  nn::TensorPtr node;  // scalar
  double total = 0.0;
  double mse_term = 0.0;
  double ssim_value = 0.0;
};

InvKLoss loss_invk(const nn::TensorPtr& predicted, const FeatureMatrix& target,
                   size_t prompt_len);

struct InvKTriple {
  TokenSequence tokens;
  FeatureMatrix target;
  FeatureMatrix prompt;
};

struct InvKTrainOptions {
  uint32_t steps = 500;
  double lr = 1e-3;
  double weight_decay = 0.0;
  uint64_t seed = 0;
};

struct TrainCurve {
  std::vector<double> losses;  // one per step
};

// Full-batch AdamW over the corpus; throws NumericalError naming the step
// if the loss stops being finite.
TrainCurve train_invk(InvKModel& model, const std::vector<InvKTriple>& corpus,
                      const AugmentationPolicy& policy,
                      const InvKTrainOptions& options);

}  // namespace vectok

#endif  // VECTOK_INVK_HPP_
