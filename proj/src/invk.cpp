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

#include "vectok/invk.hpp"

#include <cmath>
#include <stdexcept>

#include "vectok/checkpoint.hpp"

namespace vectok {

using nn::TensorPtr;

TokenSequence augment(const TokenSequence& tokens,
                      const AugmentationPolicy& policy, uint64_t seed) {
  if (policy.mask_prob < 0.0 || policy.mask_prob > 1.0 ||
      policy.replace_prob < 0.0 || policy.replace_prob > 1.0 ||
      policy.mask_prob + policy.replace_prob > 1.0)
    throw std::invalid_argument("augmentation probabilities must lie in "
                                "[0, 1] and sum to at most 1");
  const uint32_t k = tokens.vocab_size;
  TokenSequence out;
  out.vocab_size = k + 1;  // admits the MASK id
  out.tokens = tokens.tokens;
  SplitMix64 rng(seed);
  for (uint32_t& t : out.tokens) {
    double u = rng.uniform();
    if (u < policy.mask_prob) {
      t = k;
    } else if (u < policy.mask_prob + policy.replace_prob && k > 1) {
      uint32_t r = static_cast<uint32_t>(rng.uniform_index(k - 1));
      t = r >= t ? r + 1 : r;
    }
  }
  return out;
}

InvKModel::InvKModel(const InvKConfig& config, uint64_t seed)
    : config_(config) {
  build(seed);
}

InvKModel::InvKModel(const InvKConfig& config, const Codebook& codebook,
                     uint64_t seed)
    : config_(config) {
  if (codebook.k != config.k || codebook.dim != config.dim)
    throw std::invalid_argument("codebook does not match the model config");
  build(seed);
  // Base embedding rows are exact copies of the cluster centers.
  for (uint32_t j = 0; j < config_.k; ++j)
    for (uint32_t d = 0; d < config_.dim; ++d)
      embedding_->v(j, d) = codebook.center(j)[d];
}

void InvKModel::build(uint64_t seed) {
  if (config_.k == 0 || config_.dim == 0)
    throw std::invalid_argument("model config has zero extents");
  if (config_.d_model % config_.heads != 0)
    throw std::invalid_argument("d_model must be divisible by heads");
  SplitMix64 rng(seed);
  embedding_ = nn::make_param(config_.k + 2, config_.dim);
  nn::init_gaussian(embedding_, rng, 0.02);
  input_w_ = nn::make_param(config_.dim, config_.d_model);
  nn::init_gaussian(input_w_, rng, 0.02);
  input_b_ = nn::make_param(1, config_.d_model);
  prompt_segment_ = nn::make_param(1, config_.d_model);
  nn::init_gaussian(prompt_segment_, rng, 0.02);
  blocks_.resize(config_.layers);
  for (auto& b : blocks_) b.init(config_.d_model, config_.d_ff, rng);
  out_w_ = nn::make_param(config_.d_model, config_.dim);
  nn::init_gaussian(out_w_, rng, 0.02);
  out_b_ = nn::make_param(1, config_.dim);

  params_ = {embedding_, input_w_, input_b_, prompt_segment_};
  for (const auto& b : blocks_) b.collect_params(params_);
  params_.push_back(out_w_);
  params_.push_back(out_b_);
}

TensorPtr InvKModel::forward(const TokenSequence& tokens,
                             const FeatureMatrix& prompt) const {
  if (tokens.tokens.empty()) throw std::invalid_argument("empty token input");
  if (prompt.frames() == 0) throw std::invalid_argument("empty prompt");
  if (prompt.dim != config_.dim)
    throw std::invalid_argument("prompt dim does not match the model");
  for (uint32_t t : tokens.tokens)
    if (t >= config_.k + 2)
      throw std::invalid_argument("token " + std::to_string(t) +
                                  " outside the embedding table");

  const size_t p = prompt.frames();
  const size_t n = tokens.tokens.size();
  TensorPtr prompt_in = nn::make_constant(p, config_.dim, prompt.data);
  TensorPtr tok_emb = nn::gather_rows(embedding_, tokens.tokens);
  TensorPtr x = nn::concat_rows(prompt_in, tok_emb);
  x = nn::add_rowvec(nn::matmul(x, input_w_), input_b_);

  // Sinusoidal encodings on token positions only; prompt rows get the
  // learned segment embedding and stay order-free.
  std::vector<double> pos((p + n) * config_.d_model, 0.0);
  std::vector<double> tok_pos = nn::sinusoid_rows(n, config_.d_model);
  std::copy(tok_pos.begin(), tok_pos.end(),
            pos.begin() + p * config_.d_model);
  x = nn::add(x, nn::make_constant(p + n, config_.d_model, pos));
  x = nn::add_rowvec_range(x, prompt_segment_, 0, p);

  for (const auto& b : blocks_)
    x = b.forward(x, config_.heads, /*causal=*/false);
  return nn::add_rowvec(nn::matmul(x, out_w_), out_b_);
}

FeatureMatrix InvKModel::predict(const TokenSequence& tokens,
                                 const FeatureMatrix& prompt) const {
  TensorPtr out = forward(tokens, prompt);
  TensorPtr sliced = nn::slice_rows(out, prompt.frames(), out->rows);
  FeatureMatrix m;
  m.dim = config_.dim;
  m.data = sliced->value;
  return m;
}

std::vector<double> InvKModel::embed_only(uint32_t token) const {
  if (token >= config_.k + 2)
    throw std::invalid_argument("token outside the embedding table");
  return {embedding_->value.begin() + token * config_.dim,
          embedding_->value.begin() + (token + 1) * config_.dim};
}

InvKLoss loss_invk(const TensorPtr& predicted, const FeatureMatrix& target,
                   size_t prompt_len) {
  if (target.frames() == 0) throw std::invalid_argument("empty target");
  if (predicted->rows != prompt_len + target.frames() ||
      predicted->cols != target.dim)
    throw std::invalid_argument(
        "prediction shape does not match prompt_len + target");
  TensorPtr region = nn::slice_rows(predicted, prompt_len, predicted->rows);
  TensorPtr target_const =
      nn::make_constant(target.frames(), target.dim, target.data);
  TensorPtr mse_term = nn::mse(region, target_const);
  TensorPtr ssim_value = nn::ssim(region, target_const);
  InvKLoss loss;
  loss.node = nn::add(mse_term, nn::one_minus(ssim_value));
  loss.total = loss.node->value[0];
  loss.mse_term = mse_term->value[0];
  loss.ssim_value = ssim_value->value[0];
  return loss;
}

TrainCurve train_invk(InvKModel& model, const std::vector<InvKTriple>& corpus,
                      const AugmentationPolicy& policy,
                      const InvKTrainOptions& options) {
  if (corpus.empty()) throw std::invalid_argument("empty training corpus");
  nn::AdamW opt;
  opt.lr = options.lr;
  opt.weight_decay = options.weight_decay;
  TrainCurve curve;
  curve.losses.reserve(options.steps);

  for (uint32_t step = 0; step < options.steps; ++step) {
    for (const auto& p : model.params()) p->zero_grad();
    TensorPtr total;
    double value = 0.0;
    for (size_t i = 0; i < corpus.size(); ++i) {
      const InvKTriple& triple = corpus[i];
      TokenSequence noisy =
          augment(triple.tokens, policy,
                  derive_stream(options.seed, step * corpus.size() + i));
      TensorPtr out = model.forward(noisy, triple.prompt);
      InvKLoss l = loss_invk(out, triple.target, triple.prompt.frames());
      total = total ? nn::add(total, l.node) : l.node;
    }
    total = nn::scale(total, 1.0 / static_cast<double>(corpus.size()));
    value = total->value[0];
    if (!std::isfinite(value))
      throw NumericalError("training diverged (non-finite loss) at step " +
                           std::to_string(step));
    curve.losses.push_back(value);
    nn::backward(total);
    opt.step(model.params());
  }
  return curve;
}

void InvKModel::save(const std::string& path) const {
  std::map<std::string, double> hparams{
      {"k", static_cast<double>(config_.k)},
      {"dim", static_cast<double>(config_.dim)},
      {"d_model", static_cast<double>(config_.d_model)},
      {"heads", static_cast<double>(config_.heads)},
      {"layers", static_cast<double>(config_.layers)},
      {"d_ff", static_cast<double>(config_.d_ff)},
  };
  nn::save_checkpoint(path, nn::ModelKind::kInverseK, hparams, params_);
}

InvKModel InvKModel::from_checkpoint(const std::string& path) {
  nn::Checkpoint ckpt = nn::load_checkpoint(path);
  if (ckpt.kind != nn::ModelKind::kInverseK)
    throw FormatError(FormatError::Kind::BadValue,
                      "checkpoint does not hold an inverse-K model");
  InvKConfig config;
  config.k = static_cast<uint32_t>(ckpt.hparams.at("k"));
  config.dim = static_cast<uint32_t>(ckpt.hparams.at("dim"));
  config.d_model = static_cast<uint32_t>(ckpt.hparams.at("d_model"));
  config.heads = static_cast<uint32_t>(ckpt.hparams.at("heads"));
  config.layers = static_cast<uint32_t>(ckpt.hparams.at("layers"));
  config.d_ff = static_cast<uint32_t>(ckpt.hparams.at("d_ff"));
  InvKModel model(config, /*seed=*/0);
  nn::restore_params(ckpt, model.params());
  return model;
}

}  // namespace vectok
