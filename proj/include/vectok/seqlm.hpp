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

#ifndef VECTOK_SEQLM_HPP_
#define VECTOK_SEQLM_HPP_

#include <functional>
#include <string>
#include <vector>

#include "vectok/autograd.hpp"
#include "vectok/bpe.hpp"
#include "vectok/invk.hpp"  // TrainCurve
#include "vectok/quantizer.hpp"
#include "vectok/types.hpp"

namespace vectok {

enum class LmMode : uint32_t { kTts = 1, kS2st = 2 };

// BOS/EOS/PAD/SEP are appended after the BPE vocabulary.
struct SeqLmConfig {
  uint32_t bpe_vocab = 0;
  uint32_t d_model = 128;
  uint32_t heads = 4;
  uint32_t layers = 4;
  uint32_t d_ff = 512;

  uint32_t vocab_total() const { return bpe_vocab + 4; }
  uint32_t bos() const { return bpe_vocab; }
  uint32_t eos() const { return bpe_vocab + 1; }
  uint32_t pad() const { return bpe_vocab + 2; }
  uint32_t sep() const { return bpe_vocab + 3; }
};

// Ordered condition segments plus the target segment (last). The wire form
// is BOS seg SEP seg SEP ... target EOS; the loss covers only target
// positions and the closing EOS.
struct ConditioningLayout {
  LmMode mode = LmMode::kTts;
  std::vector<std::vector<uint32_t>> segments;
};

// Decoder-only causal LM over BPE tokens plus specials.
class SeqLmModel {
 public:
  SeqLmModel(const SeqLmConfig& config, LmMode mode, uint64_t seed);

  static SeqLmModel from_checkpoint(const std::string& path);
  void save(const std::string& path) const;

  // Causal logits, one row per input position.
  nn::TensorPtr logits(const std::vector<uint32_t>& ids) const;

  const SeqLmConfig& config() const { return config_; }
  LmMode mode() const { return mode_; }
  const std::vector<nn::TensorPtr>& params() const { return params_; }

 private:
  SeqLmConfig config_;
  LmMode mode_;
  nn::TensorPtr embedding_;  // vocab_total x d_model
  std::vector<nn::AttentionBlock> blocks_;
  nn::TensorPtr final_gamma_, final_beta_;
  nn::TensorPtr head_w_, head_b_;  // d_model -> vocab_total (untied)
  std::vector<nn::TensorPtr> params_;
};

struct LmLoss {
  nn::TensorPtr node;  // scalar mean NLL, nats/token
  double value = 0.0;
};

// Mean per-token negative log-likelihood over the target segment and EOS.
LmLoss lm_loss(const SeqLmModel& model, const ConditioningLayout& layout);

struct LmTrainOptions {
  uint32_t steps = 2000;
  double lr = 1e-3;
  double weight_decay = 0.0;
  uint64_t seed = 0;
  bool cosine_schedule = true;
};

TrainCurve train_lm(SeqLmModel& model,
                    const std::vector<ConditioningLayout>& corpus,
                    const LmTrainOptions& options);

struct SampleOptions {
  uint32_t n_candidates = 256;
  double temperature = 1.0;  // 0 selects the argmax at every step
  uint32_t top_k = 0;        // 0 disables the restriction
  uint64_t seed = 0;
  uint32_t max_len = 0;  // 0 defaults to 4 * condition length + 64
};

struct Candidate {
  TokenSequence tokens;  // BPE ids, EOS stripped
  bool truncated = false;
};

// Ancestral samples from (seed, candidate index) derived streams, so any
// parallel schedule reproduces the serial candidate list.
std::vector<Candidate> sample_candidates(const SeqLmModel& model,
                                         const ConditioningLayout& condition,
                                         const SampleOptions& options);

using RescoreHook = std::function<double(const ConditioningLayout& condition,
                                         const TokenSequence& candidate)>;

// Index of the highest-scoring candidate; ties keep the earliest.
size_t rescore_select(const std::vector<Candidate>& candidates,
                      const RescoreHook& hook,
                      const ConditioningLayout& condition);

// Length-normalized LM log-likelihood of candidate + EOS given condition.
double sequence_log_likelihood(const SeqLmModel& model,
                               const ConditioningLayout& condition,
                               const TokenSequence& candidate);
RescoreHook default_rescorer(const SeqLmModel& model);

// Source tokens -> BPE encode -> sample + rescore -> BPE decode.
struct S2stTranslation {
  TokenSequence bpe_tokens;   // selected candidate
  TokenSequence base_tokens;  // after BPE decoding
};

S2stTranslation s2st_translate(const SeqLmModel& model,
                               const TokenSequence& source_tokens,
                               const BpeModel& bpe,
                               const SampleOptions& options);

// Translation followed by prompt-offset reconstruction.
FeatureMatrix s2st_pipeline(const SeqLmModel& model,
                            const TokenSequence& source_tokens,
                            const BpeModel& bpe, const Codebook& codebook,
                            const FeatureMatrix& prompt,
                            const SampleOptions& options);

// Synthetic paired-token task: target units are a seeded deterministic
// mapping of source units, identity or a permutation.
enum class UnitMapping : uint32_t { kIdentity = 0, kPermutation = 1 };

struct PairedCorpusSpec {
  uint32_t num_pairs = 48;
  uint32_t seq_len = 10;
  uint32_t num_units = 10;
  UnitMapping mapping = UnitMapping::kIdentity;
  uint64_t mapping_seed = 0;
  uint64_t seed = 0;
};

struct TokenPair {
  TokenSequence source;
  TokenSequence target;
};

std::vector<uint32_t> unit_mapping_table(uint32_t num_units,
                                         UnitMapping mapping,
                                         uint64_t mapping_seed);
std::vector<TokenPair> generate_paired_token_corpus(
    const PairedCorpusSpec& spec);

}  // namespace vectok

#endif  // VECTOK_SEQLM_HPP_
