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

#include "vectok/seqlm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "vectok/checkpoint.hpp"
#include "vectok/reconstructor.hpp"

namespace vectok {

using nn::TensorPtr;

namespace {

struct Wire {
  std::vector<uint32_t> ids;
  size_t target_begin = 0;  // first target-token position within ids
};

void validate_segments(const ConditioningLayout& layout, uint32_t bpe_vocab) {
  if (layout.segments.empty())
    throw std::invalid_argument("layout needs at least one segment");
  for (const auto& seg : layout.segments)
    for (uint32_t t : seg)
      if (t >= bpe_vocab)
        throw std::invalid_argument("segment token " + std::to_string(t) +
                                    " outside the BPE vocab");
}

// BOS seg SEP seg SEP ... last-seg EOS. The last segment is the target.
Wire wire_full(const ConditioningLayout& layout, const SeqLmConfig& cfg) {
  validate_segments(layout, cfg.bpe_vocab);
  if (layout.segments.back().empty())
    throw std::invalid_argument("empty target segment");
  Wire w;
  w.ids.push_back(cfg.bos());
  for (size_t s = 0; s + 1 < layout.segments.size(); ++s) {
    w.ids.insert(w.ids.end(), layout.segments[s].begin(),
                 layout.segments[s].end());
    w.ids.push_back(cfg.sep());
  }
  w.target_begin = w.ids.size();
  w.ids.insert(w.ids.end(), layout.segments.back().begin(),
               layout.segments.back().end());
  w.ids.push_back(cfg.eos());
  return w;
}

// Condition prefix only: BOS seg SEP seg SEP ... (generation starts after).
std::vector<uint32_t> wire_prefix(const ConditioningLayout& condition,
                                  const SeqLmConfig& cfg) {
  validate_segments(condition, cfg.bpe_vocab);
  std::vector<uint32_t> ids;
  ids.push_back(cfg.bos());
  for (const auto& seg : condition.segments) {
    ids.insert(ids.end(), seg.begin(), seg.end());
    ids.push_back(cfg.sep());
  }
  return ids;
}

}  // namespace

SeqLmModel::SeqLmModel(const SeqLmConfig& config, LmMode mode, uint64_t seed)
    : config_(config), mode_(mode) {
  if (config_.bpe_vocab == 0)
    throw std::invalid_argument("bpe_vocab must be positive");
  if (config_.d_model % config_.heads != 0)
    throw std::invalid_argument("d_model must be divisible by heads");
  SplitMix64 rng(seed);
  embedding_ = nn::make_param(config_.vocab_total(), config_.d_model);
  nn::init_gaussian(embedding_, rng, 0.02);
  blocks_.resize(config_.layers);
  for (auto& b : blocks_) b.init(config_.d_model, config_.d_ff, rng);
  final_gamma_ = nn::make_param(1, config_.d_model);
  nn::init_constant(final_gamma_, 1.0);
  final_beta_ = nn::make_param(1, config_.d_model);
  head_w_ = nn::make_param(config_.d_model, config_.vocab_total());
  nn::init_gaussian(head_w_, rng, 0.02);
  head_b_ = nn::make_param(1, config_.vocab_total());

  params_ = {embedding_};
  for (const auto& b : blocks_) b.collect_params(params_);
  params_.push_back(final_gamma_);
  params_.push_back(final_beta_);
  params_.push_back(head_w_);
  params_.push_back(head_b_);
}

TensorPtr SeqLmModel::logits(const std::vector<uint32_t>& ids) const {
  if (ids.empty()) throw std::invalid_argument("empty input");
  for (uint32_t t : ids)
    if (t >= config_.vocab_total())
      throw std::invalid_argument("id " + std::to_string(t) +
                                  " outside the vocabulary");
  TensorPtr x = nn::gather_rows(embedding_, ids);
  x = nn::add(x, nn::make_constant(
                     ids.size(), config_.d_model,
                     nn::sinusoid_rows(ids.size(), config_.d_model)));
  for (const auto& b : blocks_)
    x = b.forward(x, config_.heads, /*causal=*/true);
  x = nn::layer_norm(x, final_gamma_, final_beta_);
  return nn::add_rowvec(nn::matmul(x, head_w_), head_b_);
}

LmLoss lm_loss(const SeqLmModel& model, const ConditioningLayout& layout) {
  Wire w = wire_full(layout, model.config());
  std::vector<uint32_t> inputs(w.ids.begin(), w.ids.end() - 1);
  std::vector<uint32_t> targets(w.ids.begin() + 1, w.ids.end());
  // Loss on positions whose prediction target lies in the target segment,
  // EOS included.
  std::vector<uint8_t> include(inputs.size(), 0);
  for (size_t i = 0; i < inputs.size(); ++i)
    if (i + 1 >= w.target_begin) include[i] = 1;
  TensorPtr lg = model.logits(inputs);
  LmLoss loss;
  loss.node = nn::nll_rows(lg, targets, include);
  loss.value = loss.node->value[0];
  return loss;
}

TrainCurve train_lm(SeqLmModel& model,
                    const std::vector<ConditioningLayout>& corpus,
                    const LmTrainOptions& options) {
  if (corpus.empty()) throw std::invalid_argument("empty training corpus");
  nn::AdamW opt;
  opt.lr = options.lr;
  opt.weight_decay = options.weight_decay;
  TrainCurve curve;
  curve.losses.reserve(options.steps);
  for (uint32_t step = 0; step < options.steps; ++step) {
    for (const auto& p : model.params()) p->zero_grad();
    TensorPtr total;
    for (const auto& layout : corpus) {
      LmLoss l = lm_loss(model, layout);
      total = total ? nn::add(total, l.node) : l.node;
    }
    total = nn::scale(total, 1.0 / static_cast<double>(corpus.size()));
    double value = total->value[0];
    if (!std::isfinite(value))
      throw NumericalError("training diverged (non-finite loss) at step " +
                           std::to_string(step));
    curve.losses.push_back(value);
    nn::backward(total);
    double lr_now = options.cosine_schedule
                        ? nn::cosine_lr(options.lr, step, options.steps)
                        : options.lr;
    opt.step(model.params(), lr_now);
  }
  return curve;
}

std::vector<Candidate> sample_candidates(const SeqLmModel& model,
                                         const ConditioningLayout& condition,
                                         const SampleOptions& options) {
  if (options.n_candidates < 1)
    throw std::invalid_argument("need at least one candidate");
  if (options.temperature < 0.0)
    throw std::invalid_argument("temperature must be >= 0");
  const SeqLmConfig& cfg = model.config();
  std::vector<uint32_t> prefix = wire_prefix(condition, cfg);
  const uint32_t max_len =
      options.max_len > 0
          ? options.max_len
          : static_cast<uint32_t>(4 * prefix.size() + 64);

  std::vector<Candidate> out(options.n_candidates);
  for (uint32_t c = 0; c < options.n_candidates; ++c) {
    SplitMix64 rng(derive_stream(options.seed, c));
    std::vector<uint32_t> ids = prefix;
    Candidate& cand = out[c];
    cand.tokens.vocab_size = cfg.vocab_total();
    cand.truncated = true;
    for (uint32_t step = 0; step < max_len; ++step) {
      TensorPtr lg = model.logits(ids);
      const double* row = &lg->value[(lg->rows - 1) * lg->cols];
      const size_t v = lg->cols;
      uint32_t next = 0;
      if (options.temperature == 0.0) {
        // Greedy: argmax, ties toward the smallest id.
        double best = row[0];
        for (size_t j = 1; j < v; ++j)
          if (row[j] > best) {
            best = row[j];
            next = static_cast<uint32_t>(j);
          }
      } else {
        std::vector<double> scaled(v);
        for (size_t j = 0; j < v; ++j) scaled[j] = row[j] / options.temperature;
        if (options.top_k > 0 && options.top_k < v) {
          // Keep the top_k logits; ties at the cutoff keep the smallest ids.
          std::vector<double> sorted(scaled);
          std::nth_element(sorted.begin(),
                           sorted.begin() + (options.top_k - 1), sorted.end(),
                           std::greater<double>());
          double cutoff = sorted[options.top_k - 1];
          size_t allowed = 0;
          for (size_t j = 0; j < v; ++j) {
            if (scaled[j] >= cutoff && allowed < options.top_k)
              ++allowed;
            else
              scaled[j] = -std::numeric_limits<double>::infinity();
          }
        }
        double mx = *std::max_element(scaled.begin(), scaled.end());
        double denom = 0.0;
        for (double s : scaled) denom += std::exp(s - mx);
        double r = rng.uniform() * denom;
        double acc = 0.0;
        next = static_cast<uint32_t>(v - 1);
        for (size_t j = 0; j < v; ++j) {
          acc += std::exp(scaled[j] - mx);
          if (acc > r) {
            next = static_cast<uint32_t>(j);
            break;
          }
        }
      }
      if (next == cfg.eos()) {
        cand.truncated = false;
        break;
      }
      ids.push_back(next);
      cand.tokens.tokens.push_back(next);
    }
  }
  return out;
}

size_t rescore_select(const std::vector<Candidate>& candidates,
                      const RescoreHook& hook,
                      const ConditioningLayout& condition) {
  if (candidates.empty()) throw std::invalid_argument("no candidates");
  size_t best = 0;
  double best_score = hook(condition, candidates[0].tokens);
  for (size_t i = 1; i < candidates.size(); ++i) {
    double score = hook(condition, candidates[i].tokens);
    if (score > best_score) {
      best_score = score;
      best = i;
    }
  }
  return best;
}

double sequence_log_likelihood(const SeqLmModel& model,
                               const ConditioningLayout& condition,
                               const TokenSequence& candidate) {
  const SeqLmConfig& cfg = model.config();
  std::vector<uint32_t> ids = wire_prefix(condition, cfg);
  const size_t scored_from = ids.size();
  ids.insert(ids.end(), candidate.tokens.begin(), candidate.tokens.end());
  ids.push_back(cfg.eos());

  std::vector<uint32_t> inputs(ids.begin(), ids.end() - 1);
  TensorPtr lg = model.logits(inputs);
  double total = 0.0;
  size_t count = 0;
  for (size_t i = scored_from - 1; i < inputs.size(); ++i) {
    const double* row = &lg->value[i * lg->cols];
    double mx = row[0];
    for (size_t j = 1; j < lg->cols; ++j) mx = std::max(mx, row[j]);
    double denom = 0.0;
    for (size_t j = 0; j < lg->cols; ++j) denom += std::exp(row[j] - mx);
    total += row[ids[i + 1]] - mx - std::log(denom);
    ++count;
  }
  return total / static_cast<double>(count);
}

RescoreHook default_rescorer(const SeqLmModel& model) {
  return [&model](const ConditioningLayout& condition,
                  const TokenSequence& candidate) {
    return sequence_log_likelihood(model, condition, candidate);
  };
}

S2stTranslation s2st_translate(const SeqLmModel& model,
                               const TokenSequence& source_tokens,
                               const BpeModel& bpe,
                               const SampleOptions& options) {
  TokenSequence source_bpe = encode(source_tokens, bpe);
  ConditioningLayout condition{LmMode::kS2st, {source_bpe.tokens}};
  std::vector<Candidate> candidates =
      sample_candidates(model, condition, options);
  size_t best = rescore_select(candidates, default_rescorer(model), condition);

  S2stTranslation out;
  out.bpe_tokens.vocab_size = bpe.vocab_size();
  for (uint32_t t : candidates[best].tokens.tokens) {
    if (t >= bpe.vocab_size())
      throw std::invalid_argument("sampled id " + std::to_string(t) +
                                  " is not a BPE token");
    out.bpe_tokens.tokens.push_back(t);
  }
  out.base_tokens = decode(out.bpe_tokens, bpe);
  return out;
}

FeatureMatrix s2st_pipeline(const SeqLmModel& model,
                            const TokenSequence& source_tokens,
                            const BpeModel& bpe, const Codebook& codebook,
                            const FeatureMatrix& prompt,
                            const SampleOptions& options) {
  S2stTranslation translation =
      s2st_translate(model, source_tokens, bpe, options);
  if (translation.base_tokens.vocab_size > codebook.k)
    throw std::invalid_argument("BPE base vocab exceeds the codebook");
  return reconstruct_with_prompt(translation.base_tokens, codebook, prompt);
}

std::vector<uint32_t> unit_mapping_table(uint32_t num_units,
                                         UnitMapping mapping,
                                         uint64_t mapping_seed) {
  std::vector<uint32_t> table(num_units);
  std::iota(table.begin(), table.end(), 0u);
  if (mapping == UnitMapping::kPermutation) {
    SplitMix64 rng(mapping_seed);
    for (uint32_t i = num_units; i > 1; --i) {
      uint32_t j = static_cast<uint32_t>(rng.uniform_index(i));
      std::swap(table[i - 1], table[j]);
    }
  }
  return table;
}

std::vector<TokenPair> generate_paired_token_corpus(
    const PairedCorpusSpec& spec) {
  if (spec.num_units < 1 || spec.seq_len < 1 || spec.num_pairs < 1)
    throw std::invalid_argument("paired corpus spec has a zero extent");
  std::vector<uint32_t> table =
      unit_mapping_table(spec.num_units, spec.mapping, spec.mapping_seed);
  SplitMix64 rng(spec.seed);
  std::vector<TokenPair> out(spec.num_pairs);
  for (auto& pair : out) {
    pair.source.vocab_size = spec.num_units;
    pair.target.vocab_size = spec.num_units;
    for (uint32_t t = 0; t < spec.seq_len; ++t) {
      uint32_t u = static_cast<uint32_t>(rng.uniform_index(spec.num_units));
      pair.source.tokens.push_back(u);
      pair.target.tokens.push_back(table[u]);
    }
  }
  return out;
}

void SeqLmModel::save(const std::string& path) const {
  std::map<std::string, double> hparams{
      {"bpe_vocab", static_cast<double>(config_.bpe_vocab)},
      {"d_model", static_cast<double>(config_.d_model)},
      {"heads", static_cast<double>(config_.heads)},
      {"layers", static_cast<double>(config_.layers)},
      {"d_ff", static_cast<double>(config_.d_ff)},
      {"mode", static_cast<double>(static_cast<uint32_t>(mode_))},
  };
  nn::save_checkpoint(path, nn::ModelKind::kSeqLm, hparams, params_);
}

SeqLmModel SeqLmModel::from_checkpoint(const std::string& path) {
  nn::Checkpoint ckpt = nn::load_checkpoint(path);
  if (ckpt.kind != nn::ModelKind::kSeqLm)
    throw FormatError(FormatError::Kind::BadValue,
                      "checkpoint does not hold a sequence LM");
  SeqLmConfig config;
  config.bpe_vocab = static_cast<uint32_t>(ckpt.hparams.at("bpe_vocab"));
  config.d_model = static_cast<uint32_t>(ckpt.hparams.at("d_model"));
  config.heads = static_cast<uint32_t>(ckpt.hparams.at("heads"));
  config.layers = static_cast<uint32_t>(ckpt.hparams.at("layers"));
  config.d_ff = static_cast<uint32_t>(ckpt.hparams.at("d_ff"));
  LmMode mode = static_cast<LmMode>(
      static_cast<uint32_t>(ckpt.hparams.at("mode")));
  SeqLmModel model(config, mode, /*seed=*/0);
  nn::restore_params(ckpt, model.params());
  return model;
}

}  // namespace vectok
