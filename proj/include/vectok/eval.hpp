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

#ifndef VECTOK_EVAL_HPP_
#define VECTOK_EVAL_HPP_

#include <optional>
#include <string>
#include <vector>

#include "vectok/bpe.hpp"
#include "vectok/quantizer.hpp"
#include "vectok/types.hpp"

namespace vectok {

struct ProbeReport {
  std::string probe;
  double accuracy = 0.0;
  double chance_level = 0.0;
  uint32_t num_classes = 0;
  uint32_t num_samples = 0;  // held-out utterances scored
};

enum class Representation {
  kRaw,
  kNormalized,
  kDeidentified,
  kAnonymized,
};

// Nearest-speaker-mean classification of per-utterance mean vectors.
// Utterances are split 80/20 per speaker by a seeded shuffle; speaker means
// come from the fit split, accuracy from the held-out split. Deidentified
// and anonymized representations need the codebook; anonymized also uses
// lambda. A single-speaker corpus degenerates to accuracy 1.
ProbeReport speaker_leakage_probe(const std::vector<UtteranceRecord>& corpus,
                                  Representation representation,
                                  const Codebook* codebook = nullptr,
                                  double lambda = 0.5, uint64_t split_seed = 0);

// Standard cluster purity of tokens against ground-truth content units:
// sum over clusters of the majority label count, over total frames.
double content_purity(const std::vector<TokenSequence>& tokens,
                      const std::vector<std::vector<uint32_t>>& unit_labels);

// Machine-readable pipeline summary. Inertia is recomputed over the given
// corpus (normalized frames against the codebook).
struct PipelineReportInputs {
  const std::vector<UtteranceRecord>* corpus = nullptr;
  const Codebook* codebook = nullptr;
  const BpeModel* bpe = nullptr;
  const std::vector<std::vector<uint32_t>>* unit_labels = nullptr;  // optional
  double frame_rate_hz = 50.0;
  double lambda = 0.5;
  uint64_t split_seed = 0;
};

// Returns the report serialized as a JSON document (schema_version 1,
// stable key names).
std::string pipeline_report_json(const PipelineReportInputs& inputs);

// 2-D PCA of per-utterance mean vectors for scatter plots; rows are
// `x TAB y TAB speaker_id`.
std::string pca_scatter_tsv(const std::vector<UtteranceRecord>& corpus);

}  // namespace vectok

#endif  // VECTOK_EVAL_HPP_
