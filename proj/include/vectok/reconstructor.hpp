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

#ifndef VECTOK_RECONSTRUCTOR_HPP_
#define VECTOK_RECONSTRUCTOR_HPP_

#include "vectok/quantizer.hpp"
#include "vectok/types.hpp"

namespace vectok {

// Deterministic inverse of tokenization: table lookup of cluster centers,
// optionally re-offset by a prompt-derived speaker statistic.

// frame_t = centers[token_t]; the speaker-agnostic reconstruction.
FeatureMatrix lookup_reconstruct(const TokenSequence& tokens,
                                 const Codebook& codebook);

// frame_t = centers[token_t] + mean(prompt). The prompt mean is exactly the
// statistic utterance-level normalization removed.
FeatureMatrix reconstruct_with_prompt(const TokenSequence& tokens,
                                      const Codebook& codebook,
                                      const FeatureMatrix& prompt);

// V_ano = lambda * V_spe + (1 - lambda) * V_agn, elementwise.
FeatureMatrix anonymize(const FeatureMatrix& v_spe, const FeatureMatrix& v_agn,
                        double lambda);

// Task-named alias of lookup_reconstruct.
FeatureMatrix deidentify(const TokenSequence& tokens, const Codebook& codebook);

}  // namespace vectok

#endif  // VECTOK_RECONSTRUCTOR_HPP_
