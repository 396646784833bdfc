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

#include "vectok/reconstructor.hpp"

#include <stdexcept>

#include "vectok/normalizer.hpp"

namespace vectok {

FeatureMatrix lookup_reconstruct(const TokenSequence& tokens,
                                 const Codebook& codebook) {
  FeatureMatrix out;
  out.dim = codebook.dim;
  out.data.resize(tokens.tokens.size() * static_cast<size_t>(codebook.dim));
  for (size_t t = 0; t < tokens.tokens.size(); ++t) {
    uint32_t id = tokens.tokens[t];
    if (id >= codebook.k)
      throw std::invalid_argument("token " + std::to_string(id) +
                                  " outside codebook of " +
                                  std::to_string(codebook.k));
    const double* c = codebook.center(id);
    for (uint32_t d = 0; d < codebook.dim; ++d) out.at(t, d) = c[d];
  }
  return out;
}

FeatureMatrix reconstruct_with_prompt(const TokenSequence& tokens,
                                      const Codebook& codebook,
                                      const FeatureMatrix& prompt) {
  if (prompt.dim != codebook.dim)
    throw std::invalid_argument("prompt dim " + std::to_string(prompt.dim) +
                                " does not match codebook dim " +
                                std::to_string(codebook.dim));
  if (prompt.frames() == 0) throw std::invalid_argument("empty prompt");
  UtteranceMean prompt_mean = compute_mean(prompt);
  FeatureMatrix out = lookup_reconstruct(tokens, codebook);
  for (size_t t = 0; t < out.frames(); ++t)
    for (uint32_t d = 0; d < out.dim; ++d)
      out.at(t, d) += prompt_mean.mean[d];
  return out;
}

FeatureMatrix anonymize(const FeatureMatrix& v_spe, const FeatureMatrix& v_agn,
                        double lambda) {
  if (v_spe.dim != v_agn.dim || v_spe.frames() != v_agn.frames())
    throw std::invalid_argument("speaker-specific and speaker-agnostic "
                                "matrices must share shape");
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw std::invalid_argument("lambda must be in [0, 1]");
  FeatureMatrix out;
  out.dim = v_spe.dim;
  out.frame_rate_hz = v_spe.frame_rate_hz;
  out.data.resize(v_spe.data.size());
  for (size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = lambda * v_spe.data[i] + (1.0 - lambda) * v_agn.data[i];
  return out;
}

FeatureMatrix deidentify(const TokenSequence& tokens,
                         const Codebook& codebook) {
  return lookup_reconstruct(tokens, codebook);
}

}  // namespace vectok
