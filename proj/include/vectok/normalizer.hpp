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

#ifndef VECTOK_NORMALIZER_HPP_
#define VECTOK_NORMALIZER_HPP_

#include <vector>

#include "vectok/types.hpp"

namespace vectok {

// Arithmetic mean over an utterance's frames. Doubles as the speaker offset
// re-injected at reconstruction time.
struct UtteranceMean {
  uint32_t dim = 0;
  std::vector<double> mean;
};

struct NormalizedFeatures {
  FeatureMatrix features;
  UtteranceMean mean;
};

// The mean is always recomputed per utterance; a stored corpus-level mean
// would break the offset-invariance property.
UtteranceMean compute_mean(const FeatureMatrix& features);

// Subtracts the utterance mean from every frame and returns both.
NormalizedFeatures normalize(const FeatureMatrix& features);

}  // namespace vectok

#endif  // VECTOK_NORMALIZER_HPP_
