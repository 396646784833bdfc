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

#include "vectok/normalizer.hpp"

#include <cmath>
#include <stdexcept>

namespace vectok {

UtteranceMean compute_mean(const FeatureMatrix& features) {
  const size_t n = features.frames();
  if (n == 0)
    throw std::invalid_argument("cannot compute the mean of an empty matrix");
  UtteranceMean out;
  out.dim = features.dim;
  out.mean.assign(features.dim, 0.0);
  for (size_t t = 0; t < n; ++t)
    for (size_t d = 0; d < features.dim; ++d) out.mean[d] += features.at(t, d);
  for (double& v : out.mean) {
    v /= static_cast<double>(n);
    if (!std::isfinite(v))
      throw NumericalError("utterance mean is not finite");
  }
  return out;
}

NormalizedFeatures normalize(const FeatureMatrix& features) {
  NormalizedFeatures out;
  out.mean = compute_mean(features);
  out.features.dim = features.dim;
  out.features.frame_rate_hz = features.frame_rate_hz;
  out.features.data.resize(features.data.size());
  const size_t n = features.frames();
  for (size_t t = 0; t < n; ++t)
    for (size_t d = 0; d < features.dim; ++d)
      out.features.at(t, d) = features.at(t, d) - out.mean.mean[d];
  return out;
}

}  // namespace vectok
