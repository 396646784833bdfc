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

#ifndef VECTOK_QUANTIZER_HPP_
#define VECTOK_QUANTIZER_HPP_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "vectok/types.hpp"

namespace vectok {

// K cluster centers. Doubles as the token -> vector look-up table for
// reconstruction.
struct Codebook {
  uint32_t k = 0;
  uint32_t dim = 0;
  std::vector<double> centers;  // k x dim, row-major
  uint64_t trained_on_frames = 0;
  double inertia = 0.0;  // final sum of squared distances

  const double* center(size_t j) const { return &centers[j * dim]; }
};

struct KmeansOptions {
  uint32_t k = 300;
  uint64_t seed = 0;
  uint32_t max_iters = 300;
  double tol = 1e-6;  // relative inertia improvement
};

struct KmeansTraining {
  Codebook codebook;
  // Inertia after each assignment step; non-increasing by construction.
  std::vector<double> inertia_history;
};

// Full-batch Lloyd with k-means++ seeding from an explicit SplitMix64
// stream. Deterministic given (corpus order, seed). Inputs are expected to
// be normalized already; that is the caller's responsibility.
KmeansTraining train_kmeans(const std::vector<FeatureMatrix>& corpus,
                            const KmeansOptions& options);

// Nearest-center assignment; squared distances accumulated in 64-bit, ties
// broken toward the smallest center index.
TokenSequence tokenize(const FeatureMatrix& features, const Codebook& codebook);

// "VTKC": magic, version u32=1, k u32, dim u32, centers k*dim f32 LE.
size_t save_codebook(const Codebook& codebook, std::ostream& out);
size_t save_codebook_file(const Codebook& codebook, const std::string& path);
Codebook load_codebook(std::istream& in);
Codebook load_codebook_file(const std::string& path);

}  // namespace vectok

#endif  // VECTOK_QUANTIZER_HPP_
