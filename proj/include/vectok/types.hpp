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

#ifndef VECTOK_TYPES_HPP_
#define VECTOK_TYPES_HPP_

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace vectok {

// Per-utterance sequence of real-valued frame vectors, row-major.
// Values are held in double precision; file formats store 32-bit floats.
struct FeatureMatrix {
  uint32_t dim = 0;
  double frame_rate_hz = 50.0;
  std::vector<double> data;  // frames() x dim

  size_t frames() const { return dim == 0 ? 0 : data.size() / dim; }
  double& at(size_t t, size_t d) { return data[t * dim + d]; }
  double at(size_t t, size_t d) const { return data[t * dim + d]; }
  std::span<const double> frame(size_t t) const {
    return {data.data() + t * dim, dim};
  }
};

struct UtteranceRecord {
  std::string utterance_id;
  std::string speaker_id;  // may be empty
  FeatureMatrix features;
};

// Semantic token IDs for one utterance, base or BPE-encoded.
struct TokenSequence {
  uint32_t vocab_size = 0;
  std::vector<uint32_t> tokens;

  bool operator==(const TokenSequence& o) const {
    return vocab_size == o.vocab_size && tokens == o.tokens;
  }
};

// File/stream format failures; `kind` distinguishes the spec'd error cases.
class FormatError : public std::runtime_error {
 public:
  enum class Kind { BadMagic, UnsupportedVersion, Truncated, BadValue, Io };

  FormatError(Kind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

// Non-finite values where finite ones are required (NaN loss, bad input).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& msg)
      : std::runtime_error(msg) {}
};

}  // namespace vectok

#endif  // VECTOK_TYPES_HPP_
