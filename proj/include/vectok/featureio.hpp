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

#ifndef VECTOK_FEATUREIO_HPP_
#define VECTOK_FEATUREIO_HPP_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "vectok/types.hpp"

namespace vectok {

// On-disk layouts (all integers and floats little-endian):
//
//   "VTKF"  version u32=1  dim u32  frames u64  frames*dim f32 row-major
//   "VTKT"  version u32=1  vocab_size u32  count u64  count u32 token ids
//
// Feature values are stored as 32-bit floats regardless of the in-memory
// precision. A round trip is bit-exact when the input values are exactly
// representable in f32.

size_t write_features(const UtteranceRecord& record, std::ostream& out);
size_t write_features_file(const UtteranceRecord& record,
                           const std::string& path);

// Returns a record with empty utterance/speaker ids; those live in the
// corpus manifest, not the feature file.
UtteranceRecord read_features(std::istream& in);
UtteranceRecord read_features_file(const std::string& path);

size_t write_tokens(const TokenSequence& tokens, std::ostream& out);
size_t write_tokens_file(const TokenSequence& tokens, const std::string& path);
TokenSequence read_tokens(std::istream& in);
TokenSequence read_tokens_file(const std::string& path);

// Line-oriented corpus manifest: `utterance_id TAB speaker_id TAB path`.
struct ManifestEntry {
  std::string utterance_id;
  std::string speaker_id;
  std::string path;
};

void write_manifest(const std::vector<ManifestEntry>& entries,
                    const std::string& path);
std::vector<ManifestEntry> read_manifest(const std::string& path);

// Synthetic stand-in for the SSL feature extractor. Each frame is
// content_center[c_t] + speaker_offset[s] + gaussian noise, where c_t walks
// over content units with geometric dwell times so consecutive repeated
// tokens occur naturally downstream.
struct SyntheticCorpusSpec {
  uint32_t num_speakers = 8;
  uint32_t num_content_units = 40;
  uint32_t dim = 32;
  uint32_t frames_per_utterance = 200;
  uint32_t utterances_per_speaker = 20;
  double speaker_offset_scale = 5.0;
  double noise_scale = 0.1;
  double mean_dwell_frames = 5.0;  // expected frames spent on one unit
  uint64_t seed = 1;
};

struct SyntheticUtterance {
  UtteranceRecord record;
  std::vector<uint32_t> content_units;  // per-frame ground-truth labels
};

std::vector<SyntheticUtterance> generate_synthetic_corpus(
    const SyntheticCorpusSpec& spec);

}  // namespace vectok

#endif  // VECTOK_FEATUREIO_HPP_
