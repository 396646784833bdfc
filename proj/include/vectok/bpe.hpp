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

#ifndef VECTOK_BPE_HPP_
#define VECTOK_BPE_HPP_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "vectok/types.hpp"

namespace vectok {

// Byte-pair encoding over token streams. Pair frequencies are counted with
// overlap ([7,7,7] holds two (7,7) pairs); merges are applied in learned
// order, each left-to-right non-overlapping within a sequence. Merged ids
// are assigned consecutively starting at base_vocab_size.
struct BpeModel {
  struct Merge {
    uint32_t left = 0;
    uint32_t right = 0;
    uint32_t id = 0;
  };

  uint32_t base_vocab_size = 0;
  std::vector<Merge> merges;

  uint32_t vocab_size() const {
    return base_vocab_size + static_cast<uint32_t>(merges.size());
  }
  // Base-token string for any id; {id} when id is a base token.
  std::vector<uint32_t> expansion(uint32_t id) const;
};

struct BpeOptions {
  uint32_t target_vocab_size = 8192;
  uint64_t min_pair_frequency = 2;
};

// Merges the most frequent adjacent pair (ties toward the lexicographically
// smallest (left, right)) until the target vocabulary is reached or no pair
// meets min_pair_frequency. Pairs never cross utterance boundaries.
BpeModel train_bpe(const std::vector<TokenSequence>& corpus,
                   const BpeOptions& options);

TokenSequence encode(const TokenSequence& tokens, const BpeModel& model);
TokenSequence decode(const TokenSequence& tokens, const BpeModel& model);

// Tokens/sec and bits/sec before and after BPE. Base tokens are one per
// frame, so the pre-BPE rate equals the frame rate.
struct BitrateReport {
  double pre_tokens_per_sec = 0.0;
  double post_tokens_per_sec = 0.0;
  uint32_t pre_vocab = 0;
  uint32_t post_vocab = 0;
  uint32_t pre_bits_per_token = 0;
  uint32_t post_bits_per_token = 0;
  double pre_bits_per_sec = 0.0;
  double post_bits_per_sec = 0.0;
  double compression_ratio = 0.0;  // tokens/sec ratio, pre over post
};

// ceil(log2(vocab)) computed on integers.
uint32_t bits_per_token(uint32_t vocab_size);

// Pure arithmetic over an operating point; used by corpus reports and
// directly checkable against published rate figures.
BitrateReport bitrate_summary(double pre_tokens_per_sec, uint32_t pre_vocab,
                              double post_tokens_per_sec, uint32_t post_vocab);

BitrateReport bitrate_report(const std::vector<TokenSequence>& corpus,
                             const BpeModel& model, double frame_rate_hz);

// Versioned text format: header lines, then one merge per line
// `left right new`.
void save_bpe(const BpeModel& model, std::ostream& out);
void save_bpe_file(const BpeModel& model, const std::string& path);
BpeModel load_bpe(std::istream& in);
BpeModel load_bpe_file(const std::string& path);

}  // namespace vectok

#endif  // VECTOK_BPE_HPP_
