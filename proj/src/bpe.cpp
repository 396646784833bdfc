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

#include "vectok/bpe.hpp"

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace vectok {

namespace {

constexpr const char* kBpeHeader = "vtk-bpe 1";

// One left-to-right non-overlapping pass of a single merge rule.
void apply_merge(std::vector<uint32_t>& seq, const BpeModel::Merge& m) {
  size_t w = 0;
  for (size_t i = 0; i < seq.size();) {
    if (i + 1 < seq.size() && seq[i] == m.left && seq[i + 1] == m.right) {
      seq[w++] = m.id;
      i += 2;
    } else {
      seq[w++] = seq[i++];
    }
  }
  seq.resize(w);
}

}  // namespace

std::vector<uint32_t> BpeModel::expansion(uint32_t id) const {
  if (id < base_vocab_size) return {id};
  if (id >= vocab_size())
    throw std::invalid_argument("unknown token id " + std::to_string(id));
  const Merge& m = merges[id - base_vocab_size];
  std::vector<uint32_t> out = expansion(m.left);
  std::vector<uint32_t> rhs = expansion(m.right);
  out.insert(out.end(), rhs.begin(), rhs.end());
  return out;
}

BpeModel train_bpe(const std::vector<TokenSequence>& corpus,
                   const BpeOptions& options) {
  if (corpus.empty()) throw std::invalid_argument("empty BPE training corpus");
  BpeModel model;
  model.base_vocab_size = corpus.front().vocab_size;
  if (options.target_vocab_size <= model.base_vocab_size)
    throw std::invalid_argument(
        "target vocab must exceed the base vocab of " +
        std::to_string(model.base_vocab_size));

  std::vector<std::vector<uint32_t>> seqs;
  seqs.reserve(corpus.size());
  for (const TokenSequence& s : corpus) {
    if (s.vocab_size != model.base_vocab_size)
      throw std::invalid_argument("corpus mixes vocab sizes");
    for (uint32_t t : s.tokens)
      if (t >= model.base_vocab_size)
        throw std::invalid_argument("token " + std::to_string(t) +
                                    " outside the base vocab");
    seqs.push_back(s.tokens);
  }

  while (model.vocab_size() < options.target_vocab_size) {
    // std::map iterates pairs in sorted order, which realizes the
    // smallest-(left,right) tie-break for free.
    std::map<std::pair<uint32_t, uint32_t>, uint64_t> counts;
    for (const auto& seq : seqs)
      for (size_t i = 0; i + 1 < seq.size(); ++i)
        counts[{seq[i], seq[i + 1]}]++;

    std::pair<uint32_t, uint32_t> best_pair{0, 0};
    uint64_t best_count = 0;
    for (const auto& [pair, count] : counts)
      if (count > best_count) {
        best_pair = pair;
        best_count = count;
      }
    if (best_count < options.min_pair_frequency) break;

    BpeModel::Merge m{best_pair.first, best_pair.second, model.vocab_size()};
    for (auto& seq : seqs) apply_merge(seq, m);
    model.merges.push_back(m);
  }
  return model;
}

TokenSequence encode(const TokenSequence& tokens, const BpeModel& model) {
  for (uint32_t t : tokens.tokens)
    if (t >= model.base_vocab_size)
      throw std::invalid_argument("token " + std::to_string(t) +
                                  " outside the base vocab of " +
                                  std::to_string(model.base_vocab_size));
  TokenSequence out;
  out.vocab_size = model.vocab_size();
  out.tokens = tokens.tokens;
  for (const auto& m : model.merges) apply_merge(out.tokens, m);
  return out;
}

TokenSequence decode(const TokenSequence& tokens, const BpeModel& model) {
  TokenSequence out;
  out.vocab_size = model.base_vocab_size;
  for (uint32_t t : tokens.tokens) {
    if (t >= model.vocab_size())
      throw std::invalid_argument("unknown token id " + std::to_string(t));
    auto expanded = model.expansion(t);
    out.tokens.insert(out.tokens.end(), expanded.begin(), expanded.end());
  }
  return out;
}

uint32_t bits_per_token(uint32_t vocab_size) {
  if (vocab_size <= 1) return 0;
  uint32_t bits = 0;
  uint32_t capacity = 1;
  while (capacity < vocab_size) {
    capacity *= 2;
    ++bits;
  }
  return bits;
}

BitrateReport bitrate_summary(double pre_tokens_per_sec, uint32_t pre_vocab,
                              double post_tokens_per_sec,
                              uint32_t post_vocab) {
  BitrateReport r;
  r.pre_tokens_per_sec = pre_tokens_per_sec;
  r.post_tokens_per_sec = post_tokens_per_sec;
  r.pre_vocab = pre_vocab;
  r.post_vocab = post_vocab;
  r.pre_bits_per_token = bits_per_token(pre_vocab);
  r.post_bits_per_token = bits_per_token(post_vocab);
  r.pre_bits_per_sec = pre_tokens_per_sec * r.pre_bits_per_token;
  r.post_bits_per_sec = post_tokens_per_sec * r.post_bits_per_token;
  r.compression_ratio = pre_tokens_per_sec / post_tokens_per_sec;
  return r;
}

BitrateReport bitrate_report(const std::vector<TokenSequence>& corpus,
                             const BpeModel& model, double frame_rate_hz) {
  if (corpus.empty()) throw std::invalid_argument("empty corpus");
  if (frame_rate_hz <= 0.0)
    throw std::invalid_argument("frame rate must be positive");
  uint64_t pre_tokens = 0, post_tokens = 0;
  for (const TokenSequence& s : corpus) {
    pre_tokens += s.tokens.size();
    post_tokens += encode(s, model).tokens.size();
  }
  if (pre_tokens == 0) throw std::invalid_argument("corpus has no tokens");
  const double seconds = static_cast<double>(pre_tokens) / frame_rate_hz;
  return bitrate_summary(static_cast<double>(pre_tokens) / seconds,
                         model.base_vocab_size,
                         static_cast<double>(post_tokens) / seconds,
                         model.vocab_size());
}

void save_bpe(const BpeModel& model, std::ostream& out) {
  out << kBpeHeader << '\n';
  out << "base_vocab " << model.base_vocab_size << '\n';
  out << "merges " << model.merges.size() << '\n';
  for (const auto& m : model.merges)
    out << m.left << ' ' << m.right << ' ' << m.id << '\n';
  if (!out) throw FormatError(FormatError::Kind::Io, "write failed");
}

void save_bpe_file(const BpeModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out)
    throw FormatError(FormatError::Kind::Io, "cannot open for write: " + path);
  save_bpe(model, out);
}

BpeModel load_bpe(std::istream& in) {
  std::string header;
  if (!std::getline(in, header) || header != kBpeHeader)
    throw FormatError(FormatError::Kind::BadMagic,
                      "not a BPE model file (header '" + header + "')");
  BpeModel model;
  std::string word;
  size_t num_merges = 0;
  if (!(in >> word) || word != "base_vocab" || !(in >> model.base_vocab_size))
    throw FormatError(FormatError::Kind::Truncated, "missing base_vocab line");
  if (!(in >> word) || word != "merges" || !(in >> num_merges))
    throw FormatError(FormatError::Kind::Truncated, "missing merges line");
  model.merges.reserve(num_merges);
  for (size_t i = 0; i < num_merges; ++i) {
    BpeModel::Merge m;
    if (!(in >> m.left >> m.right >> m.id))
      throw FormatError(FormatError::Kind::Truncated,
                        "truncated merge list at entry " + std::to_string(i));
    uint32_t defined = model.base_vocab_size + static_cast<uint32_t>(i);
    if (m.id != defined || m.left >= defined || m.right >= defined)
      throw FormatError(FormatError::Kind::BadValue,
                        "merge entry " + std::to_string(i) +
                            " references undefined ids");
    model.merges.push_back(m);
  }
  return model;
}

BpeModel load_bpe_file(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw FormatError(FormatError::Kind::Io, "cannot open for read: " + path);
  return load_bpe(in);
}

}  // namespace vectok
