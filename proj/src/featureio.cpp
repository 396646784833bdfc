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

#include "vectok/featureio.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "vectok/rng.hpp"

namespace vectok {

namespace {

constexpr char kFeatureMagic[4] = {'V', 'T', 'K', 'F'};
constexpr char kTokenMagic[4] = {'V', 'T', 'K', 'T'};
constexpr uint32_t kFormatVersion = 1;

void put_u32(std::ostream& out, uint32_t v) {
  char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
               static_cast<char>((v >> 16) & 0xff),
               static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}

void put_u64(std::ostream& out, uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

void put_f32(std::ostream& out, float v) {
  put_u32(out, std::bit_cast<uint32_t>(v));
}

uint32_t get_u32(std::istream& in, const char* what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw FormatError(FormatError::Kind::Truncated,
                      std::string("truncated stream while reading ") + what);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) |
         (static_cast<uint32_t>(b[3]) << 24);
}

uint64_t get_u64(std::istream& in, const char* what) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8))
    throw FormatError(FormatError::Kind::Truncated,
                      std::string("truncated stream while reading ") + what);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

float get_f32(std::istream& in, const char* what) {
  return std::bit_cast<float>(get_u32(in, what));
}

void expect_magic(std::istream& in, const char (&magic)[4]) {
  char b[4];
  if (!in.read(b, 4))
    throw FormatError(FormatError::Kind::Truncated,
                      "truncated stream while reading magic");
  if (std::memcmp(b, magic, 4) != 0)
    throw FormatError(FormatError::Kind::BadMagic,
                      "bad magic, expected " + std::string(magic, 4) +
                          ", got " + std::string(b, 4));
}

void expect_version(std::istream& in) {
  uint32_t version = get_u32(in, "version");
  if (version != kFormatVersion)
    throw FormatError(FormatError::Kind::UnsupportedVersion,
                      "unsupported format version " + std::to_string(version));
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw FormatError(FormatError::Kind::Io, "cannot open for write: " + path);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw FormatError(FormatError::Kind::Io, "cannot open for read: " + path);
  return in;
}

}  // namespace

size_t write_features(const UtteranceRecord& record, std::ostream& out) {
  const FeatureMatrix& m = record.features;
  if (m.dim == 0 || m.frames() == 0)
    throw FormatError(FormatError::Kind::BadValue,
                      "feature matrix must have at least one frame");
  for (size_t t = 0; t < m.frames(); ++t)
    for (size_t d = 0; d < m.dim; ++d)
      if (!std::isfinite(m.at(t, d)))
        throw FormatError(FormatError::Kind::BadValue,
                          "non-finite value at frame " + std::to_string(t) +
                              ", dim " + std::to_string(d));

  out.write(kFeatureMagic, 4);
  put_u32(out, kFormatVersion);
  put_u32(out, m.dim);
  put_u64(out, m.frames());
  for (double v : m.data) put_f32(out, static_cast<float>(v));
  if (!out) throw FormatError(FormatError::Kind::Io, "write failed");
  return 4 + 4 + 4 + 8 + m.data.size() * 4;
}

size_t write_features_file(const UtteranceRecord& record,
                           const std::string& path) {
  auto out = open_out(path);
  return write_features(record, out);
}

UtteranceRecord read_features(std::istream& in) {
  expect_magic(in, kFeatureMagic);
  expect_version(in);
  UtteranceRecord record;
  record.features.dim = get_u32(in, "dim");
  uint64_t frames = get_u64(in, "frames");
  if (record.features.dim == 0 || frames == 0)
    throw FormatError(FormatError::Kind::BadValue,
                      "feature header claims an empty matrix");
  record.features.data.resize(frames * record.features.dim);
  for (double& v : record.features.data)
    v = static_cast<double>(get_f32(in, "feature payload"));
  return record;
}

UtteranceRecord read_features_file(const std::string& path) {
  auto in = open_in(path);
  return read_features(in);
}

size_t write_tokens(const TokenSequence& tokens, std::ostream& out) {
  for (size_t i = 0; i < tokens.tokens.size(); ++i)
    if (tokens.tokens[i] >= tokens.vocab_size)
      throw FormatError(FormatError::Kind::BadValue,
                        "token " + std::to_string(tokens.tokens[i]) +
                            " at position " + std::to_string(i) +
                            " is outside vocab of " +
                            std::to_string(tokens.vocab_size));
  out.write(kTokenMagic, 4);
  put_u32(out, kFormatVersion);
  put_u32(out, tokens.vocab_size);
  put_u64(out, tokens.tokens.size());
  for (uint32_t t : tokens.tokens) put_u32(out, t);
  if (!out) throw FormatError(FormatError::Kind::Io, "write failed");
  return 4 + 4 + 4 + 8 + tokens.tokens.size() * 4;
}

size_t write_tokens_file(const TokenSequence& tokens,
                         const std::string& path) {
  auto out = open_out(path);
  return write_tokens(tokens, out);
}

TokenSequence read_tokens(std::istream& in) {
  expect_magic(in, kTokenMagic);
  expect_version(in);
  TokenSequence seq;
  seq.vocab_size = get_u32(in, "vocab_size");
  uint64_t count = get_u64(in, "count");
  seq.tokens.resize(count);
  for (uint64_t i = 0; i < count; ++i) {
    seq.tokens[i] = get_u32(in, "token payload");
    if (seq.tokens[i] >= seq.vocab_size)
      throw FormatError(FormatError::Kind::BadValue,
                        "token " + std::to_string(seq.tokens[i]) +
                            " at position " + std::to_string(i) +
                            " is outside vocab of " +
                            std::to_string(seq.vocab_size));
  }
  return seq;
}

TokenSequence read_tokens_file(const std::string& path) {
  auto in = open_in(path);
  return read_tokens(in);
}

void write_manifest(const std::vector<ManifestEntry>& entries,
                    const std::string& path) {
  std::ofstream out(path);
  if (!out)
    throw FormatError(FormatError::Kind::Io, "cannot open for write: " + path);
  for (const auto& e : entries) {
    if (e.utterance_id.empty())
      throw FormatError(FormatError::Kind::BadValue,
                        "manifest entry with empty utterance_id");
    out << e.utterance_id << '\t' << e.speaker_id << '\t' << e.path << '\n';
  }
  if (!out) throw FormatError(FormatError::Kind::Io, "write failed: " + path);
}

std::vector<ManifestEntry> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw FormatError(FormatError::Kind::Io, "cannot open for read: " + path);
  std::vector<ManifestEntry> entries;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    size_t t1 = line.find('\t');
    size_t t2 = t1 == std::string::npos ? std::string::npos
                                        : line.find('\t', t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos)
      throw FormatError(FormatError::Kind::BadValue,
                        "manifest line " + std::to_string(lineno) +
                            " is not `utt TAB spk TAB path`");
    ManifestEntry e;
    e.utterance_id = line.substr(0, t1);
    e.speaker_id = line.substr(t1 + 1, t2 - t1 - 1);
    e.path = line.substr(t2 + 1);
    if (e.utterance_id.empty())
      throw FormatError(FormatError::Kind::BadValue,
                        "manifest line " + std::to_string(lineno) +
                            " has an empty utterance_id");
    entries.push_back(std::move(e));
  }
  return entries;
}

std::vector<SyntheticUtterance> generate_synthetic_corpus(
    const SyntheticCorpusSpec& spec) {
  if (spec.num_speakers < 1 || spec.num_content_units < 1 || spec.dim < 1 ||
      spec.frames_per_utterance < 1 || spec.utterances_per_speaker < 1)
    throw std::invalid_argument("synthetic corpus spec has a zero extent");
  if (spec.speaker_offset_scale < 0 || spec.noise_scale < 0)
    throw std::invalid_argument("scales must be non-negative");
  if (spec.mean_dwell_frames < 1.0)
    throw std::invalid_argument("mean_dwell_frames must be >= 1");

  SplitMix64 rng(spec.seed);
  const uint32_t C = spec.num_content_units;
  const uint32_t D = spec.dim;

  std::vector<double> content_centers(static_cast<size_t>(C) * D);
  for (double& v : content_centers) v = rng.gaussian();
  std::vector<double> speaker_offsets(static_cast<size_t>(spec.num_speakers) *
                                      D);
  for (double& v : speaker_offsets)
    v = rng.gaussian() * spec.speaker_offset_scale;

  const double switch_prob = 1.0 / spec.mean_dwell_frames;
  std::vector<SyntheticUtterance> corpus;
  corpus.reserve(static_cast<size_t>(spec.num_speakers) *
                 spec.utterances_per_speaker);

  for (uint32_t s = 0; s < spec.num_speakers; ++s) {
    for (uint32_t u = 0; u < spec.utterances_per_speaker; ++u) {
      SyntheticUtterance utt;
      utt.record.speaker_id = "spk" + std::to_string(s);
      utt.record.utterance_id = utt.record.speaker_id + "_utt" +
                                std::to_string(u);
      FeatureMatrix& m = utt.record.features;
      m.dim = D;
      m.data.resize(static_cast<size_t>(spec.frames_per_utterance) * D);
      utt.content_units.resize(spec.frames_per_utterance);

      uint32_t unit = static_cast<uint32_t>(rng.uniform_index(C));
      for (uint32_t t = 0; t < spec.frames_per_utterance; ++t) {
        if (t > 0 && C > 1 && rng.uniform() < switch_prob) {
          // Jump to a uniformly random *different* unit.
          uint32_t r = static_cast<uint32_t>(rng.uniform_index(C - 1));
          unit = r >= unit ? r + 1 : r;
        }
        utt.content_units[t] = unit;
        const double* center = &content_centers[static_cast<size_t>(unit) * D];
        const double* offset = &speaker_offsets[static_cast<size_t>(s) * D];
        for (uint32_t d = 0; d < D; ++d)
          m.at(t, d) = center[d] + offset[d] + rng.gaussian() * spec.noise_scale;
      }
      corpus.push_back(std::move(utt));
    }
  }
  return corpus;
}

}  // namespace vectok
