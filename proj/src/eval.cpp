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

#include "vectok/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <stdexcept>

#include <json.hpp>

#include "vectok/normalizer.hpp"
#include "vectok/reconstructor.hpp"
#include "vectok/rng.hpp"

namespace vectok {

namespace {

std::vector<double> utterance_mean(const FeatureMatrix& m) {
  return compute_mean(m).mean;
}

FeatureMatrix transform(const UtteranceRecord& record,
                        Representation representation,
                        const Codebook* codebook, double lambda) {
  switch (representation) {
    case Representation::kRaw:
      return record.features;
    case Representation::kNormalized:
      return normalize(record.features).features;
    case Representation::kDeidentified: {
      if (codebook == nullptr)
        throw std::invalid_argument("deidentified probe needs a codebook");
      TokenSequence tokens =
          tokenize(normalize(record.features).features, *codebook);
      return deidentify(tokens, *codebook);
    }
    case Representation::kAnonymized: {
      if (codebook == nullptr)
        throw std::invalid_argument("anonymized probe needs a codebook");
      TokenSequence tokens =
          tokenize(normalize(record.features).features, *codebook);
      return anonymize(record.features, deidentify(tokens, *codebook), lambda);
    }
  }
  throw std::invalid_argument("unknown representation");
}

const char* representation_name(Representation r) {
  switch (r) {
    case Representation::kRaw:
      return "raw";
    case Representation::kNormalized:
      return "normalized";
    case Representation::kDeidentified:
      return "deidentified";
    case Representation::kAnonymized:
      return "anonymized";
  }
  return "?";
}

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

}  // namespace

ProbeReport speaker_leakage_probe(const std::vector<UtteranceRecord>& corpus,
                                  Representation representation,
                                  const Codebook* codebook, double lambda,
                                  uint64_t split_seed) {
  if (corpus.empty()) throw std::invalid_argument("empty corpus");

  // Speakers in sorted id order so classification ties are deterministic.
  std::map<std::string, std::vector<size_t>> by_speaker;
  for (size_t i = 0; i < corpus.size(); ++i)
    by_speaker[corpus[i].speaker_id].push_back(i);

  ProbeReport report;
  report.probe = std::string("speaker_leakage/") +
                 representation_name(representation);
  report.num_classes = static_cast<uint32_t>(by_speaker.size());
  report.chance_level = 1.0 / static_cast<double>(by_speaker.size());

  // Degenerate single-speaker corpus: the classifier is trivially right.
  if (by_speaker.size() == 1) {
    report.accuracy = 1.0;
    report.num_samples = static_cast<uint32_t>(corpus.size());
    return report;
  }

  std::vector<std::vector<double>> means(corpus.size());
  for (size_t i = 0; i < corpus.size(); ++i)
    means[i] =
        utterance_mean(transform(corpus[i], representation, codebook, lambda));

  std::vector<std::vector<double>> speaker_means;
  std::vector<std::pair<size_t, size_t>> held;  // (utterance, speaker rank)
  size_t rank = 0;
  for (const auto& [speaker, indices] : by_speaker) {
    if (indices.size() < 2)
      throw std::invalid_argument("speaker " + speaker +
                                  " needs at least 2 utterances");
    std::vector<size_t> order = indices;
    SplitMix64 rng(derive_stream(split_seed, rank));
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.uniform_index(i)]);
    size_t n_held = std::max<size_t>(
        1, static_cast<size_t>(std::llround(0.2 * order.size())));
    n_held = std::min(n_held, order.size() - 1);

    std::vector<double> mean(corpus[0].features.dim, 0.0);
    size_t n_fit = order.size() - n_held;
    for (size_t i = n_held; i < order.size(); ++i)
      for (size_t d = 0; d < mean.size(); ++d)
        mean[d] += means[order[i]][d];
    for (double& v : mean) v /= static_cast<double>(n_fit);
    speaker_means.push_back(std::move(mean));
    for (size_t i = 0; i < n_held; ++i) held.push_back({order[i], rank});
    ++rank;
  }

  size_t correct = 0;
  std::vector<double> dist(speaker_means.size());
  for (const auto& [utt, true_rank] : held) {
    double best = std::numeric_limits<double>::infinity();
    for (size_t s = 0; s < speaker_means.size(); ++s) {
      dist[s] = sq_dist(means[utt], speaker_means[s]);
      best = std::min(best, dist[s]);
    }
    // Distances that agree to numerical precision are ties, resolved
    // toward the smallest speaker index; representations whose means are
    // zero up to rounding dust must not leak through that dust.
    double tol = 1e-9 * best + 1e-24;
    size_t best_rank = 0;
    while (dist[best_rank] > best + tol) ++best_rank;
    if (best_rank == true_rank) ++correct;
  }
  report.num_samples = static_cast<uint32_t>(held.size());
  report.accuracy =
      static_cast<double>(correct) / static_cast<double>(held.size());
  return report;
}

double content_purity(const std::vector<TokenSequence>& tokens,
                      const std::vector<std::vector<uint32_t>>& unit_labels) {
  if (tokens.size() != unit_labels.size())
    throw std::invalid_argument("token and label corpora differ in size");
  std::map<uint32_t, std::map<uint32_t, uint64_t>> counts;
  uint64_t total = 0;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i].tokens.size() != unit_labels[i].size())
      throw std::invalid_argument(
          "token/label length mismatch in utterance " + std::to_string(i));
    for (size_t t = 0; t < tokens[i].tokens.size(); ++t) {
      counts[tokens[i].tokens[t]][unit_labels[i][t]]++;
      ++total;
    }
  }
  if (total == 0) throw std::invalid_argument("no frames to score");
  uint64_t majority = 0;
  for (const auto& [cluster, labels] : counts) {
    uint64_t best = 0;
    for (const auto& [label, count] : labels) best = std::max(best, count);
    majority += best;
  }
  return static_cast<double>(majority) / static_cast<double>(total);
}

std::string pipeline_report_json(const PipelineReportInputs& inputs) {
  if (inputs.corpus == nullptr || inputs.corpus->empty())
    throw std::invalid_argument("empty corpus");
  if (inputs.codebook == nullptr || inputs.bpe == nullptr)
    throw std::invalid_argument("report needs a codebook and a BPE model");
  const auto& corpus = *inputs.corpus;
  const Codebook& cb = *inputs.codebook;

  // Tokenize the normalized corpus once; reuse for bitrate, purity, inertia.
  std::vector<TokenSequence> tokens;
  tokens.reserve(corpus.size());
  double inertia = 0.0;
  uint64_t total_frames = 0;
  for (const auto& record : corpus) {
    FeatureMatrix normalized = normalize(record.features).features;
    TokenSequence seq = tokenize(normalized, cb);
    for (size_t t = 0; t < normalized.frames(); ++t) {
      const double* c = cb.center(seq.tokens[t]);
      for (uint32_t d = 0; d < cb.dim; ++d) {
        double diff = normalized.at(t, d) - c[d];
        inertia += diff * diff;
      }
    }
    total_frames += normalized.frames();
    tokens.push_back(std::move(seq));
  }

  BitrateReport bitrate =
      bitrate_report(tokens, *inputs.bpe, inputs.frame_rate_hz);

  std::map<std::string, size_t> speakers;
  for (const auto& r : corpus) speakers[r.speaker_id]++;

  nlohmann::json leakage;
  for (Representation rep :
       {Representation::kRaw, Representation::kNormalized,
        Representation::kDeidentified, Representation::kAnonymized}) {
    ProbeReport p = speaker_leakage_probe(corpus, rep, &cb, inputs.lambda,
                                          inputs.split_seed);
    leakage[representation_name(rep)] = {
        {"accuracy", p.accuracy},
        {"chance_level", p.chance_level},
        {"num_classes", p.num_classes},
        {"num_samples", p.num_samples},
    };
  }

  nlohmann::json doc{
      {"schema_version", 1},
      {"corpus",
       {{"utterances", corpus.size()},
        {"speakers", speakers.size()},
        {"frames", total_frames},
        {"dim", corpus[0].features.dim},
        {"frame_rate_hz", inputs.frame_rate_hz}}},
      {"codebook",
       {{"k", cb.k}, {"dim", cb.dim}, {"inertia", inertia}}},
      {"bitrate",
       {{"pre_tokens_per_sec", bitrate.pre_tokens_per_sec},
        {"post_tokens_per_sec", bitrate.post_tokens_per_sec},
        {"pre_vocab", bitrate.pre_vocab},
        {"post_vocab", bitrate.post_vocab},
        {"pre_bits_per_token", bitrate.pre_bits_per_token},
        {"post_bits_per_token", bitrate.post_bits_per_token},
        {"pre_bits_per_sec", bitrate.pre_bits_per_sec},
        {"post_bits_per_sec", bitrate.post_bits_per_sec},
        {"compression_ratio", bitrate.compression_ratio}}},
      {"leakage", leakage},
      {"anonymize_lambda", inputs.lambda},
  };

  if (inputs.unit_labels != nullptr)
    doc["content_purity"] = content_purity(tokens, *inputs.unit_labels);
  return doc.dump(2) + "\n";
}

std::string pca_scatter_tsv(const std::vector<UtteranceRecord>& corpus) {
  if (corpus.empty()) throw std::invalid_argument("empty corpus");
  const size_t dim = corpus[0].features.dim;
  const size_t n = corpus.size();
  std::vector<std::vector<double>> means(n);
  for (size_t i = 0; i < n; ++i) means[i] = utterance_mean(corpus[i].features);

  std::vector<double> center(dim, 0.0);
  for (const auto& m : means)
    for (size_t d = 0; d < dim; ++d) center[d] += m[d];
  for (double& v : center) v /= static_cast<double>(n);
  for (auto& m : means)
    for (size_t d = 0; d < dim; ++d) m[d] -= center[d];

  std::vector<double> cov(dim * dim, 0.0);
  for (const auto& m : means)
    for (size_t a = 0; a < dim; ++a)
      for (size_t b = 0; b < dim; ++b) cov[a * dim + b] += m[a] * m[b];
  for (double& v : cov) v /= static_cast<double>(n);

  // Top-2 eigenvectors by deterministic power iteration with deflation.
  auto power_iterate = [&](const std::vector<double>& matrix) {
    SplitMix64 rng(42);
    std::vector<double> v(dim);
    for (double& x : v) x = rng.gaussian();
    for (int it = 0; it < 200; ++it) {
      std::vector<double> w(dim, 0.0);
      for (size_t a = 0; a < dim; ++a)
        for (size_t b = 0; b < dim; ++b) w[a] += matrix[a * dim + b] * v[b];
      double norm = 0.0;
      for (double x : w) norm += x * x;
      norm = std::sqrt(norm);
      if (norm == 0.0) break;
      for (size_t a = 0; a < dim; ++a) v[a] = w[a] / norm;
    }
    return v;
  };
  std::vector<double> v1 = power_iterate(cov);
  double lambda1 = 0.0;
  {
    std::vector<double> w(dim, 0.0);
    for (size_t a = 0; a < dim; ++a)
      for (size_t b = 0; b < dim; ++b) w[a] += cov[a * dim + b] * v1[b];
    for (size_t a = 0; a < dim; ++a) lambda1 += v1[a] * w[a];
  }
  std::vector<double> deflated = cov;
  for (size_t a = 0; a < dim; ++a)
    for (size_t b = 0; b < dim; ++b)
      deflated[a * dim + b] -= lambda1 * v1[a] * v1[b];
  std::vector<double> v2 = power_iterate(deflated);

  std::string out;
  char line[256];
  for (size_t i = 0; i < n; ++i) {
    double x = 0.0, y = 0.0;
    for (size_t d = 0; d < dim; ++d) {
      x += means[i][d] * v1[d];
      y += means[i][d] * v2[d];
    }
    std::snprintf(line, sizeof(line), "%.6f\t%.6f\t%s\n", x, y,
                  corpus[i].speaker_id.c_str());
    out += line;
  }
  return out;
}

}  // namespace vectok
