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

#include "vectok/quantizer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "vectok/rng.hpp"

namespace vectok {

namespace {

constexpr char kCodebookMagic[4] = {'V', 'T', 'K', 'C'};
constexpr uint32_t kFormatVersion = 1;

double sq_dist(const double* a, const double* b, uint32_t dim) {
  double acc = 0.0;
  for (uint32_t d = 0; d < dim; ++d) {
    double diff = a[d] - b[d];
    acc += diff * diff;
  }
  return acc;
}

// Frames stacked row-major plus the source dim.
struct Stacked {
  uint32_t dim = 0;
  std::vector<double> frames;
  size_t count() const { return dim == 0 ? 0 : frames.size() / dim; }
  const double* frame(size_t i) const { return &frames[i * dim]; }
};

Stacked stack_corpus(const std::vector<FeatureMatrix>& corpus) {
  Stacked s;
  for (const FeatureMatrix& m : corpus) {
    if (m.frames() == 0) continue;
    if (s.dim == 0) s.dim = m.dim;
    if (m.dim != s.dim)
      throw std::invalid_argument("corpus mixes feature dimensionalities");
    s.frames.insert(s.frames.end(), m.data.begin(), m.data.end());
  }
  for (double v : s.frames)
    if (!std::isfinite(v))
      throw NumericalError("training corpus contains a non-finite value");
  return s;
}

size_t count_distinct(const Stacked& s) {
  std::vector<size_t> idx(s.count());
  std::iota(idx.begin(), idx.end(), 0);
  auto less = [&](size_t a, size_t b) {
    return std::lexicographical_compare(s.frame(a), s.frame(a) + s.dim,
                                        s.frame(b), s.frame(b) + s.dim);
  };
  std::sort(idx.begin(), idx.end(), less);
  size_t distinct = s.count() == 0 ? 0 : 1;
  for (size_t i = 1; i < idx.size(); ++i)
    if (less(idx[i - 1], idx[i])) ++distinct;
  return distinct;
}

std::vector<double> kmeanspp_init(const Stacked& s, uint32_t k,
                                  SplitMix64& rng) {
  const size_t n = s.count();
  std::vector<double> centers(static_cast<size_t>(k) * s.dim);
  size_t first = rng.uniform_index(n);
  std::copy_n(s.frame(first), s.dim, centers.begin());

  std::vector<double> min_d2(n);
  for (size_t i = 0; i < n; ++i)
    min_d2[i] = sq_dist(s.frame(i), centers.data(), s.dim);

  for (uint32_t j = 1; j < k; ++j) {
    double total = 0.0;
    for (double v : min_d2) total += v;
    size_t pick = 0;
    if (total > 0.0) {
      double r = rng.uniform() * total;
      double acc = 0.0;
      pick = n - 1;
      for (size_t i = 0; i < n; ++i) {
        acc += min_d2[i];
        if (acc > r) {
          pick = i;
          break;
        }
      }
    } else {
      // All remaining mass at existing centers; fall back to uniform.
      pick = rng.uniform_index(n);
    }
    double* cj = &centers[static_cast<size_t>(j) * s.dim];
    std::copy_n(s.frame(pick), s.dim, cj);
    for (size_t i = 0; i < n; ++i)
      min_d2[i] = std::min(min_d2[i], sq_dist(s.frame(i), cj, s.dim));
  }
  return centers;
}

}  // namespace

KmeansTraining train_kmeans(const std::vector<FeatureMatrix>& corpus,
                            const KmeansOptions& options) {
  if (options.k < 1) throw std::invalid_argument("k must be >= 1");
  Stacked s = stack_corpus(corpus);
  const size_t n = s.count();
  const uint32_t k = options.k;
  if (n < k)
    throw std::invalid_argument("need at least k frames, got " +
                                std::to_string(n));
  if (count_distinct(s) < k)
    throw std::invalid_argument("fewer than k distinct frames in the corpus");

  SplitMix64 rng(options.seed);
  std::vector<double> centers = kmeanspp_init(s, k, rng);
  std::vector<double> prev_centers;

  std::vector<uint32_t> assign(n);
  std::vector<double> next(centers.size());
  std::vector<uint64_t> counts(k);
  bool prev_had_empty = false;
  KmeansTraining result;

  for (uint32_t iter = 0; iter < options.max_iters; ++iter) {
    // Assignment: argmin over centers, ties toward the smallest index.
    double inertia = 0.0;
    std::fill(counts.begin(), counts.end(), 0);
    for (size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      uint32_t best_j = 0;
      for (uint32_t j = 0; j < k; ++j) {
        double d2 = sq_dist(s.frame(i), &centers[static_cast<size_t>(j) * s.dim],
                            s.dim);
        if (d2 < best) {
          best = d2;
          best_j = j;
        }
      }
      assign[i] = best_j;
      counts[best_j]++;
      inertia += best;
    }

    bool has_empty =
        std::any_of(counts.begin(), counts.end(), [](uint64_t c) { return c == 0; });

    // An update step that fails to improve the evaluated inertia is possible
    // only through rounding at convergence; roll it back so the reported
    // history stays non-increasing and matches the returned centers.
    if (!result.inertia_history.empty() && !has_empty && !prev_had_empty &&
        inertia >= result.inertia_history.back()) {
      centers.swap(prev_centers);
      break;
    }
    result.inertia_history.push_back(inertia);
    prev_had_empty = has_empty;

    if (!has_empty && result.inertia_history.size() >= 2) {
      double prev = result.inertia_history[result.inertia_history.size() - 2];
      if (prev - inertia <= options.tol * prev) break;
    }
    if (iter + 1 == options.max_iters) break;

    // Update: means of assigned frames, in corpus order.
    std::fill(next.begin(), next.end(), 0.0);
    for (size_t i = 0; i < n; ++i) {
      double* cj = &next[static_cast<size_t>(assign[i]) * s.dim];
      const double* x = s.frame(i);
      for (uint32_t d = 0; d < s.dim; ++d) cj[d] += x[d];
    }
    for (uint32_t j = 0; j < k; ++j)
      if (counts[j] > 0)
        for (uint32_t d = 0; d < s.dim; ++d)
          next[static_cast<size_t>(j) * s.dim + d] /=
              static_cast<double>(counts[j]);
      else
        std::copy_n(&centers[static_cast<size_t>(j) * s.dim], s.dim,
                    &next[static_cast<size_t>(j) * s.dim]);

    // Re-seed empty clusters to the frame farthest from their current
    // center, never reusing a frame that now coincides with a center.
    for (uint32_t j = 0; j < k; ++j) {
      if (counts[j] > 0) continue;
      const double* cj_old = &centers[static_cast<size_t>(j) * s.dim];
      double best = -1.0;
      size_t best_i = 0;
      for (size_t i = 0; i < n; ++i) {
        double d2 = sq_dist(s.frame(i), cj_old, s.dim);
        if (d2 <= best) continue;
        bool taken = false;
        for (uint32_t j2 = 0; j2 < k && !taken; ++j2)
          taken = std::memcmp(s.frame(i),
                              &next[static_cast<size_t>(j2) * s.dim],
                              s.dim * sizeof(double)) == 0;
        if (!taken) {
          best = d2;
          best_i = i;
        }
      }
      if (best >= 0.0)
        std::copy_n(s.frame(best_i), s.dim,
                    &next[static_cast<size_t>(j) * s.dim]);
    }
    prev_centers = centers;
    centers.swap(next);
  }

  result.codebook.k = k;
  result.codebook.dim = s.dim;
  result.codebook.centers = std::move(centers);
  result.codebook.trained_on_frames = n;
  result.codebook.inertia = result.inertia_history.back();
  return result;
}

TokenSequence tokenize(const FeatureMatrix& features,
                       const Codebook& codebook) {
  if (features.dim != codebook.dim)
    throw std::invalid_argument(
        "feature dim " + std::to_string(features.dim) +
        " does not match codebook dim " + std::to_string(codebook.dim));
  TokenSequence out;
  out.vocab_size = codebook.k;
  out.tokens.resize(features.frames());
  for (size_t t = 0; t < features.frames(); ++t) {
    const double* x = &features.data[t * features.dim];
    double best = std::numeric_limits<double>::infinity();
    uint32_t best_j = 0;
    for (uint32_t j = 0; j < codebook.k; ++j) {
      double d2 = sq_dist(x, codebook.center(j), codebook.dim);
      if (d2 < best) {
        best = d2;
        best_j = j;
      }
    }
    out.tokens[t] = best_j;
  }
  return out;
}

namespace {

void put_u32(std::ostream& out, uint32_t v) {
  char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
               static_cast<char>((v >> 16) & 0xff),
               static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
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

}  // namespace

size_t save_codebook(const Codebook& codebook, std::ostream& out) {
  if (codebook.k == 0 || codebook.dim == 0 ||
      codebook.centers.size() !=
          static_cast<size_t>(codebook.k) * codebook.dim)
    throw FormatError(FormatError::Kind::BadValue, "malformed codebook");
  out.write(kCodebookMagic, 4);
  put_u32(out, kFormatVersion);
  put_u32(out, codebook.k);
  put_u32(out, codebook.dim);
  for (double v : codebook.centers)
    put_u32(out, std::bit_cast<uint32_t>(static_cast<float>(v)));
  if (!out) throw FormatError(FormatError::Kind::Io, "write failed");
  return 4 + 4 + 4 + 4 + codebook.centers.size() * 4;
}

size_t save_codebook_file(const Codebook& codebook, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw FormatError(FormatError::Kind::Io, "cannot open for write: " + path);
  return save_codebook(codebook, out);
}

Codebook load_codebook(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4))
    throw FormatError(FormatError::Kind::Truncated,
                      "truncated stream while reading magic");
  if (std::memcmp(magic, kCodebookMagic, 4) != 0)
    throw FormatError(FormatError::Kind::BadMagic,
                      "bad magic, expected VTKC, got " + std::string(magic, 4));
  uint32_t version = get_u32(in, "version");
  if (version != kFormatVersion)
    throw FormatError(FormatError::Kind::UnsupportedVersion,
                      "unsupported codebook version " + std::to_string(version));
  Codebook cb;
  cb.k = get_u32(in, "k");
  cb.dim = get_u32(in, "dim");
  if (cb.k == 0 || cb.dim == 0)
    throw FormatError(FormatError::Kind::BadValue,
                      "codebook header claims zero extent");
  cb.centers.resize(static_cast<size_t>(cb.k) * cb.dim);
  for (double& v : cb.centers)
    v = static_cast<double>(std::bit_cast<float>(get_u32(in, "centers")));
  return cb;
}

Codebook load_codebook_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw FormatError(FormatError::Kind::Io, "cannot open for read: " + path);
  return load_codebook(in);
}

}  // namespace vectok
