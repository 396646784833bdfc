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

// Command-line front end composing the codec pipeline: synthetic corpus
// generation, k-means tokenization, BPE, reconstruction, the neural
// inverse-K model, token language models, and evaluation reports.
//
// Exit codes: 0 success, 1 usage error, 2 data or format error,
// 3 numerical failure.

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vectok/bpe.hpp"
#include "vectok/eval.hpp"
#include "vectok/featureio.hpp"
#include "vectok/invk.hpp"
#include "vectok/normalizer.hpp"
#include "vectok/quantizer.hpp"
#include "vectok/reconstructor.hpp"
#include "vectok/seqlm.hpp"
#include "vectok/types.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kToolVersion = "1.0.0";

uint64_t fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw vectok::FormatError(vectok::FormatError::Kind::Io,
                              "cannot open for digest: " + path);
  uint64_t hash = 0xcbf29ce484222325ULL;
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      hash ^= static_cast<unsigned char>(buf[i]);
      hash *= 0x100000001b3ULL;
    }
    if (!in) break;
  }
  return hash;
}

std::string hex64(uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// Collected by every command and flushed as <out-dir>/run-manifest.json.
struct RunManifest {
  std::string command;
  json args = json::object();
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;

  void write(const fs::path& out_dir) const {
    json inputs_json = json::object();
    for (const auto& path : inputs)
      inputs_json[path] = "fnv1a64:" + hex64(fnv1a64_file(path));
    auto now = std::chrono::system_clock::now();
    auto secs =
        std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch())
            .count();
    json doc{{"command", command},
             {"tool_version", kToolVersion},
             {"args", args},
             {"inputs", inputs_json},
             {"outputs", outputs},
             {"timestamp_unix", secs}};
    std::ofstream out(out_dir / "run-manifest.json");
    out << doc.dump(2) << "\n";
  }
};

std::string env_name(const std::string& command, std::string flag) {
  std::string name = "VECTOK_" + command + "_" + flag;
  for (char& c : name) {
    if (c == '-') c = '_';
    c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  return name;
}

// Adds an option with the command-scoped environment variable override.
template <typename T>
CLI::Option* add_opt(CLI::App* cmd, const std::string& flag, T& value,
                     const std::string& help) {
  CLI::Option* opt = cmd->add_option(flag, value, help);
  std::string full = flag;
  while (!full.empty() && full.front() == '-') full.erase(full.begin());
  opt->envname(env_name(cmd->get_name(), full));
  return opt;
}

CLI::Option* add_flag_env(CLI::App* cmd, const std::string& flag, bool& value,
                          const std::string& help) {
  CLI::Option* opt = cmd->add_flag(flag, value, help);
  std::string full = flag;
  while (!full.empty() && full.front() == '-') full.erase(full.begin());
  opt->envname(env_name(cmd->get_name(), full));
  return opt;
}

fs::path ensure_out_dir(const std::string& out_dir) {
  fs::path dir(out_dir);
  fs::create_directories(dir);
  return dir;
}

struct LoadedCorpus {
  std::vector<vectok::UtteranceRecord> records;
};

LoadedCorpus load_corpus(const std::string& manifest_path,
                         RunManifest* manifest) {
  LoadedCorpus corpus;
  manifest->inputs.push_back(manifest_path);
  fs::path base = fs::path(manifest_path).parent_path();
  for (const auto& entry : vectok::read_manifest(manifest_path)) {
    fs::path p(entry.path);
    if (p.is_relative()) p = base / p;
    vectok::UtteranceRecord record = vectok::read_features_file(p.string());
    record.utterance_id = entry.utterance_id;
    record.speaker_id = entry.speaker_id;
    manifest->inputs.push_back(p.string());
    corpus.records.push_back(std::move(record));
  }
  if (corpus.records.empty())
    throw vectok::FormatError(vectok::FormatError::Kind::BadValue,
                              "manifest lists no utterances: " + manifest_path);
  return corpus;
}

struct TokenCorpus {
  std::vector<vectok::ManifestEntry> entries;
  std::vector<vectok::TokenSequence> sequences;
};

TokenCorpus load_token_corpus(const std::string& tsv_path,
                              RunManifest* manifest) {
  TokenCorpus corpus;
  manifest->inputs.push_back(tsv_path);
  fs::path base = fs::path(tsv_path).parent_path();
  for (const auto& entry : vectok::read_manifest(tsv_path)) {
    fs::path p(entry.path);
    if (p.is_relative()) p = base / p;
    manifest->inputs.push_back(p.string());
    corpus.sequences.push_back(vectok::read_tokens_file(p.string()));
    corpus.entries.push_back(entry);
  }
  if (corpus.entries.empty())
    throw vectok::FormatError(vectok::FormatError::Kind::BadValue,
                              "token list is empty: " + tsv_path);
  return corpus;
}

// Writes per-utterance token files plus an index TSV next to them.
void write_token_corpus(const fs::path& out_dir, const std::string& subdir,
                        const std::vector<vectok::ManifestEntry>& entries,
                        const std::vector<vectok::TokenSequence>& sequences,
                        RunManifest* manifest) {
  fs::create_directories(out_dir / subdir);
  std::vector<vectok::ManifestEntry> index;
  for (size_t i = 0; i < entries.size(); ++i) {
    std::string rel = subdir + "/" + entries[i].utterance_id + ".vtkt";
    vectok::write_tokens_file(sequences[i], (out_dir / rel).string());
    index.push_back({entries[i].utterance_id, entries[i].speaker_id, rel});
    manifest->outputs.push_back(rel);
  }
  std::string tsv = subdir + ".tsv";
  vectok::write_manifest(index, (out_dir / tsv).string());
  manifest->outputs.push_back(tsv);
}

// Run-length collapse of per-frame unit labels into a phoneme-like sequence.
std::vector<uint32_t> collapse_units(const std::vector<uint32_t>& units) {
  std::vector<uint32_t> out;
  for (uint32_t u : units)
    if (out.empty() || out.back() != u) out.push_back(u);
  return out;
}

int run_gen_corpus(const std::string& out_dir,
                   const vectok::SyntheticCorpusSpec& spec, bool paired,
                   const vectok::PairedCorpusSpec& paired_spec,
                   const json& args) {
  fs::path dir = ensure_out_dir(out_dir);
  RunManifest manifest;
  manifest.command = "gen-corpus";
  manifest.args = args;

  if (paired) {
    auto pairs = vectok::generate_paired_token_corpus(paired_spec);
    fs::create_directories(dir / "source");
    fs::create_directories(dir / "target");
    std::vector<vectok::ManifestEntry> index;
    std::vector<vectok::ManifestEntry> all_tokens;
    for (size_t i = 0; i < pairs.size(); ++i) {
      std::string id = "pair" + std::to_string(i);
      std::string src = "source/" + id + ".vtkt";
      std::string tgt = "target/" + id + ".vtkt";
      vectok::write_tokens_file(pairs[i].source, (dir / src).string());
      vectok::write_tokens_file(pairs[i].target, (dir / tgt).string());
      index.push_back({id, src, tgt});
      all_tokens.push_back({id + "_src", "", src});
      all_tokens.push_back({id + "_tgt", "", tgt});
      manifest.outputs.push_back(src);
      manifest.outputs.push_back(tgt);
    }
    vectok::write_manifest(index, (dir / "pairs.tsv").string());
    vectok::write_manifest(all_tokens, (dir / "tokens.tsv").string());
    manifest.outputs.push_back("pairs.tsv");
    manifest.outputs.push_back("tokens.tsv");
  } else {
    auto corpus = vectok::generate_synthetic_corpus(spec);
    fs::create_directories(dir / "features");
    fs::create_directories(dir / "units");
    std::vector<vectok::ManifestEntry> features_index;
    std::vector<vectok::ManifestEntry> units_index;
    for (const auto& utt : corpus) {
      std::string feat = "features/" + utt.record.utterance_id + ".vtkf";
      std::string unit = "units/" + utt.record.utterance_id + ".vtkt";
      vectok::write_features_file(utt.record, (dir / feat).string());
      vectok::TokenSequence labels;
      labels.vocab_size = spec.num_content_units;
      labels.tokens = utt.content_units;
      vectok::write_tokens_file(labels, (dir / unit).string());
      features_index.push_back(
          {utt.record.utterance_id, utt.record.speaker_id, feat});
      units_index.push_back(
          {utt.record.utterance_id, utt.record.speaker_id, unit});
      manifest.outputs.push_back(feat);
      manifest.outputs.push_back(unit);
    }
    vectok::write_manifest(features_index, (dir / "manifest.tsv").string());
    vectok::write_manifest(units_index, (dir / "units.tsv").string());
    manifest.outputs.push_back("manifest.tsv");
    manifest.outputs.push_back("units.tsv");
  }
  manifest.write(dir);
  std::cout << "wrote " << (dir / (paired ? "pairs.tsv" : "manifest.tsv")).string()
            << "\n";
  return 0;
}

std::vector<vectok::FeatureMatrix> normalized_corpus(
    const std::vector<vectok::UtteranceRecord>& records, bool no_normalize) {
  std::vector<vectok::FeatureMatrix> out;
  out.reserve(records.size());
  for (const auto& r : records)
    out.push_back(no_normalize ? r.features
                               : vectok::normalize(r.features).features);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"speech vector / semantic token codec toolkit"};
  app.require_subcommand(1);

  // --- gen-corpus ---------------------------------------------------------
  auto* gen = app.add_subcommand("gen-corpus",
                                 "generate a synthetic feature corpus");
  std::string gen_out;
  vectok::SyntheticCorpusSpec spec;
  bool paired = false;
  vectok::PairedCorpusSpec paired_spec;
  std::string mapping_name = "identity";
  add_opt(gen, "--out-dir", gen_out, "output directory")->required();
  add_opt(gen, "--speakers", spec.num_speakers, "number of speakers");
  add_opt(gen, "--content-units", spec.num_content_units, "content units");
  add_opt(gen, "--dim", spec.dim, "feature dimensionality");
  add_opt(gen, "--frames", spec.frames_per_utterance, "frames per utterance");
  add_opt(gen, "--utts-per-speaker", spec.utterances_per_speaker,
          "utterances per speaker");
  add_opt(gen, "--offset-scale", spec.speaker_offset_scale,
          "speaker offset scale");
  add_opt(gen, "--noise-scale", spec.noise_scale, "frame noise scale");
  add_opt(gen, "--mean-dwell", spec.mean_dwell_frames,
          "mean frames per content unit");
  add_opt(gen, "--seed", spec.seed, "generator seed");
  add_flag_env(gen, "--paired", paired,
               "emit a paired source/target token corpus instead");
  add_opt(gen, "--pairs", paired_spec.num_pairs, "paired: sequence pairs");
  add_opt(gen, "--seq-len", paired_spec.seq_len, "paired: tokens per side");
  add_opt(gen, "--units", paired_spec.num_units, "paired: unit vocabulary");
  add_opt(gen, "--mapping", mapping_name, "paired: identity|permutation");
  add_opt(gen, "--mapping-seed", paired_spec.mapping_seed,
          "paired: mapping permutation seed");

  // --- train-kmeans -------------------------------------------------------
  auto* tk = app.add_subcommand("train-kmeans", "train the codebook");
  std::string tk_manifest, tk_out;
  vectok::KmeansOptions tk_opts;
  uint64_t tk_max_frames = 0;
  bool tk_no_normalize = false;
  add_opt(tk, "--manifest", tk_manifest, "corpus manifest TSV")
      ->required()
      ->check(CLI::ExistingFile);
  add_opt(tk, "--out-dir", tk_out, "output directory")->required();
  add_opt(tk, "--k", tk_opts.k, "number of clusters");
  add_opt(tk, "--seed", tk_opts.seed, "k-means++ seed");
  add_opt(tk, "--tol", tk_opts.tol, "relative inertia tolerance");
  add_opt(tk, "--max-iters", tk_opts.max_iters, "Lloyd iteration cap");
  add_opt(tk, "--max-frames", tk_max_frames,
          "train on a seeded subsample of at most this many frames");
  add_flag_env(tk, "--no-normalize", tk_no_normalize,
               "skip utterance mean normalization");

  // --- tokenize -----------------------------------------------------------
  auto* tok = app.add_subcommand("tokenize", "assign tokens to a corpus");
  std::string tok_manifest, tok_codebook, tok_out;
  bool tok_no_normalize = false;
  uint32_t tok_threads = 1;
  add_opt(tok, "--manifest", tok_manifest, "corpus manifest TSV")
      ->required()
      ->check(CLI::ExistingFile);
  add_opt(tok, "--codebook", tok_codebook, "codebook file")
      ->required()
      ->check(CLI::ExistingFile);
  add_opt(tok, "--out-dir", tok_out, "output directory")->required();
  add_flag_env(tok, "--no-normalize", tok_no_normalize,
               "skip utterance mean normalization");
  add_opt(tok, "--threads", tok_threads,
          "parallelism cap; 1 guarantees bit-exact output (outputs are "
          "per-utterance, so any value is deterministic)");

  // --- train-bpe ----------------------------------------------------------
  auto* tb = app.add_subcommand("train-bpe", "learn BPE merges over tokens");
  std::string tb_tokens, tb_out;
  vectok::BpeOptions tb_opts;
  add_opt(tb, "--tokens", tb_tokens, "token list TSV (from tokenize)")
      ->required()
      ->check(CLI::ExistingFile);
  add_opt(tb, "--out-dir", tb_out, "output directory")->required();
  add_opt(tb, "--vocab", tb_opts.target_vocab_size, "target vocabulary size");
  add_opt(tb, "--min-pair-freq", tb_opts.min_pair_frequency,
          "minimum pair frequency to merge");

  // --- encode / decode ----------------------------------------------------
  auto* enc = app.add_subcommand("encode", "BPE-encode a token corpus");
  std::string enc_tokens, enc_bpe, enc_out;
  add_opt(enc, "--tokens", enc_tokens, "token list TSV")
      ->required()
      ->check(CLI::ExistingFile);
  add_opt(enc, "--bpe", enc_bpe, "BPE model file")
      ->required()
      ->check(CLI::ExistingFile);
  add_opt(enc, "--out-dir", enc_out, "output directory")->required();

  auto* dec = app.add_subcommand("decode", "BPE-decode a token corpus");
  std::string dec_tokens, dec_bpe, dec_out;
  add_opt(dec, "--tokens", dec_tokens, "encoded token list TSV")
      ->required()
      ->check(CLI::ExistingFile);
  add_opt(dec, "--bpe", dec_bpe, "BPE model file")
      ->required()
      ->check(CLI::ExistingFile);
  add_opt(dec, "--out-dir", dec_out, "output directory")->required();

  // --- reconstruct / deidentify / anonymize --------------------------------
  auto* rec = app.add_subcommand("reconstruct",
                                 "tokens to vectors via center lookup");
  std::string rec_tokens, rec_codebook, rec_prompt, rec_out;
  add_opt(rec, "--tokens", rec_tokens, "token file")
      ->required()
      ->check(CLI::ExistingFile);
  add_opt(rec, "--codebook", rec_codebook, "codebook file")
      ->required()
      ->check(CLI::ExistingFile);
  add_opt(rec, "--prompt", rec_prompt,
          "prompt feature file supplying the speaker offset")
      ->check(CLI::ExistingFile);
  add_opt(rec, "--out-dir", rec_out, "output directory")->required();

  auto* deid = app.add_subcommand("deidentify",
                                  "speaker-agnostic reconstruction");
  std::string deid_tokens, deid_codebook, deid_out;
  add_opt(deid, "--tokens", deid_tokens, "token file")
      ->required()
      ->check(CLI::ExistingFile);
  add_opt(deid, "--codebook", deid_codebook, "codebook file")
      ->required()
      ->check(CLI::ExistingFile);
  add_opt(deid, "--out-dir", deid_out, "output directory")->required();

  auto* anon = app.add_subcommand("anonymize",
                                  "interpolate speaker-specific and "
                                  "speaker-agnostic vectors");
  std::string anon_spe, anon_agn, anon_out;
  double anon_lambda = 0.5;
  add_opt(anon, "--spe", anon_spe, "speaker-specific feature file")
      ->required()
      ->check(CLI::ExistingFile);
  add_opt(anon, "--agn", anon_agn, "speaker-agnostic feature file")
      ->required()
      ->check(CLI::ExistingFile);
  add_opt(anon, "--lambda", anon_lambda, "interpolation weight in [0,1]");
  add_opt(anon, "--out-dir", anon_out, "output directory")->required();

  // --- invk-train / invk-infer ---------------------------------------------
  auto* it = app.add_subcommand("invk-train",
                                "train the neural inverse-K model");
  std::string it_manifest, it_codebook, it_out;
  vectok::InvKTrainOptions it_opts;
  vectok::AugmentationPolicy it_policy;
  uint32_t it_prompt_frames = 150;
  uint32_t it_d_model = 64, it_heads = 2, it_layers = 2, it_ff = 256;
  add_opt(it, "--manifest", it_manifest, "corpus manifest TSV")
      ->required()
      ->check(CLI::ExistingFile);
  add_opt(it, "--codebook", it_codebook, "codebook file")
      ->required()
      ->check(CLI::ExistingFile);
  add_opt(it, "--out-dir", it_out, "output directory")->required();
  add_opt(it, "--steps", it_opts.steps, "training steps");
  add_opt(it, "--lr", it_opts.lr, "learning rate");
  add_opt(it, "--weight-decay", it_opts.weight_decay, "decoupled weight decay");
  add_opt(it, "--seed", it_opts.seed, "training seed");
  add_opt(it, "--alpha", it_policy.mask_prob, "token mask probability");
  add_opt(it, "--beta", it_policy.replace_prob, "token replace probability");
  add_opt(it, "--prompt-frames", it_prompt_frames,
          "prompt length in frames (3 s at 50 frames/s by default)");
  add_opt(it, "--d-model", it_d_model, "attention width");
  add_opt(it, "--heads", it_heads, "attention heads");
  add_opt(it, "--layers", it_layers, "attention blocks");
  add_opt(it, "--ff", it_ff, "feed-forward width");

  auto* ii = app.add_subcommand("invk-infer",
                                "predict vectors from tokens and a prompt");
  std::string ii_model, ii_tokens, ii_prompt, ii_out;
  add_opt(ii, "--model", ii_model, "inverse-K checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  add_opt(ii, "--tokens", ii_tokens, "token file")
      ->required()
      ->check(CLI::ExistingFile);
  add_opt(ii, "--prompt", ii_prompt, "prompt feature file")
      ->required()
      ->check(CLI::ExistingFile);
  add_opt(ii, "--out-dir", ii_out, "output directory")->required();

  // --- lm-train / lm-sample / s2st -----------------------------------------
  auto* lt = app.add_subcommand("lm-train", "train the token language model");
  std::string lt_mode = "tts", lt_tokens, lt_units, lt_pairs, lt_bpe, lt_out;
  vectok::LmTrainOptions lt_opts;
  double lt_prompt_frac = 0.25;
  uint32_t lt_d_model = 128, lt_heads = 4, lt_layers = 4, lt_ff = 512;
  bool lt_no_cosine = false;
  uint64_t lt_model_seed = 0;
  add_opt(lt, "--mode", lt_mode, "tts or s2st")->required();
  add_opt(lt, "--tokens", lt_tokens, "tts: base token list TSV")
      ->check(CLI::ExistingFile);
  add_opt(lt, "--units", lt_units, "tts: unit label list TSV")
      ->check(CLI::ExistingFile);
  add_opt(lt, "--pairs", lt_pairs, "s2st: pairs TSV (from gen-corpus --paired)")
      ->check(CLI::ExistingFile);
  add_opt(lt, "--bpe", lt_bpe, "BPE model file")
      ->required()
      ->check(CLI::ExistingFile);
  add_opt(lt, "--out-dir", lt_out, "output directory")->required();
  add_opt(lt, "--steps", lt_opts.steps, "training steps");
  add_opt(lt, "--lr", lt_opts.lr, "base learning rate");
  add_opt(lt, "--weight-decay", lt_opts.weight_decay, "decoupled weight decay");
  add_opt(lt, "--seed", lt_opts.seed, "training seed");
  add_opt(lt, "--model-seed", lt_model_seed, "parameter init seed");
  add_opt(lt, "--prompt-frac", lt_prompt_frac,
          "tts: fraction of base tokens used as the prompt segment");
  add_opt(lt, "--d-model", lt_d_model, "attention width");
  add_opt(lt, "--heads", lt_heads, "attention heads");
  add_opt(lt, "--layers", lt_layers, "attention blocks");
  add_opt(lt, "--ff", lt_ff, "feed-forward width");
  add_flag_env(lt, "--no-cosine", lt_no_cosine,
               "constant learning rate instead of cosine decay");

  auto* ls = app.add_subcommand("lm-sample",
                                "sample and rescore candidate sequences");
  std::string ls_model, ls_out;
  std::vector<std::string> ls_segments;
  vectok::SampleOptions ls_opts;
  add_opt(ls, "--model", ls_model, "LM checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  add_opt(ls, "--segment", ls_segments,
          "condition segment token file (repeatable, ordered)")
      ->required()
      ->check(CLI::ExistingFile);
  add_opt(ls, "--out-dir", ls_out, "output directory")->required();
  add_opt(ls, "--candidates", ls_opts.n_candidates, "candidate count");
  add_opt(ls, "--temperature", ls_opts.temperature, "sampling temperature");
  add_opt(ls, "--top-k", ls_opts.top_k, "top-k restriction (0 = off)");
  add_opt(ls, "--seed", ls_opts.seed, "sampling seed");
  add_opt(ls, "--max-len", ls_opts.max_len, "generation cap (0 = default)");

  auto* s2 = app.add_subcommand("s2st",
                                "translate tokens and reconstruct vectors");
  std::string s2_model, s2_source, s2_bpe, s2_codebook, s2_prompt, s2_out;
  vectok::SampleOptions s2_opts;
  s2_opts.n_candidates = 8;
  add_opt(s2, "--model", s2_model, "s2st LM checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  add_opt(s2, "--source", s2_source, "source base-token file")
      ->required()
      ->check(CLI::ExistingFile);
  add_opt(s2, "--bpe", s2_bpe, "BPE model file")
      ->required()
      ->check(CLI::ExistingFile);
  add_opt(s2, "--codebook", s2_codebook, "codebook file")
      ->required()
      ->check(CLI::ExistingFile);
  add_opt(s2, "--prompt", s2_prompt, "prompt feature file")
      ->required()
      ->check(CLI::ExistingFile);
  add_opt(s2, "--out-dir", s2_out, "output directory")->required();
  add_opt(s2, "--candidates", s2_opts.n_candidates, "candidate count");
  add_opt(s2, "--temperature", s2_opts.temperature, "sampling temperature");
  add_opt(s2, "--top-k", s2_opts.top_k, "top-k restriction (0 = off)");
  add_opt(s2, "--seed", s2_opts.seed, "sampling seed");
  add_opt(s2, "--max-len", s2_opts.max_len, "generation cap (0 = default)");

  // --- report ---------------------------------------------------------------
  auto* rep = app.add_subcommand("report", "evaluation and bitrate report");
  std::string rep_manifest, rep_codebook, rep_bpe, rep_units, rep_out;
  double rep_lambda = 0.5;
  uint64_t rep_split_seed = 0;
  bool rep_scatter = false;
  double rep_pre_tps = 0.0, rep_post_tps = 0.0;
  uint32_t rep_pre_vocab = 0, rep_post_vocab = 0;
  add_opt(rep, "--manifest", rep_manifest, "corpus manifest TSV")
      ->check(CLI::ExistingFile);
  add_opt(rep, "--codebook", rep_codebook, "codebook file")
      ->check(CLI::ExistingFile);
  add_opt(rep, "--bpe", rep_bpe, "BPE model file")->check(CLI::ExistingFile);
  add_opt(rep, "--units", rep_units, "unit label list TSV for purity")
      ->check(CLI::ExistingFile);
  add_opt(rep, "--lambda", rep_lambda, "anonymization interpolation weight");
  add_opt(rep, "--split-seed", rep_split_seed, "probe split seed");
  add_flag_env(rep, "--scatter", rep_scatter, "also dump a 2-D PCA scatter");
  add_opt(rep, "--pre-tps", rep_pre_tps,
          "operating point: base tokens per second");
  add_opt(rep, "--pre-vocab", rep_pre_vocab, "operating point: base vocab");
  add_opt(rep, "--post-tps", rep_post_tps,
          "operating point: post-BPE tokens per second");
  add_opt(rep, "--post-vocab", rep_post_vocab,
          "operating point: post-BPE vocab");
  add_opt(rep, "--out-dir", rep_out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) {
      if (mapping_name != "identity" && mapping_name != "permutation")
        throw CLI::ValidationError("--mapping",
                                   "must be identity or permutation");
      paired_spec.mapping = mapping_name == "permutation"
                                ? vectok::UnitMapping::kPermutation
                                : vectok::UnitMapping::kIdentity;
      paired_spec.seed = spec.seed;
      json args{{"speakers", spec.num_speakers},
                {"content_units", spec.num_content_units},
                {"dim", spec.dim},
                {"frames", spec.frames_per_utterance},
                {"utts_per_speaker", spec.utterances_per_speaker},
                {"offset_scale", spec.speaker_offset_scale},
                {"noise_scale", spec.noise_scale},
                {"mean_dwell", spec.mean_dwell_frames},
                {"seed", spec.seed},
                {"paired", paired},
                {"pairs", paired_spec.num_pairs},
                {"seq_len", paired_spec.seq_len},
                {"units", paired_spec.num_units},
                {"mapping", mapping_name},
                {"mapping_seed", paired_spec.mapping_seed}};
      return run_gen_corpus(gen_out, spec, paired, paired_spec, args);
    }

    if (tk->parsed()) {
      fs::path dir = ensure_out_dir(tk_out);
      RunManifest manifest;
      manifest.command = "train-kmeans";
      manifest.args = {{"k", tk_opts.k},          {"seed", tk_opts.seed},
                       {"tol", tk_opts.tol},      {"max_iters", tk_opts.max_iters},
                       {"max_frames", tk_max_frames},
                       {"no_normalize", tk_no_normalize}};
      LoadedCorpus corpus = load_corpus(tk_manifest, &manifest);
      std::vector<vectok::FeatureMatrix> mats =
          normalized_corpus(corpus.records, tk_no_normalize);
      if (tk_max_frames > 0) {
        // Seeded uniform subsample of frames, kept in corpus order.
        uint64_t total = 0;
        for (const auto& m : mats) total += m.frames();
        if (total > tk_max_frames) {
          std::vector<uint64_t> idx(total);
          for (uint64_t i = 0; i < total; ++i) idx[i] = i;
          vectok::SplitMix64 rng(tk_opts.seed ^ 0x5eedf00dULL);
          for (uint64_t i = 0; i < tk_max_frames; ++i) {
            uint64_t j = i + rng.uniform_index(total - i);
            std::swap(idx[i], idx[j]);
          }
          idx.resize(tk_max_frames);
          std::sort(idx.begin(), idx.end());
          vectok::FeatureMatrix sample;
          sample.dim = mats[0].dim;
          size_t cursor = 0;
          uint64_t offset = 0;
          for (const auto& m : mats) {
            uint64_t end = offset + m.frames();
            while (cursor < idx.size() && idx[cursor] < end) {
              size_t local = static_cast<size_t>(idx[cursor] - offset);
              sample.data.insert(sample.data.end(),
                                 m.data.begin() + local * m.dim,
                                 m.data.begin() + (local + 1) * m.dim);
              ++cursor;
            }
            offset = end;
          }
          mats.assign(1, std::move(sample));
        }
      }
      vectok::KmeansTraining training = vectok::train_kmeans(mats, tk_opts);
      vectok::save_codebook_file(training.codebook,
                                 (dir / "codebook.vtkc").string());
      manifest.outputs.push_back("codebook.vtkc");
      std::ofstream curve(dir / "kmeans_inertia.txt");
      for (double v : training.inertia_history) curve << v << "\n";
      manifest.outputs.push_back("kmeans_inertia.txt");
      manifest.write(dir);
      std::cout << "wrote " << (dir / "codebook.vtkc").string() << " (inertia "
                << training.codebook.inertia << ", "
                << training.inertia_history.size() << " iterations)\n";
      return 0;
    }

    if (tok->parsed()) {
      if (tok_threads < 1)
        throw CLI::ValidationError("--threads", "must be >= 1");
      fs::path dir = ensure_out_dir(tok_out);
      RunManifest manifest;
      manifest.command = "tokenize";
      manifest.args = {{"no_normalize", tok_no_normalize},
                       {"threads", tok_threads}};
      LoadedCorpus corpus = load_corpus(tok_manifest, &manifest);
      manifest.inputs.push_back(tok_codebook);
      vectok::Codebook codebook = vectok::load_codebook_file(tok_codebook);

      std::vector<vectok::TokenSequence> tokens(corpus.records.size());
      // Utterances are independent, so worker partitioning cannot change
      // any output byte.
      auto worker = [&](size_t begin, size_t end) {
        for (size_t i = begin; i < end; ++i) {
          const auto& record = corpus.records[i];
          vectok::FeatureMatrix m =
              tok_no_normalize ? record.features
                               : vectok::normalize(record.features).features;
          tokens[i] = vectok::tokenize(m, codebook);
        }
      };
      size_t n_threads = std::min<size_t>(tok_threads, corpus.records.size());
      if (n_threads <= 1) {
        worker(0, corpus.records.size());
      } else {
        std::vector<std::thread> pool;
        size_t chunk = (corpus.records.size() + n_threads - 1) / n_threads;
        for (size_t t = 0; t < n_threads; ++t) {
          size_t begin = t * chunk;
          size_t end = std::min(begin + chunk, corpus.records.size());
          if (begin < end) pool.emplace_back(worker, begin, end);
        }
        for (auto& th : pool) th.join();
      }

      std::vector<vectok::ManifestEntry> entries;
      for (const auto& r : corpus.records)
        entries.push_back({r.utterance_id, r.speaker_id, ""});
      write_token_corpus(dir, "tokens", entries, tokens, &manifest);
      manifest.write(dir);
      std::cout << "wrote " << (dir / "tokens.tsv").string() << "\n";
      return 0;
    }

    if (tb->parsed()) {
      fs::path dir = ensure_out_dir(tb_out);
      RunManifest manifest;
      manifest.command = "train-bpe";
      manifest.args = {{"vocab", tb_opts.target_vocab_size},
                       {"min_pair_freq", tb_opts.min_pair_frequency}};
      TokenCorpus corpus = load_token_corpus(tb_tokens, &manifest);
      vectok::BpeModel model = vectok::train_bpe(corpus.sequences, tb_opts);
      vectok::save_bpe_file(model, (dir / "bpe.txt").string());
      manifest.outputs.push_back("bpe.txt");
      manifest.write(dir);
      std::cout << "wrote " << (dir / "bpe.txt").string() << " ("
                << model.merges.size() << " merges, vocab "
                << model.vocab_size() << ")\n";
      return 0;
    }

    if (enc->parsed() || dec->parsed()) {
      bool encoding = enc->parsed();
      fs::path dir = ensure_out_dir(encoding ? enc_out : dec_out);
      RunManifest manifest;
      manifest.command = encoding ? "encode" : "decode";
      manifest.args = json::object();
      TokenCorpus corpus =
          load_token_corpus(encoding ? enc_tokens : dec_tokens, &manifest);
      std::string bpe_path = encoding ? enc_bpe : dec_bpe;
      manifest.inputs.push_back(bpe_path);
      vectok::BpeModel model = vectok::load_bpe_file(bpe_path);
      std::vector<vectok::TokenSequence> out;
      out.reserve(corpus.sequences.size());
      for (const auto& s : corpus.sequences)
        out.push_back(encoding ? vectok::encode(s, model)
                               : vectok::decode(s, model));
      write_token_corpus(dir, encoding ? "encoded" : "decoded",
                         corpus.entries, out, &manifest);
      manifest.write(dir);
      std::cout << "wrote "
                << (dir / (encoding ? "encoded.tsv" : "decoded.tsv")).string()
                << "\n";
      return 0;
    }

    if (rec->parsed()) {
      fs::path dir = ensure_out_dir(rec_out);
      RunManifest manifest;
      manifest.command = "reconstruct";
      manifest.args = {{"with_prompt", !rec_prompt.empty()}};
      manifest.inputs = {rec_tokens, rec_codebook};
      vectok::TokenSequence tokens = vectok::read_tokens_file(rec_tokens);
      vectok::Codebook codebook = vectok::load_codebook_file(rec_codebook);
      vectok::FeatureMatrix out;
      if (rec_prompt.empty()) {
        out = vectok::lookup_reconstruct(tokens, codebook);
      } else {
        manifest.inputs.push_back(rec_prompt);
        vectok::UtteranceRecord prompt =
            vectok::read_features_file(rec_prompt);
        out = vectok::reconstruct_with_prompt(tokens, codebook,
                                              prompt.features);
      }
      vectok::write_features_file({"reconstructed", "", out},
                                  (dir / "reconstructed.vtkf").string());
      manifest.outputs.push_back("reconstructed.vtkf");
      manifest.write(dir);
      std::cout << "wrote " << (dir / "reconstructed.vtkf").string() << "\n";
      return 0;
    }

    if (deid->parsed()) {
      fs::path dir = ensure_out_dir(deid_out);
      RunManifest manifest;
      manifest.command = "deidentify";
      manifest.inputs = {deid_tokens, deid_codebook};
      vectok::TokenSequence tokens = vectok::read_tokens_file(deid_tokens);
      vectok::Codebook codebook = vectok::load_codebook_file(deid_codebook);
      vectok::FeatureMatrix out = vectok::deidentify(tokens, codebook);
      vectok::write_features_file({"deidentified", "", out},
                                  (dir / "deidentified.vtkf").string());
      manifest.outputs.push_back("deidentified.vtkf");
      manifest.write(dir);
      std::cout << "wrote " << (dir / "deidentified.vtkf").string() << "\n";
      return 0;
    }

    if (anon->parsed()) {
      fs::path dir = ensure_out_dir(anon_out);
      RunManifest manifest;
      manifest.command = "anonymize";
      manifest.args = {{"lambda", anon_lambda}};
      manifest.inputs = {anon_spe, anon_agn};
      vectok::UtteranceRecord spe = vectok::read_features_file(anon_spe);
      vectok::UtteranceRecord agn = vectok::read_features_file(anon_agn);
      vectok::FeatureMatrix out =
          vectok::anonymize(spe.features, agn.features, anon_lambda);
      vectok::write_features_file({"anonymized", "", out},
                                  (dir / "anonymized.vtkf").string());
      manifest.outputs.push_back("anonymized.vtkf");
      manifest.write(dir);
      std::cout << "wrote " << (dir / "anonymized.vtkf").string() << "\n";
      return 0;
    }

    if (it->parsed()) {
      fs::path dir = ensure_out_dir(it_out);
      RunManifest manifest;
      manifest.command = "invk-train";
      manifest.args = {{"steps", it_opts.steps},
                       {"lr", it_opts.lr},
                       {"weight_decay", it_opts.weight_decay},
                       {"seed", it_opts.seed},
                       {"alpha", it_policy.mask_prob},
                       {"beta", it_policy.replace_prob},
                       {"prompt_frames", it_prompt_frames},
                       {"d_model", it_d_model},
                       {"heads", it_heads},
                       {"layers", it_layers},
                       {"ff", it_ff}};
      LoadedCorpus corpus = load_corpus(it_manifest, &manifest);
      manifest.inputs.push_back(it_codebook);
      vectok::Codebook codebook = vectok::load_codebook_file(it_codebook);

      std::vector<vectok::InvKTriple> triples;
      for (const auto& record : corpus.records) {
        if (record.features.frames() < 2)
          throw vectok::FormatError(vectok::FormatError::Kind::BadValue,
                                    "utterance " + record.utterance_id +
                                        " is too short to train on");
        vectok::InvKTriple t;
        t.tokens = vectok::tokenize(
            vectok::normalize(record.features).features, codebook);
        t.target = record.features;
        t.prompt = record.features;
        size_t prompt_len = std::min<size_t>(
            it_prompt_frames, record.features.frames() - 1);
        t.prompt.data.resize(prompt_len * record.features.dim);
        triples.push_back(std::move(t));
      }

      vectok::InvKConfig config{codebook.k, codebook.dim, it_d_model,
                                it_heads, it_layers, it_ff};
      vectok::InvKModel model(config, codebook, it_opts.seed);
      vectok::TrainCurve curve =
          vectok::train_invk(model, triples, it_policy, it_opts);
      model.save((dir / "invk.vtkm").string());
      std::ofstream losses(dir / "invk_loss.txt");
      for (double v : curve.losses) losses << v << "\n";
      manifest.outputs.push_back("invk.vtkm");
      manifest.outputs.push_back("invk_loss.txt");
      manifest.write(dir);
      std::cout << "wrote " << (dir / "invk.vtkm").string() << " (final loss "
                << curve.losses.back() << ")\n";
      return 0;
    }

    if (ii->parsed()) {
      fs::path dir = ensure_out_dir(ii_out);
      RunManifest manifest;
      manifest.command = "invk-infer";
      manifest.inputs = {ii_model, ii_tokens, ii_prompt};
      vectok::InvKModel model = vectok::InvKModel::from_checkpoint(ii_model);
      vectok::TokenSequence tokens = vectok::read_tokens_file(ii_tokens);
      vectok::UtteranceRecord prompt = vectok::read_features_file(ii_prompt);
      vectok::FeatureMatrix out = model.predict(tokens, prompt.features);
      vectok::write_features_file({"predicted", "", out},
                                  (dir / "predicted.vtkf").string());
      manifest.outputs.push_back("predicted.vtkf");
      manifest.write(dir);
      std::cout << "wrote " << (dir / "predicted.vtkf").string() << "\n";
      return 0;
    }

    if (lt->parsed()) {
      if (lt_mode != "tts" && lt_mode != "s2st")
        throw CLI::ValidationError("--mode", "must be tts or s2st");
      fs::path dir = ensure_out_dir(lt_out);
      RunManifest manifest;
      manifest.command = "lm-train";
      manifest.args = {{"mode", lt_mode},
                       {"steps", lt_opts.steps},
                       {"lr", lt_opts.lr},
                       {"weight_decay", lt_opts.weight_decay},
                       {"seed", lt_opts.seed},
                       {"model_seed", lt_model_seed},
                       {"prompt_frac", lt_prompt_frac},
                       {"d_model", lt_d_model},
                       {"heads", lt_heads},
                       {"layers", lt_layers},
                       {"ff", lt_ff},
                       {"cosine", !lt_no_cosine}};
      manifest.inputs.push_back(lt_bpe);
      vectok::BpeModel bpe = vectok::load_bpe_file(lt_bpe);
      lt_opts.cosine_schedule = !lt_no_cosine;

      std::vector<vectok::ConditioningLayout> layouts;
      if (lt_mode == "tts") {
        if (lt_tokens.empty() || lt_units.empty())
          throw CLI::ValidationError("--tokens",
                                     "tts mode needs --tokens and --units");
        TokenCorpus tokens = load_token_corpus(lt_tokens, &manifest);
        TokenCorpus units = load_token_corpus(lt_units, &manifest);
        if (tokens.sequences.size() != units.sequences.size())
          throw vectok::FormatError(
              vectok::FormatError::Kind::BadValue,
              "token and unit lists differ in length");
        for (size_t i = 0; i < tokens.sequences.size(); ++i) {
          const auto& base = tokens.sequences[i];
          size_t split = std::max<size_t>(
              1, static_cast<size_t>(lt_prompt_frac * base.tokens.size()));
          split = std::min(split, base.tokens.size() - 1);
          vectok::TokenSequence prompt_part{base.vocab_size,
                                            {base.tokens.begin(),
                                             base.tokens.begin() + split}};
          vectok::TokenSequence target_part{base.vocab_size,
                                            {base.tokens.begin() + split,
                                             base.tokens.end()}};
          vectok::ConditioningLayout layout;
          layout.mode = vectok::LmMode::kTts;
          layout.segments = {collapse_units(units.sequences[i].tokens),
                             vectok::encode(prompt_part, bpe).tokens,
                             vectok::encode(target_part, bpe).tokens};
          layouts.push_back(std::move(layout));
        }
      } else {
        if (lt_pairs.empty())
          throw CLI::ValidationError("--pairs", "s2st mode needs --pairs");
        manifest.inputs.push_back(lt_pairs);
        fs::path base = fs::path(lt_pairs).parent_path();
        for (const auto& entry : vectok::read_manifest(lt_pairs)) {
          // pairs.tsv rows: id TAB source_path TAB target_path.
          fs::path src(entry.speaker_id), tgt(entry.path);
          if (src.is_relative()) src = base / src;
          if (tgt.is_relative()) tgt = base / tgt;
          manifest.inputs.push_back(src.string());
          manifest.inputs.push_back(tgt.string());
          vectok::ConditioningLayout layout;
          layout.mode = vectok::LmMode::kS2st;
          layout.segments = {
              vectok::encode(vectok::read_tokens_file(src.string()), bpe)
                  .tokens,
              vectok::encode(vectok::read_tokens_file(tgt.string()), bpe)
                  .tokens};
          layouts.push_back(std::move(layout));
        }
      }

      vectok::SeqLmConfig config;
      config.bpe_vocab = bpe.vocab_size();
      config.d_model = lt_d_model;
      config.heads = lt_heads;
      config.layers = lt_layers;
      config.d_ff = lt_ff;
      vectok::SeqLmModel model(config,
                               lt_mode == "tts" ? vectok::LmMode::kTts
                                                : vectok::LmMode::kS2st,
                               lt_model_seed);
      vectok::TrainCurve curve = vectok::train_lm(model, layouts, lt_opts);
      model.save((dir / "lm.vtkm").string());
      std::ofstream losses(dir / "lm_loss.txt");
      for (double v : curve.losses) losses << v << "\n";
      manifest.outputs.push_back("lm.vtkm");
      manifest.outputs.push_back("lm_loss.txt");
      manifest.write(dir);
      std::cout << "wrote " << (dir / "lm.vtkm").string()
                << " (final nll/token " << curve.losses.back() << ")\n";
      return 0;
    }

    if (ls->parsed()) {
      fs::path dir = ensure_out_dir(ls_out);
      RunManifest manifest;
      manifest.command = "lm-sample";
      manifest.args = {{"candidates", ls_opts.n_candidates},
                       {"temperature", ls_opts.temperature},
                       {"top_k", ls_opts.top_k},
                       {"seed", ls_opts.seed},
                       {"max_len", ls_opts.max_len}};
      manifest.inputs.push_back(ls_model);
      vectok::SeqLmModel model = vectok::SeqLmModel::from_checkpoint(ls_model);
      vectok::ConditioningLayout condition;
      condition.mode = model.mode();
      for (const auto& path : ls_segments) {
        manifest.inputs.push_back(path);
        condition.segments.push_back(vectok::read_tokens_file(path).tokens);
      }
      auto candidates = vectok::sample_candidates(model, condition, ls_opts);
      auto hook = vectok::default_rescorer(model);
      size_t best = vectok::rescore_select(candidates, hook, condition);

      vectok::write_tokens_file(candidates[best].tokens,
                                (dir / "best.vtkt").string());
      std::ofstream table(dir / "candidates.tsv");
      for (size_t i = 0; i < candidates.size(); ++i)
        table << i << '\t' << hook(condition, candidates[i].tokens) << '\t'
              << candidates[i].tokens.tokens.size() << '\t'
              << (candidates[i].truncated ? "truncated" : "complete") << '\n';
      manifest.outputs.push_back("best.vtkt");
      manifest.outputs.push_back("candidates.tsv");
      manifest.write(dir);
      std::cout << "wrote " << (dir / "best.vtkt").string() << " (selected "
                << best << " of " << candidates.size() << ")\n";
      return 0;
    }

    if (s2->parsed()) {
      fs::path dir = ensure_out_dir(s2_out);
      RunManifest manifest;
      manifest.command = "s2st";
      manifest.args = {{"candidates", s2_opts.n_candidates},
                       {"temperature", s2_opts.temperature},
                       {"top_k", s2_opts.top_k},
                       {"seed", s2_opts.seed}};
      manifest.inputs = {s2_model, s2_source, s2_bpe, s2_codebook, s2_prompt};
      vectok::SeqLmModel model = vectok::SeqLmModel::from_checkpoint(s2_model);
      vectok::TokenSequence source = vectok::read_tokens_file(s2_source);
      vectok::BpeModel bpe = vectok::load_bpe_file(s2_bpe);
      vectok::Codebook codebook = vectok::load_codebook_file(s2_codebook);
      vectok::UtteranceRecord prompt = vectok::read_features_file(s2_prompt);

      vectok::FeatureMatrix out = vectok::s2st_pipeline(
          model, source, bpe, codebook, prompt.features, s2_opts);
      vectok::write_features_file({"translated", "", out},
                                  (dir / "translated.vtkf").string());
      manifest.outputs.push_back("translated.vtkf");
      manifest.write(dir);
      std::cout << "wrote " << (dir / "translated.vtkf").string() << "\n";
      return 0;
    }

    if (rep->parsed()) {
      fs::path dir = ensure_out_dir(rep_out);
      RunManifest manifest;
      manifest.command = "report";
      bool operating_point = rep_manifest.empty();
      json doc;
      std::vector<vectok::UtteranceRecord> records;

      if (operating_point) {
        if (rep_pre_tps <= 0 || rep_post_tps <= 0 || rep_pre_vocab == 0 ||
            rep_post_vocab == 0)
          throw CLI::ValidationError(
              "--pre-tps",
              "operating-point reports need --pre-tps, --pre-vocab, "
              "--post-tps and --post-vocab (or pass --manifest)");
        manifest.args = {{"pre_tps", rep_pre_tps},
                         {"pre_vocab", rep_pre_vocab},
                         {"post_tps", rep_post_tps},
                         {"post_vocab", rep_post_vocab}};
        vectok::BitrateReport r = vectok::bitrate_summary(
            rep_pre_tps, rep_pre_vocab, rep_post_tps, rep_post_vocab);
        doc = {{"schema_version", 1},
               {"bitrate",
                {{"pre_tokens_per_sec", r.pre_tokens_per_sec},
                 {"post_tokens_per_sec", r.post_tokens_per_sec},
                 {"pre_vocab", r.pre_vocab},
                 {"post_vocab", r.post_vocab},
                 {"pre_bits_per_token", r.pre_bits_per_token},
                 {"post_bits_per_token", r.post_bits_per_token},
                 {"pre_bits_per_sec", r.pre_bits_per_sec},
                 {"post_bits_per_sec", r.post_bits_per_sec},
                 {"compression_ratio", r.compression_ratio}}}};
        std::ofstream out(dir / "report.json");
        out << doc.dump(2) << "\n";
      } else {
        if (rep_codebook.empty() || rep_bpe.empty())
          throw CLI::ValidationError(
              "--codebook", "corpus reports need --codebook and --bpe");
        manifest.args = {{"lambda", rep_lambda},
                         {"split_seed", rep_split_seed},
                         {"scatter", rep_scatter}};
        LoadedCorpus corpus = load_corpus(rep_manifest, &manifest);
        records = std::move(corpus.records);
        manifest.inputs.push_back(rep_codebook);
        manifest.inputs.push_back(rep_bpe);
        vectok::Codebook codebook = vectok::load_codebook_file(rep_codebook);
        vectok::BpeModel bpe = vectok::load_bpe_file(rep_bpe);

        std::vector<std::vector<uint32_t>> labels;
        vectok::PipelineReportInputs inputs;
        inputs.corpus = &records;
        inputs.codebook = &codebook;
        inputs.bpe = &bpe;
        inputs.lambda = rep_lambda;
        inputs.split_seed = rep_split_seed;
        if (!rep_units.empty()) {
          TokenCorpus units = load_token_corpus(rep_units, &manifest);
          for (const auto& s : units.sequences) labels.push_back(s.tokens);
          inputs.unit_labels = &labels;
        }
        std::ofstream out(dir / "report.json");
        out << vectok::pipeline_report_json(inputs);
        if (rep_scatter) {
          std::ofstream scatter(dir / "scatter.tsv");
          scatter << vectok::pca_scatter_tsv(records);
          manifest.outputs.push_back("scatter.tsv");
        }
      }
      manifest.outputs.push_back("report.json");
      manifest.write(dir);
      std::cout << "wrote " << (dir / "report.json").string() << "\n";
      return 0;
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const vectok::NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const vectok::FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
