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

#include "vectok/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "vectok/types.hpp"

namespace vectok::nn {

namespace {

constexpr char kMagic[4] = {'V', 'T', 'K', 'M'};
constexpr uint32_t kVersion = 1;

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

uint32_t get_u32(std::istream& in, const char* what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw FormatError(FormatError::Kind::Truncated,
                      std::string("truncated checkpoint at ") + what);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) |
         (static_cast<uint32_t>(b[3]) << 24);
}

uint64_t get_u64(std::istream& in, const char* what) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8))
    throw FormatError(FormatError::Kind::Truncated,
                      std::string("truncated checkpoint at ") + what);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, ModelKind kind,
                     const std::map<std::string, double>& hparams,
                     const std::vector<TensorPtr>& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw FormatError(FormatError::Kind::Io, "cannot open for write: " + path);
  out.write(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<uint32_t>(kind));
  put_u32(out, static_cast<uint32_t>(hparams.size()));
  for (const auto& [name, value] : hparams) {
    put_u32(out, static_cast<uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u64(out, std::bit_cast<uint64_t>(value));
  }
  uint64_t total = 0;
  for (const auto& p : params) total += p->value.size();
  put_u64(out, total);
  for (const auto& p : params)
    for (double v : p->value)
      put_u32(out, std::bit_cast<uint32_t>(static_cast<float>(v)));
  if (!out) throw FormatError(FormatError::Kind::Io, "write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw FormatError(FormatError::Kind::Io, "cannot open for read: " + path);
  char magic[4];
  if (!in.read(magic, 4))
    throw FormatError(FormatError::Kind::Truncated, "truncated checkpoint");
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError(FormatError::Kind::BadMagic,
                      "bad magic, expected VTKM, got " + std::string(magic, 4));
  uint32_t version = get_u32(in, "version");
  if (version != kVersion)
    throw FormatError(FormatError::Kind::UnsupportedVersion,
                      "unsupported checkpoint version " +
                          std::to_string(version));
  Checkpoint ckpt;
  ckpt.kind = static_cast<ModelKind>(get_u32(in, "kind"));
  uint32_t n_hparams = get_u32(in, "hparam count");
  for (uint32_t i = 0; i < n_hparams; ++i) {
    uint32_t len = get_u32(in, "hparam name length");
    std::string name(len, '\0');
    if (!in.read(name.data(), len))
      throw FormatError(FormatError::Kind::Truncated,
                        "truncated checkpoint at hparam name");
    ckpt.hparams[name] = std::bit_cast<double>(get_u64(in, "hparam value"));
  }
  uint64_t total = get_u64(in, "param count");
  ckpt.blob.resize(total);
  for (uint64_t i = 0; i < total; ++i)
    ckpt.blob[i] = std::bit_cast<float>(get_u32(in, "param blob"));
  return ckpt;
}

void restore_params(const Checkpoint& ckpt,
                    const std::vector<TensorPtr>& params) {
  size_t total = 0;
  for (const auto& p : params) total += p->value.size();
  if (total != ckpt.blob.size())
    throw FormatError(FormatError::Kind::BadValue,
                      "checkpoint parameter count " +
                          std::to_string(ckpt.blob.size()) +
                          " does not match model size " +
                          std::to_string(total));
  size_t i = 0;
  for (const auto& p : params)
    for (double& v : p->value) v = static_cast<double>(ckpt.blob[i++]);
}

}  // namespace vectok::nn
