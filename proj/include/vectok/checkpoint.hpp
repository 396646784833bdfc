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

#ifndef VECTOK_CHECKPOINT_HPP_
#define VECTOK_CHECKPOINT_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "vectok/autograd.hpp"

namespace vectok::nn {

// "VTKM" checkpoint: magic, version u32=1, kind u32, hyperparameter entries
// (u32 name length, name bytes, f64 value), u64 parameter count, f32 blob in
// the model's canonical parameter order. Parameters are truncated to f32 on
// save, so save -> load -> save is a bit-exact fixed point.
enum class ModelKind : uint32_t {
  kInverseK = 1,
  kSeqLm = 2,
};

struct Checkpoint {
  ModelKind kind;
  std::map<std::string, double> hparams;
  std::vector<float> blob;
};

void save_checkpoint(const std::string& path, ModelKind kind,
                     const std::map<std::string, double>& hparams,
                     const std::vector<TensorPtr>& params);
Checkpoint load_checkpoint(const std::string& path);

// Copies blob values into the tensors; sizes must match exactly.
void restore_params(const Checkpoint& ckpt,
                    const std::vector<TensorPtr>& params);

}  // namespace vectok::nn

#endif  // VECTOK_CHECKPOINT_HPP_
