// Copyright 2026 The pairdist Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <filesystem>
#include <vector>

#include <nlohmann/json.hpp>

#include "pairdist/models.hpp"
#include "pairdist/tensor_archive.hpp"

namespace pairdist {

struct ArchConfig {
  GeneratorConfig specialist;
  GeneratorConfig generalist;
  DiscriminatorConfig discriminator;

  // Layout equality; seeds are ignored.
  bool same_architecture(const ArchConfig& other) const;
};

nlohmann::json to_json(const ArchConfig& a);
ArchConfig arch_config_from_json(const nlohmann::json& j);
ArchConfig arch_of(const ModelPair& pair);

// Trainer-owned state carried alongside the networks.
struct CheckpointExtras {
  nlohmann::json rng_state = nlohmann::json::object();
  nlohmann::json trainer = nlohmann::json::object();
  std::vector<NamedTensor> tensors;  // optimizer moments etc.
};

struct Checkpoint {
  ModelPair pair;
  CheckpointExtras extras;
};

// File layout:
//   "PDCKPT01" | u64 n | JSON sidecar {format, mode, ema_decay, step,
//   arch_config, rng_state, trainer} | u64 m | tensor archive | u32 crc32
// The sidecar is written with sorted keys, so encoding is deterministic.
std::vector<unsigned char> encode_checkpoint(const ModelPair& pair, const CheckpointExtras& extras = {});
// Throws IntegrityError on a corrupt or truncated file.
Checkpoint decode_checkpoint(std::span<const unsigned char> bytes);

// Writes to a temporary file, then renames.
void save_checkpoint(const ModelPair& pair, const std::filesystem::path& path,
                     const CheckpointExtras& extras = {});
Checkpoint load_checkpoint(const std::filesystem::path& path);
// Also throws ConfigError when the stored architecture differs from `expected`.
Checkpoint load_checkpoint(const std::filesystem::path& path, const ArchConfig& expected);

// Copies the stored specialist weights into `dst` (architectures must match).
void load_specialist_weights(const std::filesystem::path& path, Generator& dst);

}  // namespace pairdist
