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

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <torch/torch.h>

namespace pairdist {

struct NamedTensor {
  std::string name;
  torch::Tensor tensor;
};

// Portable little-endian tensor archive:
//   "PDTA0001" | u32 count | { u32 name_len | name | u8 dtype | u32 ndim |
//   i64 dims[ndim] | raw data }* | u32 crc32(all preceding bytes)
// Supported dtypes: float32, float64, int64, uint8.
std::vector<unsigned char> encode_tensor_archive(std::span<const NamedTensor> tensors);
// Throws IntegrityError on bad magic, truncation or checksum mismatch.
std::vector<NamedTensor> decode_tensor_archive(std::span<const unsigned char> bytes);

void write_tensor_archive(const std::filesystem::path& path, std::span<const NamedTensor> tensors);
std::vector<NamedTensor> read_tensor_archive(const std::filesystem::path& path);

std::uint32_t crc32_of(std::span<const unsigned char> bytes);

std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const unsigned char> bytes);

}  // namespace pairdist
