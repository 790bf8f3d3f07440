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
#include <vector>

#include "pairdist/image.hpp"

namespace pairdist {

// Deterministic synthetic "natural-ish" RGB image: smooth background,
// overlapping shapes with sharp edges, gratings and fine dot texture,
// rendered at 2x and downsampled for anti-aliasing.
ImageTensor procedural_image(int height, int width, std::uint64_t seed);

// Writes `count` procedural images as img_0000.png, img_0001.png, ... and
// returns their paths.
std::vector<std::filesystem::path> write_procedural_corpus(const std::filesystem::path& dir,
                                                          int count, int height, int width,
                                                          std::uint64_t seed);

}  // namespace pairdist
