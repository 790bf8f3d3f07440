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

#include "pairdist/image.hpp"

namespace pairdist {

// BT.601 full-range conversion. Cb/Cr are offset by 0.5 so all three
// channels stay in [0, 1].
ImageTensor rgb_to_ycbcr(const ImageTensor& rgb);
ImageTensor ycbcr_to_rgb(const ImageTensor& ycc);

// Y plane (C = 1) of an RGB image, or channel 0 of a YCbCr image.
ImageTensor luma(const ImageTensor& img);

}  // namespace pairdist
