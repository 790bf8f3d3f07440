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

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace pairdist {

enum class ColorSpace { RGB, YCbCr };

std::string to_string(ColorSpace cs);

// H x W x C image with interleaved channels and values in [0, 1].
//
// Constructors and public operations never produce out-of-range values;
// arithmetic done by callers through the mutable accessors is expected to
// finish with clipped() or validate().
class ImageTensor {
 public:
  ImageTensor() = default;
  ImageTensor(int height, int width, int channels, ColorSpace cs = ColorSpace::RGB,
              double fill = 0.0);

  // Takes ownership of interleaved HWC data. Throws InvalidInput on
  // non-finite or out-of-range values.
  static ImageTensor from_data(int height, int width, int channels, std::vector<double> data,
                               ColorSpace cs = ColorSpace::RGB);

  // Same as from_data but clamps to [0, 1] first. Non-finite values still throw.
  static ImageTensor from_data_clipped(int height, int width, int channels,
                                       std::vector<double> data,
                                       ColorSpace cs = ColorSpace::RGB);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  ColorSpace colorspace() const noexcept { return colorspace_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double at(int y, int x, int c) const noexcept {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  double& at(int y, int x, int c) noexcept {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  const std::string& source() const noexcept { return source_; }
  void set_source(std::string id) { source_ = std::move(id); }
  void set_colorspace(ColorSpace cs) noexcept { colorspace_ = cs; }

  bool same_shape(const ImageTensor& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }

  // Single-channel copy of channel c (e.g. the Y plane of a YCbCr image).
  ImageTensor channel(int c) const;
  // Copy of the rectangle [top, top+h) x [left, left+w).
  ImageTensor crop(int top, int left, int h, int w) const;

  ImageTensor clipped() const;
  // Throws InvalidInput if any value is non-finite or outside [0, 1].
  void validate() const;

  bool operator==(const ImageTensor& other) const noexcept {
    return same_shape(other) && colorspace_ == other.colorspace_ && data_ == other.data_;
  }

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  ColorSpace colorspace_ = ColorSpace::RGB;
  std::vector<double> data_;
  std::string source_;
};

// 8-bit quantization used at every I/O boundary: round half up.
unsigned char quantize_u8(double v) noexcept;

// 8-bit RGB PNG. Grayscale and alpha inputs are expanded / dropped to RGB.
ImageTensor read_png(const std::filesystem::path& path);
void write_png(const ImageTensor& img, const std::filesystem::path& path);

// Encodes img (RGB, 3 channels) as PNG bytes in memory; used for bit-exact
// comparisons of synthesized outputs.
std::vector<unsigned char> encode_png(const ImageTensor& img);

// Quantizes to 8 bits and back, matching what a PNG round trip yields.
ImageTensor quantize_8bit(const ImageTensor& img);

}  // namespace pairdist
