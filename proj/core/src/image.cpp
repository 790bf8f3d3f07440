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

#include "pairdist/image.hpp"

#include <algorithm>
#include <cmath>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "pairdist/error.hpp"

namespace pairdist {

std::string to_string(ColorSpace cs) {
  return cs == ColorSpace::RGB ? "RGB" : "YCbCr";
}

ImageTensor::ImageTensor(int height, int width, int channels, ColorSpace cs, double fill)
    : height_(height), width_(width), channels_(channels), colorspace_(cs) {
  if (height <= 0 || width <= 0 || channels <= 0) {
    throw InvalidShape("image dimensions must be positive");
  }
  if (!std::isfinite(fill) || fill < 0.0 || fill > 1.0) {
    throw InvalidInput("fill value outside [0, 1]");
  }
  data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

ImageTensor ImageTensor::from_data(int height, int width, int channels, std::vector<double> data,
                                   ColorSpace cs) {
  ImageTensor img(height, width, channels, cs);
  if (data.size() != img.data_.size()) {
    throw InvalidShape("data length " + std::to_string(data.size()) + " does not match " +
                       std::to_string(height) + "x" + std::to_string(width) + "x" +
                       std::to_string(channels));
  }
  img.data_ = std::move(data);
  img.validate();
  return img;
}

ImageTensor ImageTensor::from_data_clipped(int height, int width, int channels,
                                           std::vector<double> data, ColorSpace cs) {
  for (double& v : data) {
    if (!std::isfinite(v)) throw InvalidInput("non-finite pixel value");
    v = std::clamp(v, 0.0, 1.0);
  }
  return from_data(height, width, channels, std::move(data), cs);
}

ImageTensor ImageTensor::channel(int c) const {
  if (c < 0 || c >= channels_) throw InvalidInput("channel index out of range");
  ImageTensor out(height_, width_, 1, colorspace_);
  for (int y = 0; y < height_; ++y)
    for (int x = 0; x < width_; ++x) out.at(y, x, 0) = at(y, x, c);
  out.source_ = source_;
  return out;
}

ImageTensor ImageTensor::crop(int top, int left, int h, int w) const {
  if (top < 0 || left < 0 || h <= 0 || w <= 0 || top + h > height_ || left + w > width_) {
    throw InvalidShape("crop rectangle outside image");
  }
  ImageTensor out(h, w, channels_, colorspace_);
  for (int y = 0; y < h; ++y) {
    const double* src = &data_[(static_cast<std::size_t>(top + y) * width_ + left) * channels_];
    std::copy(src, src + static_cast<std::size_t>(w) * channels_, &out.at(y, 0, 0));
  }
  out.source_ = source_;
  return out;
}

ImageTensor ImageTensor::clipped() const {
  ImageTensor out = *this;
  for (double& v : out.data_) {
    if (!std::isfinite(v)) throw InvalidInput("non-finite pixel value");
    v = std::clamp(v, 0.0, 1.0);
  }
  return out;
}

void ImageTensor::validate() const {
  for (double v : data_) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      throw InvalidInput("pixel value outside [0, 1] or non-finite");
    }
  }
}

unsigned char quantize_u8(double v) noexcept {
  const double scaled = std::floor(std::clamp(v, 0.0, 1.0) * 255.0 + 0.5);
  return static_cast<unsigned char>(std::clamp(scaled, 0.0, 255.0));
}

namespace {

cv::Mat to_bgr8(const ImageTensor& img) {
  if (img.channels() != 3 || img.colorspace() != ColorSpace::RGB) {
    throw InvalidInput("PNG output requires a 3-channel RGB image");
  }
  cv::Mat mat(img.height(), img.width(), CV_8UC3);
  for (int y = 0; y < img.height(); ++y) {
    auto* row = mat.ptr<cv::Vec3b>(y);
    for (int x = 0; x < img.width(); ++x) {
      row[x] = cv::Vec3b(quantize_u8(img.at(y, x, 2)), quantize_u8(img.at(y, x, 1)),
                         quantize_u8(img.at(y, x, 0)));
    }
  }
  return mat;
}

}  // namespace

ImageTensor read_png(const std::filesystem::path& path) {
  cv::Mat mat = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (mat.empty()) throw IoError("cannot read image " + path.string());
  if (mat.depth() != CV_8U) throw IoError("only 8-bit images are supported: " + path.string());
  ImageTensor img(mat.rows, mat.cols, 3);
  for (int y = 0; y < mat.rows; ++y) {
    const auto* row = mat.ptr<cv::Vec3b>(y);
    for (int x = 0; x < mat.cols; ++x) {
      img.at(y, x, 0) = row[x][2] / 255.0;
      img.at(y, x, 1) = row[x][1] / 255.0;
      img.at(y, x, 2) = row[x][0] / 255.0;
    }
  }
  img.set_source(path.filename().string());
  return img;
}

std::vector<unsigned char> encode_png(const ImageTensor& img) {
  std::vector<unsigned char> buf;
  if (!cv::imencode(".png", to_bgr8(img), buf)) throw IoError("PNG encoding failed");
  return buf;
}

void write_png(const ImageTensor& img, const std::filesystem::path& path) {
  if (!cv::imwrite(path.string(), to_bgr8(img))) {
    throw IoError("cannot write image " + path.string());
  }
}

ImageTensor quantize_8bit(const ImageTensor& img) {
  ImageTensor out = img;
  for (double& v : out.data()) v = quantize_u8(v) / 255.0;
  return out;
}

}  // namespace pairdist
