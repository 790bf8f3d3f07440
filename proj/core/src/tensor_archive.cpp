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

#include "pairdist/tensor_archive.hpp"

#include <cstring>
#include <fstream>
#include <iterator>

#include <zlib.h>

#include "pairdist/error.hpp"

namespace pairdist {

namespace {

constexpr char kMagic[8] = {'P', 'D', 'T', 'A', '0', '0', '0', '1'};

template <typename T>
void put(std::vector<unsigned char>& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.insert(out.end(), buf, buf + sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::span<const unsigned char> bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    T v;
    need(sizeof(T));
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::span<const unsigned char> take(std::size_t n) {
    need(n);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw IntegrityError("tensor archive truncated");
  }
  std::span<const unsigned char> bytes_;
  std::size_t pos_ = 0;
};

std::uint8_t dtype_code(torch::Dtype d) {
  if (d == torch::kFloat32) return 0;
  if (d == torch::kFloat64) return 1;
  if (d == torch::kInt64) return 2;
  if (d == torch::kUInt8) return 3;
  throw InvalidInput("unsupported tensor dtype for archive");
}

torch::Dtype dtype_from(std::uint8_t code) {
  switch (code) {
    case 0: return torch::kFloat32;
    case 1: return torch::kFloat64;
    case 2: return torch::kInt64;
    case 3: return torch::kUInt8;
  }
  throw IntegrityError("unknown dtype code in tensor archive");
}

}  // namespace

std::uint32_t crc32_of(std::span<const unsigned char> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large buffers in chunks.
  std::size_t off = 0;
  while (off < bytes.size()) {
    const std::size_t n = std::min<std::size_t>(bytes.size() - off, 1u << 30);
    crc = crc32(crc, bytes.data() + off, static_cast<uInt>(n));
    off += n;
  }
  return static_cast<std::uint32_t>(crc);
}

std::vector<unsigned char> encode_tensor_archive(std::span<const NamedTensor> tensors) {
  std::vector<unsigned char> out(kMagic, kMagic + sizeof(kMagic));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& nt : tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(nt.name.size()));
    out.insert(out.end(), nt.name.begin(), nt.name.end());
    const torch::Tensor t = nt.tensor.detach().contiguous();
    put<std::uint8_t>(out, dtype_code(t.scalar_type()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.dim()));
    for (auto d : t.sizes()) put<std::int64_t>(out, d);
    const auto* p = static_cast<const unsigned char*>(t.data_ptr());
    out.insert(out.end(), p, p + t.numel() * t.element_size());
  }
  put<std::uint32_t>(out, crc32_of(out));
  return out;
}

std::vector<NamedTensor> decode_tensor_archive(std::span<const unsigned char> bytes) {
  if (bytes.size() < sizeof(kMagic) + 8 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw IntegrityError("not a tensor archive");
  }
  const std::size_t body = bytes.size() - 4;
  std::uint32_t stored;
  std::memcpy(&stored, bytes.data() + body, 4);
  if (crc32_of(bytes.first(body)) != stored) throw IntegrityError("tensor archive checksum mismatch");

  Reader r(bytes.first(body));
  r.take(sizeof(kMagic));
  const auto count = r.get<std::uint32_t>();
  std::vector<NamedTensor> out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = r.get<std::uint32_t>();
    auto name_bytes = r.take(name_len);
    NamedTensor nt;
    nt.name.assign(name_bytes.begin(), name_bytes.end());
    const torch::Dtype dtype = dtype_from(r.get<std::uint8_t>());
    const auto ndim = r.get<std::uint32_t>();
    std::vector<std::int64_t> dims(ndim);
    for (auto& d : dims) {
      d = r.get<std::int64_t>();
      if (d < 0) throw IntegrityError("negative tensor dimension");
    }
    nt.tensor = torch::empty(dims, torch::TensorOptions().dtype(dtype));
    const std::size_t nbytes = nt.tensor.numel() * nt.tensor.element_size();
    auto data = r.take(nbytes);
    if (nbytes > 0) std::memcpy(nt.tensor.data_ptr(), data.data(), nbytes);
    out.push_back(std::move(nt));
  }
  if (r.pos() != body) throw IntegrityError("trailing bytes in tensor archive");
  return out;
}

std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const unsigned char> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

void write_tensor_archive(const std::filesystem::path& path, std::span<const NamedTensor> tensors) {
  write_file_bytes(path, encode_tensor_archive(tensors));
}

std::vector<NamedTensor> read_tensor_archive(const std::filesystem::path& path) {
  return decode_tensor_archive(read_file_bytes(path));
}

}  // namespace pairdist
