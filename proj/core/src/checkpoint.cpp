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

#include "pairdist/checkpoint.hpp"

#include <cstring>
#include <string_view>

#include "pairdist/error.hpp"

namespace pairdist {

namespace {

constexpr std::string_view kMagic = "PDCKPT01";
constexpr int kFormat = 1;

void put_u64(std::vector<unsigned char>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

std::uint64_t get_u64(std::span<const unsigned char> bytes, std::size_t& pos) {
  if (pos + 8 > bytes.size()) throw IntegrityError("checkpoint truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t{bytes[pos + i]} << (8 * i);
  pos += 8;
  return v;
}

void append_prefixed(std::vector<NamedTensor>& out, const std::string& prefix,
                     const std::vector<NamedTensor>& src) {
  for (const auto& t : src) out.push_back({prefix + t.name, t.tensor.detach()});
}

std::vector<NamedTensor> take_prefixed(const std::vector<NamedTensor>& all, const std::string& prefix) {
  std::vector<NamedTensor> out;
  for (const auto& t : all) {
    if (t.name.starts_with(prefix)) out.push_back({t.name.substr(prefix.size()), t.tensor});
  }
  return out;
}

void restore(std::vector<NamedTensor> dst, const std::vector<NamedTensor>& src, const char* what) {
  try {
    copy_named_tensors(dst, src);
  } catch (const IntegrityError& e) {
    throw IntegrityError(std::string(what) + ": " + e.what());
  }
}

}  // namespace

bool ArchConfig::same_architecture(const ArchConfig& o) const {
  return specialist.same_architecture(o.specialist) && generalist.same_architecture(o.generalist) &&
         discriminator.num_feat == o.discriminator.num_feat &&
         discriminator.spectral_norm == o.discriminator.spectral_norm;
}

nlohmann::json to_json(const ArchConfig& a) {
  return {{"specialist", to_json(a.specialist)},
          {"generalist", to_json(a.generalist)},
          {"discriminator", to_json(a.discriminator)}};
}

ArchConfig arch_config_from_json(const nlohmann::json& j) {
  try {
    return {generator_config_from_json(j.at("specialist")), generator_config_from_json(j.at("generalist")),
            discriminator_config_from_json(j.at("discriminator"))};
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed arch_config: ") + e.what());
  }
}

ArchConfig arch_of(const ModelPair& pair) {
  return {pair.specialist->config(), pair.generalist->config(), pair.discriminator->config()};
}

std::vector<unsigned char> encode_checkpoint(const ModelPair& pair, const CheckpointExtras& extras) {
  const nlohmann::json sidecar{{"format", kFormat},
                               {"mode", to_string(pair.mode)},
                               {"ema_decay", pair.ema_decay},
                               {"step", pair.step},
                               {"arch_config", to_json(arch_of(pair))},
                               {"rng_state", extras.rng_state},
                               {"trainer", extras.trainer}};
  std::vector<NamedTensor> tensors;
  append_prefixed(tensors, "specialist/", pair.specialist->named_tensors());
  append_prefixed(tensors, "generalist/", pair.generalist->named_tensors());
  append_prefixed(tensors, "discriminator/", pair.discriminator->named_tensors());
  append_prefixed(tensors, "extra/", extras.tensors);

  const std::string text = sidecar.dump();
  const auto archive = encode_tensor_archive(tensors);
  std::vector<unsigned char> out(kMagic.begin(), kMagic.end());
  put_u64(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  put_u64(out, archive.size());
  out.insert(out.end(), archive.begin(), archive.end());
  const std::uint32_t crc = crc32_of(out);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(crc >> (8 * i)));
  return out;
}

Checkpoint decode_checkpoint(std::span<const unsigned char> bytes) {
  if (bytes.size() < kMagic.size() + 20 ||
      std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
    throw IntegrityError("not a checkpoint (bad magic)");
  }
  const std::size_t body = bytes.size() - 4;
  std::uint32_t stored = 0;
  for (int i = 0; i < 4; ++i) stored |= std::uint32_t{bytes[body + i]} << (8 * i);
  if (crc32_of(bytes.first(body)) != stored) throw IntegrityError("checkpoint checksum mismatch");

  std::size_t pos = kMagic.size();
  const std::uint64_t n = get_u64(bytes, pos);
  if (pos + n > body) throw IntegrityError("checkpoint truncated");
  nlohmann::json sidecar;
  try {
    sidecar = nlohmann::json::parse(bytes.begin() + pos, bytes.begin() + pos + n);
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(std::string("checkpoint sidecar unreadable: ") + e.what());
  }
  pos += n;
  const std::uint64_t m = get_u64(bytes, pos);
  if (pos + m != body) throw IntegrityError("checkpoint archive length mismatch");
  const auto tensors = decode_tensor_archive(bytes.subspan(pos, m));

  Checkpoint ck;
  try {
    if (sidecar.at("format").get<int>() != kFormat) throw IntegrityError("unsupported checkpoint format");
    const ArchConfig arch = arch_config_from_json(sidecar.at("arch_config"));
    ck.pair = make_model_pair(mode_from_string(sidecar.at("mode").get<std::string>()), arch.specialist,
                              arch.generalist, arch.discriminator, sidecar.at("ema_decay").get<double>());
    ck.pair.step = sidecar.at("step").get<std::int64_t>();
    ck.extras.rng_state = sidecar.at("rng_state");
    ck.extras.trainer = sidecar.at("trainer");
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(std::string("checkpoint sidecar malformed: ") + e.what());
  }
  restore(ck.pair.specialist->named_tensors(), take_prefixed(tensors, "specialist/"), "specialist");
  restore(ck.pair.generalist->named_tensors(), take_prefixed(tensors, "generalist/"), "generalist");
  restore(ck.pair.discriminator->named_tensors(), take_prefixed(tensors, "discriminator/"), "discriminator");
  ck.extras.tensors = take_prefixed(tensors, "extra/");
  return ck;
}

void save_checkpoint(const ModelPair& pair, const std::filesystem::path& path, const CheckpointExtras& extras) {
  const auto bytes = encode_checkpoint(pair, extras);
  auto tmp = path;
  tmp += ".tmp";
  write_file_bytes(tmp, bytes);
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place at " + path.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return decode_checkpoint(bytes);
  } catch (const IntegrityError& e) {
    throw IntegrityError(path.string() + ": " + e.what());
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const ArchConfig& expected) {
  Checkpoint ck = load_checkpoint(path);
  if (!arch_of(ck.pair).same_architecture(expected)) {
    throw ConfigError(path.string() + ": stored architecture " + to_json(arch_of(ck.pair)).dump() +
                      " does not match the configured one");
  }
  return ck;
}

void load_specialist_weights(const std::filesystem::path& path, Generator& dst) {
  const Checkpoint ck = load_checkpoint(path);
  if (!ck.pair.specialist->config().same_architecture(dst->config())) {
    throw ConfigError(path.string() + ": stored specialist architecture differs from the configured one");
  }
  copy_generator(ck.pair.specialist, dst);
}

}  // namespace pairdist
