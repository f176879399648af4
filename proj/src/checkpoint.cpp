// Copyright 2026 The pivotdt Authors.
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

#include "pivotdt/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "json.hpp"
#include "pivotdt/config.hpp"
#include "pivotdt/errors.hpp"
#include "pivotdt/io.hpp"

namespace pivotdt {

namespace {

constexpr char kMagic[8] = {'P', 'I', 'V', 'O', 'T', 'D', 'T', '1'};

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const std::string& in, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

}  // namespace

std::string serialize_checkpoint(const DecisionTransformer<float>& model, const std::string& dataset_fingerprint,
                                 std::uint64_t seed) {
  nlohmann::ordered_json header;
  header["format_version"] = kCheckpointVersion;
  header["config"] = nlohmann::ordered_json::parse(dt_config_to_json(model.config()));
  auto manifest = nlohmann::ordered_json::array();
  for (const auto& p : model.layout().params()) {
    manifest.push_back({{"name", p.name}, {"shape", {p.rows, p.cols}}, {"offset", p.offset}});
  }
  header["params"] = manifest;
  header["dataset_fingerprint"] = dataset_fingerprint;
  header["seed"] = seed;
  const std::string h = header.dump();

  std::string out(kMagic, sizeof kMagic);
  put_u64(out, h.size());
  out += h;
  out.reserve(out.size() + 4 * model.params().size());
  for (float f : model.params()) {
    const auto bits = std::bit_cast<std::uint32_t>(f);
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
  }
  return out;
}

LoadedCheckpoint parse_checkpoint(const std::string& bytes, std::optional<int> expected_n) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw FormatError("checkpoint: bad magic bytes");
  }
  const std::uint64_t hlen = get_u64(bytes, 8);
  if (hlen > bytes.size() - 16) throw FormatError("checkpoint: header length exceeds file size");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(16, hlen));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: header is not valid JSON: ") + e.what());
  }
  const auto field = [&](const char* name) -> const nlohmann::json& {
    if (!header.contains(name)) throw FormatError(std::string("checkpoint: missing field ") + name);
    return header.at(name);
  };
  if (field("format_version") != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported format_version " + field("format_version").dump());
  }
  DTConfig cfg;
  try {
    cfg = dt_config_from_json(field("config").dump());
    cfg.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint: config: ") + e.what());
  }
  if (expected_n && cfg.n != *expected_n) {
    throw FormatError("checkpoint: config.n is " + std::to_string(cfg.n) + " but " + std::to_string(*expected_n) +
                      " was expected");
  }

  LoadedCheckpoint ck{DecisionTransformer<float>(cfg), {}, 0};
  const auto& layout = ck.model.layout().params();
  const auto& manifest = field("params");
  if (!manifest.is_array() || manifest.size() != layout.size()) {
    throw FormatError("checkpoint: params manifest has the wrong number of tensors");
  }
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto& m = manifest[i];
    const auto& p = layout[i];
    if (!m.is_object() || m.value("name", "") != p.name) {
      throw FormatError("checkpoint: params[" + std::to_string(i) + "].name does not match " + p.name);
    }
    if (m.value("shape", nlohmann::json()) != nlohmann::json{p.rows, p.cols}) {
      throw FormatError("checkpoint: params." + p.name + ".shape mismatch");
    }
    if (m.value("offset", std::uint64_t{~0ULL}) != p.offset) {
      throw FormatError("checkpoint: params." + p.name + ".offset mismatch");
    }
  }
  const std::size_t total = ck.model.layout().total();
  if (bytes.size() - 16 - hlen != 4 * total) {
    throw FormatError("checkpoint: expected " + std::to_string(total) + " float32 values in the payload");
  }
  try {
    ck.dataset_fingerprint = field("dataset_fingerprint").get<std::string>();
    ck.seed = field("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception&) {
    throw FormatError("checkpoint: dataset_fingerprint or seed has the wrong type");
  }
  auto& params = ck.model.params();
  const std::size_t base = 16 + hlen;
  for (std::size_t i = 0; i < total; ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) {
      bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[base + 4 * i + b])) << (8 * b);
    }
    params[i] = std::bit_cast<float>(bits);
  }
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const DecisionTransformer<float>& model,
                     const std::string& dataset_fingerprint, std::uint64_t seed) {
  write_file(path, serialize_checkpoint(model, dataset_fingerprint, seed));
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path, std::optional<int> expected_n) {
  try {
    return parse_checkpoint(read_file(path), expected_n);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace pivotdt
