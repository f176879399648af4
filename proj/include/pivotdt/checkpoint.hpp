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

// Checkpoint layout: "PIVOTDT1", u64 little-endian header length, JSON header
// {"format_version", "config", "params": [{"name", "shape", "offset"}],
// "dataset_fingerprint", "seed"}, then float32 little-endian parameters.

#ifndef PIVOTDT_CHECKPOINT_HPP_
#define PIVOTDT_CHECKPOINT_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "pivotdt/model.hpp"

namespace pivotdt {

inline constexpr int kCheckpointVersion = 1;

struct LoadedCheckpoint {
  DecisionTransformer<float> model;
  std::string dataset_fingerprint;
  std::uint64_t seed = 0;
};

std::string serialize_checkpoint(const DecisionTransformer<float>& model, const std::string& dataset_fingerprint,
                                 std::uint64_t seed);

// expected_n, when set, must match the stored model dimension.
LoadedCheckpoint parse_checkpoint(const std::string& bytes, std::optional<int> expected_n = std::nullopt);

void save_checkpoint(const std::filesystem::path& path, const DecisionTransformer<float>& model,
                     const std::string& dataset_fingerprint, std::uint64_t seed);
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path, std::optional<int> expected_n = std::nullopt);

}  // namespace pivotdt

#endif  // PIVOTDT_CHECKPOINT_HPP_
