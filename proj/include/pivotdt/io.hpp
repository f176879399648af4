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

#ifndef PIVOTDT_IO_HPP_
#define PIVOTDT_IO_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "pivotdt/baselines.hpp"
#include "pivotdt/datagen.hpp"

namespace pivotdt {

// matrices.jsonl: {"id", "n", "values": [row-major], "split"} per line.
void write_matrices_jsonl(std::ostream& out, const MatrixDataset& ds);
MatrixDataset read_matrices_jsonl(std::istream& in);

// sequences.jsonl: {"matrix_id", "pivots", "rank", "optimal"} per line,
// pools in matrix-id order, sequences in rank order.
void write_sequences_jsonl(std::ostream& out, const MatrixDataset& ds);

// Attaches pools read from sequences.jsonl. Every sequence is replayed on its
// matrix to recover the return and to check that it terminates.
void read_sequences_jsonl(std::istream& in, MatrixDataset& ds, const RewardConfig& cfg);

// Per-episode record used by the analysis tools:
// {"matrix_id", "solver", "pivots", "steps", "terminated"}.
struct EpisodeRecord {
  int matrix_id = 0;
  std::string solver;
  EpisodeResult result;
};

std::string episode_to_json_line(const EpisodeRecord& rec);
void write_episodes_jsonl(std::ostream& out, const std::vector<EpisodeRecord>& recs);
std::vector<EpisodeRecord> read_episodes_jsonl(std::istream& in);

// File helpers that surface the path in errors.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& contents);

// 64-bit FNV-1a, used to fingerprint datasets.
std::uint64_t fnv1a64(const std::string& data, std::uint64_t h = 0xcbf29ce484222325ULL);
std::string dataset_fingerprint(const MatrixDataset& ds);

}  // namespace pivotdt

#endif  // PIVOTDT_IO_HPP_
