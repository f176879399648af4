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

#include "pivotdt/io.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"

namespace pivotdt {

using nlohmann::json;

namespace {

json parse_line(const std::string& line, int lineno, const char* what) {
  try {
    return json::parse(line);
  } catch (const json::exception& e) {
    throw FormatError(std::string(what) + " line " + std::to_string(lineno) + ": " + e.what());
  }
}

template <typename F>
void for_each_line(std::istream& in, const char* what, F&& f) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const json j = parse_line(line, lineno, what);
    try {
      f(j);
    } catch (const json::exception& e) {
      throw FormatError(std::string(what) + " line " + std::to_string(lineno) + ": " + e.what());
    }
  }
}

std::vector<int> to_ints(const PivotSequence& seq) {
  std::vector<int> out;
  out.reserve(seq.size());
  for (auto k : seq) out.push_back(k.value);
  return out;
}

PivotSequence to_pivots(const std::vector<int>& v) {
  PivotSequence out;
  out.reserve(v.size());
  for (int k : v) out.push_back(PivotIndex{k});
  return out;
}

}  // namespace

void write_matrices_jsonl(std::ostream& out, const MatrixDataset& ds) {
  for (const auto& e : ds.matrices) {
    json j;
    j["id"] = e.id;
    j["n"] = e.matrix.dim();
    j["values"] = std::vector<double>(e.matrix.values().begin(), e.matrix.values().end());
    j["split"] = to_string(e.split);
    out << j.dump() << '\n';
  }
}

MatrixDataset read_matrices_jsonl(std::istream& in) {
  MatrixDataset ds;
  for_each_line(in, "matrices.jsonl", [&](const json& j) {
    const int n = j.at("n").get<int>();
    auto values = j.at("values").get<std::vector<double>>();
    ds.matrices.push_back(
        {j.at("id").get<int>(), SymMatrix::from_values(n, std::move(values)), split_from_string(j.at("split"))});
  });
  return ds;
}

void write_sequences_jsonl(std::ostream& out, const MatrixDataset& ds) {
  for (const auto& [id, pool] : ds.pools) {
    for (std::size_t i = 0; i < pool.sequences.size(); ++i) {
      const auto& s = pool.sequences[i];
      json j;
      j["matrix_id"] = id;
      j["pivots"] = to_ints(s.pivots);
      j["rank"] = s.rank;
      j["optimal"] = static_cast<int>(i) == pool.optimal_index;
      out << j.dump() << '\n';
    }
  }
}

void read_sequences_jsonl(std::istream& in, MatrixDataset& ds, const RewardConfig& cfg) {
  std::map<int, SequencePool> pools;
  for_each_line(in, "sequences.jsonl", [&](const json& j) {
    const int id = j.at("matrix_id").get<int>();
    auto& pool = pools[id];
    pool.matrix_id = id;
    RankedSequence s;
    s.pivots = to_pivots(j.at("pivots").get<std::vector<int>>());
    s.rank = j.at("rank").get<int>();
    const auto traj = rollout_with_sequence(ds.by_id(id).matrix, s.pivots, cfg);
    if (!traj.terminated || traj.length() != s.length()) {
      throw ValidationError("sequence of matrix " + std::to_string(id) + " does not diagonalize it");
    }
    s.terminated = true;
    s.total_return = traj.total_return;
    pool.sequences.push_back(std::move(s));
  });
  for (auto& [id, pool] : pools) rank_pool(pool);
  ds.pools = std::move(pools);
}

std::string episode_to_json_line(const EpisodeRecord& rec) {
  json j;
  j["matrix_id"] = rec.matrix_id;
  j["solver"] = rec.solver;
  j["pivots"] = to_ints(rec.result.pivot_sequence);
  j["steps"] = rec.result.steps;
  j["terminated"] = rec.result.terminated;
  return j.dump();
}

void write_episodes_jsonl(std::ostream& out, const std::vector<EpisodeRecord>& recs) {
  for (const auto& r : recs) out << episode_to_json_line(r) << '\n';
}

std::vector<EpisodeRecord> read_episodes_jsonl(std::istream& in) {
  std::vector<EpisodeRecord> out;
  for_each_line(in, "episodes.jsonl", [&](const json& j) {
    EpisodeRecord r;
    r.matrix_id = j.at("matrix_id").get<int>();
    r.solver = j.at("solver").get<std::string>();
    r.result.pivot_sequence = to_pivots(j.at("pivots").get<std::vector<int>>());
    r.result.steps = j.at("steps").get<int>();
    r.result.terminated = j.at("terminated").get<bool>();
    out.push_back(std::move(r));
  });
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << contents;
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

std::uint64_t fnv1a64(const std::string& data, std::uint64_t h) {
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string dataset_fingerprint(const MatrixDataset& ds) {
  std::ostringstream m, s;
  write_matrices_jsonl(m, ds);
  write_sequences_jsonl(s, ds);
  std::ostringstream hex;
  hex << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(s.str(), fnv1a64(m.str()));
  return hex.str();
}

}  // namespace pivotdt
