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


#include <filesystem>
#include <sstream>

#include "doctest.h"
#include "pivotdt/config.hpp"
#include "pivotdt/errors.hpp"
#include "pivotdt/io.hpp"

using namespace pivotdt;

namespace {

MatrixDataset small_dataset() {
  MatrixDataset ds = generate_matrices(3, 6, {}, 0.5, 4);
  MctsConfig mcts;
  mcts.playouts = 300;
  generate_pools(ds, mcts, {}, 4, 4, 1);
  return ds;
}

}  // namespace

TEST_CASE("matrices round trip exactly") {
  const MatrixDataset ds = small_dataset();
  std::stringstream ss;
  write_matrices_jsonl(ss, ds);
  const MatrixDataset back = read_matrices_jsonl(ss);
  REQUIRE(back.matrices.size() == ds.matrices.size());
  for (std::size_t i = 0; i < ds.matrices.size(); ++i) {
    CHECK(back.matrices[i].id == ds.matrices[i].id);
    CHECK(back.matrices[i].split == ds.matrices[i].split);
    CHECK(back.matrices[i].matrix == ds.matrices[i].matrix);
  }
  std::stringstream again;
  write_matrices_jsonl(again, back);
  std::stringstream first;
  write_matrices_jsonl(first, ds);
  CHECK(again.str() == first.str());
}

TEST_CASE("sequences round trip") {
  const MatrixDataset ds = small_dataset();
  std::stringstream ss;
  write_sequences_jsonl(ss, ds);
  MatrixDataset back = ds;
  back.pools.clear();
  read_sequences_jsonl(ss, back, {});
  REQUIRE(back.pools.size() == ds.pools.size());
  for (const auto& [id, pool] : ds.pools) {
    const auto& other = back.pools.at(id);
    REQUIRE(other.sequences.size() == pool.sequences.size());
    CHECK(other.optimal_index == pool.optimal_index);
    for (std::size_t s = 0; s < pool.sequences.size(); ++s) {
      CHECK(other.sequences[s].pivots == pool.sequences[s].pivots);
      CHECK(other.sequences[s].total_return == pool.sequences[s].total_return);
    }
  }
  CHECK(dataset_fingerprint(ds) == dataset_fingerprint(back));
  CHECK(dataset_fingerprint(ds).size() == 16);
}

TEST_CASE("non-terminating sequences are rejected") {
  MatrixDataset ds = small_dataset();
  std::stringstream ss("{\"matrix_id\":0,\"pivots\":[0],\"rank\":0,\"optimal\":true}\n");
  CHECK_THROWS_AS(read_sequences_jsonl(ss, ds, {}), ValidationError);
}

TEST_CASE("malformed lines name the line") {
  std::stringstream ss("{\"id\":0,\"n\":2,\"values\":[1,0,0,1],\"split\":\"train\"}\nnot json\n");
  try {
    read_matrices_jsonl(ss);
    FAIL("expected an error");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("episodes round trip") {
  EpisodeRecord r{3, "dt", {2, true, {PivotIndex{1}, PivotIndex{0}}, 0.0}};
  std::stringstream ss;
  write_episodes_jsonl(ss, {r});
  const auto back = read_episodes_jsonl(ss);
  REQUIRE(back.size() == 1);
  CHECK(back[0].matrix_id == 3);
  CHECK(back[0].solver == "dt");
  CHECK(back[0].result.steps == 2);
  CHECK(back[0].result.pivot_sequence == r.result.pivot_sequence);
}

TEST_CASE("file helpers report the path") {
  const auto dir = std::filesystem::temp_directory_path() / "pivotdt_io_test";
  std::filesystem::create_directories(dir);
  write_file(dir / "x.txt", "hello");
  CHECK(read_file(dir / "x.txt") == "hello");
  try {
    read_file(dir / "missing.txt");
    FAIL("expected an error");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("missing.txt") != std::string::npos);
  }
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("experiment config round trip") {
  ExperimentConfig c;
  c.dataset.n = 4;
  c.model.n = 4;
  c.dataset.dist.kind = MatrixDistribution::Kind::kGaussian;
  c.dataset.mcts.rollout = MctsConfig::Rollout::kMaxElementMix;
  c.model.state_features = DTConfig::StateFeatures::kScaled;
  c.model.optimizer = DTConfig::Optimizer::kSgd;
  c.reward.max_steps = 44;
  c.train.epsilon_train = 0.25;
  c.infer.target_return = 3.5;
  const std::string text = config_to_json(c);
  const ExperimentConfig back = config_from_json(text);
  CHECK(config_to_json(back) == text);
  CHECK(back.model == c.model);
  CHECK(back.reward.max_steps == 44);
  CHECK(back.infer.target_return == 3.5);
  CHECK(dt_config_from_json(dt_config_to_json(c.model)) == c.model);
}

TEST_CASE("config errors name the field") {
  const auto message = [](const std::string& text) {
    try {
      config_from_json(text);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message(R"({"model": {"n_layers": 3}})").find("model.n_layers") != std::string::npos);
  CHECK(message(R"({"nonsense": {}})").find("nonsense") != std::string::npos);
  CHECK(message(R"({"model": {"state_features": "raw"}})").find("raw") != std::string::npos);
  CHECK(message(R"({"model": {"n": 3}, "dataset": {"n": 3}})").empty());
}
