// Copyright 2026 The refgame Authors.
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

#ifndef REFGAME_RUN_CONFIG_H_
#define REFGAME_RUN_CONFIG_H_

// Run configuration (JSON) and the runner that turns one configuration into
// a self-describing output directory.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "refgame/agent.h"
#include "refgame/data.h"
#include "refgame/game.h"
#include "refgame/oracle.h"
#include "refgame/training.h"

namespace refgame::run {

struct DatasetSpec {
  // shapes | concepts-synth | concepts (XML corpus) | file (dataset text)
  std::string kind = "shapes";
  std::uint64_t seed = 1;
  std::string path;
  int n_categories = 20;
  int n_items = data::kConceptsItems;
};

struct RunConfig {
  DatasetSpec dataset;
  nn::Architecture architecture = nn::Architecture::kTransformer;
  train::Regime regime = train::Regime::kOracle;
  train::Role role = train::Role::kListener;
  train::LossConfig loss;
  train::TrainSchedule schedule;
  game::GameConfig game;
  int model_dim = 64;
  int dialogs = 20;  // transcript rounds written per evaluated role
  std::uint64_t seed = 1;
  std::string out = "runs/run";
};

// Missing keys keep their defaults; unknown or ill-typed keys and values
// outside their domain raise game::ConfigError naming every offending key.
// Game vocabulary and message length default from the dataset kind.
RunConfig ParseRunConfig(const nlohmann::json& j);
RunConfig LoadRunConfig(const std::filesystem::path& path);
nlohmann::json ToJson(const RunConfig& cfg);

data::Dataset BuildDataset(const DatasetSpec& spec);

// Oracle for a dataset: the diagonal lexicon for Shapes, the rational
// speaker for everything else.
struct OracleBundle {
  std::unique_ptr<oracle::ShapesOracle> shapes;
  std::unique_ptr<oracle::RsaOracle> rsa;
  std::unique_ptr<oracle::RsaAgent> rsa_agent;

  game::Speaker& speaker();
  game::Listener& listener();
  eval::WordGloss Gloss(const data::Dataset& ds) const;
};
OracleBundle BuildOracle(const data::Dataset& ds, const game::GameConfig& game);

// Output root: $REFGAME_OUT when set, joined with cfg.out unless cfg.out is
// absolute.
std::filesystem::path ResolveOut(const std::string& out);

struct RunResult {
  train::RunRecord record;
  std::filesystem::path dir;
  // Trained agents; two for the emergent regime (speaker side first).
  std::vector<std::unique_ptr<nn::Agent>> agents;
};

// Trains per the config and writes config.json, metrics.tsv, summary.txt,
// checkpoints, lexicon CSV/PGM, message correlation and dialog transcripts.
// `progress` (optional) receives one line per epoch.
RunResult RunExperiment(const RunConfig& cfg, std::ostream* progress = nullptr);

}  // namespace refgame::run

#endif  // REFGAME_RUN_CONFIG_H_
