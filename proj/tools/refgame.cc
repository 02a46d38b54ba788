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

// refgame: dataset generation, training runs and hyperparameter sweeps.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 numerical
// divergence during training.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "refgame/agent.h"
#include "refgame/data.h"
#include "refgame/oracle.h"
#include "refgame/run_config.h"
#include "refgame/sweep.h"

namespace {

namespace fs = std::filesystem;
using namespace refgame;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitDiverged = 2;

int GenData(const std::string& kind, std::uint64_t seed, int n_categories,
            int n_items, const std::string& xml, const std::string& out,
            bool with_oracle) {
  data::Dataset ds;
  if (kind == "shapes") {
    ds = data::GenerateShapes(seed);
  } else if (kind == "concepts-synth") {
    ds = data::SynthConcepts(seed, n_categories, n_items);
  } else if (kind == "concepts") {
    if (xml.empty()) throw CLI::ValidationError("concepts needs --xml <path>");
    if (!fs::exists(xml)) {
      throw data::DataError("file not found: " + xml);
    }
    ds = data::LoadConcepts(xml, data::kConceptsFeatures, seed);
  }
  ds.Validate();
  const fs::path path =
      out.empty() ? run::ResolveOut(kind + "_seed" + std::to_string(seed) + ".tsv")
                  : run::ResolveOut(out);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path);
  if (!f) throw data::DataError("cannot write " + path.string());
  if (with_oracle && kind != "shapes") {
    oracle::WriteRsaOracle(oracle::BuildRsaOracle(ds), ds, f);
  } else {
    data::WriteDataset(ds, f);
  }
  const auto s = ds.sizes();
  std::cout << "wrote " << path.string() << " (" << ds.items.size()
            << " items, train/dev/test " << s.train << '/' << s.dev << '/'
            << s.test << ")\n";
  return kExitOk;
}

int Train(const std::string& config, std::optional<std::uint64_t> seed,
          const std::string& out, bool quiet) {
  run::RunConfig cfg = run::LoadRunConfig(config);
  if (seed) cfg.seed = *seed;
  if (!out.empty()) cfg.out = out;
  const run::RunResult r = run::RunExperiment(cfg, quiet ? nullptr : &std::cerr);
  const auto& rec = r.record;
  std::cout << "run directory: " << r.dir.string() << '\n'
            << "test target (" << rec.test_target.pairing
            << "): " << rec.test_target.mean << " +/- " << rec.test_target.ci95
            << '\n'
            << "test novel  (" << rec.test_novel.pairing
            << "): " << rec.test_novel.mean << " +/- " << rec.test_novel.ci95
            << '\n';
  return kExitOk;
}

int Sweep(const std::string& config, std::optional<std::uint64_t> seed,
          const std::string& out) {
  sweep::SweepFile f = sweep::LoadSweepFile(config);
  if (seed) f.seed = *seed;
  if (!out.empty()) f.base.out = out;
  const auto res =
      sweep::HyperparameterSweep(f.base, f.space, f.n_samples, f.seed);
  const fs::path dir = run::ResolveOut(f.base.out);
  fs::create_directories(dir);
  std::ofstream rank(dir / "ranking.tsv");
  sweep::WriteRanking(res, rank);
  sweep::WriteRanking(res, std::cout);
  if (res.best < 0) {
    std::cerr << "every trial failed\n";
    return kExitDiverged;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"refgame: reference games with self-play and oracle supervision"};
  app.require_subcommand(1);

  std::uint64_t gen_seed = 1;
  int n_categories = 20, n_items = refgame::data::kConceptsItems;
  std::string xml, gen_out, gen_kind;
  bool with_oracle = false;
  auto* gen = app.add_subcommand("gen-data", "write a dataset file");
  gen->add_option("kind", gen_kind, "shapes | concepts-synth | concepts")
      ->required()
      ->check(CLI::IsMember({"shapes", "concepts-synth", "concepts"}));
  gen->add_option("--seed", gen_seed, "generation / split seed");
  gen->add_option("--xml", xml, "Concepts XML file or directory");
  gen->add_option("--categories", n_categories, "synthetic categories")
      ->check(CLI::PositiveNumber);
  gen->add_option("--items", n_items, "synthetic items")->check(CLI::PositiveNumber);
  gen->add_option("--out", gen_out, "output file");
  gen->add_flag("--with-oracle", with_oracle,
                "append the rational speaker's messages (Concepts kinds)");

  std::string train_config, train_out;
  std::optional<std::uint64_t> train_seed;
  bool quiet = false;
  auto* train = app.add_subcommand("train", "run one training configuration");
  train->add_option("--config", train_config, "run config (JSON)")->required();
  train->add_option("--seed", train_seed, "override the config seed");
  train->add_option("--out", train_out, "override the output directory");
  train->add_flag("--quiet", quiet, "no per-epoch progress on stderr");

  std::string sweep_config, sweep_out;
  std::optional<std::uint64_t> sweep_seed;
  auto* sw = app.add_subcommand("sweep", "hyperparameter sweep");
  sw->add_option("--config", sweep_config, "sweep file (JSON)")->required();
  sw->add_option("--seed", sweep_seed, "override the sweep sampling seed");
  sw->add_option("--out", sweep_out, "override the output root");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen) {
      return GenData(gen_kind, gen_seed, n_categories, n_items, xml, gen_out,
                     with_oracle);
    }
    if (*train) return Train(train_config, train_seed, train_out, quiet);
    if (*sw) return Sweep(sweep_config, sweep_seed, sweep_out);
  } catch (const refgame::nn::NumericError& e) {
    std::cerr << "diverged: " << e.what() << '\n';
    return kExitDiverged;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
