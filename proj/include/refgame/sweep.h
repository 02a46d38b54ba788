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

#ifndef REFGAME_SWEEP_H_
#define REFGAME_SWEEP_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "refgame/rng.h"
#include "refgame/run_config.h"

namespace refgame::sweep {

struct SweepSpace {
  std::vector<double> beta = {0.0, 0.001};
  std::vector<std::uint64_t> seed = {1, 2, 3};
  std::vector<double> lr = {1e-3, 5e-4, 1e-4};
  std::vector<int> plateau_patience = {50, train::kUnbounded};

  std::size_t GridSize() const;
  void Validate() const;  // every axis non-empty
};

struct SweepPoint {
  double beta = 0.0;
  std::uint64_t seed = 1;
  double lr = 1e-3;
  int plateau_patience = train::kUnbounded;

  friend bool operator==(const SweepPoint&, const SweepPoint&) = default;
};

// Uniform draws from the grid without replacement, min(n, grid) of them.
std::vector<SweepPoint> SamplePoints(const SweepSpace& space, int n, Rng& rng);

run::RunConfig Apply(const run::RunConfig& base, const SweepPoint& p,
                     int trial);

struct Trial {
  SweepPoint point;
  run::RunConfig config;
  double score = 0.0;  // mean dev accuracy summed over evaluated roles
  double dev_target = 0.0;
  double dev_novel = 0.0;
  std::string error;   // set when the trial diverged or failed
};

struct SweepResult {
  std::vector<Trial> trials;  // ranked, best first; failed trials last
  int best = -1;              // index into trials, -1 if all failed
};

// Scores one configuration. The default runs RunExperiment.
using TrialFn = std::function<Trial(const run::RunConfig&)>;
Trial RunTrial(const run::RunConfig& cfg);

// Trials run in parallel and share nothing mutable; ranking happens after
// all complete, on one thread.
SweepResult HyperparameterSweep(const run::RunConfig& base,
                                const SweepSpace& space, int n_samples,
                                std::uint64_t sweep_seed,
                                const TrialFn& fn = RunTrial);

// Sweep file: {"base": <run config>, "space": {...}, "n_samples": 10,
// "seed": 1}. Missing space axes keep their defaults.
struct SweepFile {
  run::RunConfig base;
  SweepSpace space;
  int n_samples = 10;
  std::uint64_t seed = 1;
};
SweepFile ParseSweepFile(const nlohmann::json& j);
SweepFile LoadSweepFile(const std::filesystem::path& path);

void WriteRanking(const SweepResult& r, std::ostream& out);

}  // namespace refgame::sweep

#endif  // REFGAME_SWEEP_H_
