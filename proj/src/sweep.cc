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

#include "refgame/sweep.h"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <ostream>

namespace refgame::sweep {

using nlohmann::json;

std::size_t SweepSpace::GridSize() const {
  return beta.size() * seed.size() * lr.size() * plateau_patience.size();
}

void SweepSpace::Validate() const {
  std::string empty;
  if (beta.empty()) empty += " beta";
  if (seed.empty()) empty += " seed";
  if (lr.empty()) empty += " lr";
  if (plateau_patience.empty()) empty += " plateau_patience";
  if (!empty.empty()) throw game::ConfigError("empty sweep axes:" + empty);
}

std::vector<SweepPoint> SamplePoints(const SweepSpace& space, int n, Rng& rng) {
  space.Validate();
  const std::size_t grid = space.GridSize();
  std::vector<std::size_t> cells(grid);
  std::iota(cells.begin(), cells.end(), 0);
  rng.Shuffle(cells);
  cells.resize(std::min<std::size_t>(grid, std::max(n, 0)));
  std::vector<SweepPoint> out;
  for (std::size_t c : cells) {
    SweepPoint p;
    p.plateau_patience =
        space.plateau_patience[c % space.plateau_patience.size()];
    c /= space.plateau_patience.size();
    p.lr = space.lr[c % space.lr.size()];
    c /= space.lr.size();
    p.seed = space.seed[c % space.seed.size()];
    c /= space.seed.size();
    p.beta = space.beta[c];
    out.push_back(p);
  }
  return out;
}

run::RunConfig Apply(const run::RunConfig& base, const SweepPoint& p,
                     int trial) {
  run::RunConfig c = base;
  c.loss.beta = p.beta;
  c.seed = p.seed;
  c.schedule.lr = p.lr;
  c.schedule.plateau_patience = p.plateau_patience;
  c.out = (std::filesystem::path(base.out) / ("trial_" + std::to_string(trial)))
              .string();
  return c;
}

Trial RunTrial(const run::RunConfig& cfg) {
  Trial t;
  t.config = cfg;
  const run::RunResult r = run::RunExperiment(cfg);
  t.dev_target = r.record.dev_target.mean;
  t.dev_novel = r.record.dev_novel.mean;
  t.score = t.dev_target + t.dev_novel;
  return t;
}

SweepResult HyperparameterSweep(const run::RunConfig& base,
                                const SweepSpace& space, int n_samples,
                                std::uint64_t sweep_seed, const TrialFn& fn) {
  if (n_samples < 1) throw game::ConfigError("n_samples must be >= 1");
  Rng rng(sweep_seed);
  const auto points = SamplePoints(space, n_samples, rng);
  const int n = static_cast<int>(points.size());
  std::vector<Trial> trials(n);
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    const run::RunConfig cfg = Apply(base, points[i], i);
    try {
      trials[i] = fn(cfg);
    } catch (const std::exception& e) {
      trials[i] = Trial{};
      trials[i].error = e.what();
    }
    trials[i].point = points[i];
    trials[i].config = cfg;
  }
  std::stable_sort(trials.begin(), trials.end(),
                   [](const Trial& a, const Trial& b) {
                     if (a.error.empty() != b.error.empty()) {
                       return a.error.empty();
                     }
                     return a.score > b.score;
                   });
  SweepResult res;
  res.trials = std::move(trials);
  if (!res.trials.empty() && res.trials[0].error.empty()) res.best = 0;
  return res;
}

namespace {

template <typename T>
void Axis(const json& space, const char* key, std::vector<T>& dst) {
  if (!space.contains(key)) return;
  const json& v = space.at(key);
  if (!v.is_array()) {
    throw game::ConfigError(std::string("space.") + key + " must be a list");
  }
  dst.clear();
  for (const auto& e : v) {
    if constexpr (std::is_same_v<T, int>) {
      if (e.is_string() && e.get<std::string>() == "inf") {
        dst.push_back(train::kUnbounded);
        continue;
      }
    }
    if (!e.is_number()) {
      throw game::ConfigError(std::string("space.") + key +
                              " entries must be numbers");
    }
    dst.push_back(e.get<T>());
  }
}

}  // namespace

SweepFile ParseSweepFile(const json& j) {
  if (!j.is_object()) throw game::ConfigError("sweep file must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() != "base" && it.key() != "space" && it.key() != "n_samples" &&
        it.key() != "seed") {
      throw game::ConfigError("sweep file: unknown key " + it.key());
    }
  }
  SweepFile f;
  f.base = run::ParseRunConfig(j.value("base", json::object()));
  if (j.contains("space")) {
    const json& s = j.at("space");
    if (!s.is_object()) throw game::ConfigError("space must be an object");
    for (auto it = s.begin(); it != s.end(); ++it) {
      if (it.key() != "beta" && it.key() != "seed" && it.key() != "lr" &&
          it.key() != "plateau_patience") {
        throw game::ConfigError("space: unknown axis " + it.key());
      }
    }
    Axis(s, "beta", f.space.beta);
    Axis(s, "seed", f.space.seed);
    Axis(s, "lr", f.space.lr);
    Axis(s, "plateau_patience", f.space.plateau_patience);
  }
  f.space.Validate();
  if (j.contains("n_samples")) {
    if (!j.at("n_samples").is_number_integer() || j.at("n_samples").get<int>() < 1) {
      throw game::ConfigError("n_samples must be a positive integer");
    }
    f.n_samples = j.at("n_samples").get<int>();
  }
  if (j.contains("seed")) f.seed = j.at("seed").get<std::uint64_t>();
  return f;
}

SweepFile LoadSweepFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw game::ConfigError("cannot open sweep file " + path.string());
  try {
    return ParseSweepFile(json::parse(in));
  } catch (const json::exception& e) {
    throw game::ConfigError("sweep file " + path.string() + ": " + e.what());
  }
}

void WriteRanking(const SweepResult& r, std::ostream& out) {
  out << "rank\tscore\tdev_target\tdev_novel\tbeta\tseed\tlr\tplateau\tout\terror\n";
  out << std::fixed << std::setprecision(2);
  for (std::size_t i = 0; i < r.trials.size(); ++i) {
    const Trial& t = r.trials[i];
    out << i + 1 << '\t' << t.score << '\t' << t.dev_target << '\t'
        << t.dev_novel << '\t' << std::defaultfloat << t.point.beta << '\t'
        << t.point.seed << '\t' << t.point.lr << '\t'
        << (t.point.plateau_patience == train::kUnbounded
                ? std::string("inf")
                : std::to_string(t.point.plateau_patience))
        << '\t' << t.config.out << '\t' << t.error << std::fixed << '\n';
  }
}

}  // namespace refgame::sweep
