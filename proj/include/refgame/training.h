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

#ifndef REFGAME_TRAINING_H_
#define REFGAME_TRAINING_H_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "refgame/agent.h"
#include "refgame/autodiff.h"
#include "refgame/data.h"
#include "refgame/eval.h"
#include "refgame/game.h"
#include "refgame/rng.h"

namespace refgame::train {

enum class Regime { kEmergent, kOracle, kLimited };
enum class Role { kSpeaker, kListener };

const char* RegimeName(Regime r);
Regime ParseRegime(const std::string& name);
const char* RoleName(Role r);
Role ParseRole(const std::string& name);
Role Other(Role r);

// Running reward baseline: exponential moving average of raw rewards.
class Baseline {
 public:
  explicit Baseline(double decay = 0.99) : decay_(decay) {}
  double value() const { return value_; }
  void Update(std::span<const int> rewards);

 private:
  double decay_;
  double value_ = 0.0;
};

struct LossConfig {
  double beta = 0.001;  // entropy bonus
  bool use_selfplay = true;
  bool use_teacher = false;
  // Cache oracle messages only from failed direct rounds.
  bool teacher_on_failure_only = false;
  double baseline_decay = 0.99;

  void Validate() const;
};

inline constexpr int kUnbounded = -1;

struct TrainSchedule {
  int M = 200;                   // limited regime: direct examples
  int N = 10;                    // limited regime: direct passes, kUnbounded = until converged
  int max_epochs = 1000;
  int early_stop_patience = 1000;
  int plateau_patience = kUnbounded;
  double plateau_factor = 0.5;
  double min_lr = 1e-5;
  int batch_size = 64;
  int rolling_window = 25;
  double lr = 1e-3;
  int dev_resamples = 1;         // per-epoch dev evaluation
  int final_resamples = 100;
  // Convergence test for N = kUnbounded.
  int converge_epochs = 200;
  double converge_delta = 0.1;

  void Validate() const;
};

// Oracle messages remembered from direct rounds, with the frozen context of
// each round.
struct TeacherCache {
  struct Entry {
    int referent = -1;  // position in Dataset::items
    game::Message message;
    game::Context context;
  };
  std::vector<Entry> entries;
  int capacity = 0;

  bool Contains(int referent) const;
  // Adds unless full or already cached. Returns whether it was added.
  bool Add(Entry e);
  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
};

// Batch mean of sum_steps -logp * (r - baseline) - beta * sum_steps entropy.
// The baseline is read, not updated.
ad::Var ReinforceLoss(const nn::PolicyOutput& out, std::span<const int> rewards,
                      double baseline, double beta);

// Sum of per-word negative log-likelihoods of the cached messages under the
// agent's speaker policy. `subset` selects entries; empty means all.
ad::Var TeacherLoss(ad::Graph& g, nn::Agent& agent, const data::Dataset& ds,
                    const TeacherCache& cache, Rng& rng, bool train = false,
                    std::span<const int> subset = {});

struct EpochMetrics {
  int epoch = 0;
  double dev_target = 0.0;
  double dev_novel = 0.0;
  double rolling_target = 0.0;
  double lr = 0.0;
  double loss_direct = 0.0;
  double loss_selfplay = 0.0;
  double loss_teacher = 0.0;
  double reward_direct = 0.0;    // mean reward of direct rounds
  double reward_selfplay = 0.0;
  int direct_rounds = 0;
};

struct RunRecord {
  Regime regime = Regime::kOracle;
  Role role = Role::kListener;  // trained role; speaker side for emergent
  std::vector<EpochMetrics> epochs;
  int best_epoch = -1;
  double best_rolling = 0.0;
  std::string stop_reason;
  int teacher_cache_size = 0;
  eval::AccuracyReport test_target, test_novel;
  eval::AccuracyReport dev_target, dev_novel;
};

struct TrainSetup {
  const data::Dataset* ds = nullptr;
  game::GameConfig game;
  LossConfig loss;
  TrainSchedule schedule;
  std::uint64_t seed = 1;
  std::function<void(const EpochMetrics&)> on_epoch;  // optional
};

// Agent `a` speaks and agent `b` listens; target role is a->b, novel role
// is b->a. The best snapshot by rolling target dev accuracy is restored.
RunRecord TrainEmergent(nn::Agent& a, nn::Agent& b, const TrainSetup& setup);

// Unlimited one-directional interaction with an oracle.
RunRecord TrainOracle(nn::Agent& agent, game::Speaker& oracle_speaker,
                      game::Listener& oracle_listener, Role role,
                      const TrainSetup& setup);

// Direct interaction limited to M frozen examples for N passes; self-play
// over the full train split and teacher loss on cached oracle messages.
RunRecord TrainLimited(nn::Agent& agent, game::Speaker& oracle_speaker,
                       game::Listener& oracle_listener, Role role,
                       const TrainSetup& setup);

// Tab-separated metric log: header line then one row per epoch.
void WriteMetricLog(const RunRecord& rec, std::ostream& out);

}  // namespace refgame::train

#endif  // REFGAME_TRAINING_H_
