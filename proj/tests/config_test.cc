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


#include <gtest/gtest.h>

#include <cstdlib>
#include <set>
#include <sstream>

#include "refgame/run_config.h"
#include "refgame/sweep.h"

namespace refgame {
namespace {

using nlohmann::json;

std::string ConfigErrorOf(const json& j) {
  try {
    run::ParseRunConfig(j);
  } catch (const game::ConfigError& e) {
    return e.what();
  }
  return "";
}

TEST(RunConfig, Defaults) {
  const run::RunConfig c = run::ParseRunConfig(json::object());
  EXPECT_EQ(c.dataset.kind, "shapes");
  EXPECT_EQ(c.architecture, nn::Architecture::kTransformer);
  EXPECT_EQ(c.regime, train::Regime::kOracle);
  EXPECT_EQ(c.game.vocab_size, 30);
  EXPECT_EQ(c.game.message_len, 3);
  EXPECT_EQ(c.game.context_size, 5);
  EXPECT_DOUBLE_EQ(c.loss.beta, 0.001);
  EXPECT_TRUE(c.loss.use_selfplay);
  EXPECT_EQ(c.schedule.plateau_patience, train::kUnbounded);
}

TEST(RunConfig, ConceptsDefaults) {
  const run::RunConfig c = run::ParseRunConfig(
      json{{"dataset", {{"kind", "concepts-synth"}}}});
  EXPECT_EQ(c.game.vocab_size, 100);
  EXPECT_EQ(c.game.message_len, 10);
}

TEST(RunConfig, ParsesLimitedRegime) {
  const run::RunConfig c = run::ParseRunConfig(
      json{{"regime", "limited"},
           {"role", "speaker"},
           {"teacher", true},
           {"limited", {{"M", 50}, {"N", "inf"}}},
           {"loss", {{"teacher_on_failure_only", true}}}});
  EXPECT_EQ(c.regime, train::Regime::kLimited);
  EXPECT_EQ(c.role, train::Role::kSpeaker);
  EXPECT_TRUE(c.loss.use_teacher);
  EXPECT_TRUE(c.loss.teacher_on_failure_only);
  EXPECT_EQ(c.schedule.M, 50);
  EXPECT_EQ(c.schedule.N, train::kUnbounded);
}

TEST(RunConfig, ReportsEveryBadKey) {
  const std::string err = ConfigErrorOf(
      json{{"colour", 1}, {"model_dim", -3}, {"schedule", {{"lr", "fast"}}}});
  EXPECT_NE(err.find("colour"), std::string::npos) << err;
  EXPECT_NE(err.find("model_dim"), std::string::npos) << err;
  EXPECT_NE(err.find("lr"), std::string::npos) << err;
}

TEST(RunConfig, RegimeSpecificKeys) {
  EXPECT_FALSE(ConfigErrorOf(json{{"limited", {{"M", 10}}}}).empty());
  EXPECT_FALSE(ConfigErrorOf(json{{"teacher", true}}).empty());
  EXPECT_FALSE(
      ConfigErrorOf(json{{"regime", "emergent"}, {"role", "speaker"}}).empty());
  EXPECT_FALSE(ConfigErrorOf(json{{"game", {{"vocab_size", 10}}}}).empty());
  EXPECT_FALSE(ConfigErrorOf(json{{"regime", "telepathy"}}).empty());
}

TEST(RunConfig, JsonRoundTrip) {
  run::RunConfig c = run::ParseRunConfig(
      json{{"regime", "limited"}, {"limited", {{"M", 20}, {"N", 3}}},
           {"seed", 7}, {"architecture", "lstm"}, {"out", "x/y"}});
  const json j = run::ToJson(c);
  const run::RunConfig d = run::ParseRunConfig(j);
  EXPECT_EQ(run::ToJson(d), j);
  EXPECT_EQ(d.schedule.M, 20);
  EXPECT_EQ(d.seed, 7u);
  EXPECT_EQ(d.architecture, nn::Architecture::kLstm);
}

TEST(RunConfig, ResolveOutHonoursEnvironment) {
  ::setenv("REFGAME_OUT", "/tmp/rgroot", 1);
  EXPECT_EQ(run::ResolveOut("a/b").string(), "/tmp/rgroot/a/b");
  EXPECT_EQ(run::ResolveOut("/abs").string(), "/abs");
  ::unsetenv("REFGAME_OUT");
  EXPECT_EQ(run::ResolveOut("a/b").string(), "a/b");
}

TEST(SweepSampling, WithoutReplacementAndDeterministic) {
  sweep::SweepSpace space;
  ASSERT_EQ(space.GridSize(), 36u);
  Rng r1(1), r2(1);
  const auto a = sweep::SamplePoints(space, 10, r1);
  const auto b = sweep::SamplePoints(space, 10, r2);
  EXPECT_EQ(a, b);
  ASSERT_EQ(a.size(), 10u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = i + 1; j < a.size(); ++j) EXPECT_FALSE(a[i] == a[j]);
  }
  Rng r3(2);
  EXPECT_EQ(sweep::SamplePoints(space, 100, r3).size(), 36u);
}

TEST(SweepSampling, EmptyAxisIsError) {
  sweep::SweepSpace space;
  space.lr.clear();
  Rng rng(1);
  EXPECT_THROW(sweep::SamplePoints(space, 3, rng), game::ConfigError);
}

sweep::Trial FakeTrial(const run::RunConfig& c) {
  if (c.schedule.lr < 2e-4) throw nn::NumericError("diverged");
  sweep::Trial t;
  t.dev_target = 100 * c.schedule.lr * 1000;
  t.dev_novel = static_cast<double>(c.seed);
  t.score = t.dev_target + t.dev_novel;
  return t;
}

TEST(Sweep, RanksTrialsAndKeepsFailuresLast) {
  const run::RunConfig base = run::ParseRunConfig(json{{"out", "sw"}});
  sweep::SweepSpace space;
  const auto res = sweep::HyperparameterSweep(base, space, 36, 5, FakeTrial);
  ASSERT_EQ(res.trials.size(), 36u);
  EXPECT_EQ(res.best, 0);
  bool seen_error = false;
  for (std::size_t i = 0; i < res.trials.size(); ++i) {
    const auto& t = res.trials[i];
    if (!t.error.empty()) {
      seen_error = true;
      EXPECT_LT(t.point.lr, 2e-4);
      continue;
    }
    EXPECT_FALSE(seen_error) << "successful trial ranked after a failure";
    if (i > 0 && res.trials[i - 1].error.empty()) {
      EXPECT_GE(res.trials[i - 1].score, t.score);
    }
    EXPECT_EQ(t.config.schedule.lr, t.point.lr);
    EXPECT_EQ(t.config.seed, t.point.seed);
  }
  EXPECT_TRUE(seen_error);
  EXPECT_DOUBLE_EQ(res.trials[0].point.lr, 1e-3);
  EXPECT_EQ(res.trials[0].point.seed, 3u);
}

TEST(Sweep, SingleSampleReturnsThatConfig) {
  const run::RunConfig base = run::ParseRunConfig(json{{"out", "sw"}});
  sweep::SweepSpace space;
  space.beta = {0.01};
  space.seed = {9};
  space.lr = {1e-3};
  space.plateau_patience = {50};
  const auto res = sweep::HyperparameterSweep(base, space, 1, 1, FakeTrial);
  ASSERT_EQ(res.trials.size(), 1u);
  const auto& c = res.trials[0].config;
  EXPECT_DOUBLE_EQ(c.loss.beta, 0.01);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.schedule.plateau_patience, 50);
  EXPECT_EQ(c.out, "sw/trial_0");
}

TEST(Sweep, DeterministicGivenSeed) {
  const run::RunConfig base = run::ParseRunConfig(json::object());
  sweep::SweepSpace space;
  const auto a = sweep::HyperparameterSweep(base, space, 6, 11, FakeTrial);
  const auto b = sweep::HyperparameterSweep(base, space, 6, 11, FakeTrial);
  std::ostringstream sa, sb;
  sweep::WriteRanking(a, sa);
  sweep::WriteRanking(b, sb);
  EXPECT_EQ(sa.str(), sb.str());
}

TEST(SweepFile, ParsesAxesAndRejectsUnknown) {
  const auto f = sweep::ParseSweepFile(
      json{{"base", {{"regime", "emergent"}}},
           {"space", {{"plateau_patience", {10, "inf"}}, {"lr", {1e-3}}}},
           {"n_samples", 4}});
  EXPECT_EQ(f.base.regime, train::Regime::kEmergent);
  EXPECT_EQ(f.space.plateau_patience, (std::vector<int>{10, train::kUnbounded}));
  EXPECT_EQ(f.n_samples, 4);
  EXPECT_THROW(sweep::ParseSweepFile(json{{"space", {{"momentum", {1}}}}}),
               game::ConfigError);
  EXPECT_THROW(sweep::ParseSweepFile(json{{"space", {{"lr", json::array()}}}}),
               game::ConfigError);
  EXPECT_THROW(sweep::ParseSweepFile(json{{"n_samples", 0}}), game::ConfigError);
}

}  // namespace
}  // namespace refgame
