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


#include "refgame/training.h"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "refgame/oracle.h"
#include "refgame/optim.h"

namespace refgame::train {
namespace {

using data::Dataset;

// Two-armed bandit policy over a [1 x 2] logit parameter.
nn::PolicyOutput BanditPolicy(ad::Graph& g, ad::Parameter& theta, int batch,
                              Rng& rng) {
  ad::Var logits = ad::AddRow(g.Constant(Tensor(batch, 2)), g.Param(theta));
  ad::Var logp = ad::LogSoftmax(logits);
  nn::PolicyOutput out;
  std::vector<int> acts(batch);
  for (int b = 0; b < batch; ++b) {
    const double p1 = std::exp(logp.value()(b, 1));
    acts[b] = rng.Uniform() < p1 ? 1 : 0;
    out.actions.push_back({acts[b]});
  }
  out.logprobs.push_back(ad::Pick(logp, acts));
  out.entropies.push_back(ad::EntropyFromLogProbs(logp));
  out.distributions.push_back(ad::Softmax(logits).value());
  return out;
}

TEST(Reinforce, TwoArmedBanditLearnsBetterArm) {
  nn::AgentParams params;
  params.tensors.emplace_back("theta", Tensor(1, 2));
  nn::RmsProp opt(params, {.lr = 1e-2});
  Baseline baseline;
  Rng rng(1);
  for (int step = 0; step < 500; ++step) {
    ad::Graph g;
    nn::PolicyOutput out = BanditPolicy(g, params[0], 16, rng);
    std::vector<int> r;
    for (const auto& a : out.actions) r.push_back(a[0] == 1 ? 1 : -1);
    ad::Var loss = ReinforceLoss(out, r, baseline.value(), 0.0);
    baseline.Update(r);
    params.ZeroGrad();
    g.Backward(loss);
    opt.Step(params);
  }
  const double a = params[0].value.data[0], b = params[0].value.data[1];
  const double p_better = std::exp(b) / (std::exp(a) + std::exp(b));
  EXPECT_GT(p_better, 0.95);
}

TEST(Reinforce, RewardEqualToBaselineGivesZeroPolicyGradient) {
  nn::AgentParams params;
  params.tensors.emplace_back("theta", Tensor(1, 2));
  params[0].value.data = {0.3, -0.2};
  Rng rng(2);
  ad::Graph g;
  nn::PolicyOutput out = BanditPolicy(g, params[0], 8, rng);
  const std::vector<int> r(8, 1);
  ad::Var loss = ReinforceLoss(out, r, 1.0, 0.0);
  EXPECT_DOUBLE_EQ(loss.scalar(), 0.0);
  params.ZeroGrad();
  g.Backward(loss);
  for (double v : params[0].grad.data) EXPECT_EQ(v, 0.0);
  nn::RmsProp opt(params, {});
  opt.Step(params);
  EXPECT_EQ(params[0].value.data, (std::vector<double>{0.3, -0.2}));
}

TEST(Reinforce, PositiveRewardGivesNonNegativeLossAndRaisesChosenProb) {
  nn::AgentParams params;
  params.tensors.emplace_back("theta", Tensor(1, 2));
  Rng rng(3);
  ad::Graph g;
  nn::PolicyOutput out = BanditPolicy(g, params[0], 4, rng);
  const std::vector<int> r(4, 1);
  ad::Var loss = ReinforceLoss(out, r, 0.0, 0.0);
  EXPECT_GE(loss.scalar(), 0.0);
  params.ZeroGrad();
  g.Backward(loss);
  // Gradient descent raises the logit of the arm chosen most often.
  int ones = 0;
  for (const auto& a : out.actions) ones += a[0];
  if (ones > 2) {
    EXPECT_LT(params[0].grad.data[1], 0.0);
  } else if (ones < 2) {
    EXPECT_LT(params[0].grad.data[0], 0.0);
  }
}

TEST(Reinforce, EntropyBonusLowersLoss) {
  nn::AgentParams params;
  params.tensors.emplace_back("theta", Tensor(1, 2));
  Rng r1(4), r2(4);
  ad::Graph g1, g2;
  nn::PolicyOutput o1 = BanditPolicy(g1, params[0], 4, r1);
  nn::PolicyOutput o2 = BanditPolicy(g2, params[0], 4, r2);
  const std::vector<int> r(4, 1);
  const double plain = ReinforceLoss(o1, r, 0.5, 0.0).scalar();
  const double bonus = ReinforceLoss(o2, r, 0.5, 0.1).scalar();
  EXPECT_NEAR(plain - bonus, 0.1 * std::log(2.0), 1e-12);
}

TEST(Baseline, ExponentialMovingAverage) {
  Baseline b(0.5);
  b.Update(std::vector<int>{1, 1});
  EXPECT_DOUBLE_EQ(b.value(), 0.5);
  b.Update(std::vector<int>{-1, 1});
  EXPECT_DOUBLE_EQ(b.value(), 0.25);
}

TEST(TeacherCache, DeduplicatesAndRespectsCapacity) {
  TeacherCache c;
  c.capacity = 2;
  EXPECT_TRUE(c.Add({1, {1, 2, 3}, {}}));
  EXPECT_FALSE(c.Add({1, {1, 2, 3}, {}}));
  EXPECT_TRUE(c.Add({2, {1, 2, 3}, {}}));
  EXPECT_FALSE(c.Add({3, {1, 2, 3}, {}}));
  EXPECT_EQ(c.size(), 2u);
}

// Zero output layer: every word has probability exactly 1/V.
void MakeUniformSpeaker(nn::Agent& a) {
  a.params()[a.params().Find("dec.out.w")].value.Fill(0.0);
  a.params()[a.params().Find("dec.out.b")].value.Fill(0.0);
}

TEST(TeacherLoss, UniformAgentValue) {
  const Dataset ds = data::GenerateShapes(1);
  for (auto arch : {nn::Architecture::kLstm, nn::Architecture::kTransformer}) {
    nn::Agent agent(nn::AgentShape{.arch = arch}, 1);
    MakeUniformSpeaker(agent);
    TeacherCache cache;
    cache.capacity = 10;
    for (int i = 0; i < 10; ++i) {
      const int pos = ds.split(data::Split::kTrain)[i];
      cache.Add({pos, oracle::ShapesSpeak(ds.items[pos]), {}});
    }
    ad::Graph g;
    Rng rng(1);
    const double loss = TeacherLoss(g, agent, ds, cache, rng).scalar();
    const double expected = 10 * 3 * std::log(30.0);
    EXPECT_NEAR(loss, expected, 0.01 * expected);
    EXPECT_NEAR(loss, 102.0, 0.1);
  }
}

TEST(TeacherLoss, NonNegativeAndDecreasesWithTraining) {
  const Dataset ds = data::GenerateShapes(1);
  nn::Agent agent(nn::AgentShape{}, 2);
  TeacherCache cache;
  cache.capacity = 5;
  for (int i = 0; i < 5; ++i) {
    const int pos = ds.split(data::Split::kTrain)[i];
    cache.Add({pos, oracle::ShapesSpeak(ds.items[pos]), {}});
  }
  nn::RmsProp opt(agent.params(), {.lr = 1e-3});
  Rng rng(2);
  double first = 0, last = 0;
  for (int step = 0; step < 200; ++step) {
    ad::Graph g;
    ad::Var loss = TeacherLoss(g, agent, ds, cache, rng);
    EXPECT_GE(loss.scalar(), 0.0);
    if (step == 0) first = loss.scalar();
    last = loss.scalar();
    agent.params().ZeroGrad();
    g.Backward(loss);
    opt.Step(agent.params());
  }
  EXPECT_LT(last, 0.01 * first);
  // Every cached word reproduced with probability above 0.99.
  EXPECT_LE(last, -3 * 5 * std::log(0.99));
}

TrainSetup TinySetup(const Dataset& ds, int epochs) {
  TrainSetup s;
  s.ds = &ds;
  s.schedule.max_epochs = epochs;
  s.schedule.final_resamples = 5;
  s.schedule.M = 50;
  s.schedule.N = 1;
  s.seed = 3;
  return s;
}

nn::AgentShape TinyShape() {
  nn::AgentShape s;
  s.dim = 16;
  s.ff_dim = 16;
  return s;
}

std::string MetricLog(const RunRecord& r) {
  std::ostringstream s;
  WriteMetricLog(r, s);
  return s.str();
}

TEST(Training, OracleRunIsBitReproducible) {
  const Dataset ds = data::GenerateShapes(1);
  oracle::ShapesOracle o;
  auto run = [&] {
    nn::Agent agent(TinyShape(), 5);
    return TrainOracle(agent, o, o, Role::kListener, TinySetup(ds, 2));
  };
  const RunRecord a = run(), b = run();
  EXPECT_EQ(MetricLog(a), MetricLog(b));
  EXPECT_EQ(a.test_target.samples, b.test_target.samples);
  EXPECT_EQ(a.epochs.size(), 2u);
  EXPECT_EQ(a.epochs[0].direct_rounds, 800);
}

TEST(Training, RewardAccuracyIdentity) {
  const Dataset ds = data::GenerateShapes(1);
  oracle::ShapesOracle o;
  nn::Agent agent(TinyShape(), 6);
  const RunRecord r = TrainOracle(agent, o, o, Role::kSpeaker, TinySetup(ds, 1));
  for (const auto* rep : {&r.test_target, &r.test_novel, &r.dev_target}) {
    EXPECT_NEAR(rep->mean_reward, 2.0 * rep->mean / 100.0 - 1.0, 1e-12);
  }
}

TEST(Training, EmergentRunsBothAgents) {
  const Dataset ds = data::GenerateShapes(1);
  nn::Agent a(TinyShape(), 7), b(TinyShape(), 8);
  const auto before_a = a.params()[0].value.data;
  const auto before_b = b.params()[0].value.data;
  const RunRecord r = TrainEmergent(a, b, TinySetup(ds, 1));
  EXPECT_EQ(r.regime, Regime::kEmergent);
  EXPECT_EQ(r.test_target.pairing, "A-speaks/B-listens");
  EXPECT_NE(a.params()[0].value.data, before_a);
  EXPECT_NE(b.params()[0].value.data, before_b);
}

TEST(Training, LimitedFillsTeacherCacheWithMExamples) {
  const Dataset ds = data::GenerateShapes(1);
  oracle::ShapesOracle o;
  nn::Agent agent(TinyShape(), 9);
  TrainSetup s = TinySetup(ds, 2);
  s.loss.use_teacher = true;
  const RunRecord r = TrainLimited(agent, o, o, Role::kSpeaker, s);
  EXPECT_EQ(r.teacher_cache_size, 50);
  EXPECT_EQ(r.epochs[0].direct_rounds, 50);
  EXPECT_EQ(r.epochs[1].direct_rounds, 0);  // N = 1 pass
  EXPECT_GT(r.epochs[1].loss_teacher, 0.0);
}

TEST(Training, LimitedWithoutSignalStopsAfterDirectPasses) {
  const Dataset ds = data::GenerateShapes(1);
  oracle::ShapesOracle o;
  nn::Agent agent(TinyShape(), 10);
  TrainSetup s = TinySetup(ds, 50);
  s.loss.use_selfplay = false;
  const RunRecord r = TrainLimited(agent, o, o, Role::kListener, s);
  EXPECT_EQ(r.stop_reason, "no-training-signal");
  EXPECT_EQ(r.epochs.size(), 2u);
}

TEST(Training, ShapeMismatchRejected) {
  const Dataset ds = data::GenerateShapes(1);
  oracle::ShapesOracle o;
  nn::AgentShape shape = TinyShape();
  shape.vocab = 10;
  nn::Agent agent(shape, 1);
  EXPECT_THROW(TrainOracle(agent, o, o, Role::kListener, TinySetup(ds, 1)),
               game::ConfigError);
}

TEST(Schedule, Validation) {
  TrainSchedule s;
  EXPECT_NO_THROW(s.Validate());
  s.batch_size = 0;
  s.rolling_window = 0;
  try {
    s.Validate();
    FAIL();
  } catch (const game::ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("batch_size"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("rolling_window"), std::string::npos);
  }
  LossConfig l;
  l.beta = -1;
  EXPECT_THROW(l.Validate(), game::ConfigError);
}

TEST(Names, ParseRoundTrip) {
  for (auto r : {Regime::kEmergent, Regime::kOracle, Regime::kLimited}) {
    EXPECT_EQ(ParseRegime(RegimeName(r)), r);
  }
  EXPECT_EQ(ParseRole("speaker"), Role::kSpeaker);
  EXPECT_EQ(Other(Role::kSpeaker), Role::kListener);
  EXPECT_THROW(ParseRole("mime"), game::ConfigError);
}

}  // namespace
}  // namespace refgame::train
