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

#include <algorithm>
#include <cmath>
#include <deque>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "refgame/optim.h"

namespace refgame::train {

using data::Item;
using data::Split;
using game::Context;
using game::Message;

const char* RegimeName(Regime r) {
  switch (r) {
    case Regime::kEmergent: return "emergent";
    case Regime::kOracle: return "oracle";
    case Regime::kLimited: return "limited";
  }
  return "?";
}

Regime ParseRegime(const std::string& name) {
  if (name == "emergent") return Regime::kEmergent;
  if (name == "oracle") return Regime::kOracle;
  if (name == "limited") return Regime::kLimited;
  throw game::ConfigError("unknown regime '" + name + "'");
}

const char* RoleName(Role r) {
  return r == Role::kSpeaker ? "speaker" : "listener";
}

Role ParseRole(const std::string& name) {
  if (name == "speaker") return Role::kSpeaker;
  if (name == "listener") return Role::kListener;
  throw game::ConfigError("unknown role '" + name + "'");
}

Role Other(Role r) {
  return r == Role::kSpeaker ? Role::kListener : Role::kSpeaker;
}

void Baseline::Update(std::span<const int> rewards) {
  if (rewards.empty()) return;
  double mean = 0.0;
  for (int r : rewards) mean += r;
  mean /= static_cast<double>(rewards.size());
  value_ = decay_ * value_ + (1.0 - decay_) * mean;
}

void LossConfig::Validate() const {
  if (!(beta >= 0.0) || !std::isfinite(beta)) {
    throw game::ConfigError("loss.beta must be finite and >= 0");
  }
  if (!(baseline_decay >= 0.0 && baseline_decay < 1.0)) {
    throw game::ConfigError("loss.baseline_decay must lie in [0, 1)");
  }
}

void TrainSchedule::Validate() const {
  std::vector<std::string> bad;
  if (max_epochs < 1) bad.push_back("max_epochs");
  if (batch_size < 1) bad.push_back("batch_size");
  if (rolling_window < 1) bad.push_back("rolling_window");
  if (!(lr > 0.0)) bad.push_back("lr");
  if (!(min_lr > 0.0)) bad.push_back("min_lr");
  if (!(plateau_factor > 0.0 && plateau_factor < 1.0)) bad.push_back("plateau_factor");
  if (early_stop_patience < 1 && early_stop_patience != kUnbounded) {
    bad.push_back("early_stop_patience");
  }
  if (plateau_patience < 1 && plateau_patience != kUnbounded) {
    bad.push_back("plateau_patience");
  }
  if (dev_resamples < 1) bad.push_back("dev_resamples");
  if (final_resamples < 1) bad.push_back("final_resamples");
  if (N < 1 && N != kUnbounded) bad.push_back("N");
  if (M < 1) bad.push_back("M");
  if (!bad.empty()) {
    std::string msg = "invalid schedule:";
    for (const auto& b : bad) msg += " " + b;
    throw game::ConfigError(msg);
  }
}

bool TeacherCache::Contains(int referent) const {
  return std::any_of(entries.begin(), entries.end(),
                     [&](const Entry& e) { return e.referent == referent; });
}

bool TeacherCache::Add(Entry e) {
  if (static_cast<int>(entries.size()) >= capacity) return false;
  if (Contains(e.referent)) return false;
  entries.push_back(std::move(e));
  return true;
}

ad::Var ReinforceLoss(const nn::PolicyOutput& out, std::span<const int> rewards,
                      double baseline, double beta) {
  if (static_cast<int>(rewards.size()) != out.batch()) {
    throw std::invalid_argument("ReinforceLoss: one reward per row");
  }
  ad::Var logp = out.TotalLogProb();
  ad::Graph& g = *logp.graph();
  Tensor adv(out.batch(), 1);
  for (int i = 0; i < out.batch(); ++i) adv.data[i] = -(rewards[i] - baseline);
  ad::Var pg = ad::Mean(ad::ScaleRows(logp, g.Constant(std::move(adv))));
  if (beta == 0.0) return pg;
  ad::Var ent = ad::Mean(out.TotalEntropy());
  return ad::Sub(pg, ad::Scale(ent, beta));
}

ad::Var TeacherLoss(ad::Graph& g, nn::Agent& agent, const data::Dataset& ds,
                    const TeacherCache& cache, Rng& rng, bool train,
                    std::span<const int> subset) {
  if (cache.empty()) throw std::invalid_argument("TeacherLoss: empty cache");
  std::vector<int> pick;
  if (subset.empty()) {
    pick.resize(cache.size());
    std::iota(pick.begin(), pick.end(), 0);
  } else {
    pick.assign(subset.begin(), subset.end());
  }
  std::vector<const Item*> refs;
  std::vector<Message> msgs;
  for (int k : pick) {
    refs.push_back(&ds.items[cache.entries.at(k).referent]);
    msgs.push_back(cache.entries[k].message);
  }
  nn::PolicyOutput out = agent.ScoreMessages(g, refs, msgs, rng, train);
  return ad::Scale(ad::SumAll(out.TotalLogProb()), -1.0);
}

namespace {

using Snapshot = std::vector<Tensor>;

Snapshot Take(const nn::Agent& agent) {
  Snapshot s;
  for (const auto& p : agent.params().tensors) s.push_back(p.value);
  return s;
}

void Restore(nn::Agent& agent, const Snapshot& s) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    agent.params()[static_cast<int>(i)].value = s[i];
  }
}

std::vector<const Item*> Items(const data::Dataset& ds,
                               std::span<const int> positions) {
  std::vector<const Item*> out;
  out.reserve(positions.size());
  for (int p : positions) out.push_back(&ds.items[p]);
  return out;
}

std::vector<std::vector<const Item*>> ContextLists(
    const data::Dataset& ds, std::span<const Context> contexts) {
  std::vector<std::vector<const Item*>> out;
  out.reserve(contexts.size());
  for (const auto& c : contexts) out.push_back(game::ContextItems(ds, c));
  return out;
}

std::vector<Context> FreshContexts(const data::Dataset& ds,
                                   std::span<const int> referents,
                                   int context_size, Rng& rng) {
  std::vector<Context> out;
  out.reserve(referents.size());
  for (int r : referents) {
    out.push_back(game::SampleContext(ds, Split::kTrain, r, context_size, rng));
  }
  return out;
}

std::vector<int> Rewards(std::span<const Context> contexts,
                         std::span<const int> choices,
                         const game::GameConfig& cfg) {
  std::vector<int> r(contexts.size());
  for (std::size_t i = 0; i < contexts.size(); ++i) {
    r[i] = game::ComputeReward(contexts[i].target, choices[i], cfg);
  }
  return r;
}

double MeanOf(std::span<const int> v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (int x : v) s += x;
  return s / static_cast<double>(v.size());
}

struct AgentBaselines {
  explicit AgentBaselines(double decay)
      : speak_direct(decay), listen_direct(decay), speak_self(decay),
        listen_self(decay) {}
  Baseline speak_direct, listen_direct, speak_self, listen_self;
};

// Per-epoch sums for the metric log.
struct Accum {
  double direct = 0, selfplay = 0, teacher = 0;
  double r_direct = 0, r_self = 0;
  int n_direct = 0, n_self = 0, n_teacher = 0;
  int direct_rounds = 0;
};

void CheckShapes(const nn::Agent& agent, const TrainSetup& setup) {
  if (setup.ds == nullptr) throw game::ConfigError("TrainSetup: no dataset");
  setup.game.Validate();
  setup.loss.Validate();
  setup.schedule.Validate();
  const auto& s = agent.shape();
  if (s.features != setup.ds->feature_dim || s.vocab != setup.game.vocab_size ||
      s.message_len != setup.game.message_len) {
    throw game::ConfigError("agent shape does not match dataset/game");
  }
  if (setup.ds->split(Split::kTrain).size() <
      static_cast<std::size_t>(setup.game.context_size)) {
    throw game::ConfigError("train split smaller than the context");
  }
}

// Self-play on the given referents with resampled distractors. Returns the
// combined speaker and listener terms.
ad::Var SelfPlay(ad::Graph& g, nn::Agent& agent, const data::Dataset& ds,
                 std::span<const int> referents, const TrainSetup& setup,
                 AgentBaselines& bl, Accum& acc, Rng& rng) {
  const auto refs = Items(ds, referents);
  nn::PolicyOutput spoken =
      agent.Speak(g, refs, nn::Mode::kSample, rng, /*train=*/true);
  const auto msgs = spoken.Messages();
  const auto ctx = FreshContexts(ds, referents, setup.game.context_size, rng);
  const auto lists = ContextLists(ds, ctx);
  nn::PolicyOutput heard =
      agent.Listen(g, msgs, lists, nn::Mode::kSample, rng, /*train=*/true);
  const auto r = Rewards(ctx, heard.Choices(), setup.game);
  ad::Var loss =
      ad::Add(ReinforceLoss(spoken, r, bl.speak_self.value(), setup.loss.beta),
              ReinforceLoss(heard, r, bl.listen_self.value(), setup.loss.beta));
  bl.speak_self.Update(r);
  bl.listen_self.Update(r);
  acc.selfplay += loss.scalar();
  acc.r_self += MeanOf(r);
  ++acc.n_self;
  return loss;
}

void Optimize(ad::Graph& g, std::span<const ad::Var> terms,
              std::span<nn::Agent* const> agents,
              std::span<nn::RmsProp* const> opts, int epoch) {
  ad::Var total = ad::Sum(terms);
  if (!std::isfinite(total.scalar())) {
    std::ostringstream msg;
    msg << "non-finite loss at epoch " << epoch << ", terms:";
    for (const auto& t : terms) msg << ' ' << t.scalar();
    throw nn::NumericError(msg.str());
  }
  for (nn::Agent* a : agents) a->params().ZeroGrad();
  g.Backward(total);
  for (std::size_t i = 0; i < agents.size(); ++i) {
    opts[i]->Step(agents[i]->params());
  }
}

// Rolling-window model selection, early stopping and plateau decay.
class Monitor {
 public:
  explicit Monitor(const TrainSchedule& s) : s_(s) {}

  // Returns true when the snapshot should be replaced.
  bool Push(double target) {
    window_.push_back(target);
    if (static_cast<int>(window_.size()) > s_.rolling_window) {
      window_.pop_front();
    }
    rolling_ = std::accumulate(window_.begin(), window_.end(), 0.0) /
               static_cast<double>(window_.size());
    history_.push_back(rolling_);
    const bool strict = rolling_ > best_;
    if (strict) {
      since_best_ = 0;
      since_lr_ = 0;
    } else {
      ++since_best_;
      ++since_lr_;
    }
    if (rolling_ >= best_) {
      best_ = rolling_;
      return true;
    }
    return false;
  }

  double rolling() const { return rolling_; }
  double best() const { return best_; }
  bool ShouldStop() const {
    return s_.early_stop_patience != kUnbounded &&
           since_best_ >= s_.early_stop_patience;
  }
  bool ShouldDecay() {
    if (s_.plateau_patience == kUnbounded || since_lr_ < s_.plateau_patience) {
      return false;
    }
    since_lr_ = 0;
    return true;
  }
  // Rolling target improved by less than the threshold over the horizon.
  bool Converged() const {
    const int h = s_.converge_epochs;
    if (static_cast<int>(history_.size()) <= h) return false;
    return history_.back() - history_[history_.size() - 1 - h] <
           s_.converge_delta;
  }

 private:
  const TrainSchedule& s_;
  std::deque<double> window_;
  std::vector<double> history_;
  double rolling_ = 0.0;
  double best_ = -std::numeric_limits<double>::infinity();
  int since_best_ = 0;
  int since_lr_ = 0;
};

// A speaker/listener pairing for one evaluated role.
struct Pairing {
  game::Speaker* speaker;
  game::Listener* listener;
  std::string name;
};

double DevAccuracy(const Pairing& p, const TrainSetup& setup, Rng& rng) {
  return eval::MeasureAccuracy(*p.speaker, *p.listener, *setup.ds, Split::kDev,
                               setup.game, setup.schedule.dev_resamples, rng,
                               p.name)
      .mean;
}

EpochMetrics Summarize(int epoch, const Accum& acc, double lr) {
  EpochMetrics m;
  m.epoch = epoch;
  m.lr = lr;
  m.loss_direct = acc.n_direct ? acc.direct / acc.n_direct : 0.0;
  m.loss_selfplay = acc.n_self ? acc.selfplay / acc.n_self : 0.0;
  m.loss_teacher = acc.n_teacher ? acc.teacher / acc.n_teacher : 0.0;
  m.reward_direct = acc.n_direct ? acc.r_direct / acc.n_direct : 0.0;
  m.reward_selfplay = acc.n_self ? acc.r_self / acc.n_self : 0.0;
  m.direct_rounds = acc.direct_rounds;
  return m;
}

// Shared epoch bookkeeping for every regime. `run_epoch` trains one epoch
// and returns false when no training signal remains.
RunRecord Drive(const TrainSetup& setup, Regime regime, Role role,
                std::span<nn::Agent* const> agents,
                std::span<nn::RmsProp* const> opts, const Pairing& target,
                const Pairing& novel,
                const std::function<bool(int, Accum&, const Monitor&)>& run_epoch) {
  const TrainSchedule& s = setup.schedule;
  RunRecord rec;
  rec.regime = regime;
  rec.role = role;
  Rng eval_rng = Rng(setup.seed).Fork(0xe7a1);
  Monitor monitor(s);
  std::vector<Snapshot> best;
  for (nn::Agent* a : agents) best.push_back(Take(*a));
  double lr = s.lr;

  for (int epoch = 0; epoch < s.max_epochs; ++epoch) {
    Accum acc;
    const bool active = run_epoch(epoch, acc, monitor);
    EpochMetrics m = Summarize(epoch, acc, lr);
    m.dev_target = DevAccuracy(target, setup, eval_rng);
    m.dev_novel = DevAccuracy(novel, setup, eval_rng);
    if (monitor.Push(m.dev_target)) {
      for (std::size_t i = 0; i < agents.size(); ++i) best[i] = Take(*agents[i]);
      rec.best_epoch = epoch;
    }
    m.rolling_target = monitor.rolling();
    rec.epochs.push_back(m);
    if (setup.on_epoch) setup.on_epoch(m);
    if (!active) {
      rec.stop_reason = "no-training-signal";
      break;
    }
    if (monitor.ShouldStop()) {
      rec.stop_reason = "early-stop";
      break;
    }
    if (monitor.ShouldDecay()) {
      lr = std::max(s.min_lr, lr * s.plateau_factor);
      for (nn::RmsProp* o : opts) o->set_lr(lr);
    }
  }
  if (rec.stop_reason.empty()) rec.stop_reason = "max-epochs";
  rec.best_rolling = monitor.best();
  for (std::size_t i = 0; i < agents.size(); ++i) Restore(*agents[i], best[i]);

  Rng final_rng = Rng(setup.seed).Fork(0xf1a1);
  auto report = [&](const Pairing& p, Split split) {
    return eval::MeasureAccuracy(*p.speaker, *p.listener, *setup.ds, split,
                                 setup.game, s.final_resamples, final_rng,
                                 p.name);
  };
  rec.test_target = report(target, Split::kTest);
  rec.test_novel = report(novel, Split::kTest);
  rec.dev_target = report(target, Split::kDev);
  rec.dev_novel = report(novel, Split::kDev);
  return rec;
}

std::vector<std::vector<int>> Batches(std::vector<int> order, int batch_size) {
  std::vector<std::vector<int>> out;
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    const std::size_t end = std::min(order.size(), i + batch_size);
    out.emplace_back(order.begin() + i, order.begin() + end);
  }
  return out;
}

std::vector<int> Shuffled(std::vector<int> v, Rng& rng) {
  rng.Shuffle(v);
  return v;
}

// One direct round between the learning agent and the oracle. Returns the
// agent's policy loss; fills `teacher` with the oracle's message per row.
ad::Var DirectOracleRound(ad::Graph& g, nn::Agent& agent,
                          game::Speaker& oracle_speaker,
                          game::Listener& oracle_listener, Role role,
                          std::span<const int> referents,
                          std::span<const Context> contexts,
                          const TrainSetup& setup, AgentBaselines& bl,
                          Accum& acc, Rng& rng, std::vector<Message>* teacher,
                          std::vector<int>* rewards_out) {
  const data::Dataset& ds = *setup.ds;
  const auto refs = Items(ds, referents);
  const auto lists = ContextLists(ds, contexts);
  ad::Var loss;
  std::vector<int> r;
  if (role == Role::kSpeaker) {
    nn::PolicyOutput out =
        agent.Speak(g, refs, nn::Mode::kSample, rng, /*train=*/true);
    const auto msgs = out.Messages();
    const auto choices = oracle_listener.Listen(msgs, lists, rng);
    r = Rewards(contexts, choices, setup.game);
    loss = ReinforceLoss(out, r, bl.speak_direct.value(), setup.loss.beta);
    bl.speak_direct.Update(r);
    if (teacher) *teacher = oracle_speaker.Speak(refs, rng);
  } else {
    const auto msgs = oracle_speaker.Speak(refs, rng);
    nn::PolicyOutput out =
        agent.Listen(g, msgs, lists, nn::Mode::kSample, rng, /*train=*/true);
    r = Rewards(contexts, out.Choices(), setup.game);
    loss = ReinforceLoss(out, r, bl.listen_direct.value(), setup.loss.beta);
    bl.listen_direct.Update(r);
    if (teacher) *teacher = msgs;
  }
  acc.direct += loss.scalar();
  acc.r_direct += MeanOf(r);
  ++acc.n_direct;
  acc.direct_rounds += static_cast<int>(r.size());
  if (rewards_out) *rewards_out = std::move(r);
  return loss;
}

Pairing AgentPairing(game::Speaker& s, game::Listener& l, const char* name) {
  return Pairing{&s, &l, name};
}

}  // namespace

RunRecord TrainEmergent(nn::Agent& a, nn::Agent& b, const TrainSetup& setup) {
  CheckShapes(a, setup);
  CheckShapes(b, setup);
  const data::Dataset& ds = *setup.ds;
  const TrainSchedule& s = setup.schedule;
  Rng rng(setup.seed);
  nn::RmsProp opt_a(a.params(), {.lr = s.lr});
  nn::RmsProp opt_b(b.params(), {.lr = s.lr});
  AgentBaselines bl_a(setup.loss.baseline_decay), bl_b(setup.loss.baseline_decay);
  nn::AgentSpeaker a_speaks(a), b_speaks(b);
  nn::AgentListener a_listens(a), b_listens(b);
  const Pairing target = AgentPairing(a_speaks, b_listens, "A-speaks/B-listens");
  const Pairing novel = AgentPairing(b_speaks, a_listens, "B-speaks/A-listens");
  nn::Agent* agents[] = {&a, &b};
  nn::RmsProp* opts[] = {&opt_a, &opt_b};

  auto epoch_fn = [&](int epoch, Accum& acc, const Monitor&) {
    for (const auto& batch :
         Batches(Shuffled(ds.split(Split::kTrain), rng), s.batch_size)) {
      ad::Graph g;
      const auto refs = Items(ds, batch);
      const auto ctx = FreshContexts(ds, batch, setup.game.context_size, rng);
      const auto lists = ContextLists(ds, ctx);
      nn::PolicyOutput spoken =
          a.Speak(g, refs, nn::Mode::kSample, rng, /*train=*/true);
      const auto msgs = spoken.Messages();
      nn::PolicyOutput heard =
          b.Listen(g, msgs, lists, nn::Mode::kSample, rng, /*train=*/true);
      const auto r = Rewards(ctx, heard.Choices(), setup.game);
      std::vector<ad::Var> terms = {
          ReinforceLoss(spoken, r, bl_a.speak_direct.value(), setup.loss.beta),
          ReinforceLoss(heard, r, bl_b.listen_direct.value(), setup.loss.beta)};
      bl_a.speak_direct.Update(r);
      bl_b.listen_direct.Update(r);
      acc.direct += terms[0].scalar() + terms[1].scalar();
      acc.r_direct += MeanOf(r);
      ++acc.n_direct;
      acc.direct_rounds += static_cast<int>(r.size());
      if (setup.loss.use_selfplay) {
        terms.push_back(SelfPlay(g, a, ds, batch, setup, bl_a, acc, rng));
        terms.push_back(SelfPlay(g, b, ds, batch, setup, bl_b, acc, rng));
      }
      Optimize(g, terms, agents, opts, epoch);
    }
    return true;
  };
  return Drive(setup, Regime::kEmergent, Role::kSpeaker, agents, opts, target,
               novel, epoch_fn);
}

namespace {

// Target/novel pairings for a single agent trained against an oracle.
struct OraclePairings {
  OraclePairings(nn::Agent& agent, game::Speaker& os, game::Listener& ol,
                 Role role)
      : speaks(agent), listens(agent) {
    const Pairing as_speaker{&speaks, &ol, "agent-speaks/oracle-listens"};
    const Pairing as_listener{&os, &listens, "oracle-speaks/agent-listens"};
    target = role == Role::kSpeaker ? as_speaker : as_listener;
    novel = role == Role::kSpeaker ? as_listener : as_speaker;
  }
  nn::AgentSpeaker speaks;
  nn::AgentListener listens;
  Pairing target{}, novel{};
};

}  // namespace

RunRecord TrainOracle(nn::Agent& agent, game::Speaker& oracle_speaker,
                      game::Listener& oracle_listener, Role role,
                      const TrainSetup& setup) {
  CheckShapes(agent, setup);
  const data::Dataset& ds = *setup.ds;
  const TrainSchedule& s = setup.schedule;
  Rng rng(setup.seed);
  nn::RmsProp opt(agent.params(), {.lr = s.lr});
  AgentBaselines bl(setup.loss.baseline_decay);
  OraclePairings pairs(agent, oracle_speaker, oracle_listener, role);
  nn::Agent* agents[] = {&agent};
  nn::RmsProp* opts[] = {&opt};

  auto epoch_fn = [&](int epoch, Accum& acc, const Monitor&) {
    for (const auto& batch :
         Batches(Shuffled(ds.split(Split::kTrain), rng), s.batch_size)) {
      ad::Graph g;
      const auto ctx = FreshContexts(ds, batch, setup.game.context_size, rng);
      std::vector<ad::Var> terms = {
          DirectOracleRound(g, agent, oracle_speaker, oracle_listener, role,
                            batch, ctx, setup, bl, acc, rng, nullptr, nullptr)};
      if (setup.loss.use_selfplay) {
        terms.push_back(SelfPlay(g, agent, ds, batch, setup, bl, acc, rng));
      }
      Optimize(g, terms, agents, opts, epoch);
    }
    return true;
  };
  return Drive(setup, Regime::kOracle, role, agents, opts, pairs.target,
               pairs.novel, epoch_fn);
}

RunRecord TrainLimited(nn::Agent& agent, game::Speaker& oracle_speaker,
                       game::Listener& oracle_listener, Role role,
                       const TrainSetup& setup) {
  CheckShapes(agent, setup);
  const data::Dataset& ds = *setup.ds;
  const TrainSchedule& s = setup.schedule;
  const std::vector<int>& train = ds.split(Split::kTrain);
  if (s.M > static_cast<int>(train.size())) {
    throw game::ConfigError("limited.M exceeds the train split");
  }
  Rng rng(setup.seed);
  nn::RmsProp opt(agent.params(), {.lr = s.lr});
  AgentBaselines bl(setup.loss.baseline_decay);
  OraclePairings pairs(agent, oracle_speaker, oracle_listener, role);
  nn::Agent* agents[] = {&agent};
  nn::RmsProp* opts[] = {&opt};

  // The M examples and their contexts are drawn once and never resampled.
  std::vector<int> examples = Shuffled(train, rng);
  examples.resize(s.M);
  const std::vector<Context> frozen =
      FreshContexts(ds, examples, setup.game.context_size, rng);

  TeacherCache cache;
  cache.capacity = s.M;
  std::vector<int> teacher_order;
  std::size_t teacher_cursor = 0;
  // Cycles through the cache in reshuffled order, one minibatch at a time.
  auto next_teacher_batch = [&]() {
    std::vector<int> out;
    const std::size_t want = std::min<std::size_t>(s.batch_size, cache.size());
    while (out.size() < want) {
      if (teacher_cursor >= teacher_order.size()) {
        teacher_order.resize(cache.size());
        std::iota(teacher_order.begin(), teacher_order.end(), 0);
        rng.Shuffle(teacher_order);
        teacher_cursor = 0;
      }
      out.push_back(teacher_order[teacher_cursor++]);
    }
    return out;
  };
  auto teacher_term = [&](ad::Graph& g, Accum& acc) {
    const auto subset = next_teacher_batch();
    ad::Var t = ad::Scale(
        TeacherLoss(g, agent, ds, cache, rng, /*train=*/true, subset),
        1.0 / static_cast<double>(subset.size()));
    acc.teacher += t.scalar();
    ++acc.n_teacher;
    return t;
  };

  bool direct_done = false;
  auto epoch_fn = [&](int epoch, Accum& acc, const Monitor& monitor) {
    if (!direct_done) {
      direct_done = s.N == kUnbounded ? monitor.Converged() : epoch >= s.N;
    }
    bool trained = false;
    if (!direct_done) {
      std::vector<int> order(examples.size());
      std::iota(order.begin(), order.end(), 0);
      for (const auto& idx : Batches(Shuffled(order, rng), s.batch_size)) {
        std::vector<int> refs;
        std::vector<Context> ctx;
        for (int i : idx) {
          refs.push_back(examples[i]);
          ctx.push_back(frozen[i]);
        }
        ad::Graph g;
        std::vector<Message> teacher;
        std::vector<int> r;
        std::vector<ad::Var> terms = {DirectOracleRound(
            g, agent, oracle_speaker, oracle_listener, role, refs, ctx, setup,
            bl, acc, rng, setup.loss.use_teacher ? &teacher : nullptr, &r)};
        Optimize(g, terms, agents, opts, epoch);
        if (setup.loss.use_teacher) {
          for (std::size_t k = 0; k < refs.size(); ++k) {
            if (setup.loss.teacher_on_failure_only &&
                r[k] == setup.game.reward_win) {
              continue;
            }
            cache.Add({refs[k], teacher[k], ctx[k]});
          }
        }
        trained = true;
      }
    }
    const bool teach = setup.loss.use_teacher && !cache.empty();
    if (setup.loss.use_selfplay) {
      for (const auto& batch : Batches(Shuffled(train, rng), s.batch_size)) {
        ad::Graph g;
        std::vector<ad::Var> terms = {
            SelfPlay(g, agent, ds, batch, setup, bl, acc, rng)};
        if (teach) terms.push_back(teacher_term(g, acc));
        Optimize(g, terms, agents, opts, epoch);
      }
      trained = true;
    } else if (teach) {
      const int steps =
          (static_cast<int>(cache.size()) + s.batch_size - 1) / s.batch_size;
      for (int k = 0; k < steps; ++k) {
        ad::Graph g;
        std::vector<ad::Var> terms = {teacher_term(g, acc)};
        Optimize(g, terms, agents, opts, epoch);
      }
      trained = true;
    }
    return trained;
  };
  RunRecord rec = Drive(setup, Regime::kLimited, role, agents, opts,
                        pairs.target, pairs.novel, epoch_fn);
  rec.teacher_cache_size = static_cast<int>(cache.size());
  return rec;
}

void WriteMetricLog(const RunRecord& rec, std::ostream& out) {
  out << "epoch\tdev_target\tdev_novel\trolling_target\tlr\tloss_direct\t"
         "loss_selfplay\tloss_teacher\treward_direct\treward_selfplay\t"
         "direct_rounds\n";
  out << std::setprecision(10);
  for (const auto& m : rec.epochs) {
    out << m.epoch << '\t' << m.dev_target << '\t' << m.dev_novel << '\t'
        << m.rolling_target << '\t' << m.lr << '\t' << m.loss_direct << '\t'
        << m.loss_selfplay << '\t' << m.loss_teacher << '\t'
        << m.reward_direct << '\t' << m.reward_selfplay << '\t'
        << m.direct_rounds << '\n';
  }
}

}  // namespace refgame::train
