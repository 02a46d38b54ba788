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

#include "refgame/run_config.h"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

#include "refgame/eval.h"

namespace refgame::run {

using nlohmann::json;

namespace {

// Collects every problem before failing, so one error lists all bad keys.
class Reader {
 public:
  void Unknown(const json& obj, const std::set<std::string>& known,
               const std::string& prefix) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      if (!known.count(it.key())) bad_.push_back(prefix + it.key() + " (unknown)");
    }
  }

  template <typename T>
  void Get(const json& obj, const std::string& key, const std::string& prefix,
           T& dst) {
    if (!obj.contains(key)) return;
    try {
      const json& v = obj.at(key);
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw std::invalid_argument("bool");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw std::invalid_argument("int");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw std::invalid_argument("number");
      } else {
        if (!v.is_string()) throw std::invalid_argument("string");
      }
      dst = v.get<T>();
    } catch (const std::exception&) {
      bad_.push_back(prefix + key + " (wrong type)");
    }
  }

  // Integer or the string "inf".
  void GetBound(const json& obj, const std::string& key,
                const std::string& prefix, int& dst) {
    if (!obj.contains(key)) return;
    const json& v = obj.at(key);
    if (v.is_string() && v.get<std::string>() == "inf") {
      dst = train::kUnbounded;
    } else if (v.is_number_integer()) {
      dst = v.get<int>();
    } else {
      bad_.push_back(prefix + key + " (expected integer or \"inf\")");
    }
  }

  const json* Object(const json& obj, const std::string& key) {
    if (!obj.contains(key)) return nullptr;
    if (!obj.at(key).is_object()) {
      bad_.push_back(key + " (expected object)");
      return nullptr;
    }
    return &obj.at(key);
  }

  void Fail(std::string what) { bad_.push_back(std::move(what)); }
  const std::vector<std::string>& bad() const { return bad_; }

 private:
  std::vector<std::string> bad_;
};

json Bound(int v) { return v == train::kUnbounded ? json("inf") : json(v); }

}  // namespace

RunConfig ParseRunConfig(const json& j) {
  if (!j.is_object()) throw game::ConfigError("config must be a JSON object");
  RunConfig cfg;
  Reader rd;
  rd.Unknown(j,
             {"dataset", "architecture", "regime", "role", "selfplay",
              "teacher", "limited", "loss", "schedule", "game", "model_dim",
              "dialogs", "seed", "out"},
             "");

  if (const json* d = rd.Object(j, "dataset")) {
    rd.Unknown(*d, {"kind", "seed", "path", "n_categories", "n_items"},
               "dataset.");
    rd.Get(*d, "kind", "dataset.", cfg.dataset.kind);
    rd.Get(*d, "seed", "dataset.", cfg.dataset.seed);
    rd.Get(*d, "path", "dataset.", cfg.dataset.path);
    rd.Get(*d, "n_categories", "dataset.", cfg.dataset.n_categories);
    rd.Get(*d, "n_items", "dataset.", cfg.dataset.n_items);
  }
  const std::string kind = cfg.dataset.kind;
  if (kind != "shapes" && kind != "concepts-synth" && kind != "concepts" &&
      kind != "file") {
    rd.Fail("dataset.kind (one of shapes, concepts-synth, concepts, file)");
  }
  if ((kind == "concepts" || kind == "file") && cfg.dataset.path.empty()) {
    rd.Fail("dataset.path (required for kind " + kind + ")");
  }

  std::string arch = nn::ArchitectureName(cfg.architecture);
  rd.Get(j, "architecture", "", arch);
  try {
    cfg.architecture = nn::ParseArchitecture(arch);
  } catch (const std::exception&) {
    rd.Fail("architecture (lstm or transformer)");
  }
  std::string regime = train::RegimeName(cfg.regime);
  rd.Get(j, "regime", "", regime);
  try {
    cfg.regime = train::ParseRegime(regime);
  } catch (const std::exception&) {
    rd.Fail("regime (emergent, oracle or limited)");
  }
  std::string role = train::RoleName(cfg.role);
  rd.Get(j, "role", "", role);
  try {
    cfg.role = train::ParseRole(role);
  } catch (const std::exception&) {
    rd.Fail("role (speaker or listener)");
  }
  rd.Get(j, "selfplay", "", cfg.loss.use_selfplay);
  rd.Get(j, "teacher", "", cfg.loss.use_teacher);

  const bool limited = cfg.regime == train::Regime::kLimited;
  if (const json* l = rd.Object(j, "limited")) {
    if (!limited) rd.Fail("limited (only valid with regime limited)");
    rd.Unknown(*l, {"M", "N"}, "limited.");
    rd.Get(*l, "M", "limited.", cfg.schedule.M);
    rd.GetBound(*l, "N", "limited.", cfg.schedule.N);
  }
  if (cfg.loss.use_teacher && !limited) {
    rd.Fail("teacher (only valid with regime limited)");
  }
  if (cfg.regime == train::Regime::kEmergent && j.contains("role")) {
    rd.Fail("role (not used by regime emergent)");
  }

  if (const json* l = rd.Object(j, "loss")) {
    rd.Unknown(*l, {"beta", "teacher_on_failure_only", "baseline_decay"},
               "loss.");
    rd.Get(*l, "beta", "loss.", cfg.loss.beta);
    rd.Get(*l, "teacher_on_failure_only", "loss.",
           cfg.loss.teacher_on_failure_only);
    rd.Get(*l, "baseline_decay", "loss.", cfg.loss.baseline_decay);
  }
  if (const json* s = rd.Object(j, "schedule")) {
    rd.Unknown(*s,
               {"max_epochs", "early_stop_patience", "plateau_patience",
                "plateau_factor", "min_lr", "batch_size", "rolling_window",
                "lr", "dev_resamples", "final_resamples"},
               "schedule.");
    auto& sc = cfg.schedule;
    rd.Get(*s, "max_epochs", "schedule.", sc.max_epochs);
    rd.GetBound(*s, "early_stop_patience", "schedule.", sc.early_stop_patience);
    rd.GetBound(*s, "plateau_patience", "schedule.", sc.plateau_patience);
    rd.Get(*s, "plateau_factor", "schedule.", sc.plateau_factor);
    rd.Get(*s, "min_lr", "schedule.", sc.min_lr);
    rd.Get(*s, "batch_size", "schedule.", sc.batch_size);
    rd.Get(*s, "rolling_window", "schedule.", sc.rolling_window);
    rd.Get(*s, "lr", "schedule.", sc.lr);
    rd.Get(*s, "dev_resamples", "schedule.", sc.dev_resamples);
    rd.Get(*s, "final_resamples", "schedule.", sc.final_resamples);
  }

  const bool shapes = kind == "shapes";
  cfg.game.vocab_size = shapes ? data::kShapesVocab : data::kConceptsVocab;
  cfg.game.message_len = shapes ? 3 : 10;
  if (const json* g = rd.Object(j, "game")) {
    rd.Unknown(*g, {"context_size", "message_len", "vocab_size"}, "game.");
    rd.Get(*g, "context_size", "game.", cfg.game.context_size);
    rd.Get(*g, "message_len", "game.", cfg.game.message_len);
    rd.Get(*g, "vocab_size", "game.", cfg.game.vocab_size);
  }
  rd.Get(j, "model_dim", "", cfg.model_dim);
  rd.Get(j, "dialogs", "", cfg.dialogs);
  rd.Get(j, "seed", "", cfg.seed);
  rd.Get(j, "out", "", cfg.out);
  if (cfg.model_dim < 1) rd.Fail("model_dim (must be >= 1)");
  if (cfg.dialogs < 0) rd.Fail("dialogs (must be >= 0)");
  if (cfg.out.empty()) rd.Fail("out (must be non-empty)");

  auto check = [&](auto&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      rd.Fail(e.what());
    }
  };
  check([&] { cfg.loss.Validate(); });
  check([&] { cfg.schedule.Validate(); });
  check([&] { cfg.game.Validate(); });
  if (shapes && (cfg.game.vocab_size != data::kShapesVocab ||
                 cfg.game.message_len != 3)) {
    rd.Fail("game (the Shapes oracle needs vocab_size 30 and message_len 3)");
  }

  if (!rd.bad().empty()) {
    std::string msg = "invalid config:";
    for (const auto& b : rd.bad()) msg += "\n  " + b;
    throw game::ConfigError(msg);
  }
  return cfg;
}

RunConfig LoadRunConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw game::ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw game::ConfigError("config " + path.string() + ": " + e.what());
  }
  return ParseRunConfig(j);
}

json ToJson(const RunConfig& c) {
  json j;
  j["dataset"] = {{"kind", c.dataset.kind},
                  {"seed", c.dataset.seed},
                  {"path", c.dataset.path},
                  {"n_categories", c.dataset.n_categories},
                  {"n_items", c.dataset.n_items}};
  j["architecture"] = nn::ArchitectureName(c.architecture);
  j["regime"] = train::RegimeName(c.regime);
  if (c.regime != train::Regime::kEmergent) j["role"] = train::RoleName(c.role);
  j["selfplay"] = c.loss.use_selfplay;
  j["teacher"] = c.loss.use_teacher;
  if (c.regime == train::Regime::kLimited) {
    j["limited"] = {{"M", c.schedule.M}, {"N", Bound(c.schedule.N)}};
  }
  j["loss"] = {{"beta", c.loss.beta},
               {"teacher_on_failure_only", c.loss.teacher_on_failure_only},
               {"baseline_decay", c.loss.baseline_decay}};
  const auto& s = c.schedule;
  j["schedule"] = {{"max_epochs", s.max_epochs},
                   {"early_stop_patience", Bound(s.early_stop_patience)},
                   {"plateau_patience", Bound(s.plateau_patience)},
                   {"plateau_factor", s.plateau_factor},
                   {"min_lr", s.min_lr},
                   {"batch_size", s.batch_size},
                   {"rolling_window", s.rolling_window},
                   {"lr", s.lr},
                   {"dev_resamples", s.dev_resamples},
                   {"final_resamples", s.final_resamples}};
  j["game"] = {{"context_size", c.game.context_size},
               {"message_len", c.game.message_len},
               {"vocab_size", c.game.vocab_size}};
  j["model_dim"] = c.model_dim;
  j["dialogs"] = c.dialogs;
  j["seed"] = c.seed;
  j["out"] = c.out;
  return j;
}

data::Dataset BuildDataset(const DatasetSpec& spec) {
  data::Dataset ds;
  if (spec.kind == "shapes") {
    ds = data::GenerateShapes(spec.seed);
  } else if (spec.kind == "concepts-synth") {
    ds = data::SynthConcepts(spec.seed, spec.n_categories, spec.n_items);
  } else if (spec.kind == "concepts") {
    ds = data::LoadConcepts(spec.path);
  } else if (spec.kind == "file") {
    ds = data::LoadDataset(spec.path);
  } else {
    throw game::ConfigError("unknown dataset kind '" + spec.kind + "'");
  }
  ds.Validate();
  return ds;
}

game::Speaker& OracleBundle::speaker() {
  if (shapes) return *shapes;
  return *rsa_agent;
}

game::Listener& OracleBundle::listener() {
  if (shapes) return *shapes;
  return *rsa_agent;
}

eval::WordGloss OracleBundle::Gloss(const data::Dataset& ds) const {
  return shapes ? eval::ShapesGloss(ds) : eval::RsaGloss(*rsa, ds);
}

OracleBundle BuildOracle(const data::Dataset& ds, const game::GameConfig& game) {
  OracleBundle b;
  if (ds.name == "shapes") {
    b.shapes = std::make_unique<oracle::ShapesOracle>();
    return b;
  }
  oracle::RsaOptions opts;
  opts.vocab_size = game.vocab_size;
  opts.message_len = game.message_len;
  b.rsa = std::make_unique<oracle::RsaOracle>(oracle::BuildRsaOracle(ds, opts));
  b.rsa_agent = std::make_unique<oracle::RsaAgent>(*b.rsa);
  return b;
}

std::filesystem::path ResolveOut(const std::string& out) {
  std::filesystem::path p(out);
  if (p.is_absolute()) return p;
  if (const char* root = std::getenv("REFGAME_OUT"); root && *root) {
    return std::filesystem::path(root) / p;
  }
  return p;
}

namespace {

std::uint64_t AgentSeed(std::uint64_t seed, int which) {
  return Rng(seed).Fork(100 + which).Next();
}

void WriteMatrix(const Tensor& m, const std::filesystem::path& stem) {
  std::ofstream csv(stem.string() + ".csv");
  eval::WriteCsv(m, csv);
  std::ofstream pgm(stem.string() + ".pgm");
  eval::WritePgm(m, pgm);
}

void AddReport(std::map<std::string, std::string>& kv, const std::string& key,
               const eval::AccuracyReport& r) {
  std::ostringstream mean, ci, reward;
  mean << std::fixed << std::setprecision(4) << r.mean;
  ci << std::fixed << std::setprecision(4) << r.ci95;
  reward << std::fixed << std::setprecision(6) << r.mean_reward;
  kv[key + "_mean"] = mean.str();
  kv[key + "_ci95"] = ci.str();
  kv[key + "_mean_reward"] = reward.str();
  kv[key + "_pairing"] = r.pairing;
  kv[key + "_resamples"] = std::to_string(r.n_resamples);
}

}  // namespace

RunResult RunExperiment(const RunConfig& cfg, std::ostream* progress) {
  const data::Dataset ds = BuildDataset(cfg.dataset);
  OracleBundle orc = BuildOracle(ds, cfg.game);

  RunResult result;
  result.dir = ResolveOut(cfg.out);
  std::filesystem::create_directories(result.dir);
  const auto& dir = result.dir;
  {
    std::ofstream out(dir / "config.json");
    out << ToJson(cfg).dump(2) << '\n';
  }

  nn::AgentShape shape;
  shape.arch = cfg.architecture;
  shape.features = ds.feature_dim;
  shape.vocab = cfg.game.vocab_size;
  shape.message_len = cfg.game.message_len;
  shape.dim = cfg.model_dim;

  train::TrainSetup setup;
  setup.ds = &ds;
  setup.game = cfg.game;
  setup.loss = cfg.loss;
  setup.schedule = cfg.schedule;
  setup.seed = cfg.seed;
  if (progress) {
    setup.on_epoch = [progress](const train::EpochMetrics& m) {
      *progress << "epoch " << m.epoch << std::fixed << std::setprecision(1)
                << " dev_target=" << m.dev_target
                << " dev_novel=" << m.dev_novel
                << " rolling=" << m.rolling_target << std::defaultfloat
                << " lr=" << m.lr << '\n'
                << std::flush;
    };
  }

  std::vector<std::unique_ptr<nn::Agent>> agents;
  agents.push_back(std::make_unique<nn::Agent>(shape, AgentSeed(cfg.seed, 0)));
  if (cfg.regime == train::Regime::kEmergent) {
    agents.push_back(std::make_unique<nn::Agent>(shape, AgentSeed(cfg.seed, 1)));
    result.record = train::TrainEmergent(*agents[0], *agents[1], setup);
  } else if (cfg.regime == train::Regime::kOracle) {
    result.record = train::TrainOracle(*agents[0], orc.speaker(), orc.listener(),
                                       cfg.role, setup);
  } else {
    result.record = train::TrainLimited(*agents[0], orc.speaker(),
                                        orc.listener(), cfg.role, setup);
  }
  const train::RunRecord& rec = result.record;

  {
    std::ofstream log(dir / "metrics.tsv");
    train::WriteMetricLog(rec, log);
  }
  const char* names[] = {"agent_a", "agent_b"};
  const bool pair = agents.size() == 2;
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const std::string who = pair ? names[i] : "agent";
    nn::SaveCheckpoint(*agents[i], AgentSeed(cfg.seed, static_cast<int>(i)),
                       dir / (who + ".ckpt"));
  }

  // Lexicons and transcripts use a stream of their own so they never shift
  // the training or evaluation draws.
  Rng art = Rng(cfg.seed).Fork(0xa27);
  const int V = cfg.game.vocab_size;
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const std::string who = pair ? names[i] : "agent";
    nn::AgentSpeaker sp(*agents[i]);
    const auto lex = eval::BuildLexicon(sp, ds, data::Split::kTrain, V, art);
    WriteMatrix(lex.counts, dir / ("lexicon_" + who));
    WriteMatrix(eval::MessageCorrelation(sp, ds, data::Split::kTest, art),
                dir / ("correlation_" + who));
  }
  {
    const auto lex = eval::BuildLexicon(orc.speaker(), ds, data::Split::kTrain,
                                        V, art);
    WriteMatrix(lex.counts, dir / "lexicon_oracle");
  }

  const eval::WordGloss gloss = orc.Gloss(ds);
  auto dialogs = [&](game::Speaker& s, game::Listener& l,
                     const std::string& file) {
    std::ofstream out(dir / file);
    eval::DumpDialogs(s, l, ds, data::Split::kTest, cfg.game, cfg.dialogs,
                      gloss, art, out);
  };
  if (pair) {
    nn::AgentSpeaker a_sp(*agents[0]), b_sp(*agents[1]);
    nn::AgentListener a_li(*agents[0]), b_li(*agents[1]);
    dialogs(a_sp, b_li, "dialogs_target.txt");
    dialogs(b_sp, a_li, "dialogs_novel.txt");
  } else {
    nn::AgentSpeaker sp(*agents[0]);
    nn::AgentListener li(*agents[0]);
    const bool speaks = cfg.role == train::Role::kSpeaker;
    dialogs(sp, orc.listener(), speaks ? "dialogs_target.txt" : "dialogs_novel.txt");
    dialogs(orc.speaker(), li, speaks ? "dialogs_novel.txt" : "dialogs_target.txt");
  }

  std::map<std::string, std::string> kv;
  kv["regime"] = train::RegimeName(rec.regime);
  kv["role"] = cfg.regime == train::Regime::kEmergent
                   ? "A-speaker/B-listener"
                   : train::RoleName(rec.role);
  kv["architecture"] = nn::ArchitectureName(cfg.architecture);
  kv["dataset"] = ds.name;
  kv["seed"] = std::to_string(cfg.seed);
  kv["epochs_run"] = std::to_string(rec.epochs.size());
  kv["best_epoch"] = std::to_string(rec.best_epoch);
  kv["stop_reason"] = rec.stop_reason;
  kv["teacher_cache_size"] = std::to_string(rec.teacher_cache_size);
  AddReport(kv, "test_target", rec.test_target);
  AddReport(kv, "test_novel", rec.test_novel);
  AddReport(kv, "dev_target", rec.dev_target);
  AddReport(kv, "dev_novel", rec.dev_novel);
  eval::WriteSummary(kv, dir / "summary.txt");
  result.agents = std::move(agents);
  return result;
}

}  // namespace refgame::run
