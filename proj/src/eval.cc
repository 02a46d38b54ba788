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

#include "refgame/eval.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>

namespace refgame::eval {
namespace {

std::vector<const data::Item*> SplitItems(const data::Dataset& ds,
                                          data::Split split) {
  std::vector<const data::Item*> out;
  for (int pos : ds.split(split)) out.push_back(&ds.items[pos]);
  return out;
}

// Multiset intersection size of two messages.
int Overlap(const game::Message& a, const game::Message& b, int vocab) {
  std::vector<int> ca(vocab, 0), cb(vocab, 0);
  for (int w : a) ++ca[w];
  for (int w : b) ++cb[w];
  int s = 0;
  for (int w = 0; w < vocab; ++w) s += std::min(ca[w], cb[w]);
  return s;
}

}  // namespace

AccuracyReport MeasureAccuracy(game::Speaker& speaker, game::Listener& listener,
                               const data::Dataset& ds, data::Split split,
                               const game::GameConfig& cfg, int n_resamples,
                               Rng& rng, std::string pairing) {
  const std::vector<int>& pool = ds.split(split);
  if (pool.empty()) throw game::ConfigError("MeasureAccuracy: empty split");
  if (n_resamples < 1) throw game::ConfigError("n_resamples must be >= 1");
  std::vector<Rng> streams;
  streams.reserve(n_resamples);
  for (int r = 0; r < n_resamples; ++r) streams.push_back(rng.Fork(r));

  std::vector<double> acc(n_resamples, 0.0);
  std::vector<long> reward_sum(n_resamples, 0);
#pragma omp parallel for schedule(dynamic)
  for (int r = 0; r < n_resamples; ++r) {
    Rng& local = streams[r];
    std::vector<game::Context> contexts;
    contexts.reserve(pool.size());
    for (int ref : pool) {
      contexts.push_back(
          game::SampleContext(ds, split, ref, cfg.context_size, local));
    }
    const auto rounds =
        game::PlayRounds(speaker, listener, ds, contexts, cfg, local);
    long wins = 0;
    for (const auto& round : rounds) {
      wins += round.reward == cfg.reward_win;
      reward_sum[r] += round.reward;
    }
    acc[r] = 100.0 * static_cast<double>(wins) / rounds.size();
  }

  AccuracyReport rep;
  rep.n_resamples = n_resamples;
  rep.pairing = std::move(pairing);
  rep.samples = acc;
  double sum = 0.0;
  for (double a : acc) sum += a;
  rep.mean = sum / n_resamples;
  if (n_resamples > 1) {
    double ss = 0.0;
    for (double a : acc) ss += (a - rep.mean) * (a - rep.mean);
    const double sd = std::sqrt(ss / (n_resamples - 1));
    rep.ci95 = 1.96 * sd / std::sqrt(static_cast<double>(n_resamples));
  }
  long total_reward = 0;
  for (long s : reward_sum) total_reward += s;
  rep.mean_reward = static_cast<double>(total_reward) /
                    (static_cast<double>(n_resamples) * pool.size());
  return rep;
}

double LexiconCounts::Total() const {
  double s = 0.0;
  for (double v : counts.data) s += v;
  return s;
}

LexiconCounts BuildLexicon(game::Speaker& speaker, const data::Dataset& ds,
                           data::Split split, int vocab, Rng& rng) {
  const auto items = SplitItems(ds, split);
  LexiconCounts lex;
  lex.counts = Tensor(vocab, ds.feature_dim);
  if (items.empty()) return lex;
  const auto messages = speaker.Speak(items, rng);
  for (std::size_t i = 0; i < items.size(); ++i) {
    for (int w : messages[i]) {
      for (int f : items[i]->features) lex.counts(w, f) += 1.0;
    }
  }
  lex.rounds = static_cast<long>(items.size());
  return lex;
}

double LexiconCosine(const LexiconCounts& a, const LexiconCounts& b) {
  if (!a.counts.SameShape(b.counts)) {
    throw std::invalid_argument("LexiconCosine: shape mismatch");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.counts.size(); ++i) {
    dot += a.counts.data[i] * b.counts.data[i];
    na += a.counts.data[i] * a.counts.data[i];
    nb += b.counts.data[i] * b.counts.data[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / std::sqrt(na * nb);
}

int DiagonalDominance(const LexiconCounts& lex) {
  const int n = std::min(lex.vocab(), lex.features());
  int hits = 0;
  for (int f = 0; f < n; ++f) {
    int best = 0;
    for (int w = 1; w < lex.vocab(); ++w) {
      if (lex.counts(w, f) > lex.counts(best, f)) best = w;
    }
    hits += best == f && lex.counts(best, f) > 0.0;
  }
  return hits;
}

Tensor MessageCorrelation(game::Speaker& speaker, const data::Dataset& ds,
                          data::Split split, Rng& rng) {
  constexpr std::size_t kExactLimit = 200;
  constexpr long kSampledPairs = 100000;
  const auto items = SplitItems(ds, split);
  const int F = ds.feature_dim;
  Tensor sum(F, F), weight(F, F);
  if (items.size() < 2) return sum;
  const auto messages = speaker.Speak(items, rng);
  int vocab = 1;
  int len = 1;
  for (const auto& m : messages) {
    len = std::max<int>(len, static_cast<int>(m.size()));
    for (int w : m) vocab = std::max(vocab, w + 1);
  }
  auto add_pair = [&](std::size_t x, std::size_t y) {
    const double ov =
        static_cast<double>(Overlap(messages[x], messages[y], vocab)) / len;
    for (int i : items[x]->features) {
      for (int j : items[y]->features) {
        sum(i, j) += ov;
        weight(i, j) += 1.0;
      }
    }
  };
  if (items.size() <= kExactLimit) {
    for (std::size_t x = 0; x < items.size(); ++x) {
      for (std::size_t y = 0; y < items.size(); ++y) {
        if (x != y) add_pair(x, y);
      }
    }
  } else {
    for (long s = 0; s < kSampledPairs; ++s) {
      const std::size_t x = rng.Below(items.size());
      std::size_t y = rng.Below(items.size() - 1);
      if (y >= x) ++y;
      add_pair(x, y);
      add_pair(y, x);
    }
  }
  for (std::size_t k = 0; k < sum.size(); ++k) {
    sum.data[k] = weight.data[k] > 0.0 ? sum.data[k] / weight.data[k] : 0.0;
  }
  return sum;
}

WordGloss ShapesGloss(const data::Dataset& ds) {
  WordGloss g;
  const auto names = ds.feature_names;
  g.name = [names](int w) {
    return w >= 0 && w < static_cast<int>(names.size()) ? names[w]
                                                         : std::to_string(w);
  };
  g.true_of = [](int w, const data::Item& it) { return it.Has(w); };
  return g;
}

WordGloss RsaGloss(const oracle::RsaOracle& oracle, const data::Dataset& ds) {
  WordGloss g;
  const auto fnames = ds.feature_names;
  const auto cnames = ds.category_names;
  const auto vocab_map = oracle.vocab_map;
  const int fdim = oracle.feature_dim;
  g.name = [=](int w) -> std::string {
    if (w < 0 || w >= static_cast<int>(vocab_map.size())) {
      return std::to_string(w);
    }
    const int a = vocab_map[w];
    if (a < fdim) {
      return a < static_cast<int>(fnames.size()) ? fnames[a]
                                                 : "attr_" + std::to_string(a);
    }
    const int c = a - fdim;
    return c < static_cast<int>(cnames.size()) ? cnames[c]
                                               : "category_" + std::to_string(c);
  };
  const oracle::RsaOracle* o = &oracle;
  g.true_of = [o](int w, const data::Item& it) { return o->WordTrueOf(w, it); };
  return g;
}

std::string ItemName(const data::Dataset& ds, const data::Item& item) {
  if (ds.name == "shapes" && !ds.feature_names.empty()) {
    std::string s;
    for (std::size_t k = 0; k < item.features.size(); ++k) {
      if (k) s += '-';
      s += ds.feature_names[item.features[k]];
    }
    return s;
  }
  std::string s = "item" + std::to_string(item.id);
  if (item.category && *item.category < static_cast<int>(ds.category_names.size())) {
    s += "(" + ds.category_names[*item.category] + ")";
  }
  return s;
}

void DumpDialogs(game::Speaker& speaker, game::Listener& listener,
                 const data::Dataset& ds, data::Split split,
                 const game::GameConfig& cfg, int n, const WordGloss& gloss,
                 Rng& rng, std::ostream& out) {
  out << "# dialogs\tdataset=" << ds.name << "\tsplit="
      << data::SplitName(split) << "\tn=" << n << "\n";
  if (n <= 0) return;
  std::vector<game::Context> contexts;
  for (int i = 0; i < n; ++i) {
    contexts.push_back(game::SampleContext(ds, split, cfg.context_size, rng));
  }
  const auto rounds = game::PlayRounds(speaker, listener, ds, contexts, cfg, rng);
  for (const auto& r : rounds) {
    const data::Item& ref = ds.items[r.context.referent];
    out << "context: {";
    for (std::size_t i = 0; i < r.context.items.size(); ++i) {
      if (i) out << ", ";
      const std::string name = ItemName(ds, ds.items[r.context.items[i]]);
      if (static_cast<int>(i) == r.context.target) {
        out << "**" << name << "**";
      } else {
        out << name;
      }
    }
    out << "}\tmessage: [";
    for (std::size_t k = 0; k < r.message.size(); ++k) {
      if (k) out << ", ";
      out << gloss.name(r.message[k]);
      if (gloss.true_of(r.message[k], ref)) out << '*';
    }
    out << "]\tpred: " << ItemName(ds, ds.items[r.context.items[r.choice]])
        << "\treward: " << (r.reward > 0 ? "+1" : "-1") << "\n";
  }
}

void WriteCsv(const Tensor& m, std::ostream& out) {
  for (int r = 0; r < m.rows; ++r) {
    for (int c = 0; c < m.cols; ++c) {
      if (c) out << ',';
      out << m(r, c);
    }
    out << '\n';
  }
}

void WritePgm(const Tensor& m, std::ostream& out) {
  out << "P2\n" << m.cols << ' ' << m.rows << "\n255\n";
  for (int r = 0; r < m.rows; ++r) {
    double mx = 0.0;
    for (double v : m.row(r)) mx = std::max(mx, v);
    for (int c = 0; c < m.cols; ++c) {
      if (c) out << ' ';
      const int level =
          mx > 0.0 ? static_cast<int>(std::lround(255.0 * m(r, c) / mx)) : 0;
      out << std::clamp(level, 0, 255);
    }
    out << '\n';
  }
}

void WriteSummary(const std::map<std::string, std::string>& kv,
                  const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& [k, v] : kv) out << k << '=' << v << '\n';
}

}  // namespace refgame::eval
