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

#ifndef REFGAME_EVAL_H_
#define REFGAME_EVAL_H_

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "refgame/data.h"
#include "refgame/game.h"
#include "refgame/oracle.h"
#include "refgame/rng.h"
#include "refgame/tensor.h"

namespace refgame::eval {

struct AccuracyReport {
  double mean = 0.0;   // percent
  double ci95 = 0.0;   // half-width, percent
  int n_resamples = 0;
  std::string pairing;
  std::vector<double> samples;  // per-resample accuracy, percent
  double mean_reward = 0.0;     // over every round played
};

// Every split item serves once as referent per resample, with freshly drawn
// distractors. The CI is the normal approximation over resample means.
// Resamples run in parallel, each with its own generator forked up front,
// so the report does not depend on the thread count.
AccuracyReport MeasureAccuracy(game::Speaker& speaker, game::Listener& listener,
                               const data::Dataset& ds, data::Split split,
                               const game::GameConfig& cfg, int n_resamples,
                               Rng& rng, std::string pairing = {});

// counts(word, feature): how often `word` was produced when the referent
// carried `feature`. Each word of a message counts once per referent
// feature.
struct LexiconCounts {
  Tensor counts;  // [vocab x features]
  long rounds = 0;

  int vocab() const { return counts.rows; }
  int features() const { return counts.cols; }
  double Total() const;
};

LexiconCounts BuildLexicon(game::Speaker& speaker, const data::Dataset& ds,
                           data::Split split, int vocab, Rng& rng);

// Cosine similarity of two count matrices viewed as flat vectors.
double LexiconCosine(const LexiconCounts& a, const LexiconCounts& b);

// Features k (k < min(V, F)) whose most produced word is k.
int DiagonalDominance(const LexiconCounts& lex);

// cell(i, j): mean bag-of-words overlap |m_x intersect m_y| / w over ordered
// pairs of distinct items x, y where x has feature i and y has feature j.
// All pairs are used when the split has at most 200 items, otherwise 1e5
// sampled pairs (each added in both orders, keeping the matrix symmetric).
Tensor MessageCorrelation(game::Speaker& speaker, const data::Dataset& ds,
                          data::Split split, Rng& rng);

// Word names and ground-truth test used by transcripts.
struct WordGloss {
  std::function<std::string(int)> name;
  std::function<bool(int, const data::Item&)> true_of;
};
WordGloss ShapesGloss(const data::Dataset& ds);
WordGloss RsaGloss(const oracle::RsaOracle& oracle, const data::Dataset& ds);

std::string ItemName(const data::Dataset& ds, const data::Item& item);

// Writes a header then n rounds: context (referent in **bold**), message
// words with '*' on words true of the referent, prediction, reward.
void DumpDialogs(game::Speaker& speaker, game::Listener& listener,
                 const data::Dataset& ds, data::Split split,
                 const game::GameConfig& cfg, int n, const WordGloss& gloss,
                 Rng& rng, std::ostream& out);

void WriteCsv(const Tensor& m, std::ostream& out);
// Plain (P2) graymap, each row scaled by its own maximum.
void WritePgm(const Tensor& m, std::ostream& out);
void WriteSummary(const std::map<std::string, std::string>& kv,
                  const std::filesystem::path& path);

}  // namespace refgame::eval

#endif  // REFGAME_EVAL_H_
