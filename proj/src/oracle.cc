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

#include "refgame/oracle.h"

#include <algorithm>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace refgame::oracle {
namespace {

int ArgMaxLowest(std::span<const double> v) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

// Augmented feature sets: raw attributes plus feature_dim + category.
std::vector<std::vector<int>> Augment(const data::Dataset& ds) {
  std::vector<std::vector<int>> out;
  out.reserve(ds.items.size());
  for (const Item& it : ds.items) {
    std::vector<int> f = it.features;
    if (it.category) f.push_back(ds.feature_dim + *it.category);
    out.push_back(std::move(f));
  }
  return out;
}

// Rational-speaker messages restricted to the candidate words `words`
// (augmented ids, ascending). Returned messages hold positions into `words`.
std::vector<Message> SpeakAll(const std::vector<std::vector<int>>& augmented,
                              int augmented_dim, const std::vector<int>& words,
                              const RsaOptions& opts) {
  const int n_items = static_cast<int>(augmented.size());
  // Literal listener normalizer: how many items carry each word.
  std::vector<int> carriers(augmented_dim, 0);
  for (const auto& f : augmented) {
    for (int a : f) ++carriers[a];
  }
  std::vector<int> word_pos(augmented_dim, -1);
  for (std::size_t k = 0; k < words.size(); ++k) {
    word_pos[words[k]] = static_cast<int>(k);
  }
  std::vector<Message> messages(n_items);
  std::vector<double> score(words.size());
  for (int i = 0; i < n_items; ++i) {
    // S1 score of word w for item i is L0(i | w): 1/carriers(w) if i carries
    // w, 0 otherwise; a word nobody carries leaves L0 uniform.
    for (std::size_t k = 0; k < words.size(); ++k) {
      const int c = carriers[words[k]];
      score[k] = c == 0 ? 1.0 / n_items : 0.0;
    }
    for (int a : augmented[i]) {
      if (word_pos[a] >= 0) score[word_pos[a]] = 1.0 / carriers[a];
    }
    Message& m = messages[i];
    m.reserve(opts.message_len);
    for (int t = 0; t < opts.message_len; ++t) {
      const int k = ArgMaxLowest(score);
      m.push_back(k);
      score[k] *= opts.mask;
    }
  }
  return messages;
}

std::vector<double> Bag(const Message& m, int vocab) {
  std::vector<double> bag(vocab, 0.0);
  for (int w : m) {
    if (w >= 0 && w < vocab) bag[w] += 1.0;
  }
  return bag;
}

}  // namespace

Lexicon Lexicon::Diagonal(int vocab, int features) {
  Lexicon lex;
  lex.weights = Tensor(vocab, features);
  for (int k = 0; k < std::min(vocab, features); ++k) lex.weights(k, k) = 1.0;
  return lex;
}

Message ShapesSpeak(const Item& item) {
  Message m(data::kShapesAttributes, -1);
  for (int f : item.features) {
    const int block = f / data::kShapesValues;
    if (block < 0 || block >= data::kShapesAttributes || m[block] != -1) {
      throw std::invalid_argument("ShapesSpeak: item " +
                                  std::to_string(item.id) +
                                  " is not a valid Shapes item");
    }
    m[block] = f;
  }
  if (std::find(m.begin(), m.end(), -1) != m.end()) {
    throw std::invalid_argument("ShapesSpeak: item " + std::to_string(item.id) +
                                " is missing an attribute");
  }
  return m;
}

int OverlapListen(const Message& message, std::span<const Item* const> context,
                  const Lexicon& lexicon) {
  if (context.empty()) throw std::invalid_argument("OverlapListen: empty context");
  std::vector<double> projected(lexicon.features(), 0.0);
  for (int w : message) {
    if (w < 0 || w >= lexicon.vocab()) continue;
    auto row = lexicon.weights.row(w);
    for (int f = 0; f < lexicon.features(); ++f) projected[f] += row[f];
  }
  std::vector<double> scores(context.size(), 0.0);
  for (std::size_t i = 0; i < context.size(); ++i) {
    for (int f : context[i]->features) {
      if (f < lexicon.features()) scores[i] += projected[f];
    }
  }
  return ArgMaxLowest(scores);
}

ShapesOracle::ShapesOracle()
    : lexicon_(Lexicon::Diagonal(data::kShapesVocab, data::kShapesFeatures)) {}

std::vector<Message> ShapesOracle::Speak(std::span<const Item* const> referents,
                                         Rng&) {
  std::vector<Message> out;
  out.reserve(referents.size());
  for (const Item* it : referents) out.push_back(ShapesSpeak(*it));
  return out;
}

std::vector<int> ShapesOracle::Listen(
    std::span<const Message> messages,
    std::span<const std::vector<const Item*>> contexts, Rng&) {
  std::vector<int> out;
  out.reserve(messages.size());
  for (std::size_t i = 0; i < messages.size(); ++i) {
    out.push_back(OverlapListen(messages[i], contexts[i], lexicon_));
  }
  return out;
}

// ---- RSA ------------------------------------------------------------------

const Message& RsaOracle::MessageFor(int item_id) const {
  auto it = index_.find(item_id);
  if (it == index_.end()) {
    throw std::out_of_range("RSA oracle has no message for item " +
                            std::to_string(item_id));
  }
  return messages[it->second];
}

bool RsaOracle::WordTrueOf(int word, const Item& item) const {
  if (word < 0 || word >= vocab_size()) return false;
  const int a = vocab_map[word];
  if (a < feature_dim) return item.Has(a);
  return item.category && *item.category == a - feature_dim;
}

void RsaOracle::Reindex() {
  index_.clear();
  for (std::size_t i = 0; i < item_ids.size(); ++i) {
    index_[item_ids[i]] = static_cast<int>(i);
  }
}

std::vector<Message> RsaFullVocabularyMessages(const data::Dataset& ds,
                                               const RsaOptions& opts) {
  const int augmented_dim = ds.feature_dim + ds.num_categories();
  std::vector<int> all(augmented_dim);
  std::iota(all.begin(), all.end(), 0);
  return SpeakAll(Augment(ds), augmented_dim, all, opts);
}

RsaOracle BuildRsaOracle(const data::Dataset& ds, const RsaOptions& opts) {
  if (opts.require_categories && !ds.has_categories()) {
    throw game::ConfigError("RSA oracle needs category labels on every item");
  }
  if (opts.vocab_size < 1 || opts.message_len < 1) {
    throw game::ConfigError("RSA oracle needs positive vocab and length");
  }
  const int n_categories = ds.num_categories();
  const int augmented_dim = ds.feature_dim + n_categories;
  const auto augmented = Augment(ds);

  // Stage one over every augmented feature.
  std::vector<int> all(augmented_dim);
  std::iota(all.begin(), all.end(), 0);
  const auto first = SpeakAll(augmented, augmented_dim, all, opts);

  // Usage counts; keep the most used words (ties toward lower id).
  std::vector<long> usage(augmented_dim, 0);
  for (const Message& m : first) {
    for (int w : m) ++usage[all[w]];
  }
  std::vector<int> ranked;
  for (int a = 0; a < augmented_dim; ++a) {
    if (usage[a] > 0) ranked.push_back(a);
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [&](int x, int y) { return usage[x] > usage[y]; });
  if (static_cast<int>(ranked.size()) > opts.vocab_size) {
    ranked.resize(opts.vocab_size);
  }
  std::sort(ranked.begin(), ranked.end());

  RsaOracle oracle;
  oracle.feature_dim = ds.feature_dim;
  oracle.num_categories = n_categories;
  oracle.message_len = opts.message_len;
  oracle.vocab_map = ranked;
  oracle.messages = SpeakAll(augmented, augmented_dim, ranked, opts);
  for (const Item& it : ds.items) oracle.item_ids.push_back(it.id);
  oracle.literal_lexicon.weights =
      Tensor(static_cast<int>(ranked.size()), augmented_dim);
  for (std::size_t k = 0; k < ranked.size(); ++k) {
    oracle.literal_lexicon.weights(static_cast<int>(k), ranked[k]) = 1.0;
  }
  oracle.Reindex();
  return oracle;
}

Message RsaSpeak(const RsaOracle& oracle, const Item& item) {
  return oracle.MessageFor(item.id);
}

int RsaListen(const RsaOracle& oracle, const Message& message,
              std::span<const Item* const> context) {
  if (context.empty()) throw std::invalid_argument("RsaListen: empty context");
  const int vocab = oracle.vocab_size();
  const std::vector<double> incoming = Bag(message, vocab);
  std::vector<double> scores(context.size(), 0.0);
  for (std::size_t i = 0; i < context.size(); ++i) {
    const std::vector<double> own = Bag(oracle.MessageFor(context[i]->id), vocab);
    for (int w = 0; w < vocab; ++w) scores[i] += own[w] * incoming[w];
  }
  return ArgMaxLowest(scores);
}

std::vector<Message> RsaAgent::Speak(std::span<const Item* const> referents,
                                     Rng&) {
  std::vector<Message> out;
  out.reserve(referents.size());
  for (const Item* it : referents) out.push_back(RsaSpeak(*oracle_, *it));
  return out;
}

std::vector<int> RsaAgent::Listen(
    std::span<const Message> messages,
    std::span<const std::vector<const Item*>> contexts, Rng&) {
  std::vector<int> out;
  out.reserve(messages.size());
  for (std::size_t i = 0; i < messages.size(); ++i) {
    out.push_back(RsaListen(*oracle_, messages[i], contexts[i]));
  }
  return out;
}

void WriteRsaOracle(const RsaOracle& oracle, const data::Dataset& ds,
                    std::ostream& out) {
  data::WriteDataset(ds, out);
  out << "#rsa-messages\tF=" << oracle.feature_dim
      << "\tC=" << oracle.num_categories << "\tV=" << oracle.vocab_size()
      << "\tw=" << oracle.message_len << "\tvocab=";
  for (std::size_t k = 0; k < oracle.vocab_map.size(); ++k) {
    if (k) out << ',';
    out << oracle.vocab_map[k];
  }
  out << '\n';
  for (std::size_t i = 0; i < oracle.item_ids.size(); ++i) {
    out << oracle.item_ids[i] << '\t';
    for (std::size_t k = 0; k < oracle.messages[i].size(); ++k) {
      if (k) out << ',';
      out << oracle.messages[i][k];
    }
    out << '\n';
  }
}

std::pair<data::Dataset, RsaOracle> ReadRsaOracle(std::istream& in) {
  std::stringstream dataset_text;
  std::string line, header;
  while (std::getline(in, line)) {
    if (line.rfind("#rsa-messages", 0) == 0) {
      header = line;
      break;
    }
    dataset_text << line << '\n';
  }
  if (header.empty()) throw data::DataError("missing #rsa-messages section");
  data::Dataset ds = data::ReadDataset(dataset_text);

  RsaOracle oracle;
  std::istringstream fields(header);
  std::string field;
  while (std::getline(fields, field, '\t')) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = field.substr(0, eq), val = field.substr(eq + 1);
    if (key == "F") oracle.feature_dim = std::stoi(val);
    else if (key == "C") oracle.num_categories = std::stoi(val);
    else if (key == "w") oracle.message_len = std::stoi(val);
    else if (key == "vocab") {
      std::istringstream vs(val);
      std::string tok;
      while (std::getline(vs, tok, ',')) oracle.vocab_map.push_back(std::stoi(tok));
    }
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw data::DataError("bad message line");
    oracle.item_ids.push_back(std::stoi(line.substr(0, tab)));
    Message m;
    std::istringstream ws(line.substr(tab + 1));
    std::string tok;
    while (std::getline(ws, tok, ',')) m.push_back(std::stoi(tok));
    if (static_cast<int>(m.size()) != oracle.message_len) {
      throw data::DataError("message for item " +
                            std::to_string(oracle.item_ids.back()) +
                            " has wrong length");
    }
    oracle.messages.push_back(std::move(m));
  }
  const int augmented_dim = oracle.feature_dim + oracle.num_categories;
  oracle.literal_lexicon.weights = Tensor(oracle.vocab_size(), augmented_dim);
  for (int k = 0; k < oracle.vocab_size(); ++k) {
    oracle.literal_lexicon.weights(k, oracle.vocab_map[k]) = 1.0;
  }
  oracle.Reindex();
  return {std::move(ds), std::move(oracle)};
}

}  // namespace refgame::oracle
