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

#ifndef REFGAME_ORACLE_H_
#define REFGAME_ORACLE_H_

// Ground-truth interlocutors. Every argmax in this file breaks ties toward
// the lowest index.

#include <iosfwd>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "refgame/data.h"
#include "refgame/game.h"
#include "refgame/tensor.h"

namespace refgame::oracle {

using data::Item;
using game::Message;

// Word-by-feature weights, [vocab x features].
struct Lexicon {
  Tensor weights;

  int vocab() const { return weights.rows; }
  int features() const { return weights.cols; }
  // Word k means feature k for k < min(vocab, features).
  static Lexicon Diagonal(int vocab, int features);
};

// Shapes oracle speaker: the word for attribute a sits at position a and
// equals that attribute's feature index.
Message ShapesSpeak(const Item& item);

// Bag-of-words overlap listener: project the message's word counts through
// the lexicon into feature space and pick the context item with the largest
// inner product. Word order is ignored.
int OverlapListen(const Message& message, std::span<const Item* const> context,
                  const Lexicon& lexicon);

class ShapesOracle : public game::Speaker, public game::Listener {
 public:
  ShapesOracle();
  std::vector<Message> Speak(std::span<const Item* const> referents,
                             Rng& rng) override;
  std::vector<int> Listen(std::span<const Message> messages,
                          std::span<const std::vector<const Item*>> contexts,
                          Rng& rng) override;
  const Lexicon& lexicon() const { return lexicon_; }

 private:
  Lexicon lexicon_;
};

// Precomputed rational-speaker messages over a capped vocabulary. Words
// index `vocab_map`, whose entries are augmented feature ids: raw attributes
// occupy [0, feature_dim) and category c is feature_dim + c.
struct RsaOracle {
  int feature_dim = 0;
  int num_categories = 0;
  int message_len = 0;
  std::vector<int> vocab_map;
  std::vector<int> item_ids;
  std::vector<Message> messages;  // parallel to item_ids
  Lexicon literal_lexicon;        // [vocab x (feature_dim + num_categories)]

  int vocab_size() const { return static_cast<int>(vocab_map.size()); }
  // Throws std::out_of_range for an item id not seen at build time.
  const Message& MessageFor(int item_id) const;
  bool Knows(int item_id) const { return index_.count(item_id) > 0; }
  // Does word w name an attribute or the category of `item`?
  bool WordTrueOf(int word, const Item& item) const;
  void Reindex();

  friend bool operator==(const RsaOracle& a, const RsaOracle& b) {
    return a.feature_dim == b.feature_dim &&
           a.num_categories == b.num_categories &&
           a.message_len == b.message_len && a.vocab_map == b.vocab_map &&
           a.item_ids == b.item_ids && a.messages == b.messages &&
           a.literal_lexicon.weights.data == b.literal_lexicon.weights.data;
  }

 private:
  std::unordered_map<int, int> index_;
};

struct RsaOptions {
  int vocab_size = data::kConceptsVocab;
  int message_len = 10;
  double mask = 1e-9;
  // Off only for toy checks on datasets without category labels.
  bool require_categories = true;
};

// Builds messages for every item of the dataset (all splits):
//  1. augment each item's attributes with its category indicator;
//  2. literal listener L0(item | word) uniform over items carrying the word;
//     rational speaker scores each word by L0 of the target;
//  3. each message takes message_len argmaxes, multiplying a chosen word's
//     score by `mask` once picked;
//  4-6. count word usage and keep the vocab_size most used words;
//  7. rebuild the speaker over the kept words and regenerate all messages.
// Throws game::ConfigError if categories are required but missing.
RsaOracle BuildRsaOracle(const data::Dataset& ds, const RsaOptions& opts = {});

// First stage only (steps 1-3) over the full augmented vocabulary; exposed
// for inspection. Word ids are augmented feature ids.
std::vector<Message> RsaFullVocabularyMessages(const data::Dataset& ds,
                                               const RsaOptions& opts = {});

Message RsaSpeak(const RsaOracle& oracle, const Item& item);

// Sums the one-hot words of each context item's own precomputed message and
// of the incoming message, and picks the largest inner product.
int RsaListen(const RsaOracle& oracle, const Message& message,
              std::span<const Item* const> context);

class RsaAgent : public game::Speaker, public game::Listener {
 public:
  explicit RsaAgent(const RsaOracle& oracle) : oracle_(&oracle) {}
  std::vector<Message> Speak(std::span<const Item* const> referents,
                             Rng& rng) override;
  std::vector<int> Listen(std::span<const Message> messages,
                          std::span<const std::vector<const Item*>> contexts,
                          Rng& rng) override;

 private:
  const RsaOracle* oracle_;
};

// Dataset text followed by "#rsa-messages" header and one
// "item_id<TAB>w1,...,wN" line per item.
void WriteRsaOracle(const RsaOracle& oracle, const data::Dataset& ds,
                    std::ostream& out);
std::pair<data::Dataset, RsaOracle> ReadRsaOracle(std::istream& in);

}  // namespace refgame::oracle

#endif  // REFGAME_ORACLE_H_
