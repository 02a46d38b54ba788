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

#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "refgame/data.h"

namespace refgame::oracle {
namespace {

using data::Dataset;
using data::Item;

TEST(ShapesOracle, SpeaksAttributeWordsInOrder) {
  Item it{123, {1, 12, 23}, std::nullopt};
  EXPECT_EQ(ShapesSpeak(it), (Message{1, 12, 23}));
  Item bad{1, {1, 2, 23}, std::nullopt};
  EXPECT_THROW(ShapesSpeak(bad), std::invalid_argument);
}

TEST(ShapesOracle, ListenerIgnoresWordOrder) {
  Item a{0, {0, 10, 20}, {}}, b{1, {1, 11, 21}, {}}, c{2, {0, 11, 22}, {}};
  const Item* ctx[] = {&a, &b, &c};
  const Lexicon lex = Lexicon::Diagonal(30, 30);
  EXPECT_EQ(OverlapListen({1, 11, 21}, ctx, lex), 1);
  EXPECT_EQ(OverlapListen({21, 1, 11}, ctx, lex), 1);
  EXPECT_EQ(OverlapListen({22, 0, 11}, ctx, lex), 2);
}

TEST(ShapesOracle, ExhaustivePairwisePlayIsPerfect) {
  // The referent's own message overlaps it in all three words and any other
  // item in at most two, so every context is solved.
  const Dataset ds = data::GenerateShapes(1);
  const Lexicon lex = Lexicon::Diagonal(30, 30);
  for (const Item& ref : ds.items) {
    const Message m = ShapesSpeak(ref);
    for (const Item& other : ds.items) {
      if (other.id == ref.id) continue;
      const Item* ctx1[] = {&other, &ref};
      const Item* ctx2[] = {&ref, &other};
      ASSERT_EQ(OverlapListen(m, ctx1, lex), 1);
      ASSERT_EQ(OverlapListen(m, ctx2, lex), 0);
    }
  }
}

TEST(ShapesOracle, DiagonalLexicon) {
  const Lexicon lex = Lexicon::Diagonal(30, 30);
  for (int w = 0; w < 30; ++w) {
    for (int f = 0; f < 30; ++f) EXPECT_EQ(lex.weights(w, f), w == f ? 1.0 : 0.0);
  }
}

// Four items over three attributes and two categories (augmented ids 3, 4):
//   A {0,1} cat0   B {0,2} cat0   C {0} cat1   D {1,2} cat1
Dataset ToyConcepts() {
  Dataset ds;
  ds.name = "toy";
  ds.feature_dim = 3;
  ds.vocab_size = 5;
  ds.items = {{10, {0, 1}, 0}, {11, {0, 2}, 0}, {12, {0}, 1}, {13, {1, 2}, 1}};
  ds.splits = {std::vector<int>{0, 1}, std::vector<int>{2}, std::vector<int>{3}};
  ds.category_names = {"c0", "c1"};
  return ds;
}

TEST(Rsa, RationalSpeakerPrefersSpecificWords) {
  RsaOptions opts;
  opts.message_len = 2;
  const auto msgs = RsaFullVocabularyMessages(ToyConcepts(), opts);
  // A: attribute 1 (2 carriers) ties category 0 (2 carriers); the lower id
  // wins, then the other follows once the first is masked.
  EXPECT_EQ(msgs[0], (Message{1, 3}));
  // C: category 1 (1/2) beats attribute 0 (1/3).
  EXPECT_EQ(msgs[2], (Message{4, 0}));
}

TEST(Rsa, MaskedWordsRepeatOnlyAfterExhaustion) {
  RsaOptions opts;
  opts.message_len = 4;
  const auto msgs = RsaFullVocabularyMessages(ToyConcepts(), opts);
  // C carries two words; after both are masked the remaining (zero-score)
  // words tie at 0, below the masked ones, so a masked word recurs.
  EXPECT_EQ(msgs[2][0], 4);
  EXPECT_EQ(msgs[2][1], 0);
  EXPECT_EQ(msgs[2].size(), 4u);
}

TEST(Rsa, VocabularyCappedToMostUsedWords) {
  RsaOptions opts;
  opts.message_len = 2;
  opts.vocab_size = 2;
  const Dataset ds = ToyConcepts();
  const RsaOracle o = BuildRsaOracle(ds, opts);
  EXPECT_EQ(o.vocab_size(), 2);
  EXPECT_TRUE(std::is_sorted(o.vocab_map.begin(), o.vocab_map.end()));
  for (const auto& m : o.messages) {
    EXPECT_EQ(m.size(), 2u);
    for (int w : m) {
      EXPECT_GE(w, 0);
      EXPECT_LT(w, 2);
    }
  }
}

TEST(Rsa, RequiresCategories) {
  Dataset ds = ToyConcepts();
  for (auto& it : ds.items) it.category.reset();
  ds.category_names.clear();
  EXPECT_THROW(BuildRsaOracle(ds), game::ConfigError);
  RsaOptions loose;
  loose.require_categories = false;
  loose.message_len = 2;
  EXPECT_NO_THROW(BuildRsaOracle(ds, loose));
}

TEST(Rsa, WordTruthAndListener) {
  RsaOptions opts;
  opts.message_len = 2;
  const Dataset ds = ToyConcepts();
  const RsaOracle o = BuildRsaOracle(ds, opts);
  for (std::size_t i = 0; i < ds.items.size(); ++i) {
    for (int w : o.messages[i]) EXPECT_TRUE(o.WordTrueOf(w, ds.items[i]));
  }
  // The listener recovers each referent against every other item.
  for (const Item& ref : ds.items) {
    for (const Item& other : ds.items) {
      if (other.id == ref.id) continue;
      const Item* ctx[] = {&other, &ref};
      EXPECT_EQ(RsaListen(o, o.MessageFor(ref.id), ctx), 1);
    }
  }
  EXPECT_THROW(o.MessageFor(999), std::out_of_range);
}

TEST(Rsa, SynthCorpusOracleIsAccurate) {
  const Dataset ds = data::SynthConcepts(1, 20, data::kConceptsItems);
  const RsaOracle o = BuildRsaOracle(ds);
  EXPECT_EQ(o.vocab_size(), data::kConceptsVocab);
  EXPECT_EQ(o.message_len, 10);
  // Every word of every message names something true of the item.
  int untrue = 0, total = 0;
  for (std::size_t i = 0; i < ds.items.size(); ++i) {
    for (int w : o.messages[i]) {
      untrue += !o.WordTrueOf(w, ds.items[i]);
      ++total;
    }
  }
  EXPECT_LT(untrue, total / 2);
}

TEST(Rsa, FileRoundTrip) {
  const Dataset ds = data::SynthConcepts(2, 5, 80);
  const RsaOracle o = BuildRsaOracle(ds);
  std::stringstream s;
  WriteRsaOracle(o, ds, s);
  const auto [ds2, o2] = ReadRsaOracle(s);
  EXPECT_EQ(ds2.items, ds.items);
  EXPECT_TRUE(o2 == o);
}

}  // namespace
}  // namespace refgame::oracle
