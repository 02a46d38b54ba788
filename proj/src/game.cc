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

#include "refgame/game.h"

#include <algorithm>
#include <ostream>

namespace refgame::game {

void GameConfig::Validate() const {
  if (context_size < 2) throw ConfigError("context_size must be >= 2");
  if (message_len < 1) throw ConfigError("message_len must be >= 1");
  if (vocab_size < 1) throw ConfigError("vocab_size must be >= 1");
}

Context SampleContext(const data::Dataset& ds, data::Split split, int referent,
                      int context_size, Rng& rng) {
  const std::vector<int>& pool = ds.split(split);
  if (context_size < 2) throw ConfigError("context_size must be >= 2");
  if (std::find(pool.begin(), pool.end(), referent) == pool.end()) {
    throw ConfigError("referent " + std::to_string(referent) +
                      " is not in split " + data::SplitName(split));
  }
  if (static_cast<int>(pool.size()) < context_size) {
    throw ConfigError(std::string("split ") + data::SplitName(split) +
                      " has " + std::to_string(pool.size()) +
                      " items, fewer than context_size " +
                      std::to_string(context_size));
  }
  Context ctx;
  ctx.referent = referent;
  ctx.items.reserve(context_size);
  ctx.items.push_back(referent);
  // Rejection is cheap: the context is tiny relative to every split we use,
  // and the small-split case falls back to a partial shuffle.
  if (pool.size() >= 4 * static_cast<std::size_t>(context_size)) {
    while (static_cast<int>(ctx.items.size()) < context_size) {
      const int cand = pool[rng.Below(pool.size())];
      if (std::find(ctx.items.begin(), ctx.items.end(), cand) ==
          ctx.items.end()) {
        ctx.items.push_back(cand);
      }
    }
  } else {
    std::vector<int> rest;
    for (int p : pool) {
      if (p != referent) rest.push_back(p);
    }
    for (int k = 0; static_cast<int>(ctx.items.size()) < context_size; ++k) {
      const std::size_t j = k + rng.Below(rest.size() - k);
      std::swap(rest[k], rest[j]);
      ctx.items.push_back(rest[k]);
    }
  }
  rng.Shuffle(ctx.items);
  ctx.target = static_cast<int>(
      std::find(ctx.items.begin(), ctx.items.end(), referent) -
      ctx.items.begin());
  return ctx;
}

Context SampleContext(const data::Dataset& ds, data::Split split,
                      int context_size, Rng& rng) {
  const std::vector<int>& pool = ds.split(split);
  if (pool.empty()) throw ConfigError("empty split");
  const int referent = pool[rng.Below(pool.size())];
  return SampleContext(ds, split, referent, context_size, rng);
}

int ComputeReward(int target, int choice, const GameConfig& cfg) {
  return target == choice ? cfg.reward_win : cfg.reward_lose;
}

std::vector<const Item*> ContextItems(const data::Dataset& ds,
                                      const Context& ctx) {
  std::vector<const Item*> out;
  out.reserve(ctx.items.size());
  for (int p : ctx.items) out.push_back(&ds.items[p]);
  return out;
}

std::vector<Round> PlayRounds(Speaker& speaker, Listener& listener,
                              const data::Dataset& ds,
                              std::span<const Context> contexts,
                              const GameConfig& cfg, Rng& rng) {
  std::vector<const Item*> referents;
  std::vector<std::vector<const Item*>> views;
  for (const Context& c : contexts) {
    referents.push_back(&ds.items[c.referent]);
    views.push_back(ContextItems(ds, c));
  }
  std::vector<Message> messages = speaker.Speak(referents, rng);
  if (messages.size() != contexts.size()) {
    throw ProtocolError("speaker returned " + std::to_string(messages.size()) +
                        " messages for " + std::to_string(contexts.size()) +
                        " referents");
  }
  for (const Message& m : messages) {
    if (static_cast<int>(m.size()) != cfg.message_len) {
      throw ProtocolError("message length " + std::to_string(m.size()) +
                          " != " + std::to_string(cfg.message_len));
    }
    for (int w : m) {
      if (w < 0 || w >= cfg.vocab_size) {
        throw ProtocolError("word id " + std::to_string(w) +
                            " outside vocabulary");
      }
    }
  }
  std::vector<int> choices = listener.Listen(messages, views, rng);
  if (choices.size() != contexts.size()) {
    throw ProtocolError("listener returned wrong number of choices");
  }
  std::vector<Round> rounds(contexts.size());
  for (std::size_t i = 0; i < contexts.size(); ++i) {
    rounds[i].context = contexts[i];
    rounds[i].message = std::move(messages[i]);
    rounds[i].choice = choices[i];
    rounds[i].reward = ComputeReward(contexts[i].target, choices[i], cfg);
  }
  return rounds;
}

Round PlayRound(Speaker& speaker, Listener& listener, const data::Dataset& ds,
                const Context& context, const GameConfig& cfg, Rng& rng) {
  return PlayRounds(speaker, listener, ds, std::span(&context, 1), cfg, rng)[0];
}

void WriteRoundTsv(const Round& round, const data::Dataset& ds,
                   std::ostream& out) {
  for (std::size_t i = 0; i < round.context.items.size(); ++i) {
    if (i) out << ',';
    out << ds.items[round.context.items[i]].id;
  }
  out << '\t';
  for (std::size_t i = 0; i < round.message.size(); ++i) {
    if (i) out << ',';
    out << round.message[i];
  }
  out << '\t' << round.choice << '\t' << round.reward << '\n';
}

}  // namespace refgame::game
