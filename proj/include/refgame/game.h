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

#ifndef REFGAME_GAME_H_
#define REFGAME_GAME_H_

#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "refgame/data.h"
#include "refgame/rng.h"

namespace refgame::game {

using data::Item;
using Message = std::vector<int>;

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GameConfig {
  int context_size = 5;
  int message_len = 3;
  int vocab_size = 30;
  int reward_win = 1;
  int reward_lose = -1;

  void Validate() const;
};

// A referent plus distractors in random order. Entries are positions into
// Dataset::items.
struct Context {
  int referent = -1;
  std::vector<int> items;
  int target = -1;  // index of referent within items
};

struct Round {
  Context context;
  Message message;
  int choice = -1;
  int reward = 0;
};

// Speakers see referents only; they never receive the distractors.
class Speaker {
 public:
  virtual ~Speaker() = default;
  virtual std::vector<Message> Speak(std::span<const Item* const> referents,
                                     Rng& rng) = 0;
};

// Listeners see the ordered context and the message, never the referent.
class Listener {
 public:
  virtual ~Listener() = default;
  virtual std::vector<int> Listen(
      std::span<const Message> messages,
      std::span<const std::vector<const Item*>> contexts, Rng& rng) = 0;
};

// Context for a given referent: context_size - 1 distinct distractors drawn
// without replacement from the referent's split, then shuffled together.
Context SampleContext(const data::Dataset& ds, data::Split split, int referent,
                      int context_size, Rng& rng);
// Same, with the referent drawn uniformly from the split.
Context SampleContext(const data::Dataset& ds, data::Split split,
                      int context_size, Rng& rng);

int ComputeReward(int target, int choice, const GameConfig& cfg = {});

std::vector<const Item*> ContextItems(const data::Dataset& ds,
                                      const Context& ctx);

// Plays one round per context. Every message must have cfg.message_len
// words in [0, cfg.vocab_size), otherwise ProtocolError.
std::vector<Round> PlayRounds(Speaker& speaker, Listener& listener,
                              const data::Dataset& ds,
                              std::span<const Context> contexts,
                              const GameConfig& cfg, Rng& rng);
Round PlayRound(Speaker& speaker, Listener& listener, const data::Dataset& ds,
                const Context& context, const GameConfig& cfg, Rng& rng);

// Transcript line: context item ids, message word ids, choice, reward.
void WriteRoundTsv(const Round& round, const data::Dataset& ds,
                   std::ostream& out);

}  // namespace refgame::game

#endif  // REFGAME_GAME_H_
