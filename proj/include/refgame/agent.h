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

#ifndef REFGAME_AGENT_H_
#define REFGAME_AGENT_H_

// Learning agent: item embedding, word embedding, message decoder (speaking)
// and message encoder (listening). The embeddings are shared by both roles
// of one agent.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "refgame/autodiff.h"
#include "refgame/data.h"
#include "refgame/game.h"
#include "refgame/rng.h"

namespace refgame::nn {

using data::Item;
using game::Message;

enum class Architecture { kLstm, kTransformer };
const char* ArchitectureName(Architecture a);
Architecture ParseArchitecture(const std::string& name);

enum class Mode { kSample, kArgmax };

struct AgentShape {
  Architecture arch = Architecture::kTransformer;
  int features = data::kShapesFeatures;
  int vocab = data::kShapesVocab;
  int message_len = 3;
  int dim = 64;
  int ff_dim = 64;
  double pos_dropout = 0.1;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Every trainable tensor of one agent, in a fixed order.
struct AgentParams {
  std::vector<ad::Parameter> tensors;

  int Find(const std::string& name) const;  // -1 if absent
  ad::Parameter& operator[](int i) { return tensors[i]; }
  const ad::Parameter& operator[](int i) const { return tensors[i]; }
  std::size_t size() const { return tensors.size(); }
  std::size_t NumScalars() const;
  void ZeroGrad();
  // Names of tensors holding NaN or infinity; empty when all finite.
  std::vector<std::string> NonFinite() const;
};

// Actions and their log-probabilities. For speaking there is one step per
// word; for listening a single step over the context.
struct PolicyOutput {
  std::vector<std::vector<int>> actions;  // [batch][step]
  std::vector<ad::Var> logprobs;          // per step, [batch x 1]
  std::vector<ad::Var> entropies;         // per step, [batch x 1]
  std::vector<Tensor> distributions;      // per step, [batch x options]

  int batch() const { return static_cast<int>(actions.size()); }
  int steps() const { return static_cast<int>(logprobs.size()); }
  ad::Var TotalLogProb() const;  // summed over steps
  ad::Var TotalEntropy() const;
  std::vector<Message> Messages() const { return actions; }
  std::vector<int> Choices() const;  // step 0 of each row
};

class Agent {
 public:
  Agent(const AgentShape& shape, std::uint64_t seed);

  const AgentShape& shape() const { return shape_; }
  AgentParams& params() { return params_; }
  const AgentParams& params() const { return params_; }

  // train=true enables positional-encoding dropout.
  PolicyOutput Speak(ad::Graph& g, std::span<const Item* const> referents,
                     Mode mode, Rng& rng, bool train = false);
  // Teacher forcing: log-probabilities of the given messages.
  PolicyOutput ScoreMessages(ad::Graph& g,
                             std::span<const Item* const> referents,
                             std::span<const Message> messages, Rng& rng,
                             bool train = false);
  PolicyOutput Listen(ad::Graph& g, std::span<const Message> messages,
                      std::span<const std::vector<const Item*>> contexts,
                      Mode mode, Rng& rng, bool train = false);

  // Building blocks, exposed for tests.
  ad::Var EmbedItems(ad::Graph& g, std::span<const Item* const> items);
  ad::Var EncodeMessages(ad::Graph& g, std::span<const Message> messages,
                         Rng& rng, bool train = false);

 private:
  struct Attention {
    int wq, bq, wk, bk, wv, bv, wo, bo;
  };
  struct Norm {
    int gain, bias;
  };
  struct Lstm {
    int wx, wh, b;
  };
  struct Layout {
    int item_w, item_b, word_e, start, out_w, out_b;
    Lstm dec_lstm, enc_lstm;
    Attention dec_self, dec_cross, enc_self;
    Norm dec_n1, dec_n2, dec_n3, enc_n1, enc_n2;
    int dec_ff1_w, dec_ff1_b, dec_ff2_w, dec_ff2_b;
    int enc_ff1_w, enc_ff1_b, enc_ff2_w, enc_ff2_b;
  };

  int AddParam(const std::string& name, int rows, int cols, Rng& rng,
               double init);
  Attention AddAttention(const std::string& prefix, Rng& rng);
  Norm AddNorm(const std::string& prefix);

  ad::Var P(ad::Graph& g, int idx) { return g.Param(params_[idx]); }
  ad::Var Linear(ad::Graph& g, ad::Var x, int w, int b);
  ad::Var WordInput(ad::Graph& g, std::span<const int> words, int position,
                    Rng& rng, bool train);
  ad::Var StartInput(ad::Graph& g, int batch, Rng& rng, bool train);
  std::pair<ad::Var, ad::Var> LstmCell(ad::Graph& g, const Lstm& cell,
                                       ad::Var x, ad::Var h, ad::Var c);
  ad::Var FeedForward(ad::Graph& g, ad::Var x, int w1, int b1, int w2, int b2);

  // Decoder shared by Speak and ScoreMessages: forced == nullptr samples or
  // argmaxes, otherwise feeds and scores the given words.
  PolicyOutput Decode(ad::Graph& g, std::span<const Item* const> referents,
                      Mode mode, std::span<const Message> forced, Rng& rng,
                      bool train);
  void CheckFinite(const Tensor& logits, const char* where) const;

  AgentShape shape_;
  AgentParams params_;
  Layout layout_{};
  Tensor positional_;  // [max_len x dim]
};

// Row-major dense [n x F] matrix of 0/1 features.
Tensor DenseFeatures(std::span<const Item* const> items, int feature_dim);

// Adapters to the game interfaces. Each call builds a forward-only graph.
class AgentSpeaker : public game::Speaker {
 public:
  AgentSpeaker(Agent& agent, Mode mode = Mode::kArgmax)
      : agent_(&agent), mode_(mode) {}
  std::vector<Message> Speak(std::span<const Item* const> referents,
                             Rng& rng) override;

 private:
  Agent* agent_;
  Mode mode_;
};

class AgentListener : public game::Listener {
 public:
  AgentListener(Agent& agent, Mode mode = Mode::kArgmax)
      : agent_(&agent), mode_(mode) {}
  std::vector<int> Listen(std::span<const Message> messages,
                          std::span<const std::vector<const Item*>> contexts,
                          Rng& rng) override;

 private:
  Agent* agent_;
  Mode mode_;
};

// Checkpoint: text header (architecture, F, V, w, d, ff, seed), one manifest
// line per tensor ("tensor <name> <rows> <cols>"), a "blob <bytes>" line,
// then every tensor as little-endian float32 in manifest order.
void SaveCheckpoint(const Agent& agent, std::uint64_t seed, std::ostream& out);
void SaveCheckpoint(const Agent& agent, std::uint64_t seed,
                    const std::filesystem::path& path);
Agent LoadCheckpoint(std::istream& in, std::uint64_t* seed = nullptr);
Agent LoadCheckpoint(const std::filesystem::path& path,
                     std::uint64_t* seed = nullptr);

}  // namespace refgame::nn

#endif  // REFGAME_AGENT_H_
