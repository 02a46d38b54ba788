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

#include "refgame/agent.h"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <tuple>

namespace refgame::nn {
namespace {

using ad::Var;

int ArgMaxLowest(std::span<const double> v) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

Tensor Sinusoid(int max_len, int dim) {
  Tensor pe(max_len, dim);
  for (int pos = 0; pos < max_len; ++pos) {
    for (int i = 0; i < dim; i += 2) {
      const double freq = std::pow(10000.0, -static_cast<double>(i) / dim);
      pe(pos, i) = std::sin(pos * freq);
      if (i + 1 < dim) pe(pos, i + 1) = std::cos(pos * freq);
    }
  }
  return pe;
}

Tensor RowOf(const Tensor& t, int r) {
  Tensor out(1, t.cols);
  auto src = t.row(r);
  std::copy(src.begin(), src.end(), out.data.begin());
  return out;
}

}  // namespace

const char* ArchitectureName(Architecture a) {
  return a == Architecture::kLstm ? "lstm" : "transformer";
}

Architecture ParseArchitecture(const std::string& name) {
  if (name == "lstm" || name == "rnn") return Architecture::kLstm;
  if (name == "transformer" || name == "trans") {
    return Architecture::kTransformer;
  }
  throw std::invalid_argument("unknown architecture '" + name + "'");
}

int AgentParams::Find(const std::string& name) const {
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (tensors[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

std::size_t AgentParams::NumScalars() const {
  std::size_t n = 0;
  for (const auto& p : tensors) n += p.value.size();
  return n;
}

void AgentParams::ZeroGrad() {
  for (auto& p : tensors) p.ZeroGrad();
}

std::vector<std::string> AgentParams::NonFinite() const {
  std::vector<std::string> bad;
  for (const auto& p : tensors) {
    for (double v : p.value.data) {
      if (!std::isfinite(v)) {
        bad.push_back(p.name);
        break;
      }
    }
  }
  return bad;
}

Var PolicyOutput::TotalLogProb() const {
  return logprobs.size() == 1 ? logprobs[0] : ad::Sum(logprobs);
}

Var PolicyOutput::TotalEntropy() const {
  return entropies.size() == 1 ? entropies[0] : ad::Sum(entropies);
}

std::vector<int> PolicyOutput::Choices() const {
  std::vector<int> out;
  out.reserve(actions.size());
  for (const auto& a : actions) out.push_back(a.at(0));
  return out;
}

Tensor DenseFeatures(std::span<const Item* const> items, int feature_dim) {
  Tensor t(static_cast<int>(items.size()), feature_dim);
  for (std::size_t r = 0; r < items.size(); ++r) {
    for (int f : items[r]->features) {
      if (f < 0 || f >= feature_dim) {
        throw std::invalid_argument("item " + std::to_string(items[r]->id) +
                                    " has feature " + std::to_string(f) +
                                    " outside F=" +
                                    std::to_string(feature_dim));
      }
      t(static_cast<int>(r), f) = 1.0;
    }
  }
  return t;
}

// ---- Construction ---------------------------------------------------------

int Agent::AddParam(const std::string& name, int rows, int cols, Rng& rng,
                    double init) {
  Tensor v(rows, cols);
  if (init > 0.0) {
    for (double& x : v.data) x = rng.Uniform(-init, init);
  }
  params_.tensors.emplace_back(name, std::move(v));
  return static_cast<int>(params_.tensors.size()) - 1;
}

Agent::Attention Agent::AddAttention(const std::string& prefix, Rng& rng) {
  const int d = shape_.dim;
  const double s = 1.0 / std::sqrt(static_cast<double>(d));
  Attention a;
  a.wq = AddParam(prefix + ".wq", d, d, rng, s);
  a.bq = AddParam(prefix + ".bq", 1, d, rng, 0.0);
  a.wk = AddParam(prefix + ".wk", d, d, rng, s);
  a.bk = AddParam(prefix + ".bk", 1, d, rng, 0.0);
  a.wv = AddParam(prefix + ".wv", d, d, rng, s);
  a.bv = AddParam(prefix + ".bv", 1, d, rng, 0.0);
  a.wo = AddParam(prefix + ".wo", d, d, rng, s);
  a.bo = AddParam(prefix + ".bo", 1, d, rng, 0.0);
  return a;
}

Agent::Norm Agent::AddNorm(const std::string& prefix) {
  const int d = shape_.dim;
  Norm n;
  params_.tensors.emplace_back(prefix + ".gain", Tensor(1, d, 1.0));
  n.gain = static_cast<int>(params_.tensors.size()) - 1;
  params_.tensors.emplace_back(prefix + ".bias", Tensor(1, d, 0.0));
  n.bias = static_cast<int>(params_.tensors.size()) - 1;
  return n;
}

Agent::Agent(const AgentShape& shape, std::uint64_t seed) : shape_(shape) {
  if (shape.features < 1 || shape.vocab < 1 || shape.message_len < 1 ||
      shape.dim < 2 || shape.ff_dim < 1) {
    throw std::invalid_argument("Agent: invalid shape");
  }
  Rng rng(seed);
  const int d = shape.dim;
  const double s = 1.0 / std::sqrt(static_cast<double>(d));
  auto& L = layout_;
  L.item_w = AddParam("item.w", shape.features, d, rng, s);
  L.item_b = AddParam("item.b", 1, d, rng, 0.0);
  L.word_e = AddParam("word.e", shape.vocab, d, rng, s);
  L.start = AddParam("dec.start", 1, d, rng, s);
  if (shape.arch == Architecture::kLstm) {
    L.dec_lstm = {AddParam("dec.lstm.wx", d, 4 * d, rng, s),
                  AddParam("dec.lstm.wh", d, 4 * d, rng, s),
                  AddParam("dec.lstm.b", 1, 4 * d, rng, 0.0)};
    L.enc_lstm = {AddParam("enc.lstm.wx", d, 4 * d, rng, s),
                  AddParam("enc.lstm.wh", d, 4 * d, rng, s),
                  AddParam("enc.lstm.b", 1, 4 * d, rng, 0.0)};
  } else {
    const double sf = 1.0 / std::sqrt(static_cast<double>(shape.ff_dim));
    L.dec_self = AddAttention("dec.self", rng);
    L.dec_n1 = AddNorm("dec.norm1");
    L.dec_cross = AddAttention("dec.cross", rng);
    L.dec_n2 = AddNorm("dec.norm2");
    L.dec_ff1_w = AddParam("dec.ff1.w", d, shape.ff_dim, rng, s);
    L.dec_ff1_b = AddParam("dec.ff1.b", 1, shape.ff_dim, rng, 0.0);
    L.dec_ff2_w = AddParam("dec.ff2.w", shape.ff_dim, d, rng, sf);
    L.dec_ff2_b = AddParam("dec.ff2.b", 1, d, rng, 0.0);
    L.dec_n3 = AddNorm("dec.norm3");
    L.enc_self = AddAttention("enc.self", rng);
    L.enc_n1 = AddNorm("enc.norm1");
    L.enc_ff1_w = AddParam("enc.ff1.w", d, shape.ff_dim, rng, s);
    L.enc_ff1_b = AddParam("enc.ff1.b", 1, shape.ff_dim, rng, 0.0);
    L.enc_ff2_w = AddParam("enc.ff2.w", shape.ff_dim, d, rng, sf);
    L.enc_ff2_b = AddParam("enc.ff2.b", 1, d, rng, 0.0);
    L.enc_n2 = AddNorm("enc.norm2");
    positional_ = Sinusoid(shape.message_len + 1, d);
  }
  L.out_w = AddParam("dec.out.w", d, shape.vocab, rng, s);
  L.out_b = AddParam("dec.out.b", 1, shape.vocab, rng, 0.0);
}

// ---- Building blocks ------------------------------------------------------

Var Agent::Linear(ad::Graph& g, Var x, int w, int b) {
  return ad::AddRow(ad::MatMul(x, P(g, w)), P(g, b));
}

Var Agent::FeedForward(ad::Graph& g, Var x, int w1, int b1, int w2, int b2) {
  return Linear(g, ad::Relu(Linear(g, x, w1, b1)), w2, b2);
}

Var Agent::EmbedItems(ad::Graph& g, std::span<const Item* const> items) {
  Var dense = g.Constant(DenseFeatures(items, shape_.features));
  return Linear(g, dense, layout_.item_w, layout_.item_b);
}

Var Agent::WordInput(ad::Graph& g, std::span<const int> words, int position,
                     Rng& rng, bool train) {
  Var e = ad::Gather(P(g, layout_.word_e), words);
  if (shape_.arch == Architecture::kLstm) return e;
  e = ad::Scale(e, std::sqrt(static_cast<double>(shape_.dim)));
  e = ad::AddRow(e, g.Constant(RowOf(positional_, position)));
  return train ? ad::Dropout(e, shape_.pos_dropout, rng) : e;
}

Var Agent::StartInput(ad::Graph& g, int batch, Rng& rng, bool train) {
  std::vector<int> zeros(batch, 0);
  Var e = ad::Gather(P(g, layout_.start), zeros);
  if (shape_.arch == Architecture::kLstm) return e;
  e = ad::Scale(e, std::sqrt(static_cast<double>(shape_.dim)));
  e = ad::AddRow(e, g.Constant(RowOf(positional_, 0)));
  return train ? ad::Dropout(e, shape_.pos_dropout, rng) : e;
}

std::pair<Var, Var> Agent::LstmCell(ad::Graph& g, const Lstm& cell, Var x,
                                    Var h, Var c) {
  const int d = shape_.dim;
  Var z = ad::AddRow(
      ad::Add(ad::MatMul(x, P(g, cell.wx)), ad::MatMul(h, P(g, cell.wh))),
      P(g, cell.b));
  Var i = ad::Sigmoid(ad::SliceCols(z, 0, d));
  Var f = ad::Sigmoid(ad::SliceCols(z, d, d));
  Var u = ad::Tanh(ad::SliceCols(z, 2 * d, d));
  Var o = ad::Sigmoid(ad::SliceCols(z, 3 * d, d));
  Var c_next = ad::Add(ad::Mul(f, c), ad::Mul(i, u));
  Var h_next = ad::Mul(o, ad::Tanh(c_next));
  return {h_next, c_next};
}

void Agent::CheckFinite(const Tensor& logits, const char* where) const {
  for (double v : logits.data) {
    if (!std::isfinite(v)) {
      std::string msg = std::string("non-finite logits in ") + where;
      const auto bad = params_.NonFinite();
      if (bad.empty()) {
        msg += " (all parameters finite)";
      } else {
        msg += "; non-finite parameters:";
        for (const auto& n : bad) msg += " " + n;
      }
      throw NumericError(msg);
    }
  }
}

// ---- Speaking -------------------------------------------------------------

PolicyOutput Agent::Decode(ad::Graph& g, std::span<const Item* const> referents,
                           Mode mode, std::span<const Message> forced,
                           Rng& rng, bool train) {
  const int batch = static_cast<int>(referents.size());
  const int len = shape_.message_len;
  if (!forced.empty()) {
    if (static_cast<int>(forced.size()) != batch) {
      throw std::invalid_argument("ScoreMessages: one message per referent");
    }
    for (const Message& m : forced) {
      if (static_cast<int>(m.size()) != len) {
        throw std::invalid_argument("ScoreMessages: message length mismatch");
      }
    }
  }
  PolicyOutput out;
  out.actions.assign(batch, {});
  Var memory = EmbedItems(g, referents);

  // Per-architecture recurrent state.
  Var h, c;
  std::vector<Var> self_keys, self_values;
  Var cross_k, cross_v;
  const auto& L = layout_;
  if (shape_.arch == Architecture::kLstm) {
    h = memory;
    c = g.Constant(Tensor(batch, shape_.dim));
  } else {
    cross_k = Linear(g, memory, L.dec_cross.wk, L.dec_cross.bk);
    cross_v = Linear(g, memory, L.dec_cross.wv, L.dec_cross.bv);
  }

  std::vector<int> prev(batch, 0);
  for (int t = 0; t < len; ++t) {
    Var x = t == 0 ? StartInput(g, batch, rng, train)
                   : WordInput(g, prev, t, rng, train);
    Var top;
    if (shape_.arch == Architecture::kLstm) {
      std::tie(h, c) = LstmCell(g, L.dec_lstm, x, h, c);
      top = h;
    } else {
      Var q = Linear(g, x, L.dec_self.wq, L.dec_self.bq);
      self_keys.push_back(Linear(g, x, L.dec_self.wk, L.dec_self.bk));
      self_values.push_back(Linear(g, x, L.dec_self.wv, L.dec_self.bv));
      Var a = Linear(g, ad::Attend(q, self_keys, self_values), L.dec_self.wo,
                     L.dec_self.bo);
      Var h1 = ad::LayerNorm(ad::Add(x, a), P(g, L.dec_n1.gain),
                             P(g, L.dec_n1.bias));
      Var q2 = Linear(g, h1, L.dec_cross.wq, L.dec_cross.bq);
      Var ck[] = {cross_k};
      Var cv[] = {cross_v};
      Var cr = Linear(g, ad::Attend(q2, ck, cv), L.dec_cross.wo,
                      L.dec_cross.bo);
      Var h2 = ad::LayerNorm(ad::Add(h1, cr), P(g, L.dec_n2.gain),
                             P(g, L.dec_n2.bias));
      Var ff = FeedForward(g, h2, L.dec_ff1_w, L.dec_ff1_b, L.dec_ff2_w,
                           L.dec_ff2_b);
      top = ad::LayerNorm(ad::Add(h2, ff), P(g, L.dec_n3.gain),
                          P(g, L.dec_n3.bias));
    }
    Var logits = Linear(g, top, L.out_w, L.out_b);
    CheckFinite(logits.value(), "decoder");
    Var logp = ad::LogSoftmax(logits);
    const Tensor& lp = logp.value();
    Tensor probs(lp.rows, lp.cols);
    for (std::size_t i = 0; i < lp.size(); ++i) probs.data[i] = std::exp(lp.data[i]);

    std::vector<int> chosen(batch);
    for (int b = 0; b < batch; ++b) {
      if (!forced.empty()) {
        chosen[b] = forced[b][t];
      } else if (mode == Mode::kSample) {
        chosen[b] = static_cast<int>(rng.Categorical(probs.row(b)));
      } else {
        chosen[b] = ArgMaxLowest(lp.row(b));
      }
      out.actions[b].push_back(chosen[b]);
    }
    out.logprobs.push_back(ad::Pick(logp, chosen));
    out.entropies.push_back(ad::EntropyFromLogProbs(logp));
    out.distributions.push_back(std::move(probs));
    prev = std::move(chosen);
  }
  return out;
}

PolicyOutput Agent::Speak(ad::Graph& g, std::span<const Item* const> referents,
                          Mode mode, Rng& rng, bool train) {
  return Decode(g, referents, mode, {}, rng, train);
}

PolicyOutput Agent::ScoreMessages(ad::Graph& g,
                                  std::span<const Item* const> referents,
                                  std::span<const Message> messages, Rng& rng,
                                  bool train) {
  if (messages.empty()) throw std::invalid_argument("ScoreMessages: empty");
  return Decode(g, referents, Mode::kArgmax, messages, rng, train);
}

// ---- Listening ------------------------------------------------------------

Var Agent::EncodeMessages(ad::Graph& g, std::span<const Message> messages,
                          Rng& rng, bool train) {
  const int batch = static_cast<int>(messages.size());
  const int len = shape_.message_len;
  for (const Message& m : messages) {
    if (static_cast<int>(m.size()) != len) {
      throw game::ProtocolError("listener expects messages of length " +
                                std::to_string(len) + ", got " +
                                std::to_string(m.size()));
    }
  }
  const auto& L = layout_;
  std::vector<Var> inputs;
  for (int t = 0; t < len; ++t) {
    std::vector<int> words(batch);
    for (int b = 0; b < batch; ++b) words[b] = messages[b][t];
    inputs.push_back(WordInput(g, words, t, rng, train));
  }
  if (shape_.arch == Architecture::kLstm) {
    Var h = g.Constant(Tensor(batch, shape_.dim));
    Var c = g.Constant(Tensor(batch, shape_.dim));
    for (Var x : inputs) std::tie(h, c) = LstmCell(g, L.enc_lstm, x, h, c);
    return h;
  }
  std::vector<Var> keys, values, outputs;
  for (Var x : inputs) {
    keys.push_back(Linear(g, x, L.enc_self.wk, L.enc_self.bk));
    values.push_back(Linear(g, x, L.enc_self.wv, L.enc_self.bv));
  }
  for (Var x : inputs) {
    Var q = Linear(g, x, L.enc_self.wq, L.enc_self.bq);
    Var a = Linear(g, ad::Attend(q, keys, values), L.enc_self.wo,
                   L.enc_self.bo);
    Var h1 = ad::LayerNorm(ad::Add(x, a), P(g, L.enc_n1.gain),
                           P(g, L.enc_n1.bias));
    Var ff = FeedForward(g, h1, L.enc_ff1_w, L.enc_ff1_b, L.enc_ff2_w,
                         L.enc_ff2_b);
    outputs.push_back(ad::LayerNorm(ad::Add(h1, ff), P(g, L.enc_n2.gain),
                                    P(g, L.enc_n2.bias)));
  }
  return ad::Scale(ad::Sum(outputs), 1.0 / len);
}

PolicyOutput Agent::Listen(ad::Graph& g, std::span<const Message> messages,
                           std::span<const std::vector<const Item*>> contexts,
                           Mode mode, Rng& rng, bool train) {
  const int batch = static_cast<int>(messages.size());
  if (static_cast<int>(contexts.size()) != batch || batch == 0) {
    throw std::invalid_argument("Listen: one context per message");
  }
  const int k = static_cast<int>(contexts[0].size());
  std::vector<const Item*> flat;
  flat.reserve(static_cast<std::size_t>(batch) * k);
  for (const auto& ctx : contexts) {
    if (static_cast<int>(ctx.size()) != k) {
      throw std::invalid_argument("Listen: contexts must share one size");
    }
    flat.insert(flat.end(), ctx.begin(), ctx.end());
  }
  Var rep = EncodeMessages(g, messages, rng, train);
  Var items = EmbedItems(g, flat);
  Var scores = ad::GroupScores(rep, items, k);
  CheckFinite(scores.value(), "listener");
  Var logp = ad::LogSoftmax(scores);
  const Tensor& lp = logp.value();
  Tensor probs(lp.rows, lp.cols);
  for (std::size_t i = 0; i < lp.size(); ++i) probs.data[i] = std::exp(lp.data[i]);
  PolicyOutput out;
  std::vector<int> chosen(batch);
  for (int b = 0; b < batch; ++b) {
    chosen[b] = mode == Mode::kSample
                    ? static_cast<int>(rng.Categorical(probs.row(b)))
                    : ArgMaxLowest(lp.row(b));
    out.actions.push_back({chosen[b]});
  }
  out.logprobs.push_back(ad::Pick(logp, chosen));
  out.entropies.push_back(ad::EntropyFromLogProbs(logp));
  out.distributions.push_back(std::move(probs));
  return out;
}

// ---- Game adapters --------------------------------------------------------

std::vector<Message> AgentSpeaker::Speak(std::span<const Item* const> referents,
                                         Rng& rng) {
  ad::Graph g(false);
  return agent_->Speak(g, referents, mode_, rng, false).Messages();
}

std::vector<int> AgentListener::Listen(
    std::span<const Message> messages,
    std::span<const std::vector<const Item*>> contexts, Rng& rng) {
  ad::Graph g(false);
  return agent_->Listen(g, messages, contexts, mode_, rng, false).Choices();
}

// ---- Checkpoints ----------------------------------------------------------

void SaveCheckpoint(const Agent& agent, std::uint64_t seed, std::ostream& out) {
  const AgentShape& s = agent.shape();
  out << "refgame-checkpoint v1\tarch=" << ArchitectureName(s.arch)
      << "\tF=" << s.features << "\tV=" << s.vocab << "\tw=" << s.message_len
      << "\td=" << s.dim << "\tff=" << s.ff_dim << "\tseed=" << seed << "\n";
  std::size_t count = 0;
  for (const auto& p : agent.params().tensors) {
    out << "tensor " << p.name << ' ' << p.value.rows << ' ' << p.value.cols
        << '\n';
    count += p.value.size();
  }
  out << "blob " << count * sizeof(float) << '\n';
  for (const auto& p : agent.params().tensors) {
    for (double v : p.value.data) {
      std::uint32_t bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
      if constexpr (std::endian::native == std::endian::big) {
        bits = __builtin_bswap32(bits);
      }
      char bytes[4];
      std::memcpy(bytes, &bits, 4);
      out.write(bytes, 4);
    }
  }
}

void SaveCheckpoint(const Agent& agent, std::uint64_t seed,
                    const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  SaveCheckpoint(agent, seed, out);
}

Agent LoadCheckpoint(std::istream& in, std::uint64_t* seed_out) {
  std::string header;
  if (!std::getline(in, header) ||
      header.rfind("refgame-checkpoint v1", 0) != 0) {
    throw std::runtime_error("not a refgame checkpoint");
  }
  AgentShape shape;
  std::uint64_t seed = 0;
  std::istringstream fields(header);
  std::string field;
  while (std::getline(fields, field, '\t')) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = field.substr(0, eq), val = field.substr(eq + 1);
    if (key == "arch") shape.arch = ParseArchitecture(val);
    else if (key == "F") shape.features = std::stoi(val);
    else if (key == "V") shape.vocab = std::stoi(val);
    else if (key == "w") shape.message_len = std::stoi(val);
    else if (key == "d") shape.dim = std::stoi(val);
    else if (key == "ff") shape.ff_dim = std::stoi(val);
    else if (key == "seed") seed = std::stoull(val);
  }
  Agent agent(shape, seed);
  auto& tensors = agent.params().tensors;
  std::string line;
  for (auto& p : tensors) {
    if (!std::getline(in, line)) throw std::runtime_error("truncated manifest");
    std::istringstream ls(line);
    std::string tag, name;
    int rows = 0, cols = 0;
    ls >> tag >> name >> rows >> cols;
    if (tag != "tensor" || name != p.name || rows != p.value.rows ||
        cols != p.value.cols) {
      throw std::runtime_error("checkpoint manifest mismatch at '" + line +
                               "', expected " + p.name);
    }
  }
  if (!std::getline(in, line) || line.rfind("blob ", 0) != 0) {
    throw std::runtime_error("checkpoint: missing blob line");
  }
  for (auto& p : tensors) {
    for (double& v : p.value.data) {
      char bytes[4];
      if (!in.read(bytes, 4)) throw std::runtime_error("checkpoint: short blob");
      std::uint32_t bits;
      std::memcpy(&bits, bytes, 4);
      if constexpr (std::endian::native == std::endian::big) {
        bits = __builtin_bswap32(bits);
      }
      v = static_cast<double>(std::bit_cast<float>(bits));
    }
  }
  if (seed_out) *seed_out = seed;
  return agent;
}

Agent LoadCheckpoint(const std::filesystem::path& path,
                     std::uint64_t* seed_out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return LoadCheckpoint(in, seed_out);
}

}  // namespace refgame::nn
