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

#ifndef REFGAME_AUTODIFF_H_
#define REFGAME_AUTODIFF_H_

// Tape-based reverse-mode differentiation over batched matrices.
//
// A Graph records every operation in creation order, which is already a
// topological order, so Backward() is a single reverse sweep. Parameters are
// referenced rather than copied: their values are read in place and their
// gradients accumulate straight into Parameter::grad, so several graphs can
// contribute to one optimizer step.

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "refgame/rng.h"
#include "refgame/tensor.h"

namespace refgame::ad {

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor v)
      : name(std::move(n)), value(std::move(v)), grad(value.rows, value.cols) {}
  void ZeroGrad() { grad.Fill(0.0); }
};

class Graph;

// Handle to a node of a Graph. Cheap to copy; only valid while the graph
// lives.
class Var {
 public:
  Var() = default;
  const Tensor& value() const;
  int rows() const { return value().rows; }
  int cols() const { return value().cols; }
  double scalar() const { return value().data.at(0); }
  Graph* graph() const { return graph_; }
  int id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

 private:
  friend class Graph;
  Var(Graph* g, int id) : graph_(g), id_(id) {}
  Graph* graph_ = nullptr;
  int id_ = -1;
};

class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, int)>;

  // With record=false no backward closures are kept: forward-only evaluation.
  explicit Graph(bool record = true) : record_(record) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var Constant(Tensor t);
  Var Param(Parameter& p);

  // Reverse sweep from a 1x1 node. Parameter gradients accumulate.
  void Backward(Var loss);

  bool recording() const { return record_; }
  std::size_t size() const { return nodes_.size(); }

  const Tensor& value(int id) const {
    const Node& n = nodes_[id];
    return n.external ? *n.external : n.value;
  }
  bool needs_grad(int id) const { return nodes_[id].needs_grad; }
  // Gradient buffer for node id, allocated (zeroed) on first use.
  Tensor& grad(int id);
  bool has_grad(int id) const;

  // Appends a node computed by an op. fn is dropped when no input needs a
  // gradient or the graph is not recording.
  Var Emit(Tensor value, std::span<const Var> inputs, BackwardFn fn);

 private:
  struct Node {
    Tensor value;
    const Tensor* external = nullptr;
    Tensor grad;
    Tensor* grad_sink = nullptr;
    BackwardFn backward;
    bool needs_grad = false;
  };
  std::vector<Node> nodes_;
  bool record_;
};

// ---- Operations -----------------------------------------------------------
// Shapes are [rows x cols]; "col" means an [n x 1] column vector.

Var MatMul(Var a, Var b);                 // [m x k] * [k x n]
Var Add(Var a, Var b);                    // same shape
Var AddRow(Var a, Var row);               // a + broadcast [1 x n]
Var Sub(Var a, Var b);
Var Mul(Var a, Var b);                    // elementwise
Var Scale(Var a, double s);
Var Sigmoid(Var a);
Var Tanh(Var a);
Var Relu(Var a);
Var Exp(Var a);
Var LogSoftmax(Var a);                    // per row
Var Softmax(Var a);                       // per row
Var SumRows(Var a);                       // [m x n] -> col
Var SumAll(Var a);                        // -> 1x1
Var Mean(Var a);                          // -> 1x1
Var RowsDot(Var a, Var b);                // -> col
Var ScaleRows(Var a, Var col);            // a[r,:] * col[r]
Var Pick(Var a, std::span<const int> idx);  // a[r, idx[r]] -> col
Var Gather(Var table, std::span<const int> ids);  // rows of table
Var SliceCols(Var a, int start, int len);
Var ConcatCols(std::span<const Var> parts);
Var LayerNorm(Var x, Var gain, Var bias, double eps = 1e-5);
// Inverted dropout with a mask drawn from rng; identity when p == 0.
Var Dropout(Var x, double p, Rng& rng);
// Scaled dot-product attention of one query row per batch element over
// per-position key/value rows: softmax_s(q.k_s / sqrt(d)) weighted sum of v_s.
Var Attend(Var q, std::span<const Var> keys, std::span<const Var> values);
// r: [B x d], e: [B*K x d] grouped by batch element -> [B x K] inner products.
Var GroupScores(Var r, Var e, int group);
Var Sum(std::span<const Var> parts);      // elementwise sum, same shapes

// Entropy of each row distribution given its log-probabilities -> col.
Var EntropyFromLogProbs(Var logp);

}  // namespace refgame::ad

#endif  // REFGAME_AUTODIFF_H_
