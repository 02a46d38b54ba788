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

#include "refgame/autodiff.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "refgame/kernels.h"

namespace refgame::ad {

const Tensor& Var::value() const { return graph_->value(id_); }

Var Graph::Constant(Tensor t) {
  Node n;
  n.value = std::move(t);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Graph::Param(Parameter& p) {
  Node n;
  n.external = &p.value;
  n.grad_sink = &p.grad;
  n.needs_grad = record_;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Tensor& Graph::grad(int id) {
  Node& n = nodes_[id];
  if (n.grad_sink) return *n.grad_sink;
  if (n.grad.empty()) {
    const Tensor& v = value(id);
    n.grad = Tensor(v.rows, v.cols);
  }
  return n.grad;
}

bool Graph::has_grad(int id) const {
  const Node& n = nodes_[id];
  return n.grad_sink != nullptr || !n.grad.empty();
}

Var Graph::Emit(Tensor value, std::span<const Var> inputs, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  if (record_) {
    for (const Var& v : inputs) {
      if (v.graph() != this) {
        throw std::logic_error("autodiff: mixing nodes of different graphs");
      }
      n.needs_grad = n.needs_grad || nodes_[v.id()].needs_grad;
    }
    if (n.needs_grad) n.backward = std::move(fn);
  }
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

void Graph::Backward(Var loss) {
  if (!record_) throw std::logic_error("autodiff: graph is not recording");
  if (loss.graph() != this || loss.value().size() != 1) {
    throw std::invalid_argument("autodiff: Backward needs a 1x1 node");
  }
  if (!std::isfinite(loss.scalar())) {
    throw std::runtime_error("autodiff: non-finite loss " +
                             std::to_string(loss.scalar()));
  }
  if (!nodes_[loss.id()].needs_grad) return;
  grad(loss.id()).data[0] += 1.0;
  for (int id = loss.id(); id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.backward || n.grad.empty()) continue;
    n.backward(*this, id);
  }
}

namespace {

Tensor Like(const Tensor& t) { return Tensor(t.rows, t.cols); }

void RequireSameShape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.SameShape(b)) {
    throw std::invalid_argument(std::string("autodiff: shape mismatch in ") +
                                op + ": [" + std::to_string(a.rows) + "x" +
                                std::to_string(a.cols) + "] vs [" +
                                std::to_string(b.rows) + "x" +
                                std::to_string(b.cols) + "]");
  }
}

// Unary elementwise op with derivative expressed through (x, y).
template <class F, class D>
Var Unary(Var a, F f, D dfdx) {
  const Tensor& x = a.value();
  Tensor y = Like(x);
  for (std::size_t i = 0; i < x.size(); ++i) y.data[i] = f(x.data[i]);
  const int ia = a.id();
  Var in[] = {a};
  return a.graph()->Emit(std::move(y), in, [ia, dfdx](Graph& g, int self) {
    if (!g.needs_grad(ia)) return;
    const Tensor& dy = g.grad(self);
    const Tensor& xv = g.value(ia);
    const Tensor& yv = g.value(self);
    Tensor& dx = g.grad(ia);
    for (std::size_t i = 0; i < dy.size(); ++i) {
      dx.data[i] += dy.data[i] * dfdx(xv.data[i], yv.data[i]);
    }
  });
}

}  // namespace

Var MatMul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols != bv.rows) {
    throw std::invalid_argument("autodiff: MatMul inner dimensions " +
                                std::to_string(av.cols) + " vs " +
                                std::to_string(bv.rows));
  }
  const int m = av.rows, k = av.cols, n = bv.cols;
  Tensor out(m, n);
  kernels::Gemm(av.data.data(), bv.data.data(), out.data.data(), m, k, n);
  const int ia = a.id(), ib = b.id();
  Var in[] = {a, b};
  return a.graph()->Emit(std::move(out), in, [ia, ib, m, k, n](Graph& g,
                                                               int self) {
    const Tensor& dout = g.grad(self);
    if (g.needs_grad(ia)) {
      kernels::GemmTransB(dout.data.data(), g.value(ib).data.data(),
                          g.grad(ia).data.data(), m, n, k);
    }
    if (g.needs_grad(ib)) {
      kernels::GemmTransA(g.value(ia).data.data(), dout.data.data(),
                          g.grad(ib).data.data(), m, k, n);
    }
  });
}

Var Add(Var a, Var b) {
  RequireSameShape(a.value(), b.value(), "Add");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += bv.data[i];
  const int ia = a.id(), ib = b.id();
  Var in[] = {a, b};
  return a.graph()->Emit(std::move(out), in, [ia, ib](Graph& g, int self) {
    const Tensor& d = g.grad(self);
    for (int t : {ia, ib}) {
      if (!g.needs_grad(t)) continue;
      Tensor& dt = g.grad(t);
      for (std::size_t i = 0; i < d.size(); ++i) dt.data[i] += d.data[i];
    }
  });
}

Var Sub(Var a, Var b) {
  RequireSameShape(a.value(), b.value(), "Sub");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] -= bv.data[i];
  const int ia = a.id(), ib = b.id();
  Var in[] = {a, b};
  return a.graph()->Emit(std::move(out), in, [ia, ib](Graph& g, int self) {
    const Tensor& d = g.grad(self);
    if (g.needs_grad(ia)) {
      Tensor& da = g.grad(ia);
      for (std::size_t i = 0; i < d.size(); ++i) da.data[i] += d.data[i];
    }
    if (g.needs_grad(ib)) {
      Tensor& db = g.grad(ib);
      for (std::size_t i = 0; i < d.size(); ++i) db.data[i] -= d.data[i];
    }
  });
}

Var AddRow(Var a, Var row) {
  const Tensor& av = a.value();
  const Tensor& rv = row.value();
  if (rv.rows != 1 || rv.cols != av.cols) {
    throw std::invalid_argument("autodiff: AddRow expects [1 x cols] bias");
  }
  Tensor out = av;
  for (int r = 0; r < out.rows; ++r) {
    auto o = out.row(r);
    for (int c = 0; c < out.cols; ++c) o[c] += rv.data[c];
  }
  const int ia = a.id(), ir = row.id();
  Var in[] = {a, row};
  return a.graph()->Emit(std::move(out), in, [ia, ir](Graph& g, int self) {
    const Tensor& d = g.grad(self);
    if (g.needs_grad(ia)) {
      Tensor& da = g.grad(ia);
      for (std::size_t i = 0; i < d.size(); ++i) da.data[i] += d.data[i];
    }
    if (g.needs_grad(ir)) {
      Tensor& dr = g.grad(ir);
      for (int r = 0; r < d.rows; ++r) {
        auto dd = d.row(r);
        for (int c = 0; c < d.cols; ++c) dr.data[c] += dd[c];
      }
    }
  });
}

Var Mul(Var a, Var b) {
  RequireSameShape(a.value(), b.value(), "Mul");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= bv.data[i];
  const int ia = a.id(), ib = b.id();
  Var in[] = {a, b};
  return a.graph()->Emit(std::move(out), in, [ia, ib](Graph& g, int self) {
    const Tensor& d = g.grad(self);
    if (g.needs_grad(ia)) {
      Tensor& da = g.grad(ia);
      const Tensor& bv = g.value(ib);
      for (std::size_t i = 0; i < d.size(); ++i) {
        da.data[i] += d.data[i] * bv.data[i];
      }
    }
    if (g.needs_grad(ib)) {
      Tensor& db = g.grad(ib);
      const Tensor& av = g.value(ia);
      for (std::size_t i = 0; i < d.size(); ++i) {
        db.data[i] += d.data[i] * av.data[i];
      }
    }
  });
}

Var Scale(Var a, double s) {
  return Unary(
      a, [s](double x) { return s * x; },
      [s](double, double) { return s; });
}

Var Sigmoid(Var a) {
  return Unary(
      a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var Tanh(Var a) {
  return Unary(
      a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Var Relu(Var a) {
  return Unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var Exp(Var a) {
  return Unary(
      a, [](double x) { return std::exp(x); },
      [](double, double y) { return y; });
}

Var LogSoftmax(Var a) {
  const Tensor& x = a.value();
  Tensor y = Like(x);
  for (int r = 0; r < x.rows; ++r) {
    auto xr = x.row(r);
    auto yr = y.row(r);
    const double mx = *std::max_element(xr.begin(), xr.end());
    double s = 0.0;
    for (double v : xr) s += std::exp(v - mx);
    const double lse = mx + std::log(s);
    for (int c = 0; c < x.cols; ++c) yr[c] = xr[c] - lse;
  }
  const int ia = a.id();
  Var in[] = {a};
  return a.graph()->Emit(std::move(y), in, [ia](Graph& g, int self) {
    if (!g.needs_grad(ia)) return;
    const Tensor& dy = g.grad(self);
    const Tensor& yv = g.value(self);
    Tensor& dx = g.grad(ia);
    for (int r = 0; r < dy.rows; ++r) {
      auto dyr = dy.row(r);
      auto yr = yv.row(r);
      auto dxr = dx.row(r);
      double s = 0.0;
      for (double v : dyr) s += v;
      for (int c = 0; c < dy.cols; ++c) dxr[c] += dyr[c] - std::exp(yr[c]) * s;
    }
  });
}

Var Softmax(Var a) {
  const Tensor& x = a.value();
  Tensor y = Like(x);
  for (int r = 0; r < x.rows; ++r) {
    auto xr = x.row(r);
    auto yr = y.row(r);
    const double mx = *std::max_element(xr.begin(), xr.end());
    double s = 0.0;
    for (int c = 0; c < x.cols; ++c) s += (yr[c] = std::exp(xr[c] - mx));
    for (int c = 0; c < x.cols; ++c) yr[c] /= s;
  }
  const int ia = a.id();
  Var in[] = {a};
  return a.graph()->Emit(std::move(y), in, [ia](Graph& g, int self) {
    if (!g.needs_grad(ia)) return;
    const Tensor& dy = g.grad(self);
    const Tensor& p = g.value(self);
    Tensor& dx = g.grad(ia);
    for (int r = 0; r < dy.rows; ++r) {
      auto dyr = dy.row(r);
      auto pr = p.row(r);
      auto dxr = dx.row(r);
      double s = 0.0;
      for (int c = 0; c < dy.cols; ++c) s += dyr[c] * pr[c];
      for (int c = 0; c < dy.cols; ++c) dxr[c] += pr[c] * (dyr[c] - s);
    }
  });
}

Var SumRows(Var a) {
  const Tensor& x = a.value();
  Tensor y(x.rows, 1);
  for (int r = 0; r < x.rows; ++r) {
    double s = 0.0;
    for (double v : x.row(r)) s += v;
    y.data[r] = s;
  }
  const int ia = a.id();
  Var in[] = {a};
  return a.graph()->Emit(std::move(y), in, [ia](Graph& g, int self) {
    if (!g.needs_grad(ia)) return;
    const Tensor& dy = g.grad(self);
    Tensor& dx = g.grad(ia);
    for (int r = 0; r < dx.rows; ++r) {
      for (double& v : dx.row(r)) v += dy.data[r];
    }
  });
}

Var SumAll(Var a) {
  const Tensor& x = a.value();
  double s = 0.0;
  for (double v : x.data) s += v;
  const int ia = a.id();
  Var in[] = {a};
  return a.graph()->Emit(Tensor(1, 1, s), in, [ia](Graph& g, int self) {
    if (!g.needs_grad(ia)) return;
    const double d = g.grad(self).data[0];
    for (double& v : g.grad(ia).data) v += d;
  });
}

Var Mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  return Scale(SumAll(a), 1.0 / n);
}

Var RowsDot(Var a, Var b) {
  RequireSameShape(a.value(), b.value(), "RowsDot");
  const Tensor& av = a.value();
  Tensor y(av.rows, 1);
  kernels::RowDot(av.data.data(), b.value().data.data(), y.data.data(),
                  av.rows, av.cols);
  const int ia = a.id(), ib = b.id();
  Var in[] = {a, b};
  return a.graph()->Emit(std::move(y), in, [ia, ib](Graph& g, int self) {
    const Tensor& dy = g.grad(self);
    auto push = [&](int target, int other) {
      if (!g.needs_grad(target)) return;
      Tensor& dt = g.grad(target);
      const Tensor& ov = g.value(other);
      for (int r = 0; r < dt.rows; ++r) {
        auto dr = dt.row(r);
        auto orow = ov.row(r);
        for (int c = 0; c < dt.cols; ++c) dr[c] += dy.data[r] * orow[c];
      }
    };
    push(ia, ib);
    push(ib, ia);
  });
}

Var ScaleRows(Var a, Var col) {
  const Tensor& av = a.value();
  const Tensor& cv = col.value();
  if (cv.cols != 1 || cv.rows != av.rows) {
    throw std::invalid_argument("autodiff: ScaleRows expects a column");
  }
  Tensor y = av;
  for (int r = 0; r < y.rows; ++r) {
    for (double& v : y.row(r)) v *= cv.data[r];
  }
  const int ia = a.id(), ic = col.id();
  Var in[] = {a, col};
  return a.graph()->Emit(std::move(y), in, [ia, ic](Graph& g, int self) {
    const Tensor& dy = g.grad(self);
    if (g.needs_grad(ia)) {
      Tensor& da = g.grad(ia);
      const Tensor& cv = g.value(ic);
      for (int r = 0; r < da.rows; ++r) {
        auto dar = da.row(r);
        auto dyr = dy.row(r);
        for (int c = 0; c < da.cols; ++c) dar[c] += dyr[c] * cv.data[r];
      }
    }
    if (g.needs_grad(ic)) {
      Tensor& dc = g.grad(ic);
      const Tensor& av = g.value(ia);
      kernels::RowDot(dy.data.data(), av.data.data(), dc.data.data(), dy.rows,
                      dy.cols);
    }
  });
}

Var Pick(Var a, std::span<const int> idx) {
  const Tensor& x = a.value();
  if (static_cast<int>(idx.size()) != x.rows) {
    throw std::invalid_argument("autodiff: Pick needs one index per row");
  }
  Tensor y(x.rows, 1);
  std::vector<int> ids(idx.begin(), idx.end());
  for (int r = 0; r < x.rows; ++r) {
    if (ids[r] < 0 || ids[r] >= x.cols) {
      throw std::out_of_range("autodiff: Pick index out of range");
    }
    y.data[r] = x(r, ids[r]);
  }
  const int ia = a.id();
  Var in[] = {a};
  return a.graph()->Emit(std::move(y), in,
                         [ia, ids = std::move(ids)](Graph& g, int self) {
                           if (!g.needs_grad(ia)) return;
                           const Tensor& dy = g.grad(self);
                           Tensor& dx = g.grad(ia);
                           for (int r = 0; r < dx.rows; ++r) {
                             dx(r, ids[r]) += dy.data[r];
                           }
                         });
}

Var Gather(Var table, std::span<const int> ids_in) {
  const Tensor& t = table.value();
  std::vector<int> ids(ids_in.begin(), ids_in.end());
  Tensor y(static_cast<int>(ids.size()), t.cols);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || ids[r] >= t.rows) {
      throw std::out_of_range("autodiff: Gather id " + std::to_string(ids[r]) +
                              " outside table of " + std::to_string(t.rows));
    }
    auto src = t.row(ids[r]);
    std::copy(src.begin(), src.end(), y.row(static_cast<int>(r)).begin());
  }
  const int it = table.id();
  Var in[] = {table};
  return table.graph()->Emit(
      std::move(y), in, [it, ids = std::move(ids)](Graph& g, int self) {
        if (!g.needs_grad(it)) return;
        const Tensor& dy = g.grad(self);
        Tensor& dt = g.grad(it);
        for (std::size_t r = 0; r < ids.size(); ++r) {
          auto src = dy.row(static_cast<int>(r));
          auto dst = dt.row(ids[r]);
          for (int c = 0; c < dt.cols; ++c) dst[c] += src[c];
        }
      });
}

Var SliceCols(Var a, int start, int len) {
  const Tensor& x = a.value();
  if (start < 0 || len < 0 || start + len > x.cols) {
    throw std::out_of_range("autodiff: SliceCols out of range");
  }
  Tensor y(x.rows, len);
  for (int r = 0; r < x.rows; ++r) {
    auto src = x.row(r).subspan(start, len);
    std::copy(src.begin(), src.end(), y.row(r).begin());
  }
  const int ia = a.id();
  Var in[] = {a};
  return a.graph()->Emit(std::move(y), in,
                         [ia, start, len](Graph& g, int self) {
                           if (!g.needs_grad(ia)) return;
                           const Tensor& dy = g.grad(self);
                           Tensor& dx = g.grad(ia);
                           for (int r = 0; r < dy.rows; ++r) {
                             auto dst = dx.row(r).subspan(start, len);
                             auto src = dy.row(r);
                             for (int c = 0; c < len; ++c) dst[c] += src[c];
                           }
                         });
}

Var ConcatCols(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("autodiff: empty concat");
  const int rows = parts[0].rows();
  int cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) {
      throw std::invalid_argument("autodiff: ConcatCols row mismatch");
    }
    cols += p.cols();
  }
  Tensor y(rows, cols);
  std::vector<int> ids, offsets;
  int off = 0;
  for (const Var& p : parts) {
    const Tensor& pv = p.value();
    for (int r = 0; r < rows; ++r) {
      auto src = pv.row(r);
      std::copy(src.begin(), src.end(), y.row(r).begin() + off);
    }
    ids.push_back(p.id());
    offsets.push_back(off);
    off += pv.cols;
  }
  return parts[0].graph()->Emit(
      std::move(y), parts,
      [ids = std::move(ids), offsets = std::move(offsets)](Graph& g,
                                                           int self) {
        const Tensor& dy = g.grad(self);
        for (std::size_t k = 0; k < ids.size(); ++k) {
          if (!g.needs_grad(ids[k])) continue;
          Tensor& dp = g.grad(ids[k]);
          for (int r = 0; r < dp.rows; ++r) {
            auto src = dy.row(r).subspan(offsets[k], dp.cols);
            auto dst = dp.row(r);
            for (int c = 0; c < dp.cols; ++c) dst[c] += src[c];
          }
        }
      });
}

Var LayerNorm(Var x, Var gain, Var bias, double eps) {
  const Tensor& xv = x.value();
  const Tensor& gv = gain.value();
  const Tensor& bv = bias.value();
  if (gv.rows != 1 || gv.cols != xv.cols || !gv.SameShape(bv)) {
    throw std::invalid_argument("autodiff: LayerNorm parameter shape");
  }
  const int rows = xv.rows, n = xv.cols;
  Tensor y(rows, n);
  // Normalized activations and inverse std are kept for the backward pass.
  Tensor xhat(rows, n);
  std::vector<double> inv_std(rows);
  for (int r = 0; r < rows; ++r) {
    auto xr = xv.row(r);
    double mu = 0.0;
    for (double v : xr) mu += v;
    mu /= n;
    double var = 0.0;
    for (double v : xr) var += (v - mu) * (v - mu);
    var /= n;
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[r] = is;
    auto hr = xhat.row(r);
    auto yr = y.row(r);
    for (int c = 0; c < n; ++c) {
      hr[c] = (xr[c] - mu) * is;
      yr[c] = hr[c] * gv.data[c] + bv.data[c];
    }
  }
  const int ix = x.id(), ig = gain.id(), ib = bias.id();
  Var in[] = {x, gain, bias};
  return x.graph()->Emit(
      std::move(y), in,
      [ix, ig, ib, xhat = std::move(xhat), inv_std = std::move(inv_std)](
          Graph& g, int self) {
        const Tensor& dy = g.grad(self);
        const int rows = dy.rows, n = dy.cols;
        if (g.needs_grad(ig) || g.needs_grad(ib)) {
          Tensor* dg = g.needs_grad(ig) ? &g.grad(ig) : nullptr;
          Tensor* db = g.needs_grad(ib) ? &g.grad(ib) : nullptr;
          for (int r = 0; r < rows; ++r) {
            auto dyr = dy.row(r);
            auto hr = xhat.row(r);
            for (int c = 0; c < n; ++c) {
              if (dg) dg->data[c] += dyr[c] * hr[c];
              if (db) db->data[c] += dyr[c];
            }
          }
        }
        if (g.needs_grad(ix)) {
          const Tensor& gv = g.value(ig);
          Tensor& dx = g.grad(ix);
          std::vector<double> dh(n);
          for (int r = 0; r < rows; ++r) {
            auto dyr = dy.row(r);
            auto hr = xhat.row(r);
            double s1 = 0.0, s2 = 0.0;
            for (int c = 0; c < n; ++c) {
              dh[c] = dyr[c] * gv.data[c];
              s1 += dh[c];
              s2 += dh[c] * hr[c];
            }
            auto dxr = dx.row(r);
            for (int c = 0; c < n; ++c) {
              dxr[c] += inv_std[r] * (dh[c] - s1 / n - hr[c] * s2 / n);
            }
          }
        }
      });
}

Var Dropout(Var x, double p, Rng& rng) {
  if (p <= 0.0) return x;
  if (p >= 1.0) throw std::invalid_argument("autodiff: dropout p >= 1");
  const Tensor& xv = x.value();
  Tensor mask = Like(xv);
  const double keep = 1.0 / (1.0 - p);
  for (double& m : mask.data) m = rng.Uniform() < p ? 0.0 : keep;
  Var mv = x.graph()->Constant(std::move(mask));
  return Mul(x, mv);
}

Var Attend(Var q, std::span<const Var> keys, std::span<const Var> values) {
  if (keys.empty() || keys.size() != values.size()) {
    throw std::invalid_argument("autodiff: Attend needs matching keys/values");
  }
  const Tensor& qv = q.value();
  const int rows = qv.rows, d = qv.cols;
  const int n = static_cast<int>(keys.size());
  for (int s = 0; s < n; ++s) {
    RequireSameShape(qv, keys[s].value(), "Attend(key)");
    if (values[s].rows() != rows) {
      throw std::invalid_argument("autodiff: Attend value rows");
    }
  }
  const int dv = values[0].cols();
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  // weights[r * n + s]
  std::vector<double> weights(static_cast<std::size_t>(rows) * n);
  Tensor y(rows, dv);
  std::vector<double> sc(n);
  for (int r = 0; r < rows; ++r) {
    auto qr = qv.row(r);
    double mx = -INFINITY;
    for (int s = 0; s < n; ++s) {
      auto kr = keys[s].value().row(r);
      double dot = 0.0;
      for (int c = 0; c < d; ++c) dot += qr[c] * kr[c];
      sc[s] = dot * scale;
      mx = std::max(mx, sc[s]);
    }
    double z = 0.0;
    for (int s = 0; s < n; ++s) z += (sc[s] = std::exp(sc[s] - mx));
    auto yr = y.row(r);
    for (int s = 0; s < n; ++s) {
      const double w = sc[s] / z;
      weights[static_cast<std::size_t>(r) * n + s] = w;
      auto vr = values[s].value().row(r);
      for (int c = 0; c < dv; ++c) yr[c] += w * vr[c];
    }
  }
  std::vector<int> kid, vid;
  std::vector<Var> inputs{q};
  for (int s = 0; s < n; ++s) {
    kid.push_back(keys[s].id());
    vid.push_back(values[s].id());
    inputs.push_back(keys[s]);
    inputs.push_back(values[s]);
  }
  const int iq = q.id();
  return q.graph()->Emit(
      std::move(y), inputs,
      [iq, kid = std::move(kid), vid = std::move(vid),
       weights = std::move(weights), scale, n, d, dv](Graph& g, int self) {
        const Tensor& dy = g.grad(self);
        const int rows = dy.rows;
        const Tensor& qv = g.value(iq);
        Tensor* dq = g.needs_grad(iq) ? &g.grad(iq) : nullptr;
        std::vector<double> dw(n), ds(n);
        for (int r = 0; r < rows; ++r) {
          auto dyr = dy.row(r);
          const double* w = &weights[static_cast<std::size_t>(r) * n];
          double acc = 0.0;
          for (int s = 0; s < n; ++s) {
            auto vr = g.value(vid[s]).row(r);
            double t = 0.0;
            for (int c = 0; c < dv; ++c) t += dyr[c] * vr[c];
            dw[s] = t;
            acc += w[s] * t;
            if (g.needs_grad(vid[s])) {
              auto dvr = g.grad(vid[s]).row(r);
              for (int c = 0; c < dv; ++c) dvr[c] += w[s] * dyr[c];
            }
          }
          for (int s = 0; s < n; ++s) ds[s] = w[s] * (dw[s] - acc) * scale;
          auto qr = qv.row(r);
          for (int s = 0; s < n; ++s) {
            if (ds[s] == 0.0) continue;
            auto kr = g.value(kid[s]).row(r);
            if (dq) {
              auto dqr = dq->row(r);
              for (int c = 0; c < d; ++c) dqr[c] += ds[s] * kr[c];
            }
            if (g.needs_grad(kid[s])) {
              auto dkr = g.grad(kid[s]).row(r);
              for (int c = 0; c < d; ++c) dkr[c] += ds[s] * qr[c];
            }
          }
        }
      });
}

Var GroupScores(Var r, Var e, int group) {
  const Tensor& rv = r.value();
  const Tensor& ev = e.value();
  if (group < 1 || ev.rows != rv.rows * group || ev.cols != rv.cols) {
    throw std::invalid_argument("autodiff: GroupScores shape");
  }
  const int rows = rv.rows, d = rv.cols;
  Tensor y(rows, group);
  for (int b = 0; b < rows; ++b) {
    auto rb = rv.row(b);
    for (int k = 0; k < group; ++k) {
      auto ek = ev.row(b * group + k);
      double s = 0.0;
      for (int c = 0; c < d; ++c) s += rb[c] * ek[c];
      y(b, k) = s;
    }
  }
  const int ir = r.id(), ie = e.id();
  Var in[] = {r, e};
  return r.graph()->Emit(
      std::move(y), in, [ir, ie, group, d](Graph& g, int self) {
        const Tensor& dy = g.grad(self);
        const Tensor& rv = g.value(ir);
        const Tensor& ev = g.value(ie);
        Tensor* dr = g.needs_grad(ir) ? &g.grad(ir) : nullptr;
        Tensor* de = g.needs_grad(ie) ? &g.grad(ie) : nullptr;
        for (int b = 0; b < dy.rows; ++b) {
          for (int k = 0; k < group; ++k) {
            const double gk = dy(b, k);
            if (gk == 0.0) continue;
            if (dr) {
              auto drb = dr->row(b);
              auto ek = ev.row(b * group + k);
              for (int c = 0; c < d; ++c) drb[c] += gk * ek[c];
            }
            if (de) {
              auto dek = de->row(b * group + k);
              auto rb = rv.row(b);
              for (int c = 0; c < d; ++c) dek[c] += gk * rb[c];
            }
          }
        }
      });
}

Var Sum(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("autodiff: empty Sum");
  Tensor y = parts[0].value();
  std::vector<int> ids{parts[0].id()};
  for (std::size_t k = 1; k < parts.size(); ++k) {
    RequireSameShape(y, parts[k].value(), "Sum");
    const Tensor& pv = parts[k].value();
    for (std::size_t i = 0; i < y.size(); ++i) y.data[i] += pv.data[i];
    ids.push_back(parts[k].id());
  }
  return parts[0].graph()->Emit(
      std::move(y), parts, [ids = std::move(ids)](Graph& g, int self) {
        const Tensor& dy = g.grad(self);
        for (int id : ids) {
          if (!g.needs_grad(id)) continue;
          Tensor& dp = g.grad(id);
          for (std::size_t i = 0; i < dy.size(); ++i) dp.data[i] += dy.data[i];
        }
      });
}

Var EntropyFromLogProbs(Var logp) {
  return Scale(SumRows(Mul(Exp(logp), logp)), -1.0);
}

}  // namespace refgame::ad
