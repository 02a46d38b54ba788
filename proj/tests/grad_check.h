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

#ifndef REFGAME_TESTS_GRAD_CHECK_H_
#define REFGAME_TESTS_GRAD_CHECK_H_

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "refgame/autodiff.h"
#include "refgame/rng.h"

namespace refgame::testing {

struct GradReport {
  double worst = 0.0;
  std::string where;
};

// Relative error ||analytic - numeric|| / (||analytic|| + ||numeric||) per
// parameter tensor, worst one reported. `f` must be deterministic in the
// parameter values. At most `probes` entries per tensor are perturbed.
inline GradReport CheckGradients(std::vector<ad::Parameter*> params,
                                 const std::function<ad::Var(ad::Graph&)>& f,
                                 int probes = 1 << 30, double h = 1e-4,
                                 std::uint64_t seed = 7) {
  for (auto* p : params) p->ZeroGrad();
  {
    ad::Graph g;
    g.Backward(f(g));
  }
  auto eval = [&] {
    ad::Graph g(false);
    return f(g).scalar();
  };
  Rng rng(seed);
  GradReport rep;
  for (auto* p : params) {
    const int n = static_cast<int>(p->value.size());
    std::vector<int> idx;
    if (n <= probes) {
      for (int i = 0; i < n; ++i) idx.push_back(i);
    } else {
      for (int i = 0; i < probes; ++i) idx.push_back(static_cast<int>(rng.Below(n)));
    }
    double diff = 0.0, na = 0.0, nn = 0.0;
    for (int i : idx) {
      const double keep = p->value.data[i];
      p->value.data[i] = keep + h;
      const double up = eval();
      p->value.data[i] = keep - h;
      const double down = eval();
      p->value.data[i] = keep;
      const double num = (up - down) / (2 * h);
      const double ana = p->grad.data[i];
      diff += (num - ana) * (num - ana);
      na += ana * ana;
      nn += num * num;
    }
    const double denom = std::sqrt(na) + std::sqrt(nn);
    const double rel = denom < 1e-10 ? 0.0 : std::sqrt(diff) / denom;
    if (rel > rep.worst) {
      rep.worst = rel;
      rep.where = p->name;
    }
  }
  return rep;
}

inline Tensor RandomTensor(int rows, int cols, Rng& rng, double scale = 1.0) {
  Tensor t(rows, cols);
  for (double& x : t.data) x = rng.Uniform(-scale, scale);
  return t;
}

}  // namespace refgame::testing

#endif  // REFGAME_TESTS_GRAD_CHECK_H_
