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

#include "refgame/optim.h"

#include <cmath>
#include <string>

namespace refgame::nn {

RmsProp::RmsProp(const AgentParams& params, RmsPropConfig cfg) : cfg_(cfg) {
  square_avg_.reserve(params.size());
  for (const auto& p : params.tensors) {
    square_avg_.emplace_back(p.value.rows, p.value.cols);
  }
}

void RmsProp::Step(AgentParams& params) {
  if (params.size() != square_avg_.size()) {
    throw std::invalid_argument("RmsProp: state does not match parameters");
  }
  std::vector<Tensor> next = square_avg_;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor& g = params[static_cast<int>(i)].grad;
    Tensor& v = next[i];
    for (std::size_t k = 0; k < g.size(); ++k) {
      v.data[k] = cfg_.decay * v.data[k] + (1.0 - cfg_.decay) * g.data[k] * g.data[k];
      const double delta = cfg_.lr * g.data[k] / std::sqrt(v.data[k] + cfg_.eps);
      if (!std::isfinite(delta)) {
        throw NumericError("RMSProp: non-finite update for " +
                           params[static_cast<int>(i)].name);
      }
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[static_cast<int>(i)];
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      p.value.data[k] -= cfg_.lr * p.grad.data[k] / std::sqrt(next[i].data[k] + cfg_.eps);
    }
  }
  square_avg_ = std::move(next);
}

}  // namespace refgame::nn
