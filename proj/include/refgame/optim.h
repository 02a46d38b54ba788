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
#ifndef REFGAME_OPTIM_H_
#define REFGAME_OPTIM_H_

#include <vector>

#include "refgame/agent.h"
#include "refgame/tensor.h"

namespace refgame::nn {

struct RmsPropConfig {
  double lr = 1e-3;
  double decay = 0.99;
  double eps = 1e-8;
};

// RMSProp: v = decay * v + (1 - decay) * g^2;  p -= lr * g / sqrt(v + eps).
class RmsProp {
 public:
  RmsProp(const AgentParams& params, RmsPropConfig cfg);

  // Applies one update from the accumulated gradients. Throws NumericError
  // (and leaves params untouched) if any update would be non-finite.
  void Step(AgentParams& params);

  double lr() const { return cfg_.lr; }
  void set_lr(double lr) { cfg_.lr = lr; }
  const std::vector<Tensor>& state() const { return square_avg_; }

 private:
  RmsPropConfig cfg_;
  std::vector<Tensor> square_avg_;
};

}  // namespace refgame::nn

#endif  // REFGAME_OPTIM_H_
