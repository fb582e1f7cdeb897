// SPDX-FileCopyrightText: Copyright (c) 2026 The minifp Authors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "minifp/nn.h"

#include <cmath>

#include "minifp/error.h"
#include "minifp/rng.h"

namespace minifp {

Linear::Linear(ParameterSet& params, const std::string& name, std::size_t in, std::size_t out, std::uint64_t seed) {
  if (in == 0 || out == 0) {
    throw Error(ErrorCode::InvalidConfig, "layer '" + name + "' has a zero width");
  }
  Rng          rng(seed, name + "/w");
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  Tensor       w(in, out);
  for (double& v : w.values()) {
    v = rng.uniform(-limit, limit);
  }
  weight_ = &params.add(name + "/w", std::move(w));
  bias_   = &params.add(name + "/b", Tensor(1, out));
}

Var Linear::forward(Tape& tape, Var x) const {
  return ad::add(ad::matmul(x, tape.parameter(*weight_)), tape.parameter(*bias_));
}

Mlp::Mlp(ParameterSet& params, const std::string& name, std::size_t in, std::size_t hidden, std::size_t out,
         std::uint64_t seed)
    : first_(params, name + "/l1", in, hidden, seed), second_(params, name + "/l2", hidden, out, seed) {}

Var Mlp::forward(Tape& tape, Var x) const {
  return second_.forward(tape, ad::relu(first_.forward(tape, x)));
}

void setIdentity(const Linear& layer) {
  if (layer.in() != layer.out()) {
    throw Error(ErrorCode::ShapeMismatch, "identity needs a square layer");
  }
  layer.weight().value = Tensor::identity(layer.in());
  layer.bias().value.fill(0.0);
}

void setIdentity(const Mlp& mlp) {
  setIdentity(mlp.first());
  setIdentity(mlp.second());
}

void setZero(const Mlp& mlp) {
  for (const Linear* l : {&mlp.first(), &mlp.second()}) {
    l->weight().value.fill(0.0);
    l->bias().value.fill(0.0);
  }
}

}  // namespace minifp
