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

#ifndef MINIFP_NN_H
#define MINIFP_NN_H

#include <cstdint>
#include <string>

#include "minifp/autodiff.h"

namespace minifp {

//! y = x W + b. Weights are Glorot-uniform from the stream named after the parameter.
class Linear {
 public:
  Linear() = default;
  Linear(ParameterSet& params, const std::string& name, std::size_t in, std::size_t out, std::uint64_t seed);

  Var forward(Tape& tape, Var x) const;

  [[nodiscard]] std::size_t in() const noexcept { return weight_->value.rows(); }
  [[nodiscard]] std::size_t out() const noexcept { return weight_->value.cols(); }
  Parameter&                weight() const noexcept { return *weight_; }
  Parameter&                bias() const noexcept { return *bias_; }

 private:
  Parameter* weight_ = nullptr;
  Parameter* bias_   = nullptr;
};

//! Two-layer perceptron: linear, relu, linear.
class Mlp {
 public:
  Mlp() = default;
  Mlp(ParameterSet& params, const std::string& name, std::size_t in, std::size_t hidden, std::size_t out,
      std::uint64_t seed);

  Var forward(Tape& tape, Var x) const;

  [[nodiscard]] std::size_t in() const noexcept { return first_.in(); }
  [[nodiscard]] std::size_t out() const noexcept { return second_.out(); }
  const Linear&             first() const noexcept { return first_; }
  const Linear&             second() const noexcept { return second_; }

 private:
  Linear first_;
  Linear second_;
};

[[nodiscard]] constexpr std::size_t linearParameterCount(std::size_t in, std::size_t out) noexcept {
  return in * out + out;
}

[[nodiscard]] constexpr std::size_t mlpParameterCount(std::size_t in, std::size_t hidden, std::size_t out) noexcept {
  return linearParameterCount(in, hidden) + linearParameterCount(hidden, out);
}

//! Sets square weights to the identity and biases to zero.
void setIdentity(const Linear& layer);
void setIdentity(const Mlp& mlp);
void setZero(const Mlp& mlp);

}  // namespace minifp

#endif  // MINIFP_NN_H
