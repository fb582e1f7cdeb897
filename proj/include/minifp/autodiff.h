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

#ifndef MINIFP_AUTODIFF_H
#define MINIFP_AUTODIFF_H

#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "minifp/tensor.h"

namespace minifp {

struct Parameter {
  std::string name;  //!< path such as "layer3/mlp_edge/w1"
  Tensor      value;
  Tensor      grad;
};

//! Owns named parameters. References returned by add() stay valid for the set's lifetime.
class ParameterSet {
 public:
  Parameter&       add(std::string name, Tensor init);
  Parameter*       find(std::string_view name);
  const Parameter* find(std::string_view name) const;
  Parameter&       at(std::string_view name);

  std::deque<Parameter>&       all() noexcept { return params_; }
  const std::deque<Parameter>& all() const noexcept { return params_; }
  [[nodiscard]] std::size_t    size() const noexcept { return params_.size(); }
  //! Total number of scalar entries across all parameters.
  [[nodiscard]] std::size_t    elementCount() const noexcept;

  void zeroGrad();
  //! Order-sensitive hash of every value's bit pattern.
  [[nodiscard]] std::uint64_t checksum() const noexcept;

 private:
  std::deque<Parameter>                        params_;
  std::unordered_map<std::string, std::size_t> index_;
};

class Tape;

//! Handle to a value recorded on a Tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  [[nodiscard]] const Tensor& value() const;
  [[nodiscard]] const Tensor& grad() const;
  [[nodiscard]] std::size_t   rows() const { return value().rows(); }
  [[nodiscard]] std::size_t   cols() const { return value().cols(); }
  [[nodiscard]] Tape*         tape() const noexcept { return tape_; }
  [[nodiscard]] int           id() const noexcept { return id_; }
  [[nodiscard]] bool          valid() const noexcept { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  int   id_   = -1;
};

//! Records operations in execution order; backward() replays them in reverse.
//!
//! A tape is single-writer. `training` switches dropout on; `seed` and `step` key the
//! counter-based dropout masks so that runs are bit-reproducible.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, int self)>;

  explicit Tape(bool training = false, std::uint64_t seed = 0, std::uint64_t step = 0)
      : training_(training), seed_(seed), step_(step) {}
  Tape(const Tape&)            = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var parameter(Parameter& param);

  //! Accumulates d(loss)/d(param) into every reachable Parameter::grad.
  void backward(Var loss);

  [[nodiscard]] bool          training() const noexcept { return training_; }
  [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }
  [[nodiscard]] std::uint64_t step() const noexcept { return step_; }
  [[nodiscard]] std::size_t   size() const noexcept { return nodes_.size(); }
  std::uint64_t               nextOpInstance() noexcept { return opCounter_++; }

  // Op-implementation interface.
  Var                         record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward);
  Var                         record(Tensor value, std::span<const Var> inputs, BackwardFn backward);
  [[nodiscard]] const Tensor& valueOf(int id) const { return nodes_[id].value; }
  [[nodiscard]] const Tensor& gradOf(int id) const { return nodes_[id].grad; }
  [[nodiscard]] bool          needsGrad(int id) const { return nodes_[id].needsGrad; }
  //! Zero-initialized gradient buffer of node `id`, allocated on first use.
  Tensor&                     gradBuffer(int id);

 private:
  struct Node {
    Tensor     value;
    Tensor     grad;
    bool       needsGrad = false;
    bool       hasGrad   = false;
    BackwardFn backward;
    Parameter* param = nullptr;
  };

  std::deque<Node>  nodes_;
  bool              training_;
  std::uint64_t     seed_;
  std::uint64_t     step_;
  std::uint64_t     opCounter_ = 0;
};

namespace ad {

Var matmul(Var a, Var b);
//! b may match a, be a 1 x cols row (broadcast over rows), or a 1 x 1 scalar.
Var add(Var a, Var b);
Var sub(Var a, Var b);
//! Elementwise product; b may match a, be a 1 x cols row, or a 1 x 1 scalar.
Var mul(Var a, Var b);
Var scale(Var a, double factor);
//! Multiplies row r by factors[r].
Var scaleRows(Var a, std::span<const double> factors);
Var addScalar(Var a, double offset);
Var concat(std::span<const Var> parts, int axis);
Var concat(std::initializer_list<Var> parts, int axis);
Var relu(Var a);
Var sigmoid(Var a);
//! Identity unless the tape is training and rate > 0.
Var dropout(Var a, double rate);
Var layerNorm(Var a, double eps = 1e-5);
//! Normalizes each column with batch statistics; the statistics are written out when requested.
Var batchNorm(Var a, double eps = 1e-5, Tensor* batchMean = nullptr, Tensor* batchVar = nullptr);
//! Normalizes columns with fixed statistics (inference-mode batch norm).
Var normalizeColumns(Var a, const Tensor& mean, const Tensor& var, double eps = 1e-5);

//! out[s] = sum of rows r with ids[r] == s. Summation within a segment is order-independent.
Var segmentSum(Var values, std::span<const int> ids, std::size_t numSegments);
Var segmentMean(Var values, std::span<const int> ids, std::size_t numSegments);
//! Empty segments yield zero rows.
Var segmentMax(Var values, std::span<const int> ids, std::size_t numSegments);
//! out[k] = values[indices[k]] (index_select over rows).
Var gather(Var values, std::span<const int> indices);

Var sumAll(Var a);
Var meanAll(Var a);
//! axis 0 reduces rows (result 1 x cols); axis 1 reduces columns (result rows x 1).
Var sumAxis(Var a, int axis);
Var meanAxis(Var a, int axis);
Var maxAxis(Var a, int axis);

//! Mean of |pred - target| over entries with mask != 0; 0 when nothing is present.
Var maskedMae(Var pred, const Tensor& target, const Tensor& mask);
//! Mean binary cross-entropy with logits over present entries, in log-sum-exp form.
Var maskedBce(Var logits, const Tensor& target, const Tensor& mask);
//! Multiclass cross-entropy. logits: rows x (labels * numClasses), classes/mask: rows x labels.
Var maskedCrossEntropy(Var logits, const Tensor& classes, const Tensor& mask, std::size_t numClasses);

}  // namespace ad

struct GradCheckResult {
  double      maxRelativeError = 0.0;
  std::string worstParameter;
  std::size_t worstIndex = 0;
};

//! Compares backward() against central differences for every entry of `params`.
//! Relative error uses max(|analytic|, |numeric|, 1e-8) as denominator. Leaves values intact;
//! gradients are zeroed before and hold the analytic values afterwards.
GradCheckResult finiteDifferenceCheck(const std::function<Var(Tape&)>& lossFn,
                                      std::span<Parameter* const>      params,
                                      double                           h = 1e-5);

//! Checkpoint file: "MFCK", version (u32), parameter count (u32), then per parameter
//! name length (u32), name bytes, rank (u32), dims (u32 each), little-endian float32 values.
void saveCheckpoint(const std::string& path, const ParameterSet& params);

struct NamedTensor {
  std::string name;
  Tensor      value;
};
std::vector<NamedTensor> readCheckpoint(const std::string& path);

//! Copies every checkpoint tensor whose name starts with `prefix` into the matching parameter.
//! Throws DimensionMismatch on missing names or shape disagreement.
void loadCheckpoint(const std::string& path, ParameterSet& params, std::string_view prefix = {});

}  // namespace minifp

#endif  // MINIFP_AUTODIFF_H
