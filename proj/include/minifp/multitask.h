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

#ifndef MINIFP_MULTITASK_H
#define MINIFP_MULTITASK_H

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "minifp/autodiff.h"
#include "minifp/nn.h"

namespace minifp {

enum class TaskLevel { Node, Graph };
enum class TaskKind { Regression, Binary, Multiclass };
enum class LossKind { Mae, Bce, Hce };
enum class TaskGroup { L1000, Pcba, N4, G25, Custom };

inline constexpr std::size_t kNumTaskGroups = 5;

std::string toString(TaskLevel level);
std::string toString(TaskKind kind);
std::string toString(LossKind loss);
std::string toString(TaskGroup group);
TaskLevel parseTaskLevel(const std::string& text);
TaskKind  parseTaskKind(const std::string& text);
LossKind  parseLossKind(const std::string& text);
TaskGroup parseTaskGroup(const std::string& text);
//! MAE for regression, BCE for binary, HCE for multiclass.
LossKind defaultLoss(TaskKind kind);

struct TaskSpec {
  std::string name;
  TaskLevel   level      = TaskLevel::Graph;
  TaskKind    kind       = TaskKind::Regression;
  LossKind    loss       = LossKind::Mae;
  std::size_t labelWidth = 1;
  TaskGroup   group      = TaskGroup::Custom;
  std::size_t numClasses = 0;  //!< multiclass only

  //! Throws InvalidConfig when loss and kind disagree or widths are invalid.
  void validate() const;
  //! Columns of the head output: labelWidth, times numClasses for multiclass.
  [[nodiscard]] std::size_t outputWidth() const noexcept;
};

//! Label values with presence flags. Multiclass values hold class indices.
struct LabelSet {
  Tensor values;
  Tensor mask;

  [[nodiscard]] std::size_t presentCount() const noexcept;
};

//! Masked mean of |pred - label|.
Var maeLoss(Var pred, const LabelSet& labels);
//! Masked mean binary cross-entropy on logits.
Var bceLoss(Var logits, const LabelSet& labels);
//! Stand-in for hybrid cross-entropy: masked mean multiclass cross-entropy.
Var hceLoss(Var logits, const LabelSet& labels, std::size_t numClasses);
Var taskLoss(const TaskSpec& task, Var prediction, const LabelSet& labels);

struct LossWeights {
  double k = 5.0;  //!< G25 is divided by k
};

//! Per-group weights in TaskGroup order.
std::array<double, kNumTaskGroups> groupCoefficients(const LossWeights& weights);

//! L1000 + PCBA + N4 + G25 / k + custom. Missing groups count as zero.
double combinedLoss(const std::array<double, kNumTaskGroups>& groupLosses, const LossWeights& weights);

//! Same sum over recorded group losses. Invalid Vars mark groups without labels in the batch.
Var combinedLoss(const std::array<Var, kNumTaskGroups>& groupLosses, const LossWeights& weights);

//! One two-layer MLP head per task.
class TaskHeads {
 public:
  TaskHeads() = default;
  TaskHeads(std::span<const TaskSpec> tasks, std::size_t graphWidth, std::size_t nodeWidth, std::size_t hidden,
            ParameterSet& params, std::uint64_t seed, const std::string& prefix = "heads/");

  [[nodiscard]] const std::vector<TaskSpec>& tasks() const noexcept { return tasks_; }
  const Mlp&                                 head(std::size_t task) const { return heads_.at(task); }

  //! Graph tasks take graph embeddings (one row per graph); node tasks take node embeddings.
  Var forward(Tape& tape, std::size_t task, Var embedding) const;

 private:
  std::vector<TaskSpec> tasks_;
  std::vector<Mlp>      heads_;
};

//! Labels for one batch, indexed like TaskHeads::tasks().
struct BatchLabels {
  std::vector<LabelSet> tasks;
};

struct MultitaskLoss {
  Var                                total;  //!< invalid when no task has labels
  std::array<Var, kNumTaskGroups>    groups;
  std::array<double, kNumTaskGroups> groupValues{};
  std::array<bool, kNumTaskGroups>   groupPresent{};
};

//! Group loss is the mean over the group's tasks that have at least one present label.
MultitaskLoss multitaskLoss(Tape& tape, const TaskHeads& heads, Var graphEmbedding, Var nodeEmbedding,
                            const BatchLabels& labels, const LossWeights& weights);

}  // namespace minifp

#endif  // MINIFP_MULTITASK_H
