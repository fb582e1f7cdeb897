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

#include "minifp/multitask.h"

#include "enum_names.h"
#include "minifp/error.h"

namespace minifp {

using detail::enumName;
using detail::parseEnum;

namespace {

constexpr std::pair<const char*, TaskLevel> kLevelNames[] = {{"node", TaskLevel::Node}, {"graph", TaskLevel::Graph}};
constexpr std::pair<const char*, TaskKind>  kKindNames[]  = {
  {"regression", TaskKind::Regression}, {"binary", TaskKind::Binary}, {"multiclass", TaskKind::Multiclass}};
constexpr std::pair<const char*, LossKind> kLossNames[] = {
  {"mae", LossKind::Mae}, {"bce", LossKind::Bce}, {"hce", LossKind::Hce}};
constexpr std::pair<const char*, TaskGroup> kGroupNames[] = {{"L1000", TaskGroup::L1000},
                                                             {"PCBA", TaskGroup::Pcba},
                                                             {"N4", TaskGroup::N4},
                                                             {"G25", TaskGroup::G25},
                                                             {"custom", TaskGroup::Custom}};

}  // namespace

std::string toString(TaskLevel level) {
  return enumName(level, kLevelNames);
}
std::string toString(TaskKind kind) {
  return enumName(kind, kKindNames);
}
std::string toString(LossKind loss) {
  return enumName(loss, kLossNames);
}
std::string toString(TaskGroup group) {
  return enumName(group, kGroupNames);
}
TaskLevel parseTaskLevel(const std::string& text) {
  return parseEnum(text, kLevelNames, "task level");
}
TaskKind parseTaskKind(const std::string& text) {
  return parseEnum(text, kKindNames, "task kind");
}
LossKind parseLossKind(const std::string& text) {
  return parseEnum(text, kLossNames, "loss");
}
TaskGroup parseTaskGroup(const std::string& text) {
  return parseEnum(text, kGroupNames, "task group");
}

LossKind defaultLoss(TaskKind kind) {
  switch (kind) {
    case TaskKind::Regression: return LossKind::Mae;
    case TaskKind::Binary:     return LossKind::Bce;
    case TaskKind::Multiclass: return LossKind::Hce;
  }
  return LossKind::Mae;
}

void TaskSpec::validate() const {
  if (name.empty()) {
    throw Error(ErrorCode::InvalidConfig, "task without a name");
  }
  if (loss != defaultLoss(kind)) {
    throw Error(ErrorCode::InvalidConfig, "task '" + name + "': loss " + toString(loss) + " does not fit kind " +
                                              toString(kind));
  }
  if (labelWidth < 1) {
    throw Error(ErrorCode::InvalidConfig, "task '" + name + "': label width must be >= 1");
  }
  if (kind == TaskKind::Multiclass && numClasses < 2) {
    throw Error(ErrorCode::InvalidConfig, "task '" + name + "': multiclass needs num_classes >= 2");
  }
}

std::size_t TaskSpec::outputWidth() const noexcept {
  return kind == TaskKind::Multiclass ? labelWidth * numClasses : labelWidth;
}

std::size_t LabelSet::presentCount() const noexcept {
  std::size_t n = 0;
  for (const double m : mask.values()) {
    n += m != 0.0;
  }
  return n;
}

Var maeLoss(Var pred, const LabelSet& labels) {
  return ad::maskedMae(pred, labels.values, labels.mask);
}

Var bceLoss(Var logits, const LabelSet& labels) {
  return ad::maskedBce(logits, labels.values, labels.mask);
}

Var hceLoss(Var logits, const LabelSet& labels, std::size_t numClasses) {
  return ad::maskedCrossEntropy(logits, labels.values, labels.mask, numClasses);
}

Var taskLoss(const TaskSpec& task, Var prediction, const LabelSet& labels) {
  switch (task.loss) {
    case LossKind::Mae: return maeLoss(prediction, labels);
    case LossKind::Bce: return bceLoss(prediction, labels);
    case LossKind::Hce: return hceLoss(prediction, labels, task.numClasses);
  }
  throw Error(ErrorCode::InvalidConfig, "unknown loss");
}

std::array<double, kNumTaskGroups> groupCoefficients(const LossWeights& weights) {
  if (!(weights.k > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "loss weight k must be positive");
  }
  return {1.0, 1.0, 1.0, 1.0 / weights.k, 1.0};
}

double combinedLoss(const std::array<double, kNumTaskGroups>& groupLosses, const LossWeights& weights) {
  const auto coef  = groupCoefficients(weights);
  double     total = 0.0;
  for (std::size_t g = 0; g < kNumTaskGroups; ++g) {
    total += coef[g] * groupLosses[g];
  }
  return total;
}

Var combinedLoss(const std::array<Var, kNumTaskGroups>& groupLosses, const LossWeights& weights) {
  const auto coef = groupCoefficients(weights);
  Var        total;
  for (std::size_t g = 0; g < kNumTaskGroups; ++g) {
    if (!groupLosses[g].valid()) {
      continue;
    }
    Var term = ad::scale(groupLosses[g], coef[g]);
    total    = total.valid() ? ad::add(total, term) : term;
  }
  return total;
}

TaskHeads::TaskHeads(std::span<const TaskSpec> tasks, std::size_t graphWidth, std::size_t nodeWidth,
                     std::size_t hidden, ParameterSet& params, std::uint64_t seed, const std::string& prefix)
    : tasks_(tasks.begin(), tasks.end()) {
  for (const TaskSpec& t : tasks_) {
    t.validate();
    const std::size_t in = t.level == TaskLevel::Graph ? graphWidth : nodeWidth;
    heads_.emplace_back(params, prefix + t.name, in, hidden, t.outputWidth(), seed);
  }
}

Var TaskHeads::forward(Tape& tape, std::size_t task, Var embedding) const {
  const Mlp& mlp = heads_.at(task);
  if (embedding.cols() != mlp.in()) {
    throw Error(ErrorCode::ShapeMismatch, "head '" + tasks_[task].name + "' expects width " +
                                              std::to_string(mlp.in()) + ", got " + embedding.value().shapeString());
  }
  return mlp.forward(tape, embedding);
}

MultitaskLoss multitaskLoss(Tape& tape, const TaskHeads& heads, Var graphEmbedding, Var nodeEmbedding,
                            const BatchLabels& labels, const LossWeights& weights) {
  if (labels.tasks.size() != heads.tasks().size()) {
    throw Error(ErrorCode::ShapeMismatch, "labels for " + std::to_string(labels.tasks.size()) + " tasks, heads for " +
                                              std::to_string(heads.tasks().size()));
  }
  std::array<Var, kNumTaskGroups>         sums;
  std::array<std::size_t, kNumTaskGroups> counts{};
  for (std::size_t t = 0; t < heads.tasks().size(); ++t) {
    const LabelSet& ls = labels.tasks[t];
    if (ls.presentCount() == 0) {
      continue;
    }
    const TaskSpec& spec = heads.tasks()[t];
    Var             emb  = spec.level == TaskLevel::Graph ? graphEmbedding : nodeEmbedding;
    Var             loss = taskLoss(spec, heads.forward(tape, t, emb), ls);
    const auto      g    = static_cast<std::size_t>(spec.group);
    sums[g]              = sums[g].valid() ? ad::add(sums[g], loss) : loss;
    ++counts[g];
  }
  MultitaskLoss out;
  for (std::size_t g = 0; g < kNumTaskGroups; ++g) {
    if (counts[g] == 0) {
      continue;
    }
    out.groups[g]       = ad::scale(sums[g], 1.0 / static_cast<double>(counts[g]));
    out.groupValues[g]  = out.groups[g].value().item();
    out.groupPresent[g] = true;
  }
  out.total = combinedLoss(out.groups, weights);
  return out;
}

}  // namespace minifp
