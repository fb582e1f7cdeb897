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

#ifndef MINIFP_TRAINER_H
#define MINIFP_TRAINER_H

#include <array>
#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "minifp/autodiff.h"
#include "minifp/backbones.h"
#include "minifp/multitask.h"

namespace minifp {

enum class Schedule { Constant, Linear, Cosine };
std::string toString(Schedule schedule);
Schedule    parseSchedule(const std::string& text);

struct TrainConfig {
  int           epochs       = 100;
  double        peakLr       = 3e-4;
  int           warmupEpochs = 5;
  Schedule      schedule     = Schedule::Linear;
  std::size_t   batchSize    = 32;
  std::uint64_t seed         = 0;

  //! Throws InvalidConfig.
  void validate() const;
};

//! Learning rate at `fraction` of training. Step s of S trains at fraction (s + 1) / S. Linear warmup to the
//! peak over warmupEpochs / epochs, then constant, linear decay to zero, or half-cosine to zero.
double lrAt(double fraction, const TrainConfig& config);

class Adam {
 public:
  explicit Adam(double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8)
      : beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {}

  //! One bias-corrected update of every parameter from its current gradient.
  void step(std::span<Parameter* const> params, double lr);
  void step(ParameterSet& params, double lr);

  [[nodiscard]] std::uint64_t steps() const noexcept { return step_; }

 private:
  struct Moments {
    Tensor m;
    Tensor v;
  };
  double                                    beta1_;
  double                                    beta2_;
  double                                    epsilon_;
  std::uint64_t                             step_ = 0;
  std::unordered_map<const Parameter*, Moments> moments_;
};

struct SplitSpec {
  double        train = 0.92;
  double        valid = 0.04;
  double        test  = 0.04;
  std::uint64_t seed  = 0;
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> valid;
  std::vector<std::size_t> test;
};

//! Seeded shuffle of 0..n-1; train and valid take floor(fraction * n), test takes the rest.
Split splitDataset(std::size_t n, const SplitSpec& spec);

struct MoleculeRecord {
  std::string       id;
  MolecularGraph    graph;
  AssembledFeatures features;
  //! One entry per task: 1 row for graph tasks, one row per atom for node tasks.
  std::vector<LabelSet> labels;
};

struct PretrainDataset {
  std::vector<TaskSpec>       tasks;
  std::vector<MoleculeRecord> molecules;
};

//! Backbone plus task heads sharing one parameter set.
class PretrainModel {
 public:
  PretrainModel(const ModelConfig& config, std::span<const TaskSpec> tasks, std::size_t headHidden);
  PretrainModel(const PretrainModel&)            = delete;
  PretrainModel& operator=(const PretrainModel&) = delete;

  ParameterSet&       params() noexcept { return params_; }
  const Backbone&     backbone() const noexcept { return *backbone_; }
  const TaskHeads&    heads() const noexcept { return heads_; }
  [[nodiscard]] std::size_t headHidden() const noexcept { return headHidden_; }

  //! Forward pass over the given molecules and the combined loss.
  MultitaskLoss loss(Tape& tape, const PretrainDataset& data, std::span<const std::size_t> indices,
                     const LossWeights& weights) const;

 private:
  ParameterSet              params_;
  std::unique_ptr<Backbone> backbone_;
  TaskHeads                 heads_;
  std::size_t               headHidden_;
};

GraphBatch  batchFor(const PretrainDataset& data, std::span<const std::size_t> indices);
BatchLabels labelsFor(const PretrainDataset& data, std::span<const std::size_t> indices);

struct EpochRecord {
  int                                epoch = 0;
  double                             lr    = 0.0;  //!< at the epoch's last step
  double                             trainLoss = 0.0;
  double                             validLoss = 0.0;
  bool                               hasValid  = false;
  std::array<double, kNumTaskGroups> trainGroups{};
  std::array<bool, kNumTaskGroups>   trainPresent{};
  std::array<double, kNumTaskGroups> validGroups{};
  std::array<bool, kNumTaskGroups>   validPresent{};
};

struct PretrainResult {
  std::vector<EpochRecord> epochs;
  int                      bestEpoch = 0;
  double                   bestLoss  = 0.0;  //!< validation loss, or train loss without a validation set
};

//! Per-group losses averaged over the batches that contain the group, then combined.
EpochRecord evaluate(const PretrainModel& model, const PretrainDataset& data, std::span<const std::size_t> indices,
                     std::size_t batchSize, const LossWeights& weights);

struct PretrainOutputs {
  std::string runDir;  //!< empty: no files are written
  std::string timestamp;
};

//! Adam with the scheduled learning rate over shuffled batches of split.train. When runDir is
//! set, writes best.ckpt, final.ckpt (each with a .config sidecar), log.jsonl and timing.jsonl.
//! Throws NumericFailure naming the task group when a loss becomes non-finite.
PretrainResult pretrain(PretrainModel& model, const PretrainDataset& data, const Split& split,
                        const TrainConfig& config, const LossWeights& weights, const PretrainOutputs& outputs = {});

//! Writes the checkpoint and `<path>.config` holding the model configuration.
void saveModel(const std::string& path, const ParameterSet& params, const ModelConfig& config);
ModelConfig readModelConfig(const std::string& checkpointPath);

}  // namespace minifp

#endif  // MINIFP_TRAINER_H
