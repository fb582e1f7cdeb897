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

#ifndef MINIFP_DOWNSTREAM_H
#define MINIFP_DOWNSTREAM_H

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "minifp/autodiff.h"
#include "minifp/fingerprints.h"
#include "minifp/multitask.h"
#include "minifp/nn.h"
#include "minifp/trainer.h"

namespace minifp {

enum class Normalization { None, Batch, Layer };
std::string   toString(Normalization norm);
Normalization parseNormalization(const std::string& text);

struct HeadConfig {
  std::size_t hidden        = 1024;
  int         numLayers     = 3;  //!< hidden layers
  double      dropout       = 0.1;
  Normalization normalization = Normalization::None;
  bool        skip          = false;
  double      learningRate  = 3e-4;
  int         epochs        = 25;
  int         warmupEpochs  = 0;
  Schedule    schedule      = Schedule::Constant;
  std::size_t batchSize     = 32;

  //! Throws InvalidConfig.
  void validate() const;
  //! Tie-break key for sweeps.
  [[nodiscard]] auto key() const {
    return std::make_tuple(learningRate, hidden, numLayers, dropout, static_cast<int>(normalization), skip, epochs,
                           warmupEpochs, static_cast<int>(schedule), batchSize);
  }
  [[nodiscard]] std::string describe() const;
  bool operator==(const HeadConfig&) const = default;
};

//! MLP on fingerprints: numLayers blocks of linear, optional normalization, relu, dropout;
//! with skip on, blocks of equal width add their input. A final linear gives one output.
class HeadModel {
 public:
  HeadModel(const HeadConfig& config, std::size_t inputDim, std::uint64_t seed);
  HeadModel(const HeadModel&)            = delete;
  HeadModel& operator=(const HeadModel&) = delete;

  //! Raw outputs (logits for classification). A training tape uses batch statistics and
  //! updates the running ones.
  Var forward(Tape& tape, const Tensor& x);
  //! Raw outputs with running statistics and no dropout.
  Var infer(Tape& tape, const Tensor& x) const;
  //! Inference outputs: probabilities for binary tasks, values for regression.
  [[nodiscard]] std::vector<double> predict(const Tensor& x, TaskKind kind) const;

  ParameterSet&                     params() noexcept { return params_; }
  [[nodiscard]] const HeadConfig&   config() const noexcept { return config_; }

  struct Snapshot {
    std::vector<Tensor> values;
    std::vector<Tensor> runningMean;
    std::vector<Tensor> runningVar;
  };
  [[nodiscard]] Snapshot snapshot() const;
  void                   restore(const Snapshot& s);

 private:
  Var run(Tape& tape, const Tensor& x, bool updateStats) const;

  HeadConfig          config_;
  ParameterSet        params_;
  std::vector<Linear> blocks_;
  Linear              output_;
  mutable std::vector<Tensor> runningMean_;
  mutable std::vector<Tensor> runningVar_;
};

struct LabeledIds {
  std::vector<std::string> ids;
  std::vector<double>      labels;
};

struct DownstreamTask {
  std::string name;
  TaskKind    kind = TaskKind::Binary;  //!< Binary or Regression
  LabeledIds  train;
  LabeledIds  valid;
  LabeledIds  test;
};

//! Stacks the fingerprints of `ids`. Throws MissingFingerprint listing every absent id.
Tensor fingerprintMatrix(const FingerprintStore& store, std::span<const std::string> ids);

struct TrainedHead {
  std::unique_ptr<HeadModel> model;
  std::vector<double>        validCurve;  //!< per epoch; train loss when there is no validation set
  int                        bestEpoch = 0;
  double                     bestLoss  = 0.0;
};

//! Adam on BCE (binary) or MAE (regression) under the config schedule; the returned model
//! holds the best epoch's weights by validation loss.
TrainedHead trainHead(const Tensor& trainX, std::span<const double> trainY, const Tensor& validX,
                      std::span<const double> validY, TaskKind kind, const HeadConfig& config, std::uint64_t seed);
TrainedHead trainHead(const FingerprintStore& store, const DownstreamTask& task, const HeadConfig& config,
                      std::uint64_t seed);

//! Loss of a head on a data set (BCE on logits or MAE).
double headLoss(const HeadModel& model, const Tensor& x, std::span<const double> y, TaskKind kind);

struct MetricReport {
  std::string name;
  double      value          = 0.0;
  bool        higherIsBetter = true;
};

//! Probability that a random positive outranks a random negative; ties count one half.
double auroc(std::span<const double> scores, std::span<const double> labels);
//! Average precision: sum over distinct thresholds of recall increase times precision.
double auprc(std::span<const double> scores, std::span<const double> labels);
double mae(std::span<const double> predictions, std::span<const double> labels);
//! AUROC for binary tasks, MAE for regression.
MetricReport primaryMetric(std::span<const double> predictions, std::span<const double> labels, TaskKind kind);

struct SpearmanResult {
  double rho     = 0.0;
  double pValue  = 1.0;
  bool   exact   = false;  //!< permutation p-value (n <= 8)
};
//! Midranks, then Pearson correlation. Two-sided p-value from all n! permutations for n <= 8,
//! otherwise from Student's t with n - 2 degrees of freedom. Throws ZeroVariance.
SpearmanResult spearman(std::span<const double> x, std::span<const double> y);
std::vector<double> midranks(std::span<const double> values);

struct SweepSpace {
  std::vector<HeadConfig> points;

  //! Learning rate over five values; 25 epochs, dropout 0.1, width 1024, 3 layers.
  static SweepSpace config1();
  //! 432 points over skip, learning rate, width, depth, dropout, warmup and schedule.
  static SweepSpace config2();
  static SweepSpace byName(const std::string& name);
};

struct SweepRecord {
  HeadConfig config;
  double     validLoss = 0.0;
  int        bestEpoch = 0;
};

struct SweepResult {
  HeadConfig               best;
  std::vector<SweepRecord> records;  //!< in enumeration order
};

//! Trains every grid point with the same seed and returns the smallest validation loss,
//! ties broken by the smallest HeadConfig::key().
SweepResult sweep(const SweepSpace& space, const FingerprintStore& store, const DownstreamTask& task,
                  std::uint64_t seed);

//! Arithmetic mean of member outputs (probabilities for binary tasks).
std::vector<double> ensemblePredict(std::span<const HeadModel* const> models, const Tensor& x, TaskKind kind);

struct RepetitionResult {
  std::uint64_t       seed = 0;
  std::vector<double> foldValidLoss;    //!< each fold model on its held-out fold
  double              validScore = 0.0;  //!< ensemble on the validation set (out-of-fold when absent)
  double              testScore  = 0.0;
};

struct EnsembleResult {
  std::string                   metric;
  bool                          higherIsBetter = true;
  int                           numFolds       = 0;
  std::vector<RepetitionResult> repetitions;
  double                        validMean = 0.0;
  double                        validStd  = 0.0;
  double                        testMean  = 0.0;
  double                        testStd   = 0.0;
  std::vector<std::string>      warnings;
};

//! Folds are contiguous chunks of a seeded shuffle of the training set; sizes differ by at
//! most one. Throws FoldTooSmall when a fold would be empty.
std::vector<std::vector<std::size_t>> kfoldPartition(std::size_t n, int numFolds, std::uint64_t seed);

//! Per repetition: fresh seed, one head per fold (trained on the other folds, best epoch by
//! the held-out fold's loss), ensemble by averaging. Std is the sample standard deviation
//! over repetitions, 0 with a warning for a single repetition.
EnsembleResult kfoldEnsemble(const FingerprintStore& store, const DownstreamTask& task, const HeadConfig& config,
                             int numFolds, int numReps, std::uint64_t seed);

struct MetricColumn {
  std::string         name;
  bool                higherIsBetter = true;
  std::vector<double> values;  //!< one per run
};

struct CorrelationEntry {
  std::string pretrainMetric;
  std::string downstreamMetric;
  double      rho       = 0.0;
  double      signedRho = 0.0;  //!< rho times the improvement directions of both metrics
  double      pValue    = 1.0;
  bool        significant = false;  //!< pValue < threshold
};

//! Every (pretrain, downstream) pair over paired runs. Throws InvalidConfig below 3 runs
//! ("need >= 3 paired runs") and ShapeMismatch when run counts differ.
std::vector<CorrelationEntry> correlationAnalysis(std::span<const MetricColumn> pretrain,
                                                  std::span<const MetricColumn> downstream,
                                                  double                        threshold = 0.1);

}  // namespace minifp

#endif  // MINIFP_DOWNSTREAM_H
