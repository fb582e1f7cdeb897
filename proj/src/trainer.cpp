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

#include "minifp/trainer.h"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "enum_names.h"
#include "minifp/error.h"
#include "minifp/rng.h"

namespace minifp {

using detail::enumName;
using detail::parseEnum;

namespace {

constexpr std::pair<const char*, Schedule> kScheduleNames[] = {
  {"constant", Schedule::Constant}, {"linear", Schedule::Linear}, {"cosine", Schedule::Cosine},
  {"linear-decay", Schedule::Linear}};

std::size_t batchCount(std::size_t n, std::size_t batchSize) {
  return (n + batchSize - 1) / batchSize;
}

std::span<const std::size_t> batchSlice(const std::vector<std::size_t>& order, std::size_t b, std::size_t batchSize) {
  const std::size_t begin = b * batchSize;
  const std::size_t end   = std::min(order.size(), begin + batchSize);
  return std::span<const std::size_t>(order).subspan(begin, end - begin);
}

struct GroupAccumulator {
  std::array<double, kNumTaskGroups>      sum{};
  std::array<std::size_t, kNumTaskGroups> count{};

  void add(const MultitaskLoss& loss) {
    for (std::size_t g = 0; g < kNumTaskGroups; ++g) {
      if (loss.groupPresent[g]) {
        sum[g] += loss.groupValues[g];
        ++count[g];
      }
    }
  }

  void finish(std::array<double, kNumTaskGroups>& means, std::array<bool, kNumTaskGroups>& present) const {
    for (std::size_t g = 0; g < kNumTaskGroups; ++g) {
      present[g] = count[g] > 0;
      means[g]   = present[g] ? sum[g] / static_cast<double>(count[g]) : 0.0;
    }
  }
};

void checkFinite(const MultitaskLoss& loss, int epoch) {
  for (std::size_t g = 0; g < kNumTaskGroups; ++g) {
    if (loss.groupPresent[g] && !std::isfinite(loss.groupValues[g])) {
      throw Error(ErrorCode::NumericFailure, "non-finite loss in task group " +
                                                 toString(static_cast<TaskGroup>(g)) + " at epoch " +
                                                 std::to_string(epoch));
    }
  }
}

nlohmann::ordered_json groupsJson(const std::array<double, kNumTaskGroups>& values,
                                  const std::array<bool, kNumTaskGroups>&   present) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (std::size_t g = 0; g < kNumTaskGroups; ++g) {
    if (present[g]) {
      j[toString(static_cast<TaskGroup>(g))] = values[g];
    }
  }
  return j;
}

}  // namespace

std::string toString(Schedule schedule) {
  return enumName(schedule, kScheduleNames);
}

Schedule parseSchedule(const std::string& text) {
  return parseEnum(text, kScheduleNames, "schedule");
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidConfig, msg); };
  if (epochs < 1) {
    fail("epochs must be >= 1");
  }
  if (warmupEpochs < 0 || warmupEpochs > epochs) {
    fail("warmup_epochs must lie in [0, epochs]");
  }
  if (!(peakLr > 0.0)) {
    fail("peak_lr must be positive");
  }
  if (batchSize < 1) {
    fail("batch_size must be >= 1");
  }
}

double lrAt(double fraction, const TrainConfig& config) {
  fraction           = std::clamp(fraction, 0.0, 1.0);
  const double warm  = static_cast<double>(config.warmupEpochs) / static_cast<double>(config.epochs);
  if (fraction < warm) {
    return config.peakLr * fraction / warm;
  }
  if (warm >= 1.0) {
    return config.peakLr;
  }
  const double t = (fraction - warm) / (1.0 - warm);
  switch (config.schedule) {
    case Schedule::Constant: return config.peakLr;
    case Schedule::Linear:   return config.peakLr * (1.0 - t);
    case Schedule::Cosine:   return config.peakLr * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
  }
  return config.peakLr;
}

void Adam::step(std::span<Parameter* const> params, double lr) {
  ++step_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
  for (Parameter* p : params) {
    Moments& mo = moments_[p];
    if (!mo.m.sameShape(p->value)) {
      mo.m = Tensor(p->value.rows(), p->value.cols());
      mo.v = Tensor(p->value.rows(), p->value.cols());
    }
    if (!p->grad.sameShape(p->value)) {
      continue;
    }
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double g = p->grad[i];
      mo.m[i]        = beta1_ * mo.m[i] + (1.0 - beta1_) * g;
      mo.v[i]        = beta2_ * mo.v[i] + (1.0 - beta2_) * g * g;
      const double mHat = mo.m[i] / c1;
      const double vHat = mo.v[i] / c2;
      p->value[i] -= lr * mHat / (std::sqrt(vHat) + epsilon_);
    }
  }
}

void Adam::step(ParameterSet& params, double lr) {
  std::vector<Parameter*> list;
  for (Parameter& p : params.all()) {
    list.push_back(&p);
  }
  step(list, lr);
}

Split splitDataset(std::size_t n, const SplitSpec& spec) {
  if (n < 3) {
    throw Error(ErrorCode::TooFewMolecules, "splitting needs at least 3 molecules, got " + std::to_string(n));
  }
  if (spec.train < 0.0 || spec.valid < 0.0 || spec.test < 0.0 ||
      std::abs(spec.train + spec.valid + spec.test - 1.0) > 1e-9) {
    throw Error(ErrorCode::InvalidConfig, "split fractions must be non-negative and sum to 1");
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) {
    order[i] = i;
  }
  Rng rng(spec.seed, "split");
  rng.shuffle(order);
  const auto nTrain = static_cast<std::size_t>(std::floor(spec.train * static_cast<double>(n) + 1e-9));
  const auto nValid = static_cast<std::size_t>(std::floor(spec.valid * static_cast<double>(n) + 1e-9));
  Split      s;
  s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(nTrain));
  s.valid.assign(order.begin() + static_cast<std::ptrdiff_t>(nTrain),
                 order.begin() + static_cast<std::ptrdiff_t>(nTrain + nValid));
  s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(nTrain + nValid), order.end());
  return s;
}

PretrainModel::PretrainModel(const ModelConfig& config, std::span<const TaskSpec> tasks, std::size_t headHidden)
    : backbone_(std::make_unique<Backbone>(config, params_)), headHidden_(headHidden) {
  heads_ = TaskHeads(tasks, backbone_->graphEmbeddingWidth(), config.dNode, headHidden, params_, config.seed);
}

GraphBatch batchFor(const PretrainDataset& data, std::span<const std::size_t> indices) {
  std::vector<const MolecularGraph*>    graphs;
  std::vector<const AssembledFeatures*> feats;
  for (const std::size_t i : indices) {
    graphs.push_back(&data.molecules.at(i).graph);
    feats.push_back(&data.molecules.at(i).features);
  }
  return makeBatch(graphs, feats);
}

BatchLabels labelsFor(const PretrainDataset& data, std::span<const std::size_t> indices) {
  BatchLabels out;
  for (std::size_t t = 0; t < data.tasks.size(); ++t) {
    std::size_t rows = 0;
    for (const std::size_t i : indices) {
      rows += data.molecules[i].labels.at(t).values.rows();
    }
    const std::size_t width = data.tasks[t].labelWidth;
    LabelSet          ls{Tensor(rows, width), Tensor(rows, width)};
    std::size_t       r = 0;
    for (const std::size_t i : indices) {
      const LabelSet& src = data.molecules[i].labels[t];
      if (src.values.cols() != width || !src.values.sameShape(src.mask)) {
        throw Error(ErrorCode::ShapeMismatch, "labels of molecule '" + data.molecules[i].id + "' for task '" +
                                                  data.tasks[t].name + "' have the wrong shape");
      }
      for (std::size_t k = 0; k < src.values.rows(); ++k, ++r) {
        std::copy(src.values.row(k).begin(), src.values.row(k).end(), ls.values.row(r).begin());
        std::copy(src.mask.row(k).begin(), src.mask.row(k).end(), ls.mask.row(r).begin());
      }
    }
    out.tasks.push_back(std::move(ls));
  }
  return out;
}

MultitaskLoss PretrainModel::loss(Tape& tape, const PretrainDataset& data, std::span<const std::size_t> indices,
                                  const LossWeights& weights) const {
  const GraphBatch batch = batchFor(data, indices);
  const GraphState state = backbone_->forward(tape, batch);
  return multitaskLoss(tape, heads_, backbone_->graphEmbedding(state, batch), state.nodes, labelsFor(data, indices),
                       weights);
}

EpochRecord evaluate(const PretrainModel& model, const PretrainDataset& data, std::span<const std::size_t> indices,
                     std::size_t batchSize, const LossWeights& weights) {
  EpochRecord      rec;
  GroupAccumulator acc;
  const std::vector<std::size_t> order(indices.begin(), indices.end());
  for (std::size_t b = 0; b < batchCount(order.size(), batchSize); ++b) {
    Tape tape;
    acc.add(model.loss(tape, data, batchSlice(order, b, batchSize), weights));
  }
  acc.finish(rec.validGroups, rec.validPresent);
  rec.hasValid  = !indices.empty();
  rec.validLoss = combinedLoss(rec.validGroups, weights);
  return rec;
}

void saveModel(const std::string& path, const ParameterSet& params, const ModelConfig& config) {
  saveCheckpoint(path, params);
  std::ofstream out(path + ".config", std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::Io, "cannot write " + path + ".config");
  }
  out << config.serialize();
}

ModelConfig readModelConfig(const std::string& checkpointPath) {
  std::ifstream in(checkpointPath + ".config");
  if (!in) {
    throw Error(ErrorCode::Io, "cannot open " + checkpointPath + ".config");
  }
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return ModelConfig::parse(text);
}

PretrainResult pretrain(PretrainModel& model, const PretrainDataset& data, const Split& split,
                        const TrainConfig& config, const LossWeights& weights, const PretrainOutputs& outputs) {
  config.validate();
  if (split.train.empty()) {
    throw Error(ErrorCode::TooFewMolecules, "empty training split");
  }
  const bool    writeFiles = !outputs.runDir.empty();
  std::ofstream log;
  std::ofstream timing;
  if (writeFiles) {
    log.open(outputs.runDir + "/log.jsonl", std::ios::trunc);
    timing.open(outputs.runDir + "/timing.jsonl", std::ios::trunc);
    if (!log || !timing) {
      throw Error(ErrorCode::Io, "cannot write logs in " + outputs.runDir);
    }
    nlohmann::ordered_json header;
    header["type"]            = "header";
    header["timestamp"]       = outputs.timestamp;
    header["backbone"]        = toString(model.backbone().config().backbone);
    header["parameter_count"] = model.backbone().parameterCount();
    header["total_parameters"] = model.params().elementCount();
    log << header.dump() << '\n';
  }

  const ModelConfig&  modelConfig = model.backbone().config();
  const std::size_t   perEpoch    = batchCount(split.train.size(), config.batchSize);
  const double        totalSteps  = static_cast<double>(perEpoch) * config.epochs;
  const std::uint64_t dropoutSeed = streamSeed(config.seed, "dropout");
  Adam                adam;
  std::uint64_t       step = 0;
  PretrainResult      result;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto               started = std::chrono::steady_clock::now();
    std::vector<std::size_t> order   = split.train;
    Rng(config.seed, "shuffle/" + std::to_string(epoch)).shuffle(order);
    GroupAccumulator acc;
    double           lr = 0.0;
    for (std::size_t b = 0; b < perEpoch; ++b, ++step) {
      Tape                tape(true, dropoutSeed, step);
      const MultitaskLoss loss = model.loss(tape, data, batchSlice(order, b, config.batchSize), weights);
      checkFinite(loss, epoch);
      lr = lrAt(static_cast<double>(step + 1) / totalSteps, config);
      if (!loss.total.valid()) {
        continue;
      }
      acc.add(loss);
      model.params().zeroGrad();
      tape.backward(loss.total);
      adam.step(model.params(), lr);
    }
    EpochRecord rec = split.valid.empty() ? EpochRecord{}
                                          : evaluate(model, data, split.valid, config.batchSize, weights);
    rec.epoch = epoch;
    rec.lr    = lr;
    acc.finish(rec.trainGroups, rec.trainPresent);
    rec.trainLoss = combinedLoss(rec.trainGroups, weights);
    if (rec.hasValid && !std::isfinite(rec.validLoss)) {
      for (std::size_t g = 0; g < kNumTaskGroups; ++g) {
        if (rec.validPresent[g] && !std::isfinite(rec.validGroups[g])) {
          throw Error(ErrorCode::NumericFailure, "non-finite validation loss in task group " +
                                                     toString(static_cast<TaskGroup>(g)) + " at epoch " +
                                                     std::to_string(epoch));
        }
      }
    }
    const double selection = rec.hasValid ? rec.validLoss : rec.trainLoss;
    if (epoch == 1 || selection < result.bestLoss) {
      result.bestLoss  = selection;
      result.bestEpoch = epoch;
      if (writeFiles) {
        saveModel(outputs.runDir + "/best.ckpt", model.params(), modelConfig);
      }
    }
    result.epochs.push_back(rec);
    if (writeFiles) {
      nlohmann::ordered_json line;
      line["type"]       = "epoch";
      line["epoch"]      = epoch;
      line["lr"]         = rec.lr;
      line["train_loss"] = rec.trainLoss;
      line["train"]      = groupsJson(rec.trainGroups, rec.trainPresent);
      if (rec.hasValid) {
        line["valid_loss"] = rec.validLoss;
        line["valid"]      = groupsJson(rec.validGroups, rec.validPresent);
      }
      log << line.dump() << '\n';
      const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
      timing << nlohmann::ordered_json{{"epoch", epoch}, {"wall_seconds", seconds}}.dump() << '\n';
    }
  }
  if (writeFiles) {
    saveModel(outputs.runDir + "/final.ckpt", model.params(), modelConfig);
    nlohmann::ordered_json summary;
    summary["type"]       = "summary";
    summary["best_epoch"] = result.bestEpoch;
    summary["best_loss"]  = result.bestLoss;
    log << summary.dump() << '\n';
  }
  return result;
}

}  // namespace minifp
