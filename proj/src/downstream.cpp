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

#include "minifp/downstream.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>

#include "enum_names.h"
#include "minifp/error.h"
#include "minifp/keyvalue.h"
#include "minifp/rng.h"

namespace minifp {

namespace {

constexpr std::pair<const char*, Normalization> kNormNames[] = {
  {"none", Normalization::None}, {"batch", Normalization::Batch}, {"layer", Normalization::Layer}};

constexpr double kBatchNormMomentum = 0.1;

Tensor selectRows(const Tensor& x, std::span<const std::size_t> rows) {
  Tensor out(rows.size(), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy(x.row(rows[i]).begin(), x.row(rows[i]).end(), out.row(i).begin());
  }
  return out;
}

std::vector<double> selectValues(std::span<const double> y, std::span<const std::size_t> rows) {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const std::size_t r : rows) {
    out.push_back(y[r]);
  }
  return out;
}

Var lossOn(Var out, std::span<const double> y, TaskKind kind) {
  const Tensor target(y.size(), 1, std::vector<double>(y.begin(), y.end()));
  const Tensor mask(y.size(), 1, 1.0);
  return kind == TaskKind::Binary ? ad::maskedBce(out, target, mask) : ad::maskedMae(out, target, mask);
}

void checkKind(TaskKind kind) {
  if (kind == TaskKind::Multiclass) {
    throw Error(ErrorCode::InvalidConfig, "downstream heads support binary and regression tasks");
  }
}

void checkBinary(std::span<const double> scores, std::span<const double> labels, std::size_t& pos,
                 std::size_t& neg) {
  if (scores.size() != labels.size()) {
    throw Error(ErrorCode::ShapeMismatch, "scores and labels differ in length");
  }
  pos = 0;
  neg = 0;
  for (const double l : labels) {
    if (l == 1.0) {
      ++pos;
    } else if (l == 0.0) {
      ++neg;
    } else {
      throw Error(ErrorCode::InvalidConfig, "binary labels must be 0 or 1");
    }
  }
  if (pos == 0 || neg == 0) {
    throw Error(ErrorCode::SingleClass, "both classes must be present");
  }
}

double pearson(std::span<const double> a, std::span<const double> b) {
  const auto  n  = static_cast<long double>(a.size());
  long double ma = 0;
  long double mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  long double sab = 0;
  long double saa = 0;
  long double sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return static_cast<double>(sab / std::sqrt(saa * sbb));
}

bool hasVariance(std::span<const double> v) {
  return std::any_of(v.begin(), v.end(), [&](double x) { return x != v.front(); });
}

void meanStd(const std::vector<double>& v, double& mean, double& sd) {
  long double s = 0;
  for (const double x : v) {
    s += x;
  }
  mean = static_cast<double>(s / static_cast<long double>(v.size()));
  if (v.size() < 2) {
    sd = 0.0;
    return;
  }
  long double ss = 0;
  for (const double x : v) {
    ss += (x - mean) * (x - mean);
  }
  sd = static_cast<double>(std::sqrt(ss / static_cast<long double>(v.size() - 1)));
}

}  // namespace

std::string toString(Normalization norm) {
  return detail::enumName(norm, kNormNames);
}

Normalization parseNormalization(const std::string& text) {
  return detail::parseEnum(text, kNormNames, "normalization");
}

void HeadConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidConfig, msg); };
  if (hidden == 0 || numLayers < 1) {
    fail("head needs at least one hidden layer of positive width");
  }
  if (dropout < 0.0 || dropout >= 1.0) {
    fail("head dropout must lie in [0, 1)");
  }
  TrainConfig tc;
  tc.epochs       = epochs;
  tc.peakLr       = learningRate;
  tc.warmupEpochs = warmupEpochs;
  tc.schedule     = schedule;
  tc.batchSize    = batchSize;
  tc.validate();
}

std::string HeadConfig::describe() const {
  std::ostringstream s;
  s << "lr=" << formatDouble(learningRate) << " hidden=" << hidden << " layers=" << numLayers
    << " dropout=" << formatDouble(dropout) << " norm=" << toString(normalization) << " skip=" << (skip ? 1 : 0)
    << " epochs=" << epochs << " warmup=" << warmupEpochs << " schedule=" << toString(schedule)
    << " batch=" << batchSize;
  return s.str();
}

HeadModel::HeadModel(const HeadConfig& config, std::size_t inputDim, std::uint64_t seed) : config_(config) {
  config_.validate();
  std::size_t in = inputDim;
  for (int l = 0; l < config_.numLayers; ++l) {
    blocks_.emplace_back(params_, "head/block" + std::to_string(l), in, config_.hidden, seed);
    runningMean_.emplace_back(1, config_.hidden, 0.0);
    runningVar_.emplace_back(1, config_.hidden, 1.0);
    in = config_.hidden;
  }
  output_ = Linear(params_, "head/out", in, 1, seed);
}

Var HeadModel::run(Tape& tape, const Tensor& x, bool updateStats) const {
  Var h = tape.constant(x);
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    Var z = blocks_[l].forward(tape, h);
    switch (config_.normalization) {
      case Normalization::None: break;
      case Normalization::Layer: z = ad::layerNorm(z); break;
      case Normalization::Batch:
        if (updateStats) {
          Tensor mean;
          Tensor var;
          z = ad::batchNorm(z, 1e-5, &mean, &var);
          for (std::size_t c = 0; c < mean.size(); ++c) {
            runningMean_[l][c] = (1.0 - kBatchNormMomentum) * runningMean_[l][c] + kBatchNormMomentum * mean[c];
            runningVar_[l][c]  = (1.0 - kBatchNormMomentum) * runningVar_[l][c] + kBatchNormMomentum * var[c];
          }
        } else {
          z = ad::normalizeColumns(z, runningMean_[l], runningVar_[l]);
        }
        break;
    }
    z = ad::dropout(ad::relu(z), config_.dropout);
    h = config_.skip && h.cols() == z.cols() ? ad::add(h, z) : z;
  }
  return output_.forward(tape, h);
}

Var HeadModel::forward(Tape& tape, const Tensor& x) {
  return run(tape, x, tape.training());
}

Var HeadModel::infer(Tape& tape, const Tensor& x) const {
  return run(tape, x, false);
}

std::vector<double> HeadModel::predict(const Tensor& x, TaskKind kind) const {
  Tape          tape;
  const Tensor& out = infer(tape, x).value();
  std::vector<double> p(out.rows());
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = kind == TaskKind::Binary ? 1.0 / (1.0 + std::exp(-out(i, 0))) : out(i, 0);
  }
  return p;
}

HeadModel::Snapshot HeadModel::snapshot() const {
  Snapshot s;
  for (const Parameter& p : params_.all()) {
    s.values.push_back(p.value);
  }
  s.runningMean = runningMean_;
  s.runningVar  = runningVar_;
  return s;
}

void HeadModel::restore(const Snapshot& s) {
  std::size_t i = 0;
  for (Parameter& p : params_.all()) {
    p.value = s.values.at(i++);
  }
  runningMean_ = s.runningMean;
  runningVar_  = s.runningVar;
}

Tensor fingerprintMatrix(const FingerprintStore& store, std::span<const std::string> ids) {
  Tensor                   x(ids.size(), store.dimension());
  std::vector<std::string> missing;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto k = store.find(ids[i]);
    if (!k) {
      missing.push_back(ids[i]);
      continue;
    }
    const auto v = store.vector(*k);
    std::copy(v.begin(), v.end(), x.row(i).begin());
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& id : missing) {
      list += (list.empty() ? "" : ", ") + id;
    }
    throw Error(ErrorCode::MissingFingerprint,
                std::to_string(missing.size()) + " id(s) have no fingerprint: " + list);
  }
  return x;
}

double headLoss(const HeadModel& model, const Tensor& x, std::span<const double> y, TaskKind kind) {
  Tape tape;
  return lossOn(model.infer(tape, x), y, kind).value().item();
}

TrainedHead trainHead(const Tensor& trainX, std::span<const double> trainY, const Tensor& validX,
                      std::span<const double> validY, TaskKind kind, const HeadConfig& config, std::uint64_t seed) {
  checkKind(kind);
  config.validate();
  if (trainX.rows() == 0 || trainX.rows() != trainY.size() || validX.rows() != validY.size()) {
    throw Error(ErrorCode::ShapeMismatch, "head training data and labels disagree or are empty");
  }
  TrainedHead out;
  out.model = std::make_unique<HeadModel>(config, trainX.cols(), streamSeed(seed, "head-init"));
  HeadModel& model = *out.model;

  TrainConfig schedule;
  schedule.epochs       = config.epochs;
  schedule.peakLr       = config.learningRate;
  schedule.warmupEpochs = config.warmupEpochs;
  schedule.schedule     = config.schedule;

  const std::size_t   n          = trainX.rows();
  const std::size_t   perEpoch   = (n + config.batchSize - 1) / config.batchSize;
  const double        totalSteps = static_cast<double>(perEpoch) * config.epochs;
  const std::uint64_t dropSeed   = streamSeed(seed, "head-dropout");
  const bool          hasValid   = validX.rows() > 0;
  Adam                adam;
  std::uint64_t       step = 0;
  HeadModel::Snapshot best;

  std::vector<std::size_t> order(n);
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng(seed, "head-shuffle/" + std::to_string(epoch)).shuffle(order);
    for (std::size_t b = 0; b < perEpoch; ++b, ++step) {
      const std::size_t              begin = b * config.batchSize;
      const std::span<const std::size_t> rows(order.data() + begin, std::min(n, begin + config.batchSize) - begin);
      Tape        tape(true, dropSeed, step);
      const Var   loss = lossOn(model.forward(tape, selectRows(trainX, rows)), selectValues(trainY, rows), kind);
      if (!std::isfinite(loss.value().item())) {
        throw Error(ErrorCode::NumericFailure, "non-finite head loss at epoch " + std::to_string(epoch));
      }
      model.params().zeroGrad();
      tape.backward(loss);
      adam.step(model.params(), lrAt(static_cast<double>(step + 1) / totalSteps, schedule));
    }
    const double v = hasValid ? headLoss(model, validX, validY, kind) : headLoss(model, trainX, trainY, kind);
    out.validCurve.push_back(v);
    if (epoch == 1 || v < out.bestLoss) {
      out.bestLoss  = v;
      out.bestEpoch = epoch;
      best          = model.snapshot();
    }
  }
  model.restore(best);
  return out;
}

TrainedHead trainHead(const FingerprintStore& store, const DownstreamTask& task, const HeadConfig& config,
                      std::uint64_t seed) {
  const Tensor trainX = fingerprintMatrix(store, task.train.ids);
  const Tensor validX = fingerprintMatrix(store, task.valid.ids);
  return trainHead(trainX, task.train.labels, validX, task.valid.labels, task.kind, config, seed);
}

double auroc(std::span<const double> scores, std::span<const double> labels) {
  std::size_t pos = 0;
  std::size_t neg = 0;
  checkBinary(scores, labels, pos, neg);
  const std::vector<double> ranks = midranks(scores);
  double                    sum   = 0.0;
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    if (labels[i] == 1.0) {
      sum += ranks[i];
    }
  }
  const double p = static_cast<double>(pos);
  return (sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(neg));
}

double auprc(std::span<const double> scores, std::span<const double> labels) {
  std::size_t pos = 0;
  std::size_t neg = 0;
  checkBinary(scores, labels, pos, neg);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double      ap         = 0.0;
  double      prevRecall = 0.0;
  std::size_t tp         = 0;
  std::size_t fp         = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] == 1.0 ? tp : fp) += 1;
      ++j;
    }
    const double recall    = static_cast<double>(tp) / static_cast<double>(pos);
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    ap += (recall - prevRecall) * precision;
    prevRecall = recall;
    i          = j;
  }
  return ap;
}

double mae(std::span<const double> predictions, std::span<const double> labels) {
  if (predictions.size() != labels.size() || labels.empty()) {
    throw Error(ErrorCode::ShapeMismatch, "predictions and labels differ in length or are empty");
  }
  std::vector<double> terms(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    terms[i] = std::abs(predictions[i] - labels[i]);
  }
  return orderedSum(terms) / static_cast<double>(labels.size());
}

MetricReport primaryMetric(std::span<const double> predictions, std::span<const double> labels, TaskKind kind) {
  checkKind(kind);
  if (kind == TaskKind::Binary) {
    return {"AUROC", auroc(predictions, labels), true};
  }
  return {"MAE", mae(predictions, labels), false};
}

std::vector<double> midranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && values[order[j]] == values[order[i]]) {
      ++j;
    }
    // Positions i..j-1 share the average of ranks i+1..j.
    const double r = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      ranks[order[k]] = r;
    }
    i = j;
  }
  return ranks;
}

SpearmanResult spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw Error(ErrorCode::ShapeMismatch, "spearman inputs differ in length");
  }
  if (x.size() < 3) {
    throw Error(ErrorCode::InvalidConfig, "spearman needs at least 3 pairs");
  }
  if (!hasVariance(x) || !hasVariance(y)) {
    throw Error(ErrorCode::ZeroVariance, "spearman input is constant");
  }
  const std::vector<double> rx = midranks(x);
  std::vector<double>       ry = midranks(y);
  SpearmanResult            res;
  res.rho         = std::clamp(pearson(rx, ry), -1.0, 1.0);
  const std::size_t n = x.size();
  if (n <= 8) {
    res.exact = true;
    std::sort(ry.begin(), ry.end());
    std::size_t total = 0;
    std::size_t hits  = 0;
    do {
      ++total;
      if (std::abs(pearson(rx, ry)) >= std::abs(res.rho) - 1e-12) {
        ++hits;
      }
    } while (std::next_permutation(ry.begin(), ry.end()));
    // next_permutation skips repeats of tied ranks; weight each distinct arrangement equally.
    res.pValue = static_cast<double>(hits) / static_cast<double>(total);
    return res;
  }
  if (std::abs(res.rho) >= 1.0) {
    res.pValue = 0.0;
    return res;
  }
  const double df = static_cast<double>(n - 2);
  const double t  = res.rho * std::sqrt(df / (1.0 - res.rho * res.rho));
  const boost::math::students_t dist(df);
  res.pValue = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
  return res;
}

SweepSpace SweepSpace::config1() {
  SweepSpace s;
  for (const double lr : {0.001, 0.0005, 0.0003, 0.0001, 5e-5}) {
    HeadConfig c;
    c.learningRate = lr;
    c.epochs       = 25;
    c.dropout      = 0.1;
    c.hidden       = 1024;
    c.numLayers    = 3;
    s.points.push_back(c);
  }
  return s;
}

SweepSpace SweepSpace::config2() {
  SweepSpace s;
  for (const bool skip : {true, false}) {
    for (const double lr : {0.0005, 0.0003, 0.0001}) {
      for (const std::size_t hidden : {512u, 1024u, 2048u}) {
        for (const int layers : {3, 4}) {
          for (const double dropout : {0.0, 0.1}) {
            for (const int warmup : {0, 5}) {
              for (const Schedule sched : {Schedule::Constant, Schedule::Linear, Schedule::Cosine}) {
                HeadConfig c;
                c.epochs       = 25;
                c.skip         = skip;
                c.learningRate = lr;
                c.hidden       = hidden;
                c.numLayers    = layers;
                c.dropout      = dropout;
                c.warmupEpochs = warmup;
                c.schedule     = sched;
                s.points.push_back(c);
              }
            }
          }
        }
      }
    }
  }
  return s;
}

SweepSpace SweepSpace::byName(const std::string& name) {
  if (name == "config1") {
    return config1();
  }
  if (name == "config2") {
    return config2();
  }
  throw Error(ErrorCode::InvalidConfig, "unknown sweep preset '" + name + "' (expected config1 or config2)");
}

SweepResult sweep(const SweepSpace& space, const FingerprintStore& store, const DownstreamTask& task,
                  std::uint64_t seed) {
  if (space.points.empty()) {
    throw Error(ErrorCode::InvalidConfig, "empty sweep space");
  }
  const Tensor trainX = fingerprintMatrix(store, task.train.ids);
  const Tensor validX = fingerprintMatrix(store, task.valid.ids);
  SweepResult  result;
  std::size_t  best = 0;
  for (std::size_t i = 0; i < space.points.size(); ++i) {
    const TrainedHead h =
      trainHead(trainX, task.train.labels, validX, task.valid.labels, task.kind, space.points[i], seed);
    result.records.push_back({space.points[i], h.bestLoss, h.bestEpoch});
    const SweepRecord& cur = result.records.back();
    const SweepRecord& inc = result.records[best];
    if (cur.validLoss < inc.validLoss || (cur.validLoss == inc.validLoss && cur.config.key() < inc.config.key())) {
      best = i;
    }
  }
  result.best = result.records[best].config;
  return result;
}

std::vector<double> ensemblePredict(std::span<const HeadModel* const> models, const Tensor& x, TaskKind kind) {
  if (models.empty()) {
    throw Error(ErrorCode::InvalidConfig, "empty ensemble");
  }
  std::vector<long double> sum(x.rows(), 0.0L);
  for (const HeadModel* m : models) {
    const std::vector<double> p = m->predict(x, kind);
    for (std::size_t i = 0; i < p.size(); ++i) {
      sum[i] += p[i];
    }
  }
  std::vector<double> out(x.rows());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<double>(sum[i] / static_cast<long double>(models.size()));
  }
  return out;
}

std::vector<std::vector<std::size_t>> kfoldPartition(std::size_t n, int numFolds, std::uint64_t seed) {
  if (numFolds < 2) {
    throw Error(ErrorCode::InvalidConfig, "need at least 2 folds");
  }
  const auto k = static_cast<std::size_t>(numFolds);
  if (n < k) {
    throw Error(ErrorCode::FoldTooSmall, std::to_string(n) + " training examples cannot fill " +
                                             std::to_string(k) + " folds");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng(seed, "folds").shuffle(order);
  std::vector<std::vector<std::size_t>> folds(k);
  std::size_t                           pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = n / k + (f < n % k ? 1 : 0);
    folds[f].assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                    order.begin() + static_cast<std::ptrdiff_t>(pos + size));
    pos += size;
  }
  return folds;
}

EnsembleResult kfoldEnsemble(const FingerprintStore& store, const DownstreamTask& task, const HeadConfig& config,
                             int numFolds, int numReps, std::uint64_t seed) {
  checkKind(task.kind);
  if (numReps < 1) {
    throw Error(ErrorCode::InvalidConfig, "need at least 1 repetition");
  }
  if (task.test.ids.empty()) {
    throw Error(ErrorCode::InvalidConfig, "ensembling needs a test partition");
  }
  const Tensor trainX = fingerprintMatrix(store, task.train.ids);
  const Tensor validX = fingerprintMatrix(store, task.valid.ids);
  const Tensor testX  = fingerprintMatrix(store, task.test.ids);
  const std::span<const double> y = task.train.labels;

  EnsembleResult result;
  result.numFolds = numFolds;
  std::vector<double> validScores;
  std::vector<double> testScores;
  for (int r = 0; r < numReps; ++r) {
    RepetitionResult rep;
    rep.seed        = streamSeed(seed, "rep/" + std::to_string(r));
    const auto folds = kfoldPartition(trainX.rows(), numFolds, rep.seed);
    std::vector<std::unique_ptr<HeadModel>> models;
    std::vector<double>                     outOfFold(trainX.rows());
    for (std::size_t f = 0; f < folds.size(); ++f) {
      std::vector<std::size_t> fit;
      for (std::size_t g = 0; g < folds.size(); ++g) {
        if (g != f) {
          fit.insert(fit.end(), folds[g].begin(), folds[g].end());
        }
      }
      std::sort(fit.begin(), fit.end());
      TrainedHead h = trainHead(selectRows(trainX, fit), selectValues(y, fit), selectRows(trainX, folds[f]),
                                selectValues(y, folds[f]), task.kind, config,
                                streamSeed(rep.seed, "fold/" + std::to_string(f)));
      rep.foldValidLoss.push_back(h.bestLoss);
      const std::vector<double> held = h.model->predict(selectRows(trainX, folds[f]), task.kind);
      for (std::size_t i = 0; i < held.size(); ++i) {
        outOfFold[folds[f][i]] = held[i];
      }
      models.push_back(std::move(h.model));
    }
    std::vector<const HeadModel*> members;
    for (const auto& m : models) {
      members.push_back(m.get());
    }
    const MetricReport valid = task.valid.ids.empty()
                                 ? primaryMetric(outOfFold, y, task.kind)
                                 : primaryMetric(ensemblePredict(members, validX, task.kind), task.valid.labels,
                                                 task.kind);
    const MetricReport test =
      primaryMetric(ensemblePredict(members, testX, task.kind), task.test.labels, task.kind);
    result.metric         = test.name;
    result.higherIsBetter = test.higherIsBetter;
    rep.validScore        = valid.value;
    rep.testScore         = test.value;
    validScores.push_back(valid.value);
    testScores.push_back(test.value);
    result.repetitions.push_back(std::move(rep));
  }
  meanStd(validScores, result.validMean, result.validStd);
  meanStd(testScores, result.testMean, result.testStd);
  if (numReps == 1) {
    result.warnings.push_back("single repetition: standard deviation reported as 0");
  }
  return result;
}

std::vector<CorrelationEntry> correlationAnalysis(std::span<const MetricColumn> pretrain,
                                                  std::span<const MetricColumn> downstream, double threshold) {
  std::vector<CorrelationEntry> out;
  for (const MetricColumn& p : pretrain) {
    for (const MetricColumn& d : downstream) {
      if (p.values.size() != d.values.size()) {
        throw Error(ErrorCode::ShapeMismatch, "metric columns '" + p.name + "' and '" + d.name +
                                                  "' cover different numbers of runs");
      }
      if (p.values.size() < 3) {
        throw Error(ErrorCode::InvalidConfig, "need >= 3 paired runs, got " + std::to_string(p.values.size()));
      }
      const SpearmanResult s = spearman(p.values, d.values);
      CorrelationEntry     e;
      e.pretrainMetric   = p.name;
      e.downstreamMetric = d.name;
      e.rho              = s.rho;
      e.signedRho        = s.rho * (p.higherIsBetter ? 1.0 : -1.0) * (d.higherIsBetter ? 1.0 : -1.0);
      e.pValue           = s.pValue;
      e.significant      = s.pValue < threshold;
      out.push_back(e);
    }
  }
  return out;
}

}  // namespace minifp
