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

#include <gtest/gtest.h>

#include <cmath>

#include "minifp/error.h"
#include "minifp/multitask.h"
#include "minifp/rng.h"

namespace minifp {
namespace {

LabelSet fullMask(Tensor values) {
  Tensor mask(values.rows(), values.cols(), 1.0);
  return LabelSet{std::move(values), std::move(mask)};
}

Tensor randomTensor(Rng& rng, std::size_t rows, std::size_t cols) {
  Tensor t(rows, cols);
  for (double& v : t.values()) {
    v = rng.normal();
  }
  return t;
}

LabelSet randomLabels(Rng& rng, std::size_t rows, std::size_t cols, int classes, double presence) {
  LabelSet ls{Tensor(rows, cols), Tensor(rows, cols)};
  for (std::size_t i = 0; i < ls.values.size(); ++i) {
    ls.values[i] = classes == 0 ? rng.normal() : static_cast<double>(rng.below(static_cast<std::uint64_t>(classes)));
    ls.mask[i]   = rng.uniform() < presence ? 1.0 : 0.0;
  }
  return ls;
}

TaskSpec makeTask(const std::string& name, TaskLevel level, TaskKind kind, std::size_t width, TaskGroup group,
                  std::size_t classes = 0) {
  return TaskSpec{name, level, kind, defaultLoss(kind), width, group, classes};
}

TEST(Heads, ZeroWeightsGiveHalfProbability) {
  ParameterSet params;
  TaskSpec     task = makeTask("p", TaskLevel::Graph, TaskKind::Binary, 3, TaskGroup::Pcba);
  TaskHeads    heads(std::span(&task, 1), 4, 4, 5, params, 0);
  setZero(heads.head(0));
  Tape tape;
  Var  p = ad::sigmoid(heads.forward(tape, 0, tape.constant(Tensor(2, 4, 1.0))));
  EXPECT_EQ(p.value(), Tensor(2, 3, 0.5));
}

TEST(Heads, IdentityHeadPassesEmbedding) {
  ParameterSet params;
  TaskSpec     task = makeTask("r", TaskLevel::Graph, TaskKind::Regression, 1, TaskGroup::N4);
  TaskHeads    heads(std::span(&task, 1), 1, 1, 1, params, 0);
  setIdentity(heads.head(0));
  Tape tape;
  EXPECT_EQ(heads.forward(tape, 0, tape.constant(Tensor{{2.5}, {0.75}})).value(), (Tensor{{2.5}, {0.75}}));
}

TEST(Heads, OutputShapeAndWidthCheck) {
  ParameterSet params;
  TaskSpec     task = makeTask("g", TaskLevel::Graph, TaskKind::Binary, 25, TaskGroup::G25);
  TaskHeads    heads(std::span(&task, 1), 6, 6, 8, params, 0);
  Tape         tape;
  EXPECT_EQ(heads.forward(tape, 0, tape.constant(Tensor(7, 6))).value().shape(), (std::vector<std::size_t>{7, 25}));
  EXPECT_THROW(heads.forward(tape, 0, tape.constant(Tensor(7, 5))), Error);
}

TEST(TaskSpecs, LossMustMatchKind) {
  TaskSpec t = makeTask("t", TaskLevel::Graph, TaskKind::Binary, 1, TaskGroup::Pcba);
  t.loss     = LossKind::Mae;
  EXPECT_THROW(t.validate(), Error);
  TaskSpec m = makeTask("m", TaskLevel::Graph, TaskKind::Multiclass, 2, TaskGroup::L1000, 1);
  EXPECT_THROW(m.validate(), Error);
  m.numClasses = 3;
  EXPECT_NO_THROW(m.validate());
  EXPECT_EQ(m.outputWidth(), 6u);
}

TEST(Mae, Examples) {
  Tape tape;
  EXPECT_EQ(maeLoss(tape.constant(Tensor{{1.0, -2.0}}), fullMask(Tensor{{1.0, -2.0}})).value().item(), 0.0);
  LabelSet ls{Tensor{{0.0, 0.0}}, Tensor{{1.0, 0.0}}};
  EXPECT_EQ(maeLoss(tape.constant(Tensor{{1.0, 3.0}}), ls).value().item(), 1.0);
}

TEST(Mae, MatchesLoopOracle) {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor   pred = randomTensor(rng, 5, 4);
    const LabelSet ls   = randomLabels(rng, 5, 4, 0, 0.6);
    long double    sum  = 0;
    int            n    = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      if (ls.mask[i] != 0.0) {
        sum += std::fabs(static_cast<long double>(pred[i]) - ls.values[i]);
        ++n;
      }
    }
    Tape         tape;
    const double got = maeLoss(tape.constant(pred), ls).value().item();
    EXPECT_NEAR(got, n ? static_cast<double>(sum / n) : 0.0, 1e-13);
  }
}

TEST(Bce, Examples) {
  Tape tape;
  EXPECT_NEAR(bceLoss(tape.constant(Tensor{{0.0}}), fullMask(Tensor{{1.0}})).value().item(), std::log(2.0), 1e-15);
  const double big = bceLoss(tape.constant(Tensor{{40.0}}), fullMask(Tensor{{1.0}})).value().item();
  EXPECT_TRUE(std::isfinite(big));
  EXPECT_LT(big, 1e-15);
  EXPECT_GE(big, 0.0);
}

TEST(Bce, MatchesLoopOracle) {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor   z   = randomTensor(rng, 6, 3);
    const LabelSet ls  = randomLabels(rng, 6, 3, 2, 0.5);
    long double    sum = 0;
    int            n   = 0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      if (ls.mask[i] != 0.0) {
        const long double p = 1.0L / (1.0L + std::exp(-static_cast<long double>(z[i])));
        sum -= ls.values[i] * std::log(p) + (1.0L - ls.values[i]) * std::log(1.0L - p);
        ++n;
      }
    }
    Tape tape;
    EXPECT_NEAR(bceLoss(tape.constant(z), ls).value().item(), n ? static_cast<double>(sum / n) : 0.0, 1e-13);
  }
}

TEST(Hce, Examples) {
  Tape tape;
  EXPECT_NEAR(hceLoss(tape.constant(Tensor(1, 3, 0.7)), fullMask(Tensor{{2.0}}), 3).value().item(), std::log(3.0),
              1e-15);
  EXPECT_LT(hceLoss(tape.constant(Tensor{{-50.0, 50.0, -50.0}}), fullMask(Tensor{{1.0}}), 3).value().item(), 1e-40);
  try {
    hceLoss(tape.constant(Tensor(1, 3)), fullMask(Tensor{{3.0}}), 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ClassOutOfRange);
  }
}

TEST(Hce, MatchesLoopOracle) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t c   = 4;
    const Tensor      z   = randomTensor(rng, 5, 2 * c);
    const LabelSet    ls  = randomLabels(rng, 5, 2, static_cast<int>(c), 0.7);
    long double       sum = 0;
    int               n   = 0;
    for (std::size_t r = 0; r < 5; ++r) {
      for (std::size_t l = 0; l < 2; ++l) {
        if (ls.mask(r, l) == 0.0) {
          continue;
        }
        long double denom = 0;
        for (std::size_t k = 0; k < c; ++k) {
          denom += std::exp(static_cast<long double>(z(r, l * c + k)));
        }
        sum -= std::log(std::exp(static_cast<long double>(z(r, l * c + static_cast<std::size_t>(ls.values(r, l))))) /
                        denom);
        ++n;
      }
    }
    Tape tape;
    EXPECT_NEAR(hceLoss(tape.constant(z), ls, c).value().item(), n ? static_cast<double>(sum / n) : 0.0, 1e-13);
  }
}

TEST(Combined, Arithmetic) {
  EXPECT_EQ(combinedLoss({1.0, 1.0, 1.0, 1.0, 0.0}, LossWeights{5.0}), 3.2);
  EXPECT_EQ(combinedLoss({0.0, 0.0, 0.7, 0.0, 0.0}, LossWeights{5.0}), 0.7);
  EXPECT_DOUBLE_EQ(combinedLoss({0.5, 0.25, 0.1, 0.2, 0.0}, LossWeights{1.0}), 1.05);
  EXPECT_THROW(combinedLoss({0.0, 0.0, 0.0, 0.0, 0.0}, LossWeights{0.0}), Error);
}

TEST(Combined, LinearInEachGroup) {
  const std::array<double, kNumTaskGroups> coef = {1.0, 1.0, 1.0, 0.2, 1.0};
  Rng                                      rng(4);
  for (std::size_t g = 0; g < kNumTaskGroups; ++g) {
    std::array<double, kNumTaskGroups> base{};
    for (double& v : base) {
      v = rng.uniform();
    }
    auto         moved = base;
    moved[g] += 1.0;
    const double slope = combinedLoss(moved, LossWeights{}) - combinedLoss(base, LossWeights{});
    EXPECT_NEAR(slope, coef[g], 1e-12);
  }
}

TEST(Combined, VarAndScalarAgree) {
  ParameterSet params;
  Parameter&   p = params.add("p", Tensor{{1.0}});
  Tape         tape;
  Var          one = tape.parameter(p);
  Var          v   = combinedLoss({one, one, one, one, Var()}, LossWeights{});
  EXPECT_EQ(v.value().item(), 3.2);
  Var only = combinedLoss({Var(), Var(), ad::scale(one, 0.4), Var(), Var()}, LossWeights{});
  EXPECT_EQ(only.value().item(), 0.4);
}

struct Fixture {
  ParameterSet          params;
  std::vector<TaskSpec> tasks = {
    makeTask("reg", TaskLevel::Graph, TaskKind::Regression, 2, TaskGroup::N4),
    makeTask("bin", TaskLevel::Graph, TaskKind::Binary, 3, TaskGroup::Pcba),
    makeTask("cls", TaskLevel::Graph, TaskKind::Multiclass, 2, TaskGroup::L1000, 3),
    makeTask("nod", TaskLevel::Node, TaskKind::Regression, 1, TaskGroup::G25),
  };
  TaskHeads   heads;
  Tensor      graphEmb;
  Tensor      nodeEmb;
  BatchLabels labels;

  explicit Fixture(std::uint64_t seed) : heads(tasks, 4, 3, 6, params, seed) {
    Rng rng(seed + 100);
    graphEmb = randomTensor(rng, 5, 4);
    nodeEmb  = randomTensor(rng, 9, 3);
    labels.tasks.push_back(randomLabels(rng, 5, 2, 0, 0.6));
    labels.tasks.push_back(randomLabels(rng, 5, 3, 2, 0.6));
    labels.tasks.push_back(randomLabels(rng, 5, 2, 3, 0.6));
    labels.tasks.push_back(randomLabels(rng, 9, 1, 0, 0.6));
    // Every MAE residual gets the same sign.
    for (const std::size_t t : {0u, 3u}) {
      for (double& v : labels.tasks[t].values.values()) {
        v += 10.0;
      }
    }
  }

  Var loss(Tape& tape) const {
    return multitaskLoss(tape, heads, tape.constant(graphEmb), tape.constant(nodeEmb), labels, LossWeights{}).total;
  }
};

TEST(Multitask, HeadsAndLossesMatchFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Fixture                 f(seed);
    std::vector<Parameter*> list;
    for (Parameter& p : f.params.all()) {
      list.push_back(&p);
    }
    const GradCheckResult r = finiteDifferenceCheck([&](Tape& t) { return f.loss(t); }, list);
    EXPECT_LT(r.maxRelativeError, 1e-4) << r.worstParameter;
  }
}

TEST(Multitask, MaskedLabelsAreInvisibleBitwise) {
  Fixture a(7);
  Fixture b(7);
  Rng     rng(8);
  for (LabelSet& ls : b.labels.tasks) {
    for (std::size_t i = 0; i < ls.values.size(); ++i) {
      if (ls.mask[i] == 0.0) {
        ls.values[i] = ls.values.cols() == 2 && &ls == &b.labels.tasks[2] ? 99.0 : rng.normal() * 1e6;
      }
    }
  }
  Tape ta;
  Tape tb;
  Var  la = a.loss(ta);
  Var  lb = b.loss(tb);
  EXPECT_EQ(la.value(), lb.value());
  ta.backward(la);
  tb.backward(lb);
  for (std::size_t k = 0; k < a.params.size(); ++k) {
    EXPECT_EQ(a.params.all()[k].grad, b.params.all()[k].grad) << a.params.all()[k].name;
  }
}

TEST(Multitask, GroupsWithoutLabelsContributeNothing) {
  Fixture f(3);
  for (std::size_t t = 0; t < 3; ++t) {
    f.labels.tasks[t].mask.fill(0.0);
  }
  Tape                tape;
  const MultitaskLoss l = multitaskLoss(tape, f.heads, tape.constant(f.graphEmb), tape.constant(f.nodeEmb), f.labels,
                                        LossWeights{});
  EXPECT_FALSE(l.groupPresent[static_cast<std::size_t>(TaskGroup::N4)]);
  EXPECT_TRUE(l.groupPresent[static_cast<std::size_t>(TaskGroup::G25)]);
  EXPECT_EQ(l.total.value().item(), l.groupValues[static_cast<std::size_t>(TaskGroup::G25)] * (1.0 / 5.0));
  for (std::size_t t = 0; t < 4; ++t) {
    f.labels.tasks[t].mask.fill(0.0);
  }
  Tape empty;
  EXPECT_FALSE(multitaskLoss(empty, f.heads, empty.constant(f.graphEmb), empty.constant(f.nodeEmb), f.labels,
                             LossWeights{})
                 .total.valid());
}

TEST(Multitask, LossesAreNonNegative) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Fixture             f(seed);
    Tape                tape;
    const MultitaskLoss l = multitaskLoss(tape, f.heads, tape.constant(f.graphEmb), tape.constant(f.nodeEmb),
                                          f.labels, LossWeights{});
    for (const double v : l.groupValues) {
      EXPECT_GE(v, 0.0);
    }
  }
}

}  // namespace
}  // namespace minifp
