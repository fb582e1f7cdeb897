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
#include <filesystem>
#include <fstream>
#include <numeric>

#include "minifp/autodiff.h"
#include "minifp/error.h"
#include "minifp/rng.h"

namespace minifp {
namespace {

Tensor randomTensor(Rng& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
  Tensor t(rows, cols);
  for (double& v : t.values()) {
    v = scale * rng.normal();
  }
  return t;
}

std::filesystem::path tempPath(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("minifp_ad_" + name);
}

TEST(Autodiff, ReluForward) {
  Tape tape;
  Var  y = ad::relu(tape.constant(Tensor{{-1.0, 0.0, 2.0}}));
  EXPECT_EQ(y.value(), (Tensor{{0.0, 0.0, 2.0}}));
}

TEST(Autodiff, SegmentSumForward) {
  Tape             tape;
  std::vector<int> ids = {0, 0, 1};
  Var              y   = ad::segmentSum(tape.constant(Tensor{{1.0}, {2.0}, {3.0}}), ids, 2);
  EXPECT_EQ(y.value(), (Tensor{{3.0}, {3.0}}));
}

TEST(Autodiff, SegmentSumIsOrderIndependent) {
  Rng    rng(11);
  Tensor x = randomTensor(rng, 50, 3, 1e3);
  std::vector<int> ids(50);
  for (int& id : ids) {
    id = static_cast<int>(rng.below(4));
  }
  std::vector<int> perm(50);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);
  Tensor           xp(50, 3);
  std::vector<int> idsp(50);
  for (std::size_t i = 0; i < 50; ++i) {
    std::copy(x.row(perm[i]).begin(), x.row(perm[i]).end(), xp.row(i).begin());
    idsp[i] = ids[perm[i]];
  }
  Tape tape;
  EXPECT_EQ(ad::segmentSum(tape.constant(x), ids, 4).value(), ad::segmentSum(tape.constant(xp), idsp, 4).value());
}

TEST(Autodiff, ConcatShapes) {
  Tape tape;
  Var  a = tape.constant(Tensor(4, 2, 1.0));
  Var  b = tape.constant(Tensor(4, 3, 2.0));
  EXPECT_EQ(ad::concat({a, b}, 1).value().shape(), (std::vector<std::size_t>{4, 5}));
  EXPECT_EQ(ad::concat({a, a}, 0).value().shape(), (std::vector<std::size_t>{8, 2}));
  EXPECT_THROW(ad::concat({a, b}, 0), Error);
}

TEST(Autodiff, MatmulShapeMismatch) {
  Tape tape;
  try {
    ad::matmul(tape.constant(Tensor(2, 3)), tape.constant(Tensor(2, 3)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ShapeMismatch);
  }
}

TEST(Autodiff, LinearGradientIsInput) {
  ParameterSet params;
  Parameter&   w = params.add("w", Tensor{{0.5, -1.0, 2.0}});
  const Tensor x{{3.0, 4.0, -5.0}};
  Tape         tape;
  tape.backward(ad::sumAll(ad::mul(tape.parameter(w), tape.constant(x))));
  EXPECT_EQ(w.grad, x);
}

TEST(Autodiff, DeadReluHasZeroGradient) {
  ParameterSet params;
  Parameter&   w = params.add("w", Tensor{{-1.0, -2.0}});
  Tape         tape;
  Var          r = ad::relu(tape.parameter(w));
  tape.backward(ad::sumAll(ad::mul(r, r)));
  EXPECT_EQ(w.grad, (Tensor{{0.0, 0.0}}));
}

TEST(Autodiff, TwoLayerMlpMatchesFiniteDifferences) {
  Rng          rng(3);
  ParameterSet params;
  Parameter&   w1 = params.add("w1", randomTensor(rng, 5, 7, 0.5));
  Parameter&   b1 = params.add("b1", randomTensor(rng, 1, 7, 0.1));
  Parameter&   w2 = params.add("w2", randomTensor(rng, 7, 3, 0.5));
  Parameter&   b2 = params.add("b2", randomTensor(rng, 1, 3, 0.1));
  const Tensor x  = randomTensor(rng, 6, 5);
  auto loss = [&](Tape& t) {
    Var h = ad::relu(ad::add(ad::matmul(t.constant(x), t.parameter(w1)), t.parameter(b1)));
    Var y = ad::add(ad::matmul(h, t.parameter(w2)), t.parameter(b2));
    return ad::meanAll(ad::mul(y, y));
  };
  std::vector<Parameter*> list = {&w1, &b1, &w2, &b2};
  const GradCheckResult   r    = finiteDifferenceCheck(loss, list);
  EXPECT_LT(r.maxRelativeError, 1e-4) << r.worstParameter << "[" << r.worstIndex << "]";
}

TEST(Autodiff, QuadraticMatchesFiniteDifferencesTightly) {
  ParameterSet params;
  Parameter&   w = params.add("w", Tensor{{1.5, -0.25, 3.0, 0.75}});
  auto loss = [&](Tape& t) {
    Var p = t.parameter(w);
    return ad::sumAll(ad::mul(p, p));
  };
  std::vector<Parameter*> list = {&w};
  EXPECT_LT(finiteDifferenceCheck(loss, list).maxRelativeError, 1e-9);
}

TEST(Autodiff, CompositeOpsMatchFiniteDifferences) {
  Rng          rng(5);
  ParameterSet params;
  Parameter&   x = params.add("x", randomTensor(rng, 6, 4));
  Parameter&   g = params.add("g", randomTensor(rng, 1, 4));
  std::vector<int> ids     = {0, 1, 1, 2, 0, 2};
  std::vector<int> gatherI = {5, 0, 0, 3};
  auto loss = [&](Tape& t) {
    Var p  = t.parameter(x);
    Var ln = ad::layerNorm(p);
    Var bn = ad::batchNorm(ad::sigmoid(ad::add(p, t.parameter(g))));
    Var s  = ad::sigmoid(ad::add(ln, bn));
    Var m  = ad::segmentMean(s, ids, 3);
    Var mx = ad::segmentMax(ad::scale(p, 2.0), ids, 3);
    Var c  = ad::concat({m, mx}, 1);
    Var gs = ad::gather(ad::sub(ln, bn), gatherI);
    Var r  = ad::add(ad::sumAll(ad::mul(c, c)), ad::meanAll(ad::maxAxis(gs, 1)));
    return ad::add(r, ad::sumAll(ad::meanAxis(ad::addScalar(s, 0.5), 0)));
  };
  std::vector<Parameter*> list = {&x, &g};
  const GradCheckResult   r    = finiteDifferenceCheck(loss, list);
  EXPECT_LT(r.maxRelativeError, 1e-4) << r.worstParameter << "[" << r.worstIndex << "]";
}

TEST(Autodiff, MaskedLossesMatchFiniteDifferences) {
  Rng          rng(8);
  ParameterSet params;
  Parameter&   z = params.add("z", randomTensor(rng, 4, 6));
  const Tensor target{{0, 1, 0, 1, 1, 0}, {1, 1, 0, 0, 1, 1}, {0, 0, 0, 1, 0, 1}, {1, 0, 1, 0, 1, 0}};
  const Tensor mask{{1, 0, 1, 1, 1, 1}, {1, 1, 0, 1, 1, 1}, {0, 0, 0, 1, 1, 1}, {1, 1, 1, 1, 0, 1}};
  const Tensor classes{{0, 2}, {1, 1}, {2, 0}, {0, 1}};
  const Tensor classMask{{1, 1}, {1, 0}, {0, 1}, {1, 1}};
  auto loss = [&](Tape& t) {
    Var p = t.parameter(z);
    Var a = ad::maskedMae(ad::scale(p, 1.0), target, mask);
    Var b = ad::maskedBce(p, target, mask);
    Var c = ad::maskedCrossEntropy(p, classes, classMask, 3);
    return ad::add(ad::add(a, b), c);
  };
  std::vector<Parameter*> list = {&z};
  EXPECT_LT(finiteDifferenceCheck(loss, list).maxRelativeError, 1e-4);
}

TEST(Autodiff, MaskedEntriesGetExactlyZeroGradient) {
  ParameterSet params;
  Parameter&   z = params.add("z", Tensor{{0.3, -2.0, 5.0}});
  const Tensor target{{1.0, 0.0, 1.0}};
  const Tensor mask{{1.0, 0.0, 1.0}};
  Tape         tape;
  tape.backward(ad::add(ad::maskedBce(tape.parameter(z), target, mask), ad::maskedMae(tape.parameter(z), target, mask)));
  EXPECT_EQ(z.grad[1], 0.0);
  EXPECT_NE(z.grad[0], 0.0);
}

TEST(Autodiff, MaskedLossIgnoresMaskedValues) {
  const Tensor mask{{1.0, 0.0}};
  Tape         tape;
  const double a = ad::maskedMae(tape.constant(Tensor{{1.0, 7.0}}), Tensor{{0.0, 0.0}}, mask).value().item();
  const double b = ad::maskedMae(tape.constant(Tensor{{1.0, -1e9}}), Tensor{{0.0, 3.0}}, mask).value().item();
  EXPECT_EQ(a, b);
  EXPECT_EQ(ad::maskedBce(tape.constant(Tensor{{1.0}}), Tensor{{1.0}}, Tensor{{0.0}}).value().item(), 0.0);
}

TEST(Autodiff, BceIsStableForLargeLogits) {
  Tape         tape;
  const double l = ad::maskedBce(tape.constant(Tensor{{800.0, -800.0}}), Tensor{{0.0, 1.0}}, Tensor{{1.0, 1.0}})
                       .value()
                       .item();
  EXPECT_DOUBLE_EQ(l, 800.0);
}

TEST(Autodiff, CrossEntropyRejectsClassOutOfRange) {
  Tape tape;
  try {
    ad::maskedCrossEntropy(tape.constant(Tensor(1, 3)), Tensor{{3.0}}, Tensor{{1.0}}, 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ClassOutOfRange);
  }
}

TEST(Autodiff, BackwardTwiceDoublesGradients) {
  ParameterSet params;
  Parameter&   w = params.add("w", Tensor{{1.0, 2.0}});
  Tape         tape;
  Var          loss = ad::sumAll(ad::mul(tape.parameter(w), tape.constant(Tensor{{3.0, -1.0}})));
  tape.backward(loss);
  const Tensor once = w.grad;
  tape.backward(loss);
  EXPECT_EQ(w.grad, (Tensor{{2.0 * once[0], 2.0 * once[1]}}));
}

TEST(Autodiff, LossWithoutParametersIsDisconnected) {
  Tape tape;
  Var  loss = ad::sumAll(tape.constant(Tensor{{1.0, 2.0}}));
  try {
    tape.backward(loss);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DisconnectedGraph);
  }
}

TEST(Autodiff, NonScalarLossRejected) {
  ParameterSet params;
  Parameter&   w = params.add("w", Tensor{{1.0, 2.0}});
  Tape         tape;
  EXPECT_THROW(tape.backward(tape.parameter(w)), Error);
}

TEST(Autodiff, DropoutIsDeterministicAndIdentityInEval) {
  const Tensor x(20, 10, 1.0);
  Tape         evalTape(false, 7, 0);
  EXPECT_EQ(ad::dropout(evalTape.constant(x), 0.5).value(), x);

  Tape a(true, 7, 3);
  Tape b(true, 7, 3);
  Tape c(true, 7, 4);
  const Tensor ya = ad::dropout(a.constant(x), 0.5).value();
  EXPECT_EQ(ya, ad::dropout(b.constant(x), 0.5).value());
  EXPECT_NE(ya, ad::dropout(c.constant(x), 0.5).value());
  int kept = 0;
  for (const double v : ya.values()) {
    EXPECT_TRUE(v == 0.0 || v == 2.0);
    kept += v != 0.0;
  }
  EXPECT_GT(kept, 60);
  EXPECT_LT(kept, 140);
}

TEST(Autodiff, BroadcastAddAccumulatesRowGradient) {
  ParameterSet params;
  Parameter&   b = params.add("b", Tensor{{0.0, 0.0}});
  Tape         tape;
  tape.backward(ad::sumAll(ad::add(tape.constant(Tensor(3, 2, 1.0)), tape.parameter(b))));
  EXPECT_EQ(b.grad, (Tensor{{3.0, 3.0}}));
}

TEST(Autodiff, DuplicateParameterNameRejected) {
  ParameterSet params;
  params.add("w", Tensor(1, 1));
  EXPECT_THROW(params.add("w", Tensor(1, 1)), Error);
}

TEST(Checkpoint, RoundTripPreservesFloat32Values) {
  Rng          rng(21);
  ParameterSet a;
  a.add("enc/w", randomTensor(rng, 3, 4));
  a.add("enc/b", randomTensor(rng, 1, 4));
  a.add("head/w", randomTensor(rng, 4, 2));
  const auto path = tempPath("roundtrip.ckpt");
  saveCheckpoint(path.string(), a);

  ParameterSet b;
  b.add("enc/w", Tensor(3, 4));
  b.add("enc/b", Tensor(1, 4));
  b.add("head/w", Tensor(4, 2));
  loadCheckpoint(path.string(), b);
  for (std::size_t k = 0; k < a.size(); ++k) {
    const Parameter& pa = a.all()[k];
    const Parameter& pb = b.all()[k];
    ASSERT_EQ(pa.name, pb.name);
    for (std::size_t i = 0; i < pa.value.size(); ++i) {
      EXPECT_EQ(pb.value[i], static_cast<double>(static_cast<float>(pa.value[i])));
    }
  }
  std::filesystem::remove(path);
}

TEST(Checkpoint, PrefixLoadAndShapeMismatch) {
  ParameterSet a;
  a.add("enc/w", Tensor(2, 2, 1.5));
  a.add("head/w", Tensor(2, 1, 2.5));
  const auto path = tempPath("prefix.ckpt");
  saveCheckpoint(path.string(), a);

  ParameterSet b;
  b.add("enc/w", Tensor(2, 2));
  b.add("head/w", Tensor(2, 3));
  loadCheckpoint(path.string(), b, "enc/");
  EXPECT_EQ(b.at("enc/w").value, Tensor(2, 2, 1.5));
  try {
    loadCheckpoint(path.string(), b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
  std::filesystem::remove(path);
}

TEST(Checkpoint, CorruptMagicRejected) {
  const auto path = tempPath("corrupt.ckpt");
  {
    std::ofstream out(path, std::ios::binary);
    out << "XXXX0000";
  }
  try {
    readCheckpoint(path.string());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::CorruptHeader);
  }
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace minifp
