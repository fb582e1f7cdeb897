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

#include "minifp/backbones.h"
#include "minifp/error.h"
#include "test_util.h"

namespace minifp {
namespace {

using testing::smallConfig;

GraphBatch batchOf(const std::vector<std::string>& smiles, int kPe, int steps) {
  std::vector<MolecularGraph>    graphs;
  std::vector<AssembledFeatures> feats;
  for (const std::string& s : smiles) {
    graphs.push_back(parseSmiles(s));
  }
  for (const MolecularGraph& g : graphs) {
    feats.push_back(assemble(g, kPe, steps, 0));
  }
  std::vector<const MolecularGraph*>    gp;
  std::vector<const AssembledFeatures*> fp;
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    gp.push_back(&graphs[i]);
    fp.push_back(&feats[i]);
  }
  return makeBatch(gp, fp);
}

//! Two nodes joined by one bond, given as two directed edges.
const std::vector<int> kK2Senders   = {0, 1};
const std::vector<int> kK2Receivers = {1, 0};

TEST(Counting, LinearAndMlp) {
  EXPECT_EQ(linearParameterCount(3, 2), 8u);
  EXPECT_EQ(mlpParameterCount(4, 4, 4), 40u);
  ParameterSet params;
  Linear       l(params, "l", 3, 2, 1);
  Mlp          m(params, "m", 4, 4, 4, 1);
  EXPECT_EQ(params.elementCount(), 48u);
}

TEST(Counting, DefaultsLandNearTenMillion) {
  EXPECT_EQ(countParameters(ModelConfig::defaults(BackboneKind::Gcn)), 10082304u);
  EXPECT_EQ(countParameters(ModelConfig::defaults(BackboneKind::Gine)), 9966256u);
  EXPECT_EQ(countParameters(ModelConfig::defaults(BackboneKind::MpnnPlusPlus)), 10148192u);
  for (const BackboneKind kind : {BackboneKind::Gcn, BackboneKind::Gine, BackboneKind::MpnnPlusPlus}) {
    const std::size_t n = countParameters(ModelConfig::defaults(kind));
    EXPECT_GE(n, 8'000'000u);
    EXPECT_LE(n, 12'000'000u);
  }
}

TEST(Counting, ClosedFormMatchesAllocatedModel) {
  for (const BackboneKind kind : {BackboneKind::Gcn, BackboneKind::Gine, BackboneKind::MpnnPlusPlus}) {
    for (const int layers : {1, 3}) {
      const ModelConfig cfg = smallConfig(kind, 5, layers);
      ParameterSet      params;
      Backbone          model(cfg, params);
      EXPECT_EQ(model.parameterCount(), countParameters(cfg)) << toString(kind);
      EXPECT_EQ(params.elementCount(), countParameters(cfg));
    }
  }
}

TEST(Counting, DefaultGineAllocationMatches) {
  ParameterSet params;
  Backbone     model(ModelConfig::defaults(BackboneKind::Gine), params);
  EXPECT_EQ(model.parameterCount(), 9966256u);
}

TEST(Config, ValidationRejectsBadValues) {
  ModelConfig c = ModelConfig::defaults(BackboneKind::Gine);
  c.numLayers   = 0;
  EXPECT_THROW(c.validate(), Error);
  c           = ModelConfig::defaults(BackboneKind::Gine);
  c.dEdge     = 7;
  EXPECT_THROW(c.validate(), Error);
  c         = ModelConfig::defaults(BackboneKind::Gcn);
  c.dropout = 1.0;
  EXPECT_THROW(c.validate(), Error);
  c         = ModelConfig::defaults(BackboneKind::Gcn);
  c.readout = GraphReadout::Global;
  EXPECT_THROW(c.validate(), Error);
}

TEST(Config, SerializeRoundTrip) {
  ModelConfig c = smallConfig(BackboneKind::MpnnPlusPlus, 77);
  c.dropout     = 0.15;
  c.pooling     = Pooling::Mean;
  c.gineMode    = GineEpsilonMode::Multiplicative;
  EXPECT_EQ(ModelConfig::parse(c.serialize()), c);
  EXPECT_THROW(ModelConfig::parse(c.serialize() + "bogus = 1\n"), Error);
}

TEST(Embed, IdentityMlpsApplyRelu) {
  ModelConfig c = smallConfig(BackboneKind::Gcn, 1, 1);
  c.kPe         = 1;
  c.rwSteps     = 1;
  c.dNode       = c.inputNodeWidth();
  ParameterSet params;
  Backbone     model(c, params);
  setIdentity(model.nodeEmbedding());
  const GraphBatch batch = batchOf({"CCO"}, 1, 1);
  Tape             tape;
  const GraphState s = model.embed(tape, batch);
  Tensor           expected = batch.nodeFeatures;
  for (double& v : expected.values()) {
    v = std::max(v, 0.0);
  }
  EXPECT_EQ(s.nodes.value(), expected);
}

TEST(Embed, ZeroInputZeroBiasGivesZero) {
  ParameterSet params;
  Backbone     model(smallConfig(BackboneKind::Gine, 2), params);
  GraphBatch   batch = batchOf({"CCO"}, 4, 6);
  batch.nodeFeatures.fill(0.0);
  Tape tape;
  EXPECT_EQ(model.embed(tape, batch).nodes.value(), Tensor(3, 8));
}

TEST(Embed, GlobalRowsRepeatPerGraph) {
  ParameterSet     params;
  Backbone         model(smallConfig(BackboneKind::MpnnPlusPlus, 3), params);
  const GraphBatch batch = batchOf({"CCO", "c1ccccc1"}, 4, 6);
  Tape             tape;
  const Tensor     g = model.embed(tape, batch).globals.value();
  ASSERT_EQ(g.rows(), 2u);
  EXPECT_TRUE(std::equal(g.row(0).begin(), g.row(0).end(), g.row(1).begin()));
}

TEST(Embed, WrongFeatureWidthRejected) {
  ParameterSet params;
  Backbone     model(smallConfig(BackboneKind::Gine, 2), params);
  Tape         tape;
  EXPECT_THROW(model.embed(tape, batchOf({"CCO"}, 2, 6)), Error);
}

TEST(Gcn, SingleNodeKeepsValue) {
  Tape tape;
  Var  x = tape.constant(Tensor{{3.0, -2.0}});
  EXPECT_EQ(gcnAggregate(x, {}, {}).value(), (Tensor{{3.0, -2.0}}));
}

TEST(Gcn, TwoNodeHandComputation) {
  Tape tape;
  Var  y = gcnAggregate(tape.constant(Tensor{{1.0}, {0.0}}), kK2Senders, kK2Receivers);
  EXPECT_EQ(y.value(), (Tensor{{0.5}, {0.5}}));
}

TEST(Gine, IsolatedNodeUnchanged) {
  ParameterSet params;
  Mlp          mlp(params, "mlp", 2, 2, 2, 0);
  setIdentity(mlp);
  Tape tape;
  Var  y = gineLayer(tape, tape.constant(Tensor{{0.5, 2.0}}), tape.constant(Tensor(0, 2)), tape.constant(Tensor(1, 1)),
                     {}, {}, mlp, GineEpsilonMode::Standard, 0.0);
  EXPECT_EQ(y.value(), (Tensor{{0.5, 2.0}}));
}

TEST(Gine, TwoNodeHandComputation) {
  ParameterSet params;
  Mlp          mlp(params, "mlp", 1, 1, 1, 0);
  setIdentity(mlp);
  Tape tape;
  Var  y = gineLayer(tape, tape.constant(Tensor{{1.0}, {1.0}}), tape.constant(Tensor{{0.0}, {0.0}}),
                     tape.constant(Tensor(1, 1)), kK2Senders, kK2Receivers, mlp, GineEpsilonMode::Standard, 0.0);
  EXPECT_EQ(y.value(), (Tensor{{2.0}, {2.0}}));
}

TEST(Gine, MultiplicativeModeMultiplies) {
  ParameterSet params;
  Mlp          mlp(params, "mlp", 1, 1, 1, 0);
  setIdentity(mlp);
  Tape tape;
  // (1 - 0.25) * 2 * relu(3 + 1) = 6 for node 0; (0.75) * 3 * relu(2 + 1) = 6.75 for node 1.
  Var y = gineLayer(tape, tape.constant(Tensor{{2.0}, {3.0}}), tape.constant(Tensor{{1.0}, {1.0}}),
                    tape.constant(Tensor{{0.25}}), kK2Senders, kK2Receivers, mlp, GineEpsilonMode::Multiplicative, 0.0);
  EXPECT_EQ(y.value(), (Tensor{{6.0}, {6.75}}));
}

TEST(Gine, RejectsWidthMismatch) {
  ParameterSet params;
  Mlp          mlp(params, "mlp", 2, 2, 2, 0);
  Tape         tape;
  EXPECT_THROW(gineLayer(tape, tape.constant(Tensor(2, 2)), tape.constant(Tensor(2, 3)), tape.constant(Tensor(1, 1)),
                         kK2Senders, kK2Receivers, mlp, GineEpsilonMode::Standard, 0.0),
               Error);
}

//! Sets an MLP to v -> relu(sum(v)) for a single output unit.
void setSumMlp(const Mlp& mlp) {
  mlp.first().weight().value.fill(1.0);
  mlp.first().bias().value.fill(0.0);
  mlp.second().weight().value.fill(1.0);
  mlp.second().bias().value.fill(0.0);
}

TEST(Mpnn, SingleDirectedEdgeHandTrace) {
  ParameterSet params;
  MpnnMlps     mlps{Mlp(params, "e", 4, 1, 1, 0), Mlp(params, "n", 5, 1, 1, 0), Mlp(params, "g", 3, 1, 1, 0)};
  setSumMlp(mlps.edge);
  setSumMlp(mlps.node);
  setSumMlp(mlps.global);
  GraphBatch batch;
  batch.numGraphs    = 1;
  batch.nodeGraph    = {0, 0};
  batch.senders      = {0};
  batch.receivers    = {1};
  batch.edgeGraph    = {0};
  batch.nodeFeatures = Tensor(2, 1);
  batch.edgeFeatures = Tensor(1, 1);
  Tape       tape;
  GraphState in{tape.constant(Tensor{{1.0}, {2.0}}), tape.constant(Tensor{{0.5}}), tape.constant(Tensor{{-1.0}})};
  const GraphState out = mpnnppLayer(tape, in, batch, mlps, 0.0);
  // edge: relu(1 + 2 + 0.5 - 1) = 2.5
  // node 0: relu(1 + 0 + 2.5 + 0 - 1) = 2.5; node 1: relu(2 + 2.5 + 0 + 1 - 1) = 4.5
  // global: relu(-1 + 7 + 2.5) = 8.5
  EXPECT_EQ(out.edges.value(), (Tensor{{3.0}}));
  EXPECT_EQ(out.nodes.value(), (Tensor{{3.5}, {6.5}}));
  EXPECT_EQ(out.globals.value(), (Tensor{{7.5}}));
}

TEST(Mpnn, ZeroMlpsReduceToIdentity) {
  ParameterSet params;
  Backbone     model(smallConfig(BackboneKind::MpnnPlusPlus, 4, 1), params);
  for (const MpnnMlps& m : model.mpnnMlps()) {
    setZero(m.edge);
    setZero(m.node);
    setZero(m.global);
  }
  const GraphBatch batch = batchOf({"CC(=O)O", "CN"}, 4, 6);
  Tape             tape;
  const GraphState e = model.embed(tape, batch);
  const GraphState f = model.forward(tape, batch);
  EXPECT_EQ(e.nodes.value(), f.nodes.value());
  EXPECT_EQ(e.edges.value(), f.edges.value());
  EXPECT_EQ(e.globals.value(), f.globals.value());
}

TEST(Mpnn, EdgelessGraphIsFinite) {
  ParameterSet     params;
  Backbone         model(smallConfig(BackboneKind::MpnnPlusPlus, 4), params);
  const GraphBatch batch = batchOf({"C", "[Na+].[Cl-]"}, 4, 6);
  Tape             tape;
  const GraphState s = model.forward(tape, batch);
  for (const Tensor* t : {&s.nodes.value(), &s.globals.value()}) {
    for (const double v : t->values()) {
      EXPECT_TRUE(std::isfinite(v));
    }
  }
  EXPECT_EQ(s.edges.rows(), 0u);
}

TEST(Backbone, ForwardIsDeterministic) {
  for (const BackboneKind kind : {BackboneKind::Gcn, BackboneKind::Gine, BackboneKind::MpnnPlusPlus}) {
    ParameterSet     pa;
    ParameterSet     pb;
    Backbone         a(smallConfig(kind, 9), pa);
    Backbone         b(smallConfig(kind, 9), pb);
    const GraphBatch batch = batchOf({"CC(=O)Oc1ccccc1C(=O)O", "CCN"}, 4, 6);
    Tape             ta;
    Tape             tb;
    EXPECT_EQ(a.forward(ta, batch).nodes.value(), b.forward(tb, batch).nodes.value());
  }
}

TEST(Backbone, NodePermutationEquivarianceIsBitwise) {
  Rng rng(31);
  for (const BackboneKind kind : {BackboneKind::Gcn, BackboneKind::Gine, BackboneKind::MpnnPlusPlus}) {
    ParameterSet     params;
    Backbone         model(smallConfig(kind, 12), params);
    const GraphBatch batch    = batchOf({"CC(C)Cc1ccc(cc1)C(C)C(=O)O", "OCC"}, 4, 6);
    const auto       nodePerm = testing::randomPermutation(rng, batch.numNodes());
    const auto       edgePerm = testing::randomPermutation(rng, batch.numEdges());
    const GraphBatch permuted = testing::permuteBatch(batch, nodePerm, edgePerm);
    Tape             ta;
    Tape             tb;
    const GraphState a = model.forward(ta, batch);
    const GraphState b = model.forward(tb, permuted);
    for (std::size_t i = 0; i < batch.numNodes(); ++i) {
      const auto ra = a.nodes.value().row(i);
      const auto rb = b.nodes.value().row(nodePerm[i]);
      EXPECT_TRUE(std::equal(ra.begin(), ra.end(), rb.begin())) << toString(kind);
    }
    EXPECT_EQ(model.graphEmbedding(a, batch).value(), model.graphEmbedding(b, permuted).value());
  }
}

TEST(Backbone, EdgeFeaturesSeparateGcnFromOthers) {
  for (const BackboneKind kind : {BackboneKind::Gcn, BackboneKind::Gine, BackboneKind::MpnnPlusPlus}) {
    ParameterSet     params;
    Backbone         model(smallConfig(kind, 21), params);
    const GraphBatch batch   = batchOf({"CC(=O)N"}, 4, 6);
    GraphBatch       altered = batch;
    Rng              rng(5);
    for (double& v : altered.edgeFeatures.values()) {
      v = rng.normal();
    }
    Tape         ta;
    Tape         tb;
    const Tensor a = model.forward(ta, batch).nodes.value();
    const Tensor b = model.forward(tb, altered).nodes.value();
    if (kind == BackboneKind::Gcn) {
      EXPECT_EQ(a, b);
    } else {
      double diff = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a[i] - b[i]) * (a[i] - b[i]);
      }
      EXPECT_GT(std::sqrt(diff), 1e-6) << toString(kind);
    }
  }
}

TEST(Backbone, LayerGradientsMatchFiniteDifferences) {
  for (const BackboneKind kind : {BackboneKind::Gcn, BackboneKind::Gine, BackboneKind::MpnnPlusPlus}) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      ParameterSet     params;
      Backbone         model(smallConfig(kind, seed, 2), params);
      const GraphBatch batch = batchOf({"CC=O", "C1CC1N"}, 4, 6);
      for (Parameter* p : model.parameters()) {
        if (p->name.ends_with("epsilon")) {
          p->value[0] = 0.1;
        }
      }
      auto loss = [&](Tape& t) {
        const GraphState s = model.forward(t, batch);
        Var              y = ad::meanAll(ad::mul(s.nodes, s.nodes));
        return ad::add(y, ad::sumAll(model.graphEmbedding(s, batch)));
      };
      std::vector<Parameter*> list = model.parameters();
      const GradCheckResult   r    = finiteDifferenceCheck(loss, list);
      EXPECT_LT(r.maxRelativeError, 1e-4) << toString(kind) << " " << r.worstParameter << "[" << r.worstIndex << "]";
    }
  }
}

}  // namespace
}  // namespace minifp
