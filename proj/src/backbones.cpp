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

#include "minifp/backbones.h"

#include <cmath>

#include "minifp/error.h"
#include "minifp/keyvalue.h"
#include "enum_names.h"

namespace minifp {

using detail::enumName;
using detail::parseEnum;

namespace {

constexpr std::pair<const char*, BackboneKind> kBackboneNames[] = {
  {"gcn", BackboneKind::Gcn}, {"gine", BackboneKind::Gine}, {"mpnn++", BackboneKind::MpnnPlusPlus},
  {"mpnnpp", BackboneKind::MpnnPlusPlus}};
constexpr std::pair<const char*, GineEpsilonMode> kGineModeNames[] = {{"standard", GineEpsilonMode::Standard},
                                                                       {"multiplicative", GineEpsilonMode::Multiplicative}};
constexpr std::pair<const char*, Pooling> kPoolingNames[] = {
  {"sum", Pooling::Sum}, {"mean", Pooling::Mean}, {"max", Pooling::Max}};
constexpr std::pair<const char*, GraphReadout> kReadoutNames[] = {
  {"auto", GraphReadout::Auto}, {"pooled", GraphReadout::Pooled}, {"global", GraphReadout::Global}};

void checkEdgeIndices(std::span<const int> senders, std::span<const int> receivers, std::size_t numNodes) {
  if (senders.size() != receivers.size()) {
    throw Error(ErrorCode::ShapeMismatch, "sender/receiver lists differ in length");
  }
  for (std::size_t k = 0; k < senders.size(); ++k) {
    if (senders[k] < 0 || receivers[k] < 0 || static_cast<std::size_t>(senders[k]) >= numNodes ||
        static_cast<std::size_t>(receivers[k]) >= numNodes) {
      throw Error(ErrorCode::ShapeMismatch, "edge " + std::to_string(k) + " references a node outside [0, " +
                                                std::to_string(numNodes) + ")");
    }
  }
}

}  // namespace

std::string toString(BackboneKind kind) {
  return enumName(kind, kBackboneNames);
}
std::string toString(GineEpsilonMode mode) {
  return enumName(mode, kGineModeNames);
}
std::string toString(Pooling pooling) {
  return enumName(pooling, kPoolingNames);
}
std::string toString(GraphReadout readout) {
  return enumName(readout, kReadoutNames);
}
BackboneKind parseBackboneKind(const std::string& text) {
  return parseEnum(text, kBackboneNames, "backbone");
}
GineEpsilonMode parseGineEpsilonMode(const std::string& text) {
  return parseEnum(text, kGineModeNames, "GINE epsilon mode");
}
Pooling parsePooling(const std::string& text) {
  return parseEnum(text, kPoolingNames, "pooling");
}
GraphReadout parseGraphReadout(const std::string& text) {
  return parseEnum(text, kReadoutNames, "readout");
}

// ---------------------------------------------------------------------------
// ModelConfig
// ---------------------------------------------------------------------------

ModelConfig ModelConfig::defaults(BackboneKind kind) {
  ModelConfig c;
  c.backbone = kind;
  switch (kind) {
    case BackboneKind::Gcn:
      c.dNode = c.dEdge = c.dGlobal = 768;
      break;
    case BackboneKind::Gine:
      c.dNode = c.dEdge = c.dGlobal = 540;
      break;
    case BackboneKind::MpnnPlusPlus:
      c.dNode   = 240;
      c.dEdge   = 128;
      c.dGlobal = 240;
      break;
  }
  return c;
}

bool ModelConfig::readsGlobal() const noexcept {
  if (readout == GraphReadout::Auto) {
    return backbone == BackboneKind::MpnnPlusPlus;
  }
  return readout == GraphReadout::Global;
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidConfig, msg); };
  if (numLayers < 1) {
    fail("num_layers must be >= 1, got " + std::to_string(numLayers));
  }
  if (dNode < 1 || dEdge < 1 || dGlobal < 1) {
    fail("hidden widths must be >= 1");
  }
  if (kPe < 1 || rwSteps < 1) {
    fail("k_pe and rw_steps must be >= 1");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    fail("dropout must lie in [0, 1)");
  }
  if (backbone == BackboneKind::Gine && dNode != dEdge) {
    fail("GINE needs d_node == d_edge (" + std::to_string(dNode) + " vs " + std::to_string(dEdge) + ")");
  }
  if (backbone != BackboneKind::MpnnPlusPlus && readout == GraphReadout::Global) {
    fail("global readout needs the mpnn++ backbone");
  }
}

std::string ModelConfig::serialize() const {
  std::string out;
  auto        line = [&](const char* key, const std::string& value) { out += std::string(key) + " = " + value + "\n"; };
  line("backbone", toString(backbone));
  line("num_layers", std::to_string(numLayers));
  line("d_node", std::to_string(dNode));
  line("d_edge", std::to_string(dEdge));
  line("d_global", std::to_string(dGlobal));
  line("k_pe", std::to_string(kPe));
  line("rw_steps", std::to_string(rwSteps));
  line("dropout", formatDouble(dropout));
  line("seed", std::to_string(seed));
  line("gine_epsilon_mode", toString(gineMode));
  line("pooling", toString(pooling));
  line("readout", toString(readout));
  return out;
}

ModelConfig ModelConfig::parse(const std::string& text) {
  const KeyValues kv = KeyValues::parse(text, "model config");
  kv.requireKnown({"backbone", "num_layers", "d_node", "d_edge", "d_global", "k_pe", "rw_steps", "dropout", "seed",
                   "gine_epsilon_mode", "pooling", "readout"});
  ModelConfig c = defaults(parseBackboneKind(kv.getString("backbone")));
  c.numLayers   = static_cast<int>(kv.getInt("num_layers"));
  c.dNode       = kv.getUnsigned("d_node");
  c.dEdge       = kv.getUnsigned("d_edge");
  c.dGlobal     = kv.getUnsigned("d_global");
  c.kPe         = static_cast<int>(kv.getInt("k_pe"));
  c.rwSteps     = static_cast<int>(kv.getInt("rw_steps"));
  c.dropout     = kv.getDouble("dropout");
  c.seed        = kv.getUnsigned("seed");
  c.gineMode    = parseGineEpsilonMode(kv.getString("gine_epsilon_mode"));
  c.pooling     = parsePooling(kv.getString("pooling"));
  c.readout     = parseGraphReadout(kv.getString("readout"));
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Batching
// ---------------------------------------------------------------------------

void GraphBatch::validate() const {
  const std::size_t n = nodeGraph.size();
  if (nodeFeatures.rows() != n) {
    throw Error(ErrorCode::ShapeMismatch, "batch has " + std::to_string(n) + " graph ids for " +
                                              nodeFeatures.shapeString() + " node features");
  }
  if (edgeFeatures.rows() != senders.size() || edgeGraph.size() != senders.size()) {
    throw Error(ErrorCode::ShapeMismatch, "edge features, edge graph ids and edge list disagree in length");
  }
  checkEdgeIndices(senders, receivers, n);
  for (const int g : nodeGraph) {
    if (g < 0 || static_cast<std::size_t>(g) >= numGraphs) {
      throw Error(ErrorCode::ShapeMismatch, "node graph id out of range");
    }
  }
  for (std::size_t k = 0; k < senders.size(); ++k) {
    if (edgeGraph[k] != nodeGraph[senders[k]] || edgeGraph[k] != nodeGraph[receivers[k]]) {
      throw Error(ErrorCode::ShapeMismatch, "edge " + std::to_string(k) + " crosses graphs");
    }
  }
}

GraphBatch makeBatch(std::span<const MolecularGraph* const> graphs, std::span<const AssembledFeatures* const> features) {
  if (graphs.size() != features.size()) {
    throw Error(ErrorCode::ShapeMismatch, "graph and feature lists differ in length");
  }
  std::size_t nodes = 0;
  std::size_t edges = 0;
  std::size_t width = 0;
  for (std::size_t g = 0; g < graphs.size(); ++g) {
    if (features[g]->nodeFeatures.rows() != graphs[g]->numAtoms() ||
        features[g]->edgeFeatures.rows() != graphs[g]->numBonds()) {
      throw Error(ErrorCode::ShapeMismatch, "features do not match graph " + std::to_string(g));
    }
    if (g > 0 && features[g]->nodeFeatures.cols() != width) {
      throw Error(ErrorCode::ShapeMismatch, "node feature widths differ within a batch");
    }
    width = features[g]->nodeFeatures.cols();
    nodes += graphs[g]->numAtoms();
    edges += 2 * graphs[g]->numBonds();
  }
  GraphBatch batch;
  batch.numGraphs    = graphs.size();
  batch.nodeFeatures = Tensor(nodes, width);
  batch.edgeFeatures = Tensor(edges, kBondFeatureWidth);
  std::size_t nodeOffset = 0;
  std::size_t edgeRow    = 0;
  for (std::size_t g = 0; g < graphs.size(); ++g) {
    const MolecularGraph&    graph = *graphs[g];
    const AssembledFeatures& f     = *features[g];
    for (std::size_t i = 0; i < graph.numAtoms(); ++i) {
      std::copy(f.nodeFeatures.row(i).begin(), f.nodeFeatures.row(i).end(),
                batch.nodeFeatures.row(nodeOffset + i).begin());
      batch.nodeGraph.push_back(static_cast<int>(g));
    }
    for (std::size_t b = 0; b < graph.numBonds(); ++b) {
      const Bond& bond = graph.bond(b);
      const int   u    = static_cast<int>(nodeOffset) + bond.begin;
      const int   v    = static_cast<int>(nodeOffset) + bond.end;
      for (const auto& [s, r] : {std::pair{u, v}, std::pair{v, u}}) {
        batch.senders.push_back(s);
        batch.receivers.push_back(r);
        batch.edgeGraph.push_back(static_cast<int>(g));
        std::copy(f.edgeFeatures.row(b).begin(), f.edgeFeatures.row(b).end(), batch.edgeFeatures.row(edgeRow).begin());
        ++edgeRow;
      }
    }
    nodeOffset += graph.numAtoms();
  }
  return batch;
}

GraphBatch makeBatch(const MolecularGraph& graph, const AssembledFeatures& features) {
  const MolecularGraph*    g[] = {&graph};
  const AssembledFeatures* f[] = {&features};
  return makeBatch(g, f);
}

// ---------------------------------------------------------------------------
// Layers
// ---------------------------------------------------------------------------

Var gcnAggregate(Var x, std::span<const int> senders, std::span<const int> receivers) {
  const std::size_t n = x.rows();
  checkEdgeIndices(senders, receivers, n);
  std::vector<double> degree(n, 1.0);
  for (const int r : receivers) {
    degree[r] += 1.0;
  }
  std::vector<double> edgeCoef(senders.size());
  for (std::size_t k = 0; k < senders.size(); ++k) {
    edgeCoef[k] = 1.0 / std::sqrt(degree[receivers[k]] * degree[senders[k]]);
  }
  std::vector<double> selfCoef(n);
  std::vector<int>    ids(receivers.begin(), receivers.end());
  for (std::size_t i = 0; i < n; ++i) {
    selfCoef[i] = 1.0 / degree[i];
    ids.push_back(static_cast<int>(i));
  }
  Var messages = ad::scaleRows(ad::gather(x, senders), edgeCoef);
  Var self     = ad::scaleRows(x, selfCoef);
  return ad::segmentSum(ad::concat({messages, self}, 0), ids, n);
}

Var gcnLayer(Tape& tape, Var x, std::span<const int> senders, std::span<const int> receivers, const Linear& weight,
             double dropout) {
  return ad::dropout(ad::relu(weight.forward(tape, gcnAggregate(x, senders, receivers))), dropout);
}

Var gineLayer(Tape& tape, Var x, Var e, Var epsilon, std::span<const int> senders, std::span<const int> receivers,
              const Mlp& mlp, GineEpsilonMode mode, double dropout) {
  checkEdgeIndices(senders, receivers, x.rows());
  if (x.cols() != e.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "GINE needs equal node and edge widths: " + x.value().shapeString() +
                                              " vs " + e.value().shapeString());
  }
  Var messages = ad::relu(ad::add(ad::gather(x, senders), e));
  Var agg      = ad::segmentSum(messages, receivers, x.rows());
  Var combined;
  if (mode == GineEpsilonMode::Standard) {
    combined = ad::add(ad::add(x, ad::mul(x, epsilon)), agg);
  } else {
    combined = ad::mul(ad::sub(x, ad::mul(x, epsilon)), agg);
  }
  return ad::dropout(mlp.forward(tape, combined), dropout);
}

GraphState mpnnppLayer(Tape& tape, const GraphState& in, const GraphBatch& batch, const MpnnMlps& mlps,
                       double dropout) {
  const std::size_t n = in.nodes.rows();
  checkEdgeIndices(batch.senders, batch.receivers, n);
  Var xSend = ad::gather(in.nodes, batch.senders);
  Var xRecv = ad::gather(in.nodes, batch.receivers);
  Var eBar  = mlps.edge.forward(tape, ad::concat({xSend, xRecv, in.edges, ad::gather(in.globals, batch.edgeGraph)}, 1));
  eBar      = ad::dropout(eBar, dropout);

  Var incoming  = ad::segmentSum(eBar, batch.receivers, n);
  Var outgoing  = ad::segmentSum(eBar, batch.senders, n);
  Var neighbors = ad::segmentSum(xSend, batch.receivers, n);
  Var xBar      = mlps.node.forward(
    tape, ad::concat({in.nodes, incoming, outgoing, neighbors, ad::gather(in.globals, batch.nodeGraph)}, 1));
  xBar = ad::dropout(xBar, dropout);

  Var nodeSum = ad::segmentSum(xBar, batch.nodeGraph, batch.numGraphs);
  Var edgeSum = ad::segmentSum(eBar, batch.edgeGraph, batch.numGraphs);
  Var gBar    = ad::dropout(mlps.global.forward(tape, ad::concat({in.globals, nodeSum, edgeSum}, 1)), dropout);

  return GraphState{ad::add(xBar, in.nodes), ad::add(eBar, in.edges), ad::add(gBar, in.globals)};
}

Var pool(Var nodes, std::span<const int> nodeGraph, std::size_t numGraphs, Pooling pooling) {
  switch (pooling) {
    case Pooling::Sum:  return ad::segmentSum(nodes, nodeGraph, numGraphs);
    case Pooling::Mean: return ad::segmentMean(nodes, nodeGraph, numGraphs);
    case Pooling::Max:  return ad::segmentMax(nodes, nodeGraph, numGraphs);
  }
  throw Error(ErrorCode::InvalidConfig, "unknown pooling");
}

// ---------------------------------------------------------------------------
// Backbone
// ---------------------------------------------------------------------------

Backbone::Backbone(const ModelConfig& config, ParameterSet& params, const std::string& prefix) : config_(config) {
  config_.validate();
  const std::size_t first = params.size();
  const std::size_t dn    = config_.dNode;
  const std::size_t de    = config_.dEdge;
  const std::size_t dg    = config_.dGlobal;
  const auto        seed  = config_.seed;

  embedX_ = Mlp(params, prefix + "embed_x", config_.inputNodeWidth(), dn, dn, seed);
  if (config_.backbone != BackboneKind::Gcn) {
    embedE_ = Mlp(params, prefix + "embed_e", kBondFeatureWidth, de, de, seed);
  }
  if (config_.backbone == BackboneKind::MpnnPlusPlus) {
    globalSeed_ = globalSeedVector(seed, dg);
    embedG_     = Mlp(params, prefix + "embed_g", dg, dg, dg, seed);
  }
  for (int l = 0; l < config_.numLayers; ++l) {
    const std::string layer = prefix + "layer" + std::to_string(l) + "/";
    switch (config_.backbone) {
      case BackboneKind::Gcn:
        gcn_.emplace_back(params, layer + "gcn", dn, dn, seed);
        break;
      case BackboneKind::Gine:
        gineEps_.push_back(&params.add(layer + "epsilon", Tensor(1, 1)));
        gine_.emplace_back(params, layer + "mlp", dn, dn, dn, seed);
        break;
      case BackboneKind::MpnnPlusPlus:
        mpnn_.push_back(MpnnMlps{Mlp(params, layer + "mlp_edge", 2 * dn + de + dg, de, de, seed),
                                 Mlp(params, layer + "mlp_node", 2 * dn + 2 * de + dg, dn, dn, seed),
                                 Mlp(params, layer + "mlp_global", dg + dn + de, dg, dg, seed)});
        break;
    }
  }
  for (std::size_t i = first; i < params.size(); ++i) {
    owned_.push_back(&params.all()[i]);
  }
}

GraphState Backbone::embed(Tape& tape, const GraphBatch& batch) const {
  batch.validate();
  if (batch.nodeFeatures.cols() != config_.inputNodeWidth()) {
    throw Error(ErrorCode::ShapeMismatch, "node features " + batch.nodeFeatures.shapeString() + " but model expects " +
                                              std::to_string(config_.inputNodeWidth()) + " columns");
  }
  GraphState s;
  s.nodes = embedX_.forward(tape, tape.constant(batch.nodeFeatures));
  if (config_.backbone != BackboneKind::Gcn) {
    s.edges = embedE_.forward(tape, tape.constant(batch.edgeFeatures));
  }
  if (config_.backbone == BackboneKind::MpnnPlusPlus) {
    Var g0    = embedG_.forward(tape, tape.constant(globalSeed_));
    s.globals = ad::gather(g0, std::vector<int>(batch.numGraphs, 0));
  }
  return s;
}

GraphState Backbone::forward(Tape& tape, const GraphBatch& batch) const {
  GraphState s = embed(tape, batch);
  for (int l = 0; l < config_.numLayers; ++l) {
    switch (config_.backbone) {
      case BackboneKind::Gcn:
        s.nodes = gcnLayer(tape, s.nodes, batch.senders, batch.receivers, gcn_[l], config_.dropout);
        break;
      case BackboneKind::Gine:
        s.nodes = gineLayer(tape, s.nodes, s.edges, tape.parameter(*gineEps_[l]), batch.senders, batch.receivers,
                            gine_[l], config_.gineMode, config_.dropout);
        break;
      case BackboneKind::MpnnPlusPlus:
        s = mpnnppLayer(tape, s, batch, mpnn_[l], config_.dropout);
        break;
    }
  }
  return s;
}

Var Backbone::graphEmbedding(const GraphState& state, const GraphBatch& batch) const {
  if (config_.readsGlobal()) {
    return state.globals;
  }
  return pool(state.nodes, batch.nodeGraph, batch.numGraphs, config_.pooling);
}

std::size_t Backbone::graphEmbeddingWidth() const noexcept {
  return config_.readsGlobal() ? config_.dGlobal : config_.dNode;
}

std::size_t Backbone::parameterCount() const noexcept {
  std::size_t total = 0;
  for (const Parameter* p : owned_) {
    total += p->value.size();
  }
  return total;
}

std::size_t countParameters(const ModelConfig& config) {
  config.validate();
  const std::size_t dn     = config.dNode;
  const std::size_t de     = config.dEdge;
  const std::size_t dg     = config.dGlobal;
  const auto        layers = static_cast<std::size_t>(config.numLayers);
  std::size_t       total  = mlpParameterCount(config.inputNodeWidth(), dn, dn);
  switch (config.backbone) {
    case BackboneKind::Gcn:
      total += layers * linearParameterCount(dn, dn);
      break;
    case BackboneKind::Gine:
      total += mlpParameterCount(kBondFeatureWidth, de, de);
      total += layers * (1 + mlpParameterCount(dn, dn, dn));
      break;
    case BackboneKind::MpnnPlusPlus:
      total += mlpParameterCount(kBondFeatureWidth, de, de) + mlpParameterCount(dg, dg, dg);
      total += layers * (mlpParameterCount(2 * dn + de + dg, de, de) + mlpParameterCount(2 * dn + 2 * de + dg, dn, dn) +
                         mlpParameterCount(dg + dn + de, dg, dg));
      break;
  }
  return total;
}

}  // namespace minifp
