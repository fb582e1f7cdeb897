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

#ifndef MINIFP_BACKBONES_H
#define MINIFP_BACKBONES_H

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "minifp/autodiff.h"
#include "minifp/encodings.h"
#include "minifp/nn.h"

namespace minifp {

enum class BackboneKind { Gcn, Gine, MpnnPlusPlus };
enum class GineEpsilonMode { Standard, Multiplicative };
enum class Pooling { Sum, Mean, Max };
//! Source of graph-level embeddings: pooled node states or the global vector (MPNN++ only).
enum class GraphReadout { Auto, Pooled, Global };

std::string toString(BackboneKind kind);
std::string toString(GineEpsilonMode mode);
std::string toString(Pooling pooling);
std::string toString(GraphReadout readout);
BackboneKind    parseBackboneKind(const std::string& text);
GineEpsilonMode parseGineEpsilonMode(const std::string& text);
Pooling         parsePooling(const std::string& text);
GraphReadout    parseGraphReadout(const std::string& text);

struct ModelConfig {
  BackboneKind    backbone  = BackboneKind::Gine;
  int             numLayers = 16;
  std::size_t     dNode     = 540;
  std::size_t     dEdge     = 540;
  std::size_t     dGlobal   = 540;
  int             kPe       = kDefaultLapPeDim;
  int             rwSteps   = kDefaultRandomWalk;
  double          dropout   = 0.0;
  std::uint64_t   seed      = 0;
  GineEpsilonMode gineMode  = GineEpsilonMode::Standard;
  Pooling         pooling   = Pooling::Max;
  GraphReadout    readout   = GraphReadout::Auto;

  //! Default widths for each backbone, sized to roughly 10M parameters at 16 layers.
  static ModelConfig defaults(BackboneKind kind);
  //! Throws InvalidConfig.
  void validate() const;
  [[nodiscard]] std::size_t inputNodeWidth() const noexcept { return nodeFeatureWidth(kPe, rwSteps); }
  [[nodiscard]] bool        readsGlobal() const noexcept;

  //! key = value lines covering every field.
  [[nodiscard]] std::string serialize() const;
  static ModelConfig        parse(const std::string& text);
  bool operator==(const ModelConfig&) const = default;
};

//! Disjoint union of molecular graphs. Every bond becomes two directed edges.
struct GraphBatch {
  Tensor           nodeFeatures;  //!< X0 rows of all graphs
  Tensor           edgeFeatures;  //!< one row per directed edge
  std::vector<int> senders;
  std::vector<int> receivers;
  std::vector<int> nodeGraph;  //!< graph id of each node
  std::vector<int> edgeGraph;  //!< graph id of each edge
  std::size_t      numGraphs = 0;

  [[nodiscard]] std::size_t numNodes() const noexcept { return nodeGraph.size(); }
  [[nodiscard]] std::size_t numEdges() const noexcept { return senders.size(); }
  //! Throws ShapeMismatch on inconsistent sizes or out-of-range indices.
  void validate() const;
};

GraphBatch makeBatch(std::span<const MolecularGraph* const> graphs, std::span<const AssembledFeatures* const> features);
GraphBatch makeBatch(const MolecularGraph& graph, const AssembledFeatures& features);

//! Printed weightless GCN aggregation: sum over j in N(i) and i of x_j / sqrt(d_i d_j), d = in-degree + 1.
Var gcnAggregate(Var x, std::span<const int> senders, std::span<const int> receivers);

//! relu(W * aggregate(x) + b) followed by dropout.
Var gcnLayer(Tape& tape, Var x, std::span<const int> senders, std::span<const int> receivers, const Linear& weight,
             double dropout);

//! Standard: MLP((1 + eps) x_i + sum_j relu(x_j + e_ji)).
//! Multiplicative: MLP((1 - eps) x_i * sum_j relu(x_j + e_ji)), elementwise.
Var gineLayer(Tape& tape, Var x, Var e, Var epsilon, std::span<const int> senders, std::span<const int> receivers,
              const Mlp& mlp, GineEpsilonMode mode, double dropout);

struct MpnnMlps {
  Mlp edge;
  Mlp node;
  Mlp global;
};

struct GraphState {
  Var nodes;
  Var edges;
  Var globals;  //!< one row per graph
};

//! Edge, node and global updates with skip connections on all three.
GraphState mpnnppLayer(Tape& tape, const GraphState& in, const GraphBatch& batch, const MpnnMlps& mlps,
                       double dropout);

Var pool(Var nodes, std::span<const int> nodeGraph, std::size_t numGraphs, Pooling pooling);

class Backbone {
 public:
  //! Registers all parameters in `params` under `prefix`.
  Backbone(const ModelConfig& config, ParameterSet& params, const std::string& prefix = "backbone/");

  [[nodiscard]] const ModelConfig& config() const noexcept { return config_; }
  [[nodiscard]] const Tensor&      globalSeed() const noexcept { return globalSeed_; }

  //! x0 = MLP_x(X0), e0 = MLP_e(E0), g0 = MLP_g(seed) repeated per graph. Unused streams stay invalid.
  GraphState embed(Tape& tape, const GraphBatch& batch) const;
  GraphState forward(Tape& tape, const GraphBatch& batch) const;
  //! Pooled node states or the global vector, depending on the readout.
  Var graphEmbedding(const GraphState& state, const GraphBatch& batch) const;
  [[nodiscard]] std::size_t graphEmbeddingWidth() const noexcept;

  [[nodiscard]] std::size_t parameterCount() const noexcept;
  [[nodiscard]] const std::vector<Parameter*>& parameters() const noexcept { return owned_; }

  // Layer access for tests.
  const Mlp&              nodeEmbedding() const noexcept { return embedX_; }
  const Mlp&              edgeEmbedding() const noexcept { return embedE_; }
  const Mlp&              globalEmbedding() const noexcept { return embedG_; }
  const std::vector<Mlp>& gineMlps() const noexcept { return gine_; }
  const std::vector<Linear>&   gcnWeights() const noexcept { return gcn_; }
  const std::vector<MpnnMlps>& mpnnMlps() const noexcept { return mpnn_; }

 private:
  ModelConfig             config_;
  Tensor                  globalSeed_;
  Mlp                     embedX_;
  Mlp                     embedE_;
  Mlp                     embedG_;
  std::vector<Linear>     gcn_;
  std::vector<Mlp>        gine_;
  std::vector<Parameter*> gineEps_;
  std::vector<MpnnMlps>   mpnn_;
  std::vector<Parameter*> owned_;
};

//! Closed-form parameter count for a configuration, without allocating the model.
std::size_t countParameters(const ModelConfig& config);

}  // namespace minifp

#endif  // MINIFP_BACKBONES_H
