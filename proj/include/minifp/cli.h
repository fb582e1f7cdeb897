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

#ifndef MINIFP_CLI_H
#define MINIFP_CLI_H

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "minifp/backbones.h"
#include "minifp/error.h"
#include "minifp/keyvalue.h"
#include "minifp/multitask.h"
#include "minifp/tensor.h"
#include "minifp/trainer.h"

namespace minifp::cli {

constexpr int kExitOk      = 0;
constexpr int kExitUsage   = 2;
constexpr int kExitIo      = 3;
constexpr int kExitNumeric = 4;

int exitCodeFor(ErrorCode code) noexcept;

//! Runs one subcommand. args[0] is the program name. Never throws.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

//! Pre-training dataset description (JSON). Relative paths resolve against the manifest's directory.
struct TaskColumn {
  TaskSpec    spec;
  std::string column;
};

struct DatasetManifest {
  std::string             moleculesPath;
  std::string             smilesColumn = "smiles";
  std::string             idColumn;  //!< empty: ids are normalized SMILES
  std::vector<TaskColumn> tasks;
  std::string             nodeLabelsPath;  //!< CSV keyed by (id, atom)
  std::string             trainIds;
  std::string             validIds;
  std::string             testIds;
  std::string             exclusionPath;

  //! Throws InvalidManifest or Io.
  static DatasetManifest load(const std::string& path);
};

//! Merged model, training and encoding settings of a pre-training run.
struct RunConfig {
  ModelConfig   model;
  TrainConfig   train;
  SplitSpec     split;
  LossWeights   weights;
  std::size_t   headHidden = 128;
  std::size_t   maxHeavy   = 100;
  std::uint64_t seed       = 0;
  std::string   manifest;
  std::string   outDir;

  //! Every key, one "key = value" line each, in a fixed order.
  [[nodiscard]] std::string serialize() const;
  //! Defaults for `backbone`, then `overrides`. Unknown keys throw InvalidConfig.
  static RunConfig fromKeyValues(BackboneKind backbone, const KeyValues& overrides);
};

//! Contents of a featurize cache (features.bin).
struct CachedMolecule {
  std::string id;
  Tensor      nodeFeatures;
  Tensor      edgeFeatures;
};

struct FeatureCache {
  std::string                 layoutJson;
  std::vector<CachedMolecule> molecules;
};

//! Throws CorruptHeader on a malformed file and Io when it cannot be read.
FeatureCache readFeatureCache(const std::string& path);

}  // namespace minifp::cli

#endif  // MINIFP_CLI_H
