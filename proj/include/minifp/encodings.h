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

#ifndef MINIFP_ENCODINGS_H
#define MINIFP_ENCODINGS_H

#include <cstdint>
#include <string>
#include <vector>

#include "minifp/molgraph.h"
#include "minifp/tensor.h"

namespace minifp {

//! Element one-hot (10 + other), degree one-hot 0..6, charge, aromatic, in-ring, total H.
inline constexpr std::size_t kAtomFeatureWidth = 22;
//! Bond order one-hot {single, double, triple, aromatic}, conjugated, in-ring.
inline constexpr std::size_t kBondFeatureWidth = 6;

inline constexpr int kDefaultLapPeDim   = 8;
inline constexpr int kDefaultRandomWalk = 16;

Tensor atomFeatures(const MolecularGraph& graph);
Tensor bondFeatures(const MolecularGraph& graph);

//! L = I - D^-1/2 A D^-1/2. Isolated nodes get a zero diagonal entry.
Tensor normalizedLaplacian(const MolecularGraph& graph);

struct Eigensystem {
  std::vector<double> values;   //!< ascending
  Tensor              vectors;  //!< column j pairs with values[j]
};

//! Cyclic Jacobi for dense symmetric matrices. Stops once the off-diagonal Frobenius norm
//! falls below `tolerance`; throws EigenFailure after `maxSweeps` sweeps.
Eigensystem symmetricEigen(const Tensor& matrix, double tolerance = 1e-10, int maxSweeps = 100);

struct LaplacianEncoding {
  Tensor vectors;  //!< N x kPe
  Tensor values;   //!< N x kPe, each row holds the same eigenvalues
};

//! The kPe smallest eigenpairs of the normalized Laplacian, trivial pair included.
//! Each eigenvector's first nonzero entry is positive; equal eigenvalues are ordered by
//! comparing their vectors lexicographically. Columns beyond N are zero.
LaplacianEncoding laplacianEncoding(const MolecularGraph& graph, int kPe);

//! probs(i, k-1) = [(D^-1 A)^k]_ii for k = 1..K. Isolated nodes give zero rows.
Tensor randomWalkEncoding(const MolecularGraph& graph, int steps);

//! Standard-normal vector from the "global-node" stream of `seed`.
Tensor globalSeedVector(std::uint64_t seed, std::size_t dim);

struct AssembledFeatures {
  Tensor nodeFeatures;  //!< [atom | LapVec | LapVal | RW]
  Tensor edgeFeatures;  //!< one row per bond
  Tensor globalSeed;    //!< 1 x globalDim
};

AssembledFeatures assemble(const MolecularGraph& graph, int kPe, int steps, std::uint64_t seed,
                           std::size_t globalDim = 0);

struct FeatureBlock {
  std::string              name;
  std::size_t              offset = 0;
  std::size_t              width  = 0;
  std::vector<std::string> columns;
};

std::vector<FeatureBlock> nodeFeatureLayout(int kPe, int steps);
std::vector<FeatureBlock> edgeFeatureLayout();
[[nodiscard]] std::size_t nodeFeatureWidth(int kPe, int steps) noexcept;
//! JSON description of both layouts, written next to cached feature files.
std::string featureLayoutJson(int kPe, int steps);

}  // namespace minifp

#endif  // MINIFP_ENCODINGS_H
