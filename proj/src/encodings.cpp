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

#include "minifp/encodings.h"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "minifp/error.h"
#include "minifp/rng.h"

namespace minifp {

namespace {

constexpr std::size_t kElementSlots = std::size(kSupportedElements) + 1;
constexpr int         kMaxDegreeSlot = 6;
constexpr double      kSignTolerance = 1e-9;
constexpr double      kTieTolerance  = 1e-8;

std::size_t elementSlot(const std::string& element) {
  for (std::size_t i = 0; i < std::size(kSupportedElements); ++i) {
    if (kSupportedElements[i] == element) {
      return i;
    }
  }
  return std::size(kSupportedElements);
}

Tensor adjacency(const MolecularGraph& graph) {
  const std::size_t n = graph.numAtoms();
  Tensor            a(n, n);
  for (const Bond& b : graph.bonds()) {
    a(b.begin, b.end) = 1.0;
    a(b.end, b.begin) = 1.0;
  }
  return a;
}

void canonicalizeSign(Tensor& vectors, std::size_t col) {
  for (std::size_t r = 0; r < vectors.rows(); ++r) {
    const double v = vectors(r, col);
    if (std::abs(v) > kSignTolerance) {
      if (v < 0.0) {
        for (std::size_t k = 0; k < vectors.rows(); ++k) {
          vectors(k, col) = -vectors(k, col);
        }
      }
      return;
    }
  }
}

//! True when column a precedes column b, comparing entries up to kSignTolerance.
bool columnLess(const Tensor& v, std::size_t a, std::size_t b) {
  for (std::size_t r = 0; r < v.rows(); ++r) {
    const double x = v(r, a);
    const double y = v(r, b);
    if (std::abs(x - y) > kSignTolerance) {
      return x < y;
    }
  }
  return false;
}

}  // namespace

Tensor atomFeatures(const MolecularGraph& graph) {
  Tensor x(graph.numAtoms(), kAtomFeatureWidth);
  for (std::size_t i = 0; i < graph.numAtoms(); ++i) {
    const Atom& atom = graph.atom(i);
    x(i, elementSlot(atom.element)) = 1.0;
    x(i, kElementSlots + std::min(graph.degree(i), kMaxDegreeSlot)) = 1.0;
    std::size_t c = kElementSlots + kMaxDegreeSlot + 1;
    x(i, c++)     = atom.formalCharge;
    x(i, c++)     = atom.aromatic ? 1.0 : 0.0;
    x(i, c++)     = atom.inRing ? 1.0 : 0.0;
    x(i, c)       = atom.totalHydrogens();
  }
  return x;
}

Tensor bondFeatures(const MolecularGraph& graph) {
  Tensor e(graph.numBonds(), kBondFeatureWidth);
  for (std::size_t i = 0; i < graph.numBonds(); ++i) {
    const Bond& bond = graph.bond(i);
    e(i, static_cast<std::size_t>(bond.order)) = 1.0;
    e(i, 4) = bond.conjugated ? 1.0 : 0.0;
    e(i, 5) = bond.inRing ? 1.0 : 0.0;
  }
  return e;
}

Tensor normalizedLaplacian(const MolecularGraph& graph) {
  const std::size_t n = graph.numAtoms();
  const Tensor      a = adjacency(graph);
  Tensor            l(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const int di = graph.degree(i);
    if (di == 0) {
      continue;
    }
    l(i, i) = 1.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (a(i, j) != 0.0) {
        l(i, j) -= 1.0 / std::sqrt(static_cast<double>(di) * static_cast<double>(graph.degree(j)));
      }
    }
  }
  return l;
}

Eigensystem symmetricEigen(const Tensor& matrix, double tolerance, int maxSweeps) {
  const std::size_t n = matrix.rows();
  if (matrix.cols() != n) {
    throw Error(ErrorCode::ShapeMismatch, "symmetricEigen needs a square matrix, got " + matrix.shapeString());
  }
  for (const double v : matrix.values()) {
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::EigenFailure, "non-finite matrix entry");
    }
  }
  Tensor a = matrix;
  Tensor v = Tensor::identity(n);
  auto offNorm = [&] {
    double s = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = 0; q < n; ++q) {
        if (p != q) {
          s += a(p, q) * a(p, q);
        }
      }
    }
    return std::sqrt(s);
  };
  int sweep = 0;
  while (offNorm() >= tolerance) {
    if (sweep++ >= maxSweeps) {
      throw Error(ErrorCode::EigenFailure, "Jacobi did not converge in " + std::to_string(maxSweeps) + " sweeps");
    }
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) {
          continue;
        }
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t     = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c     = 1.0 / std::sqrt(t * t + 1.0);
        const double s     = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p)          = c * akp - s * akq;
          a(k, q)          = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k)          = c * apk - s * aqk;
          a(q, k)          = s * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p)          = c * vkp - s * vkq;
          v(k, q)          = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) {
    order[i] = i;
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a(x, x) < a(y, y); });
  Eigensystem result;
  result.vectors = Tensor(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    result.values.push_back(a(order[j], order[j]));
    for (std::size_t r = 0; r < n; ++r) {
      result.vectors(r, j) = v(r, order[j]);
    }
  }
  return result;
}

LaplacianEncoding laplacianEncoding(const MolecularGraph& graph, int kPe) {
  if (kPe < 1) {
    throw Error(ErrorCode::InvalidConfig, "k_pe must be >= 1");
  }
  const std::size_t n   = graph.numAtoms();
  const auto        k   = static_cast<std::size_t>(kPe);
  Eigensystem       eig = symmetricEigen(normalizedLaplacian(graph));
  for (std::size_t j = 0; j < n; ++j) {
    canonicalizeSign(eig.vectors, j);
  }
  // Insertion sort inside each run of equal eigenvalues.
  std::vector<std::size_t> order;
  for (std::size_t j = 0; j < n; ++j) {
    std::size_t pos = order.size();
    while (pos > 0 && std::abs(eig.values[order[pos - 1]] - eig.values[j]) <= kTieTolerance &&
           columnLess(eig.vectors, j, order[pos - 1])) {
      --pos;
    }
    order.insert(order.begin() + static_cast<std::ptrdiff_t>(pos), j);
  }
  LaplacianEncoding enc{Tensor(n, k), Tensor(n, k)};
  for (std::size_t c = 0; c < std::min(n, k); ++c) {
    const std::size_t src = order[c];
    for (std::size_t r = 0; r < n; ++r) {
      enc.vectors(r, c) = eig.vectors(r, src);
      enc.values(r, c)  = eig.values[src];
    }
  }
  return enc;
}

Tensor randomWalkEncoding(const MolecularGraph& graph, int steps) {
  if (steps < 1) {
    throw Error(ErrorCode::InvalidConfig, "random-walk steps must be >= 1");
  }
  const std::size_t n = graph.numAtoms();
  Tensor            p = adjacency(graph);
  for (std::size_t i = 0; i < n; ++i) {
    const int d = graph.degree(i);
    for (std::size_t j = 0; j < n && d > 0; ++j) {
      p(i, j) /= static_cast<double>(d);
    }
  }
  Tensor out(n, static_cast<std::size_t>(steps));
  Tensor power = p;
  for (int k = 0; k < steps; ++k) {
    if (k > 0) {
      Tensor next(n, n);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t m = 0; m < n; ++m) {
          const double x = power(i, m);
          if (x == 0.0) {
            continue;
          }
          for (std::size_t j = 0; j < n; ++j) {
            next(i, j) += x * p(m, j);
          }
        }
      }
      power = std::move(next);
    }
    for (std::size_t i = 0; i < n; ++i) {
      out(i, static_cast<std::size_t>(k)) = power(i, i);
    }
  }
  return out;
}

Tensor globalSeedVector(std::uint64_t seed, std::size_t dim) {
  Rng    rng(seed, "global-node");
  Tensor g(1, dim);
  for (double& v : g.values()) {
    v = rng.normal();
  }
  return g;
}

AssembledFeatures assemble(const MolecularGraph& graph, int kPe, int steps, std::uint64_t seed,
                           std::size_t globalDim) {
  const Tensor            atoms = atomFeatures(graph);
  const LaplacianEncoding lap   = laplacianEncoding(graph, kPe);
  const Tensor            rw    = randomWalkEncoding(graph, steps);
  const std::size_t       n     = graph.numAtoms();
  AssembledFeatures       out;
  out.nodeFeatures = Tensor(n, nodeFeatureWidth(kPe, steps));
  for (std::size_t i = 0; i < n; ++i) {
    auto dst = out.nodeFeatures.row(i).begin();
    dst      = std::copy(atoms.row(i).begin(), atoms.row(i).end(), dst);
    dst      = std::copy(lap.vectors.row(i).begin(), lap.vectors.row(i).end(), dst);
    dst      = std::copy(lap.values.row(i).begin(), lap.values.row(i).end(), dst);
    std::copy(rw.row(i).begin(), rw.row(i).end(), dst);
  }
  out.edgeFeatures = bondFeatures(graph);
  out.globalSeed   = globalSeedVector(seed, globalDim);
  return out;
}

std::size_t nodeFeatureWidth(int kPe, int steps) noexcept {
  return kAtomFeatureWidth + 2 * static_cast<std::size_t>(kPe) + static_cast<std::size_t>(steps);
}

std::vector<FeatureBlock> nodeFeatureLayout(int kPe, int steps) {
  FeatureBlock atom{"atom", 0, kAtomFeatureWidth, {}};
  for (const std::string_view e : kSupportedElements) {
    atom.columns.push_back("element=" + std::string(e));
  }
  atom.columns.emplace_back("element=other");
  for (int d = 0; d <= kMaxDegreeSlot; ++d) {
    atom.columns.push_back("degree=" + std::to_string(d) + (d == kMaxDegreeSlot ? "+" : ""));
  }
  for (const char* name : {"formal_charge", "aromatic", "in_ring", "total_h"}) {
    atom.columns.emplace_back(name);
  }
  const auto   k = static_cast<std::size_t>(kPe);
  FeatureBlock vec{"lap_vec", kAtomFeatureWidth, k, {}};
  FeatureBlock val{"lap_val", kAtomFeatureWidth + k, k, {}};
  FeatureBlock rw{"rw", kAtomFeatureWidth + 2 * k, static_cast<std::size_t>(steps), {}};
  for (std::size_t j = 0; j < k; ++j) {
    vec.columns.push_back("lap_vec_" + std::to_string(j));
    val.columns.push_back("lap_val_" + std::to_string(j));
  }
  for (int s = 1; s <= steps; ++s) {
    rw.columns.push_back("rw_" + std::to_string(s));
  }
  return {atom, vec, val, rw};
}

std::vector<FeatureBlock> edgeFeatureLayout() {
  return {FeatureBlock{"bond",
                       0,
                       kBondFeatureWidth,
                       {"order=single", "order=double", "order=triple", "order=aromatic", "conjugated", "in_ring"}}};
}

std::string featureLayoutJson(int kPe, int steps) {
  auto blocks = [](const std::vector<FeatureBlock>& layout) {
    nlohmann::json arr = nlohmann::json::array();
    for (const FeatureBlock& b : layout) {
      arr.push_back({{"name", b.name}, {"offset", b.offset}, {"width", b.width}, {"columns", b.columns}});
    }
    return arr;
  };
  nlohmann::json doc;
  doc["version"]    = 1;
  doc["k_pe"]       = kPe;
  doc["rw_steps"]   = steps;
  doc["node_width"] = nodeFeatureWidth(kPe, steps);
  doc["edge_width"] = kBondFeatureWidth;
  doc["node"]       = blocks(nodeFeatureLayout(kPe, steps));
  doc["edge"]       = blocks(edgeFeatureLayout());
  return doc.dump(2);
}

}  // namespace minifp
