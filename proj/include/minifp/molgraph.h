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

#ifndef MINIFP_MOLGRAPH_H
#define MINIFP_MOLGRAPH_H

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace minifp {

enum class BondOrder : std::uint8_t { Single, Double, Triple, Aromatic };

//! Elements with a dedicated slot in the atom feature one-hot. Anything else maps to "other".
inline constexpr std::string_view kSupportedElements[] = {"B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I"};

struct Atom {
  std::string element;  //!< capitalized symbol ("C" for both C and c)
  int  formalCharge      = 0;
  int  explicitHydrogens = 0;  //!< H count written inside brackets
  int  implicitHydrogens = 0;  //!< derived from the valence table for organic-subset atoms
  bool aromatic          = false;
  bool inRing            = false;  //!< derived
  bool bracket           = false;  //!< written as a bracket atom in the source

  [[nodiscard]] int totalHydrogens() const noexcept { return explicitHydrogens + implicitHydrogens; }
};

struct Bond {
  int       begin = 0;
  int       end   = 0;
  BondOrder order = BondOrder::Single;
  bool      inRing     = false;  //!< derived: bond is not a bridge
  bool      conjugated = false;  //!< derived
};

//! Heavy-atom molecular graph. Hydrogens are only nodes when written as explicit bracket atoms.
//!
//! Construction validates the topology and derives ring membership, conjugation, and implicit
//! hydrogen counts, so a graph built from any atom ordering is self-consistent.
class MolecularGraph {
 public:
  MolecularGraph() = default;
  MolecularGraph(std::vector<Atom> atoms, std::vector<Bond> bonds, std::string sourceText = {});

  [[nodiscard]] std::size_t numAtoms() const noexcept { return atoms_.size(); }
  [[nodiscard]] std::size_t numBonds() const noexcept { return bonds_.size(); }
  [[nodiscard]] const std::vector<Atom>& atoms() const noexcept { return atoms_; }
  [[nodiscard]] const std::vector<Bond>& bonds() const noexcept { return bonds_; }
  [[nodiscard]] const Atom& atom(std::size_t i) const { return atoms_.at(i); }
  [[nodiscard]] const Bond& bond(std::size_t i) const { return bonds_.at(i); }
  //! Bond indices incident to atom i, in bond order.
  [[nodiscard]] std::span<const int> incidentBonds(std::size_t i) const { return incidence_.at(i); }
  [[nodiscard]] int degree(std::size_t i) const { return static_cast<int>(incidence_.at(i).size()); }
  [[nodiscard]] int neighbor(int atom, int bondIndex) const;
  [[nodiscard]] const std::string& sourceText() const noexcept { return source_; }
  [[nodiscard]] int connectedComponents() const;

 private:
  void deriveProperties();

  std::vector<Atom>             atoms_;
  std::vector<Bond>             bonds_;
  std::vector<std::vector<int>> incidence_;
  std::string                   source_;
};

//! Parses the supported SMILES subset: organic-subset and bracket atoms, branches, ring closures
//! (1-9 and %nn), bond symbols - = # :, aromatic lowercase atoms, and '.' separators.
//! Stereo markers are accepted and discarded; a note is appended to `warnings` when given.
MolecularGraph parseSmiles(std::string_view text, std::vector<std::string>* warnings = nullptr);

struct SmilesWriteResult {
  std::string      smiles;
  std::vector<int> atomOrder;  //!< atomOrder[k] = source atom written k-th
};

//! Depth-first SMILES writer. Parsing the output yields atoms in `atomOrder`.
SmilesWriteResult writeSmiles(const MolecularGraph& graph);

//! Textual normal form: whitespace stripped, ring labels renumbered by first appearance
//! (lowest free label reused). Not a graph canonicalization: "CCO" and "OCC" differ.
std::string normalizeSmiles(std::string_view text);

[[nodiscard]] std::size_t heavyAtomCount(const MolecularGraph& graph) noexcept;

//! Keeps graphs with at most `maxHeavy` heavy atoms whose normalized source is not excluded.
std::vector<MolecularGraph> filterMolecules(std::span<const MolecularGraph>        graphs,
                                            std::size_t                            maxHeavy,
                                            const std::unordered_set<std::string>& exclusion);

//! Relabels atoms: atom i of `graph` becomes atom perm[i]. Bond order is preserved.
MolecularGraph permuteAtoms(const MolecularGraph& graph, std::span<const int> perm);

}  // namespace minifp

#endif  // MINIFP_MOLGRAPH_H
