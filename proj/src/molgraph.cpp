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

#include "minifp/molgraph.h"

#include <algorithm>
#include <array>
#include <cctype>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <utility>

#include "minifp/error.h"

namespace minifp {

namespace {

constexpr std::array<std::string_view, 118> kElements = {
  "H",  "He", "Li", "Be", "B",  "C",  "N",  "O",  "F",  "Ne", "Na", "Mg", "Al", "Si", "P",  "S",  "Cl", "Ar",
  "K",  "Ca", "Sc", "Ti", "V",  "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As", "Se", "Br", "Kr",
  "Rb", "Sr", "Y",  "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In", "Sn", "Sb", "Te", "I",  "Xe",
  "Cs", "Ba", "La", "Ce", "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf",
  "Ta", "W",  "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl", "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th",
  "Pa", "U",  "Np", "Pu", "Am", "Cm", "Bk", "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs",
  "Mt", "Ds", "Rg", "Cn", "Nh", "Fl", "Mc", "Lv", "Ts", "Og"};

bool isElement(std::string_view symbol) {
  return std::find(kElements.begin(), kElements.end(), symbol) != kElements.end();
}

bool isOrganicSubset(std::string_view symbol) {
  return std::find(std::begin(kSupportedElements), std::end(kSupportedElements), symbol) !=
         std::end(kSupportedElements);
}

bool isAromaticCapable(std::string_view symbol) {
  return symbol == "B" || symbol == "C" || symbol == "N" || symbol == "O" || symbol == "P" || symbol == "S" ||
         symbol == "Se" || symbol == "As" || symbol == "Te";
}

//! Allowed valences for organic-subset atoms, ascending.
std::span<const int> valences(std::string_view symbol) {
  static constexpr int kB[]   = {3};
  static constexpr int kC[]   = {4};
  static constexpr int kN[]   = {3, 5};
  static constexpr int kO[]   = {2};
  static constexpr int kP[]   = {3, 5};
  static constexpr int kS[]   = {2, 4, 6};
  static constexpr int kHal[] = {1};
  if (symbol == "B") return kB;
  if (symbol == "C") return kC;
  if (symbol == "N") return kN;
  if (symbol == "O") return kO;
  if (symbol == "P") return kP;
  if (symbol == "S") return kS;
  return kHal;
}

int bondValence(BondOrder order) {
  switch (order) {
    case BondOrder::Single:   return 1;
    case BondOrder::Double:   return 2;
    case BondOrder::Triple:   return 3;
    case BondOrder::Aromatic: return 1;
  }
  return 1;
}

std::string_view trim(std::string_view text) {
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) {
    text.remove_prefix(1);
  }
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) {
    text.remove_suffix(1);
  }
  return text;
}

std::string ringLabel(int label) {
  return label < 10 ? std::to_string(label) : "%" + std::to_string(label);
}

class SmilesParser {
 public:
  SmilesParser(std::string_view text, std::vector<std::string>* warnings) : text_(text), warnings_(warnings) {}

  MolecularGraph parse() {
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (c == '(') {
        if (prev_ < 0) {
          fail(ErrorCode::InvalidSmiles, "branch opened before any atom");
        }
        branches_.push_back(prev_);
        ++pos_;
      } else if (c == ')') {
        if (branches_.empty()) {
          fail(ErrorCode::UnbalancedBranch, "unmatched ')'");
        }
        if (pendingBond_) {
          fail(ErrorCode::InvalidSmiles, "bond symbol before ')'");
        }
        prev_ = branches_.back();
        branches_.pop_back();
        ++pos_;
      } else if (c == '-' || c == '=' || c == '#' || c == ':' || c == '/' || c == '\\') {
        if (pendingBond_) {
          fail(ErrorCode::InvalidSmiles, "consecutive bond symbols");
        }
        if (c == '/' || c == '\\') {
          warn("directional bond marker discarded");
        }
        pendingBond_ = c;
        ++pos_;
      } else if (c == '.') {
        if (pendingBond_) {
          fail(ErrorCode::InvalidSmiles, "bond symbol before '.'");
        }
        prev_ = -1;
        ++pos_;
      } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '%') {
        ringClosure();
      } else if (c == '[') {
        bracketAtom();
      } else {
        organicAtom();
      }
    }
    if (!branches_.empty()) {
      fail(ErrorCode::UnbalancedBranch, "unclosed '('");
    }
    if (!rings_.empty()) {
      fail(ErrorCode::UnclosedRing, "ring label " + std::to_string(rings_.begin()->first) + " never closed");
    }
    if (pendingBond_) {
      fail(ErrorCode::InvalidSmiles, "trailing bond symbol");
    }
    if (atoms_.empty()) {
      fail(ErrorCode::EmptyInput, "no atoms");
    }
    return MolecularGraph(std::move(atoms_), std::move(bonds_), std::string(text_));
  }

 private:
  struct OpenRing {
    int                 atom;
    std::optional<char> bondSymbol;
  };

  [[noreturn]] void fail(ErrorCode code, const std::string& what) const {
    throw Error(code, what + " at position " + std::to_string(pos_) + " in '" + std::string(text_) + "'");
  }

  void warn(const std::string& what) {
    if (warnings_ != nullptr) {
      warnings_->push_back(what + " at position " + std::to_string(pos_));
    }
  }

  BondOrder orderFor(std::optional<char> symbol, int a, int b) const {
    if (!symbol || *symbol == '-' || *symbol == '/' || *symbol == '\\') {
      if (!symbol && atoms_[a].aromatic && atoms_[b].aromatic) {
        return BondOrder::Aromatic;
      }
      return BondOrder::Single;
    }
    switch (*symbol) {
      case '=': return BondOrder::Double;
      case '#': return BondOrder::Triple;
      default:  return BondOrder::Aromatic;
    }
  }

  void addBond(int a, int b, std::optional<char> symbol) {
    if (a == b) {
      fail(ErrorCode::InvalidSmiles, "atom bonded to itself");
    }
    for (const Bond& bond : bonds_) {
      if ((bond.begin == a && bond.end == b) || (bond.begin == b && bond.end == a)) {
        fail(ErrorCode::InvalidSmiles, "duplicate bond");
      }
    }
    Bond bond;
    bond.begin = a;
    bond.end   = b;
    bond.order = orderFor(symbol, a, b);
    bonds_.push_back(bond);
  }

  void attach(Atom atom) {
    atoms_.push_back(std::move(atom));
    const int index = static_cast<int>(atoms_.size()) - 1;
    if (prev_ >= 0) {
      addBond(prev_, index, pendingBond_);
    } else if (pendingBond_) {
      fail(ErrorCode::InvalidSmiles, "bond symbol without preceding atom");
    }
    pendingBond_.reset();
    prev_ = index;
  }

  void organicAtom() {
    Atom        atom;
    const char  c    = text_[pos_];
    const char  next = pos_ + 1 < text_.size() ? text_[pos_ + 1] : '\0';
    std::size_t len  = 1;
    if (c == 'C' && next == 'l') {
      atom.element = "Cl";
      len          = 2;
    } else if (c == 'B' && next == 'r') {
      atom.element = "Br";
      len          = 2;
    } else if (c == 'B' || c == 'C' || c == 'N' || c == 'O' || c == 'P' || c == 'S' || c == 'F' || c == 'I') {
      atom.element = std::string(1, c);
    } else if (c == 'b' || c == 'c' || c == 'n' || c == 'o' || c == 'p' || c == 's') {
      atom.element  = std::string(1, static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
      atom.aromatic = true;
    } else {
      fail(ErrorCode::UnknownAtom, std::string("unsupported symbol '") + c + "'");
    }
    pos_ += len;
    attach(std::move(atom));
  }

  int readNumber() {
    int value = 0;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
      value = value * 10 + (text_[pos_] - '0');
      ++pos_;
    }
    return value;
  }

  void bracketAtom() {
    const std::size_t start = pos_;
    const std::size_t close = text_.find(']', pos_);
    if (close == std::string_view::npos) {
      fail(ErrorCode::InvalidSmiles, "unterminated bracket atom");
    }
    ++pos_;
    Atom atom;
    atom.bracket = true;
    readNumber();  // isotope, discarded
    if (pos_ >= close) {
      fail(ErrorCode::UnknownAtom, "empty bracket atom");
    }
    const char c = text_[pos_];
    if (std::isupper(static_cast<unsigned char>(c))) {
      std::string symbol(1, c);
      if (pos_ + 1 < close && std::islower(static_cast<unsigned char>(text_[pos_ + 1]))) {
        symbol.push_back(text_[pos_ + 1]);
      }
      if (!isElement(symbol)) {
        fail(ErrorCode::UnknownAtom, "unknown element '" + symbol + "'");
      }
      pos_ += symbol.size();
      atom.element = symbol;
    } else if (std::islower(static_cast<unsigned char>(c))) {
      std::string symbol(1, static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
      if (pos_ + 1 < close && std::islower(static_cast<unsigned char>(text_[pos_ + 1]))) {
        std::string two = symbol + text_[pos_ + 1];
        if (isAromaticCapable(two)) {
          symbol = two;
        }
      }
      if (!isAromaticCapable(symbol)) {
        fail(ErrorCode::UnknownAtom, "element '" + symbol + "' cannot be aromatic");
      }
      pos_ += symbol.size();
      atom.element  = symbol;
      atom.aromatic = true;
    } else {
      fail(ErrorCode::UnknownAtom, "bad bracket atom symbol");
    }
    if (pos_ < close && text_[pos_] == '@') {
      while (pos_ < close && text_[pos_] == '@') {
        ++pos_;
      }
      // Extended classes such as @TH1 or @SP2.
      const std::string_view rest = text_.substr(pos_, close - pos_);
      for (const std::string_view tag : {"TH", "AL", "SP", "TB", "OH"}) {
        if (rest.starts_with(tag)) {
          pos_ += tag.size();
          readNumber();
          break;
        }
      }
      warn("chirality marker discarded");
    }
    if (pos_ < close && text_[pos_] == 'H') {
      ++pos_;
      atom.explicitHydrogens = 1;
      if (pos_ < close && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        atom.explicitHydrogens = readNumber();
      }
    }
    if (pos_ < close && (text_[pos_] == '+' || text_[pos_] == '-')) {
      const char sign  = text_[pos_];
      int        count = 0;
      while (pos_ < close && text_[pos_] == sign) {
        ++count;
        ++pos_;
      }
      if (count == 1 && pos_ < close && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        count = readNumber();
      }
      atom.formalCharge = sign == '+' ? count : -count;
    }
    if (pos_ < close && text_[pos_] == ':') {
      ++pos_;
      readNumber();  // atom class, discarded
    }
    if (pos_ != close) {
      pos_ = start;
      fail(ErrorCode::InvalidSmiles, "unparsed bracket contents '" + std::string(text_.substr(start, close - start + 1)) + "'");
    }
    if (atom.formalCharge < -4 || atom.formalCharge > 4) {
      pos_ = start;
      fail(ErrorCode::InvalidSmiles, "formal charge outside [-4, 4]");
    }
    pos_ = close + 1;
    attach(std::move(atom));
  }

  void ringClosure() {
    int label = 0;
    if (text_[pos_] == '%') {
      if (pos_ + 2 >= text_.size() || !std::isdigit(static_cast<unsigned char>(text_[pos_ + 1])) ||
          !std::isdigit(static_cast<unsigned char>(text_[pos_ + 2]))) {
        fail(ErrorCode::InvalidSmiles, "'%' must be followed by two digits");
      }
      label = (text_[pos_ + 1] - '0') * 10 + (text_[pos_ + 2] - '0');
      pos_ += 3;
    } else {
      label = text_[pos_] - '0';
      ++pos_;
    }
    if (prev_ < 0) {
      fail(ErrorCode::InvalidSmiles, "ring closure without preceding atom");
    }
    const auto found = rings_.find(label);
    if (found == rings_.end()) {
      rings_.emplace(label, OpenRing{prev_, pendingBond_});
    } else {
      std::optional<char> symbol = pendingBond_;
      if (found->second.bondSymbol) {
        if (symbol && *symbol != *found->second.bondSymbol) {
          fail(ErrorCode::InvalidSmiles, "conflicting ring-closure bond symbols");
        }
        symbol = found->second.bondSymbol;
      }
      addBond(found->second.atom, prev_, symbol);
      rings_.erase(found);
    }
    pendingBond_.reset();
  }

  std::string_view              text_;
  std::vector<std::string>*     warnings_;
  std::size_t                   pos_ = 0;
  int                           prev_ = -1;
  std::optional<char>           pendingBond_;
  std::vector<int>              branches_;
  std::map<int, OpenRing>       rings_;
  std::vector<Atom>             atoms_;
  std::vector<Bond>             bonds_;
};

}  // namespace

MolecularGraph::MolecularGraph(std::vector<Atom> atoms, std::vector<Bond> bonds, std::string sourceText)
    : atoms_(std::move(atoms)), bonds_(std::move(bonds)), source_(std::move(sourceText)) {
  const int n = static_cast<int>(atoms_.size());
  incidence_.assign(atoms_.size(), {});
  std::set<std::pair<int, int>> seen;
  for (std::size_t b = 0; b < bonds_.size(); ++b) {
    const Bond& bond = bonds_[b];
    if (bond.begin < 0 || bond.end < 0 || bond.begin >= n || bond.end >= n) {
      throw Error(ErrorCode::InvalidSmiles, "bond endpoint out of range");
    }
    if (bond.begin == bond.end) {
      throw Error(ErrorCode::InvalidSmiles, "bond endpoints must differ");
    }
    if (!seen.emplace(std::min(bond.begin, bond.end), std::max(bond.begin, bond.end)).second) {
      throw Error(ErrorCode::InvalidSmiles, "duplicate bond");
    }
    incidence_[bond.begin].push_back(static_cast<int>(b));
    incidence_[bond.end].push_back(static_cast<int>(b));
  }
  for (const Atom& atom : atoms_) {
    if (atom.formalCharge < -4 || atom.formalCharge > 4) {
      throw Error(ErrorCode::InvalidSmiles, "formal charge outside [-4, 4]");
    }
  }
  deriveProperties();
}

int MolecularGraph::neighbor(int atom, int bondIndex) const {
  const Bond& bond = bonds_.at(bondIndex);
  return bond.begin == atom ? bond.end : bond.begin;
}

int MolecularGraph::connectedComponents() const {
  std::vector<int> component(atoms_.size(), -1);
  int              count = 0;
  for (std::size_t start = 0; start < atoms_.size(); ++start) {
    if (component[start] >= 0) {
      continue;
    }
    std::vector<int> stack{static_cast<int>(start)};
    component[start] = count;
    while (!stack.empty()) {
      const int a = stack.back();
      stack.pop_back();
      for (const int b : incidence_[a]) {
        const int nb = neighbor(a, b);
        if (component[nb] < 0) {
          component[nb] = count;
          stack.push_back(nb);
        }
      }
    }
    ++count;
  }
  return count;
}

void MolecularGraph::deriveProperties() {
  const std::size_t n = atoms_.size();

  // Ring bonds are exactly the non-bridges (iterative Tarjan low-link).
  std::vector<int>  disc(n, -1);
  std::vector<int>  low(n, 0);
  std::vector<bool> bridge(bonds_.size(), false);
  int               timer = 0;
  for (std::size_t root = 0; root < n; ++root) {
    if (disc[root] >= 0) {
      continue;
    }
    struct Frame {
      int         atom;
      int         parentBond;
      std::size_t next;
    };
    std::vector<Frame> stack{{static_cast<int>(root), -1, 0}};
    disc[root] = low[root] = timer++;
    while (!stack.empty()) {
      Frame& frame = stack.back();
      const auto& inc = incidence_[frame.atom];
      if (frame.next < inc.size()) {
        const int b  = inc[frame.next++];
        if (b == frame.parentBond) {
          continue;
        }
        const int nb = neighbor(frame.atom, b);
        if (disc[nb] < 0) {
          disc[nb] = low[nb] = timer++;
          stack.push_back({nb, b, 0});
        } else {
          low[frame.atom] = std::min(low[frame.atom], disc[nb]);
        }
      } else {
        const Frame done = frame;
        stack.pop_back();
        if (!stack.empty()) {
          const int parent = stack.back().atom;
          low[parent]      = std::min(low[parent], low[done.atom]);
          if (low[done.atom] > disc[parent]) {
            bridge[done.parentBond] = true;
          }
        }
      }
    }
  }
  for (Atom& atom : atoms_) {
    atom.inRing = false;
  }
  for (std::size_t b = 0; b < bonds_.size(); ++b) {
    Bond& bond  = bonds_[b];
    bond.inRing = !bridge[b];
    if (bond.inRing) {
      atoms_[bond.begin].inRing = true;
      atoms_[bond.end].inRing   = true;
    } else if (bond.order == BondOrder::Aromatic) {
      bond.order = BondOrder::Single;
    }
  }

  // Conjugation: single bonds joining two unsaturated atoms, the multiple bonds next to them,
  // and every aromatic bond.
  std::vector<bool> unsaturated(n, false);
  for (const Bond& bond : bonds_) {
    if (bond.order != BondOrder::Single) {
      unsaturated[bond.begin] = unsaturated[bond.end] = true;
    }
  }
  std::vector<bool> conjugatedSingleAt(n, false);
  for (Bond& bond : bonds_) {
    bond.conjugated = bond.order == BondOrder::Aromatic ||
                      (bond.order == BondOrder::Single && unsaturated[bond.begin] && unsaturated[bond.end]);
    if (bond.order == BondOrder::Single && bond.conjugated) {
      conjugatedSingleAt[bond.begin] = conjugatedSingleAt[bond.end] = true;
    }
  }
  for (Bond& bond : bonds_) {
    if ((bond.order == BondOrder::Double || bond.order == BondOrder::Triple) &&
        (conjugatedSingleAt[bond.begin] || conjugatedSingleAt[bond.end])) {
      bond.conjugated = true;
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    Atom& atom             = atoms_[i];
    atom.implicitHydrogens = 0;
    if (atom.bracket || !isOrganicSubset(atom.element)) {
      continue;
    }
    int  used         = 0;
    bool anyAromatic  = false;
    for (const int b : incidence_[i]) {
      used += bondValence(bonds_[b].order);
      anyAromatic = anyAromatic || bonds_[b].order == BondOrder::Aromatic;
    }
    const auto allowed = valences(atom.element);
    if (atom.aromatic) {
      const bool donatesPiBond = atom.element == "B" || atom.element == "C" || atom.element == "N" || atom.element == "P";
      if (anyAromatic && donatesPiBond) {
        ++used;
      }
      atom.implicitHydrogens = std::max(0, allowed.front() - used);
      continue;
    }
    for (const int v : allowed) {
      if (v >= used) {
        atom.implicitHydrogens = v - used;
        break;
      }
    }
  }
}

MolecularGraph parseSmiles(std::string_view text, std::vector<std::string>* warnings) {
  const std::string_view trimmed = trim(text);
  if (trimmed.empty()) {
    throw Error(ErrorCode::EmptyInput, "empty SMILES");
  }
  for (const char c : trimmed) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      throw Error(ErrorCode::InvalidSmiles, "whitespace inside SMILES '" + std::string(trimmed) + "'");
    }
  }
  return SmilesParser(trimmed, warnings).parse();
}

namespace {

std::string atomToken(const Atom& atom) {
  std::string symbol = atom.element;
  if (atom.aromatic) {
    symbol[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(symbol[0])));
  }
  if (!atom.bracket && isOrganicSubset(atom.element) && atom.formalCharge == 0) {
    return symbol;
  }
  std::string token = "[" + symbol;
  if (atom.explicitHydrogens > 0) {
    token += "H";
    if (atom.explicitHydrogens > 1) {
      token += std::to_string(atom.explicitHydrogens);
    }
  }
  if (atom.formalCharge != 0) {
    token += atom.formalCharge > 0 ? "+" : "-";
    if (std::abs(atom.formalCharge) > 1) {
      token += std::to_string(std::abs(atom.formalCharge));
    }
  }
  return token + "]";
}

std::string bondToken(const MolecularGraph& graph, const Bond& bond) {
  const bool bothAromatic = graph.atom(bond.begin).aromatic && graph.atom(bond.end).aromatic;
  switch (bond.order) {
    case BondOrder::Single:   return bothAromatic ? "-" : "";
    case BondOrder::Double:   return "=";
    case BondOrder::Triple:   return "#";
    case BondOrder::Aromatic: return bothAromatic ? "" : ":";
  }
  return "";
}

}  // namespace

SmilesWriteResult writeSmiles(const MolecularGraph& graph) {
  const std::size_t n = graph.numAtoms();
  SmilesWriteResult result;

  // Pass 1: DFS preorder, tree children, and ring-closure (back-edge) bonds.
  std::vector<int>              visitOrder(n, -1);
  std::vector<std::vector<int>> childBonds(n);
  std::vector<std::vector<int>> ringBonds(n);
  std::vector<bool>             treeBond(graph.numBonds(), false);
  std::vector<bool>             ringBondSeen(graph.numBonds(), false);
  std::vector<int>              roots;
  int                           counter = 0;

  std::function<void(int, int)> visit = [&](int atom, int parentBond) {
    visitOrder[atom] = counter++;
    result.atomOrder.push_back(atom);
    std::vector<int> bonds(graph.incidentBonds(atom).begin(), graph.incidentBonds(atom).end());
    std::sort(bonds.begin(), bonds.end(),
              [&](int a, int b) { return graph.neighbor(atom, a) < graph.neighbor(atom, b); });
    for (const int b : bonds) {
      if (b == parentBond) {
        continue;
      }
      const int nb = graph.neighbor(atom, b);
      if (visitOrder[nb] < 0) {
        treeBond[b] = true;
        childBonds[atom].push_back(b);
        visit(nb, b);
      } else if (!treeBond[b] && !ringBondSeen[b]) {
        ringBondSeen[b] = true;
        ringBonds[atom].push_back(b);
        ringBonds[nb].push_back(b);
      }
    }
  };
  for (std::size_t a = 0; a < n; ++a) {
    if (visitOrder[a] < 0) {
      roots.push_back(static_cast<int>(a));
      visit(static_cast<int>(a), -1);
    }
  }

  // Pass 2: emit. Ring labels are allocated lowest-free at the opening atom.
  std::map<int, int> openLabel;  // bond -> label
  std::set<int>      freeLabels;
  int                nextLabel = 1;
  std::string&       out       = result.smiles;

  std::function<void(int)> emit = [&](int atom) {
    out += atomToken(graph.atom(atom));
    for (const int b : ringBonds[atom]) {
      const auto open = openLabel.find(b);
      if (open != openLabel.end()) {
        out += ringLabel(open->second);
        freeLabels.insert(open->second);
        openLabel.erase(open);
      } else {
        int label = 0;
        if (!freeLabels.empty()) {
          label = *freeLabels.begin();
          freeLabels.erase(freeLabels.begin());
        } else {
          label = nextLabel++;
        }
        openLabel.emplace(b, label);
        out += bondToken(graph, graph.bond(b)) + ringLabel(label);
      }
    }
    const auto& children = childBonds[atom];
    for (std::size_t k = 0; k < children.size(); ++k) {
      const int  b    = children[k];
      const bool last = k + 1 == children.size();
      if (!last) {
        out += "(";
      }
      out += bondToken(graph, graph.bond(b));
      emit(graph.neighbor(atom, b));
      if (!last) {
        out += ")";
      }
    }
  };
  for (std::size_t r = 0; r < roots.size(); ++r) {
    if (r > 0) {
      out += ".";
    }
    emit(roots[r]);
  }
  return result;
}

std::string normalizeSmiles(std::string_view text) {
  const std::string_view trimmed = trim(text);
  parseSmiles(trimmed);  // validates; throws on malformed input

  std::string        out;
  std::map<int, int> active;  // source label -> normalized label
  std::set<int>      freeLabels;
  int                nextLabel = 1;
  bool               inBracket = false;
  for (std::size_t i = 0; i < trimmed.size(); ++i) {
    const char c = trimmed[i];
    if (inBracket) {
      out.push_back(c);
      inBracket = c != ']';
      continue;
    }
    if (c == '[') {
      inBracket = true;
      out.push_back(c);
      continue;
    }
    int label = -1;
    if (c == '%') {
      label = (trimmed[i + 1] - '0') * 10 + (trimmed[i + 2] - '0');
      i += 2;
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      label = c - '0';
    } else {
      out.push_back(c);
      continue;
    }
    const auto found = active.find(label);
    if (found != active.end()) {
      out += ringLabel(found->second);
      freeLabels.insert(found->second);
      active.erase(found);
    } else {
      int fresh = 0;
      if (!freeLabels.empty()) {
        fresh = *freeLabels.begin();
        freeLabels.erase(freeLabels.begin());
      } else {
        fresh = nextLabel++;
      }
      active.emplace(label, fresh);
      out += ringLabel(fresh);
    }
  }
  return out;
}

std::size_t heavyAtomCount(const MolecularGraph& graph) noexcept {
  return static_cast<std::size_t>(std::count_if(graph.atoms().begin(), graph.atoms().end(),
                                                [](const Atom& atom) { return atom.element != "H"; }));
}

std::vector<MolecularGraph> filterMolecules(std::span<const MolecularGraph>        graphs,
                                            std::size_t                            maxHeavy,
                                            const std::unordered_set<std::string>& exclusion) {
  std::vector<MolecularGraph> kept;
  for (const MolecularGraph& graph : graphs) {
    if (heavyAtomCount(graph) > maxHeavy) {
      continue;
    }
    if (!exclusion.empty() && exclusion.contains(normalizeSmiles(graph.sourceText()))) {
      continue;
    }
    kept.push_back(graph);
  }
  return kept;
}

MolecularGraph permuteAtoms(const MolecularGraph& graph, std::span<const int> perm) {
  const std::size_t n = graph.numAtoms();
  if (perm.size() != n) {
    throw Error(ErrorCode::ShapeMismatch, "permutation length " + std::to_string(perm.size()) + " vs " +
                                              std::to_string(n) + " atoms");
  }
  std::vector<Atom> atoms(n);
  std::vector<bool> hit(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    const int target = perm[i];
    if (target < 0 || static_cast<std::size_t>(target) >= n || hit[target]) {
      throw Error(ErrorCode::InvalidConfig, "not a permutation");
    }
    hit[target]   = true;
    atoms[target] = graph.atom(i);
  }
  std::vector<Bond> bonds = graph.bonds();
  for (Bond& bond : bonds) {
    bond.begin = perm[bond.begin];
    bond.end   = perm[bond.end];
  }
  return MolecularGraph(std::move(atoms), std::move(bonds), graph.sourceText());
}

}  // namespace minifp
