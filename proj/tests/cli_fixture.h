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

// Toy corpora and an in-process driver for the command-line tool.

#ifndef MINIFP_TESTS_CLI_FIXTURE_H
#define MINIFP_TESTS_CLI_FIXTURE_H

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "minifp/cli.h"
#include "minifp/fingerprints.h"
#include "test_util.h"

namespace minifp::testing {

namespace fs = std::filesystem;

inline fs::path scratchDir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("minifp_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

inline void writeFile(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

inline std::string readFile(const fs::path& path) {
  std::ifstream      in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct CliResult {
  int         code = -1;
  std::string out;
  std::string err;
};

inline CliResult runCli(std::vector<std::string> args) {
  args.insert(args.begin(), "minifp");
  std::ostringstream out;
  std::ostringstream err;
  CliResult          r;
  r.code = cli::run(args, out, err);
  r.out  = out.str();
  r.err  = err.str();
  return r;
}

//! Molecule CSV, node-label CSV, manifest.json and a small GINE config.txt in `dir`.
inline void writeToyPretrainSet(const fs::path& dir, std::size_t n, std::uint64_t seed, int epochs = 5) {
  Rng         rng(seed, "cli-toy");
  std::string mols  = "id,smiles,g_reg,g_bin\n";
  std::string nodes = "id,atom,n_h\n";
  for (std::size_t i = 0; i < n; ++i) {
    const std::string    id     = "mol" + std::to_string(i);
    const std::string    smiles = writeSmiles(randomMolecule(rng, 3, 12)).smiles;
    const MolecularGraph g      = parseSmiles(smiles);
    const std::string    bin    = i % 4 == 3 ? "" : (rng.uniform() < 0.5 ? "0" : "1");
    mols += id + "," + smiles + "," + formatDouble(rng.normal()) + "," + bin + "\n";
    for (std::size_t a = 0; a < g.numAtoms(); ++a) {
      nodes += id + "," + std::to_string(a) + "," + std::to_string(g.atom(a).totalHydrogens()) + "\n";
    }
  }
  writeFile(dir / "molecules.csv", mols);
  writeFile(dir / "nodes.csv", nodes);
  writeFile(dir / "manifest.json", R"({
  "molecules": "molecules.csv",
  "id_column": "id",
  "node_labels": "nodes.csv",
  "tasks": [
    {"name": "g_reg", "level": "graph", "kind": "regression", "group": "L1000"},
    {"name": "g_bin", "level": "graph", "kind": "binary", "group": "PCBA"},
    {"name": "n_h", "column": "n_h", "level": "node", "kind": "regression", "group": "N4"}
  ]
}
)");
  writeFile(dir / "config.txt", "num_layers = 2\nd_node = 12\nd_edge = 12\nd_global = 6\nk_pe = 4\nrw_steps = 6\n"
                                "epochs = " + std::to_string(epochs) +
                                  "\nwarmup_epochs = 1\nbatch_size = 8\nhead_hidden = 16\n"
                                  "split_train = 0.7\nsplit_valid = 0.15\nsplit_test = 0.15\n");
}

//! Binary task over linear alkanes C..C(n) whose label is the parity of the chain length.
inline void writeParityTask(const fs::path& dir, std::size_t n) {
  std::string csv = "smiles,label\n";
  for (std::size_t k = 1; k <= n; ++k) {
    csv += std::string(k, 'C') + "," + std::to_string(k % 2) + "\n";
  }
  writeFile(dir / "task.csv", csv);
  writeFile(dir / "task.json", R"({"name": "parity", "kind": "binary", "molecules": "task.csv", "label_column": "label"})");
}

//! Store for writeParityTask: dimension 0 carries the label as +-1, dimension 1 is noise.
inline FingerprintStore parityStore(std::size_t n, std::uint64_t seed) {
  Rng              rng(seed, "parity-store");
  FingerprintStore store(2);
  for (std::size_t k = 1; k <= n; ++k) {
    const double v[2] = {k % 2 == 1 ? 1.0 : -1.0, rng.normal()};
    store.add(std::string(k, 'C'), std::span<const double>(v));
  }
  return store;
}

}  // namespace minifp::testing

#endif  // MINIFP_TESTS_CLI_FIXTURE_H
