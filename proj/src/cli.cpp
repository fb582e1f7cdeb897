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

#include "minifp/cli.h"

#include <glob.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <CLI11.hpp>
#include <json.hpp>

#include "minifp/csv.h"
#include "minifp/downstream.h"
#include "minifp/encodings.h"
#include "minifp/fingerprints.h"
#include "minifp/molgraph.h"

namespace minifp::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

[[noreturn]] void manifestError(const std::string& msg) {
  throw Error(ErrorCode::InvalidManifest, msg);
}

std::string readText(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::Io, "cannot open " + path);
  }
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void writeText(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !out.write(text.data(), static_cast<std::streamsize>(text.size()))) {
    throw Error(ErrorCode::Io, "cannot write " + path.string());
  }
}

void makeDirectory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw Error(ErrorCode::Io, "cannot create directory " + dir.string());
  }
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) {
    return "";
  }
  return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

//! Non-empty lines that do not start with '#'.
std::vector<std::string> readLines(const std::string& path) {
  std::istringstream       in(readText(path));
  std::vector<std::string> lines;
  std::string              line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (!line.empty() && line[0] != '#') {
      lines.push_back(line);
    }
  }
  return lines;
}

std::optional<double> parseLabel(const std::string& cell, const std::string& where) {
  const std::string t = trim(cell);
  if (t.empty()) {
    return std::nullopt;
  }
  double     v   = 0.0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size()) {
    manifestError(where + ": '" + t + "' is not a number");
  }
  return v;
}

std::string utcTimestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm           tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void writeFileList(const fs::path& dir) {
  std::vector<std::string> names;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file()) {
      names.push_back(fs::relative(entry.path(), dir).generic_string());
    }
  }
  names.push_back("files.txt");
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  std::string text;
  for (const auto& n : names) {
    text += n + "\n";
  }
  writeText(dir / "files.txt", text);
}

std::uint64_t parseSeed(const std::string& text, const std::string& origin) {
  std::uint64_t v   = 0;
  const auto    res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size() || text.empty()) {
    throw Error(ErrorCode::InvalidConfig, origin + ": '" + text + "' is not an unsigned integer seed");
  }
  return v;
}

//! --seed overrides the config file; MINIFP_SEED overrides both.
void applySeedOverrides(KeyValues& kv, const std::string& flagSeed) {
  if (!flagSeed.empty()) {
    kv.set("seed", std::to_string(parseSeed(flagSeed, "--seed")));
  }
  if (const char* env = std::getenv("MINIFP_SEED"); env != nullptr && *env != '\0') {
    kv.set("seed", std::to_string(parseSeed(env, "MINIFP_SEED")));
  }
}

KeyValues loadConfigFile(const std::string& path) {
  return path.empty() ? KeyValues::parse("", "defaults") : KeyValues::load(path);
}

// ---------------------------------------------------------------------------
// Dataset loading
// ---------------------------------------------------------------------------

struct LoadFailure {
  std::size_t row;
  std::string smiles;
  std::string message;
};

struct LoadedDataset {
  PretrainDataset          data;
  std::vector<std::string> smiles;
  std::vector<LoadFailure> failures;
  std::size_t              rows     = 0;
  std::size_t              filtered = 0;
  std::size_t              excluded = 0;
};

LoadedDataset loadDataset(const DatasetManifest& m, const ModelConfig& model, std::size_t maxHeavy) {
  const CsvTable csv      = readCsv(m.moleculesPath);
  const auto     smilesAt = csv.column(m.smilesColumn);
  if (!smilesAt) {
    manifestError("missing column '" + m.smilesColumn + "' in " + m.moleculesPath);
  }
  std::optional<std::size_t> idAt;
  if (!m.idColumn.empty()) {
    idAt = csv.column(m.idColumn);
    if (!idAt) {
      manifestError("missing column '" + m.idColumn + "' in " + m.moleculesPath);
    }
  }
  std::vector<std::size_t> graphColumns(m.tasks.size(), 0);
  bool                     anyNodeTask = false;
  for (std::size_t t = 0; t < m.tasks.size(); ++t) {
    if (m.tasks[t].spec.level == TaskLevel::Node) {
      anyNodeTask = true;
      continue;
    }
    const auto c = csv.column(m.tasks[t].column);
    if (!c) {
      manifestError("missing task column '" + m.tasks[t].column + "' in " + m.moleculesPath);
    }
    graphColumns[t] = *c;
  }

  std::unordered_set<std::string> exclusion;
  if (!m.exclusionPath.empty()) {
    for (const auto& line : readLines(m.exclusionPath)) {
      exclusion.insert(normalizeSmiles(line));
    }
  }

  LoadedDataset out;
  out.rows = csv.rows.size();
  for (const auto& t : m.tasks) {
    out.data.tasks.push_back(t.spec);
  }
  std::unordered_set<std::string>              allIds;
  std::unordered_map<std::string, std::size_t> loaded;
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    const std::string& smiles = csv.rows[r][*smilesAt];
    std::string        id;
    try {
      id = idAt ? trim(csv.rows[r][*idAt]) : normalizeSmiles(smiles);
    } catch (const Error& e) {
      out.failures.push_back({r + 1, smiles, e.what()});
      continue;
    }
    if (!allIds.insert(id).second) {
      manifestError("duplicate molecule id '" + id + "' at row " + std::to_string(r + 1) + " of " +
                    m.moleculesPath);
    }
    MoleculeRecord rec;
    rec.id = id;
    try {
      rec.graph = parseSmiles(smiles);
      if (rec.graph.numAtoms() == 0) {
        throw Error(ErrorCode::EmptyGraph, "molecule has no atoms");
      }
    } catch (const Error& e) {
      out.failures.push_back({r + 1, smiles, e.what()});
      continue;
    }
    if (heavyAtomCount(rec.graph) > maxHeavy) {
      ++out.filtered;
      continue;
    }
    if (exclusion.contains(normalizeSmiles(smiles)) || exclusion.contains(id)) {
      ++out.excluded;
      continue;
    }
    try {
      rec.features = assemble(rec.graph, model.kPe, model.rwSteps, model.seed, model.dGlobal);
    } catch (const Error& e) {
      out.failures.push_back({r + 1, smiles, e.what()});
      continue;
    }
    for (std::size_t t = 0; t < m.tasks.size(); ++t) {
      const TaskSpec&   spec = m.tasks[t].spec;
      const std::size_t rows = spec.level == TaskLevel::Node ? rec.graph.numAtoms() : 1;
      LabelSet          ls{Tensor(rows, 1), Tensor(rows, 1)};
      if (spec.level == TaskLevel::Graph) {
        const auto v = parseLabel(csv.rows[r][graphColumns[t]], m.moleculesPath + " row " + std::to_string(r + 1) +
                                                                     " column '" + m.tasks[t].column + "'");
        if (v) {
          ls.values[0] = *v;
          ls.mask[0]   = 1.0;
        }
      }
      rec.labels.push_back(std::move(ls));
    }
    loaded.emplace(id, out.data.molecules.size());
    out.smiles.push_back(smiles);
    out.data.molecules.push_back(std::move(rec));
  }

  if (anyNodeTask) {
    if (m.nodeLabelsPath.empty()) {
      manifestError("node-level tasks need \"node_labels\"");
    }
    const CsvTable node   = readCsv(m.nodeLabelsPath);
    const auto     nodeId = node.column("id");
    const auto     atomAt = node.column("atom");
    if (!nodeId || !atomAt) {
      manifestError("node label file " + m.nodeLabelsPath + " needs 'id' and 'atom' columns");
    }
    std::vector<std::optional<std::size_t>> nodeColumns(m.tasks.size());
    for (std::size_t t = 0; t < m.tasks.size(); ++t) {
      if (m.tasks[t].spec.level == TaskLevel::Node) {
        nodeColumns[t] = node.column(m.tasks[t].column);
        if (!nodeColumns[t]) {
          manifestError("missing task column '" + m.tasks[t].column + "' in " + m.nodeLabelsPath);
        }
      }
    }
    for (std::size_t r = 0; r < node.rows.size(); ++r) {
      const std::string id    = trim(node.rows[r][*nodeId]);
      const std::string where = m.nodeLabelsPath + " row " + std::to_string(r + 1);
      if (!allIds.contains(id)) {
        manifestError(where + ": unknown molecule id '" + id + "'");
      }
      const auto it = loaded.find(id);
      if (it == loaded.end()) {
        continue;  // dropped before loading
      }
      MoleculeRecord& rec  = out.data.molecules[it->second];
      const auto      atom = parseLabel(node.rows[r][*atomAt], where);
      if (!atom || *atom < 0 || *atom != std::floor(*atom) ||
          *atom >= static_cast<double>(rec.graph.numAtoms())) {
        manifestError(where + ": atom index out of range for '" + id + "'");
      }
      const auto a = static_cast<std::size_t>(*atom);
      for (std::size_t t = 0; t < m.tasks.size(); ++t) {
        if (!nodeColumns[t]) {
          continue;
        }
        const auto v = parseLabel(node.rows[r][*nodeColumns[t]], where);
        if (v) {
          rec.labels[t].values[a] = *v;
          rec.labels[t].mask[a]   = 1.0;
        }
      }
    }
  }
  return out;
}

std::string failureCsv(const std::vector<LoadFailure>& failures) {
  std::string text = "row,smiles,error\n";
  for (const auto& f : failures) {
    text += std::to_string(f.row) + "," + csvField(f.smiles) + "," + csvField(f.message) + "\n";
  }
  return text;
}

// ---------------------------------------------------------------------------
// Feature cache
// ---------------------------------------------------------------------------

void putU32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
  }
}

void putTensor(std::string& out, const Tensor& t) {
  putU32(out, static_cast<std::uint32_t>(t.rows()));
  putU32(out, static_cast<std::uint32_t>(t.cols()));
  for (const double v : t.values()) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    putU32(out, static_cast<std::uint32_t>(bits & 0xFFFFFFFFu));
    putU32(out, static_cast<std::uint32_t>(bits >> 32));
  }
}

class CacheReader {
 public:
  CacheReader(std::string bytes, std::string path) : bytes_(std::move(bytes)), path_(std::move(path)) {}

  std::string take(std::size_t n) {
    if (bytes_.size() - pos_ < n) {
      throw Error(ErrorCode::CorruptHeader, path_ + ": truncated feature cache");
    }
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint32_t u32() {
    const std::string s = take(4);
    std::uint32_t     v = 0;
    for (int i = 3; i >= 0; --i) {
      v = (v << 8) | static_cast<unsigned char>(s[static_cast<std::size_t>(i)]);
    }
    return v;
  }
  Tensor tensor() {
    const std::size_t rows = u32();
    const std::size_t cols = u32();
    if (cols != 0 && rows > (bytes_.size() - pos_) / 8 / cols) {
      throw Error(ErrorCode::CorruptHeader, path_ + ": truncated feature cache");
    }
    Tensor t(rows, cols);
    for (double& v : t.values()) {
      const std::uint64_t lo = u32();
      const std::uint64_t hi = u32();
      v                      = std::bit_cast<double>(lo | (hi << 32));
    }
    return t;
  }
  [[nodiscard]] bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string bytes_;
  std::string path_;
  std::size_t pos_ = 0;
};

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

struct FeaturizeArgs {
  std::string manifest;
  std::string out;
  std::string config;
};

int cmdFeaturize(const FeaturizeArgs& a, std::ostream& out) {
  KeyValues kv = loadConfigFile(a.config);
  applySeedOverrides(kv, "");
  RunConfig rc = RunConfig::fromKeyValues(BackboneKind::Gine, kv);
  rc.manifest  = a.manifest;
  rc.outDir    = a.out;
  const DatasetManifest manifest = DatasetManifest::load(a.manifest);
  const LoadedDataset   ds = loadDataset(manifest, rc.model, std::numeric_limits<std::size_t>::max());
  const fs::path        dir(a.out);
  makeDirectory(dir);

  const std::string layout = featureLayoutJson(rc.model.kPe, rc.model.rwSteps);
  std::string       bin    = "MFFC";
  putU32(bin, 1);
  putU32(bin, static_cast<std::uint32_t>(layout.size()));
  bin += layout;
  putU32(bin, static_cast<std::uint32_t>(ds.data.molecules.size()));
  for (const auto& m : ds.data.molecules) {
    putU32(bin, static_cast<std::uint32_t>(m.id.size()));
    bin += m.id;
    putTensor(bin, m.features.nodeFeatures);
    putTensor(bin, m.features.edgeFeatures);
  }
  writeText(dir / "features.bin", bin);
  writeText(dir / "layout.json", layout + "\n");
  writeText(dir / "failures.csv", failureCsv(ds.failures));
  writeText(dir / "run_config.txt", rc.serialize());
  writeFileList(dir);
  out << "featurized " << ds.data.molecules.size() << " of " << ds.rows << " molecules, " << ds.failures.size()
      << " failed\n";
  return kExitOk;
}

struct PretrainArgs {
  std::string manifest;
  std::string backbone;
  std::string config;
  std::string out;
  std::string seed;
};

int cmdPretrain(const PretrainArgs& a, std::ostream& out, std::ostream& err) {
  KeyValues kv = loadConfigFile(a.config);
  if (!a.backbone.empty()) {
    kv.set("backbone", toString(parseBackboneKind(a.backbone)));
  }
  applySeedOverrides(kv, a.seed);
  if (!a.manifest.empty()) {
    kv.set("manifest", a.manifest);
  }
  if (!a.out.empty()) {
    kv.set("out_dir", a.out);
  }
  RunConfig rc = RunConfig::fromKeyValues(BackboneKind::Gine, kv);
  if (rc.manifest.empty()) {
    throw Error(ErrorCode::InvalidConfig, "no manifest given");
  }
  if (rc.outDir.empty()) {
    rc.outDir = "runs/pretrain-" + std::string(rc.model.backbone == BackboneKind::MpnnPlusPlus
                                                  ? "mpnnpp"
                                                  : toString(rc.model.backbone)) +
                "-seed" + std::to_string(rc.seed);
  }
  const fs::path dir(rc.outDir);
  makeDirectory(dir);
  writeText(dir / "run_config.txt", rc.serialize());

  const DatasetManifest manifest = DatasetManifest::load(rc.manifest);
  const LoadedDataset   ds       = loadDataset(manifest, rc.model, rc.maxHeavy);
  writeText(dir / "failures.csv", failureCsv(ds.failures));
  if (manifest.tasks.empty()) {
    manifestError("manifest declares no tasks");
  }

  Split split;
  if (!manifest.trainIds.empty()) {
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < ds.data.molecules.size(); ++i) {
      index.emplace(ds.data.molecules[i].id, i);
    }
    auto take = [&](const std::string& path, std::vector<std::size_t>& dst) {
      if (path.empty()) {
        return;
      }
      std::size_t skipped = 0;
      for (const auto& id : readLines(path)) {
        const auto it = index.find(id);
        if (it == index.end()) {
          ++skipped;
        } else {
          dst.push_back(it->second);
        }
      }
      if (skipped > 0) {
        err << "warning: " << skipped << " id(s) in " << path << " are not in the loaded dataset\n";
      }
    };
    take(manifest.trainIds, split.train);
    take(manifest.validIds, split.valid);
    take(manifest.testIds, split.test);
  } else {
    split = splitDataset(ds.data.molecules.size(), rc.split);
  }
  ordered_json splitJson;
  for (const auto& [name, idx] : {std::pair<const char*, const std::vector<std::size_t>*>{"train", &split.train},
                                  {"valid", &split.valid},
                                  {"test", &split.test}}) {
    std::vector<std::string> ids;
    for (const std::size_t i : *idx) {
      ids.push_back(ds.data.molecules[i].id);
    }
    splitJson[name] = ids;
  }
  writeText(dir / "split.json", splitJson.dump(1) + "\n");

  PretrainModel model(rc.model, ds.data.tasks, rc.headHidden);
  out << "backbone " << toString(rc.model.backbone) << ": " << model.backbone().parameterCount()
      << " parameters (" << model.params().elementCount() << " with task heads)\n";
  out << "molecules: " << ds.data.molecules.size() << " loaded, " << ds.failures.size() << " failed, "
      << ds.filtered << " over " << rc.maxHeavy << " heavy atoms, " << ds.excluded << " excluded\n";
  out << "split: " << split.train.size() << " train, " << split.valid.size() << " valid, " << split.test.size()
      << " test\n";
  const PretrainResult result =
    pretrain(model, ds.data, split, rc.train, rc.weights, PretrainOutputs{dir.string(), utcTimestamp()});
  for (const auto& e : result.epochs) {
    out << "epoch " << e.epoch << " train " << formatDouble(e.trainLoss);
    if (e.hasValid) {
      out << " valid " << formatDouble(e.validLoss);
    }
    out << "\n";
  }
  out << "best epoch " << result.bestEpoch << " loss " << formatDouble(result.bestLoss) << "\n";
  writeFileList(dir);
  return kExitOk;
}

struct FingerprintArgs {
  std::string checkpoint;
  std::string molecules;
  std::string pool = "max";
  std::string source = "pooled";
  std::string out;
  std::string smilesColumn = "smiles";
};

int cmdFingerprint(const FingerprintArgs& a, std::ostream& out, std::ostream& err) {
  const ModelConfig config = readModelConfig(a.checkpoint);
  ParameterSet      params;
  const Backbone    backbone(config, params);
  loadCheckpoint(a.checkpoint, params, "backbone/");

  std::vector<std::string> smiles;
  if (fs::path(a.molecules).extension() == ".csv") {
    const CsvTable csv = readCsv(a.molecules);
    const auto     col = csv.column(a.smilesColumn);
    if (!col) {
      manifestError("missing column '" + a.smilesColumn + "' in " + a.molecules);
    }
    for (const auto& row : csv.rows) {
      smiles.push_back(row[*col]);
    }
  } else {
    smiles = readLines(a.molecules);
  }
  ExtractionOptions opt;
  opt.pooling = parsePooling(a.pool);
  opt.source  = parseFingerprintSource(a.source);
  const ExtractionReport report = extractFingerprints(backbone, smiles, opt);

  const fs::path target(a.out);
  if (target.has_parent_path()) {
    makeDirectory(target.parent_path());
  }
  writeStore(a.out, report.store);
  writeStoreCsv(a.out + ".csv", report.store);
  std::vector<LoadFailure> failures;
  for (const auto& f : report.failures) {
    failures.push_back({f.index + 1, f.smiles, f.message});
    err << "warning: molecule " << f.index + 1 << " (" << f.smiles << "): " << f.message << "\n";
  }
  writeText(a.out + ".failures.csv", failureCsv(failures));
  out << "fingerprints: " << report.store.size() << " x " << report.store.dimension() << ", "
      << report.duplicates << " duplicate(s), " << report.failures.size() << " failure(s)\n";
  return kExitOk;
}

struct DownstreamArgs {
  std::string store;
  std::string task;
  std::string sweepName = "config1";
  int         folds     = 5;
  int         reps      = 5;
  std::string out;
  std::string seed;
  std::string headConfig;
};

DownstreamTask loadDownstreamTask(const std::string& path, std::uint64_t seed) {
  json j;
  try {
    j = json::parse(readText(path));
  } catch (const json::exception& e) {
    manifestError(path + ": " + e.what());
  }
  const fs::path base = fs::path(path).parent_path();
  auto           str  = [&](const char* key, const std::string& fallback) -> std::string {
    if (!j.contains(key)) {
      if (fallback.empty()) {
        manifestError(path + ": missing \"" + std::string(key) + "\"");
      }
      return fallback;
    }
    if (!j[key].is_string()) {
      manifestError(path + ": \"" + std::string(key) + "\" must be a string");
    }
    return j[key].get<std::string>();
  };
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? p : (base / p).string(); };

  DownstreamTask task;
  task.name = str("name", "task");
  try {
    task.kind = parseTaskKind(str("kind", "binary"));
  } catch (const Error& e) {
    manifestError(path + ": " + e.what());
  }
  if (task.kind == TaskKind::Multiclass) {
    manifestError(path + ": downstream tasks are binary or regression");
  }
  const std::string csvPath     = resolve(str("molecules", ""));
  const std::string smilesCol   = str("smiles_column", "smiles");
  const std::string labelCol    = str("label_column", "label");
  const std::string splitCol    = j.contains("split_column") ? str("split_column", "") : "";
  const CsvTable    csv         = readCsv(csvPath);
  const auto        smilesAt    = csv.column(smilesCol);
  const auto        labelAt     = csv.column(labelCol);
  if (!smilesAt) {
    manifestError("missing column '" + smilesCol + "' in " + csvPath);
  }
  if (!labelAt) {
    manifestError("missing column '" + labelCol + "' in " + csvPath);
  }
  std::optional<std::size_t> splitAt;
  if (!splitCol.empty()) {
    splitAt = csv.column(splitCol);
    if (!splitAt) {
      manifestError("missing column '" + splitCol + "' in " + csvPath);
    }
  }
  std::vector<std::string> ids;
  std::vector<double>      labels;
  std::vector<std::string> parts;
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    const auto v = parseLabel(csv.rows[r][*labelAt], csvPath + " row " + std::to_string(r + 1));
    if (!v) {
      continue;
    }
    ids.push_back(normalizeSmiles(csv.rows[r][*smilesAt]));
    labels.push_back(*v);
    parts.push_back(splitAt ? trim(csv.rows[r][*splitAt]) : "");
  }
  if (splitAt) {
    for (std::size_t i = 0; i < ids.size(); ++i) {
      LabeledIds* dst = parts[i] == "train" ? &task.train
                        : parts[i] == "valid" ? &task.valid
                        : parts[i] == "test"  ? &task.test
                                              : nullptr;
      if (dst == nullptr) {
        manifestError(csvPath + ": split value '" + parts[i] + "' is not train, valid or test");
      }
      dst->ids.push_back(ids[i]);
      dst->labels.push_back(labels[i]);
    }
  } else {
    const Split s = splitDataset(ids.size(), SplitSpec{0.8, 0.1, 0.1, seed});
    for (const auto& [idx, dst] : {std::pair{&s.train, &task.train}, {&s.valid, &task.valid},
                                   {&s.test, &task.test}}) {
      for (const std::size_t i : *idx) {
        dst->ids.push_back(ids[i]);
        dst->labels.push_back(labels[i]);
      }
    }
  }
  return task;
}

void applyHeadOverrides(HeadConfig& c, const KeyValues& kv) {
  if (kv.has("hidden")) c.hidden = kv.getUnsigned("hidden");
  if (kv.has("num_layers")) c.numLayers = static_cast<int>(kv.getInt("num_layers"));
  if (kv.has("dropout")) c.dropout = kv.getDouble("dropout");
  if (kv.has("normalization")) c.normalization = parseNormalization(kv.getString("normalization"));
  if (kv.has("skip")) c.skip = kv.getBool("skip");
  if (kv.has("learning_rate")) c.learningRate = kv.getDouble("learning_rate");
  if (kv.has("epochs")) c.epochs = static_cast<int>(kv.getInt("epochs"));
  if (kv.has("warmup_epochs")) c.warmupEpochs = static_cast<int>(kv.getInt("warmup_epochs"));
  if (kv.has("schedule")) c.schedule = parseSchedule(kv.getString("schedule"));
  if (kv.has("batch_size")) c.batchSize = kv.getUnsigned("batch_size");
}

std::string headConfigText(const HeadConfig& c) {
  std::string s;
  s += "hidden = " + std::to_string(c.hidden) + "\n";
  s += "num_layers = " + std::to_string(c.numLayers) + "\n";
  s += "dropout = " + formatDouble(c.dropout) + "\n";
  s += "normalization = " + toString(c.normalization) + "\n";
  s += "skip = " + std::string(c.skip ? "true" : "false") + "\n";
  s += "learning_rate = " + formatDouble(c.learningRate) + "\n";
  s += "epochs = " + std::to_string(c.epochs) + "\n";
  s += "warmup_epochs = " + std::to_string(c.warmupEpochs) + "\n";
  s += "schedule = " + toString(c.schedule) + "\n";
  s += "batch_size = " + std::to_string(c.batchSize) + "\n";
  return s;
}

int cmdDownstream(const DownstreamArgs& a, std::ostream& out, std::ostream& err) {
  KeyValues seedKv;
  applySeedOverrides(seedKv, a.seed);
  const std::uint64_t seed = seedKv.has("seed") ? seedKv.getUnsigned("seed") : 0;
  const KeyValues     overrides = loadConfigFile(a.headConfig);
  overrides.requireKnown({"hidden", "num_layers", "dropout", "normalization", "skip", "learning_rate", "epochs",
                          "warmup_epochs", "schedule", "batch_size"});

  SweepSpace space;
  if (a.sweepName == "none") {
    space.points = {HeadConfig{}};
  } else {
    space = SweepSpace::byName(a.sweepName);
  }
  for (auto& p : space.points) {
    applyHeadOverrides(p, overrides);
    p.validate();
  }
  const std::string outDir = a.out.empty() ? "runs/downstream-seed" + std::to_string(seed) : a.out;
  const fs::path    dir(outDir);
  makeDirectory(dir);
  std::string rc;
  rc += "store = " + a.store + "\n";
  rc += "task = " + a.task + "\n";
  rc += "sweep = " + a.sweepName + "\n";
  rc += "folds = " + std::to_string(a.folds) + "\n";
  rc += "reps = " + std::to_string(a.reps) + "\n";
  rc += "seed = " + std::to_string(seed) + "\n";
  for (const auto& [k, v] : overrides.entries()) {
    rc += "head." + k + " = " + v + "\n";
  }
  rc += "out_dir = " + outDir + "\n";
  writeText(dir / "run_config.txt", rc);

  const FingerprintStore store = readStore(a.store);
  const DownstreamTask   task  = loadDownstreamTask(a.task, seed);
  out << "task " << task.name << " (" << toString(task.kind) << "): " << task.train.ids.size() << " train, "
      << task.valid.ids.size() << " valid, " << task.test.ids.size() << " test\n";

  const SweepResult sw = sweep(space, store, task, seed);
  std::string       sweepCsv =
    "index,learning_rate,hidden,num_layers,dropout,normalization,skip,epochs,warmup_epochs,schedule,batch_size,"
    "valid_loss,best_epoch\n";
  for (std::size_t i = 0; i < sw.records.size(); ++i) {
    const HeadConfig& c = sw.records[i].config;
    sweepCsv += std::to_string(i) + "," + formatDouble(c.learningRate) + "," + std::to_string(c.hidden) + "," +
                std::to_string(c.numLayers) + "," + formatDouble(c.dropout) + "," + toString(c.normalization) +
                "," + (c.skip ? "1" : "0") + "," + std::to_string(c.epochs) + "," +
                std::to_string(c.warmupEpochs) + "," + toString(c.schedule) + "," + std::to_string(c.batchSize) +
                "," + formatDouble(sw.records[i].validLoss) + "," + std::to_string(sw.records[i].bestEpoch) + "\n";
  }
  writeText(dir / "sweep.csv", sweepCsv);
  writeText(dir / "chosen_config.txt", headConfigText(sw.best));
  out << "sweep " << a.sweepName << ": " << sw.records.size() << " run(s); best " << sw.best.describe() << "\n";

  const EnsembleResult ens = kfoldEnsemble(store, task, sw.best, a.folds, a.reps, seed);
  for (const auto& w : ens.warnings) {
    err << "warning: " << w << "\n";
  }
  std::string reps = "repetition,seed,fold_valid_losses,valid_" + ens.metric + ",test_" + ens.metric + "\n";
  for (std::size_t r = 0; r < ens.repetitions.size(); ++r) {
    const auto& rep = ens.repetitions[r];
    std::string losses;
    for (const double l : rep.foldValidLoss) {
      losses += (losses.empty() ? "" : ";") + formatDouble(l);
    }
    reps += std::to_string(r) + "," + std::to_string(rep.seed) + "," + losses + "," + formatDouble(rep.validScore) +
            "," + formatDouble(rep.testScore) + "\n";
  }
  writeText(dir / "repetitions.csv", reps);
  writeText(dir / "summary.csv",
            "metric,higher_is_better,folds,repetitions,valid_mean,valid_std,test_mean,test_std\n" + ens.metric + "," +
              (ens.higherIsBetter ? "1" : "0") + "," + std::to_string(ens.numFolds) + "," +
              std::to_string(ens.repetitions.size()) + "," + formatDouble(ens.validMean) + "," +
              formatDouble(ens.validStd) + "," + formatDouble(ens.testMean) + "," + formatDouble(ens.testStd) + "\n");
  const std::string run = dir.filename().empty() ? dir.parent_path().filename().string() : dir.filename().string();
  const std::string hib = ens.higherIsBetter ? "1" : "0";
  writeText(dir / "results.csv", "run,metric,value,higher_is_better\n" + csvField(run) + ",test_" + ens.metric + "," +
                                    formatDouble(ens.testMean) + "," + hib + "\n" + csvField(run) + ",valid_" +
                                    ens.metric + "," + formatDouble(ens.validMean) + "," + hib + "\n");
  writeFileList(dir);
  out << "valid " << ens.metric << " " << formatDouble(ens.validMean) << " +/- " << formatDouble(ens.validStd)
      << "\ntest " << ens.metric << " " << formatDouble(ens.testMean) << " +/- " << formatDouble(ens.testStd)
      << "\n";
  return kExitOk;
}

struct CorrelateArgs {
  std::string logGlob;
  std::string results;
  std::string out;
  double      threshold = 0.1;
};

//! Validation (else training) group losses at the best epoch of one log.
std::map<std::string, double> pretrainMetrics(const std::string& path) {
  std::istringstream in(readText(path));
  std::string        line;
  std::map<int, json> epochs;
  int                best = -1;
  while (std::getline(in, line)) {
    if (trim(line).empty()) {
      continue;
    }
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      manifestError(path + ": " + e.what());
    }
    const std::string type = j.value("type", "");
    if (type == "epoch") {
      epochs[j.at("epoch").get<int>()] = j;
    } else if (type == "summary") {
      best = j.at("best_epoch").get<int>();
    }
  }
  if (!epochs.contains(best)) {
    manifestError(path + ": no summary line naming a logged best epoch");
  }
  const json&                   e      = epochs[best];
  const json&                   groups = e.contains("valid") ? e["valid"] : e["train"];
  std::map<std::string, double> out;
  for (const auto& [g, v] : groups.items()) {
    out[g + "_loss"] = v.get<double>();
  }
  return out;
}

int cmdCorrelate(const CorrelateArgs& a, std::ostream& out) {
  glob_t g{};
  const int rc = ::glob(a.logGlob.c_str(), 0, nullptr, &g);
  std::vector<std::string> logs;
  if (rc == 0) {
    for (std::size_t i = 0; i < g.gl_pathc; ++i) {
      logs.emplace_back(g.gl_pathv[i]);
    }
  }
  globfree(&g);
  std::sort(logs.begin(), logs.end());

  std::map<std::string, std::map<std::string, double>> pre;
  for (const auto& p : logs) {
    const fs::path    path(p);
    const std::string run = path.parent_path().filename().string();
    if (pre.contains(run)) {
      manifestError("two pre-training logs belong to run '" + run + "'");
    }
    pre[run] = pretrainMetrics(p);
  }

  const CsvTable csv = readCsv(a.results);
  const auto     runAt = csv.column("run");
  const auto     metAt = csv.column("metric");
  const auto     valAt = csv.column("value");
  const auto     hibAt = csv.column("higher_is_better");
  if (!runAt || !metAt || !valAt || !hibAt) {
    manifestError(a.results + " needs columns run, metric, value, higher_is_better");
  }
  std::map<std::string, std::map<std::string, double>> down;
  std::map<std::string, bool>                          downHib;
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    const auto& row = csv.rows[r];
    const auto  v   = parseLabel(row[*valAt], a.results + " row " + std::to_string(r + 1));
    if (!v) {
      continue;
    }
    down[row[*runAt]][row[*metAt]] = *v;
    downHib[row[*metAt]]           = trim(row[*hibAt]) == "1" || trim(row[*hibAt]) == "true";
  }

  std::vector<std::string> runs;
  for (const auto& [run, _] : pre) {
    if (down.contains(run)) {
      runs.push_back(run);
    }
  }
  if (runs.size() < 3) {
    throw Error(ErrorCode::InvalidConfig, "need >= 3 paired runs, found " + std::to_string(runs.size()));
  }
  auto sharedKeys = [&](const std::map<std::string, std::map<std::string, double>>& table) {
    std::set<std::string> keys;
    for (const auto& [k, _] : table.at(runs.front())) {
      keys.insert(k);
    }
    for (const auto& run : runs) {
      std::set<std::string> next;
      for (const auto& k : keys) {
        if (table.at(run).contains(k)) {
          next.insert(k);
        }
      }
      keys = std::move(next);
    }
    return keys;
  };
  std::vector<MetricColumn> preCols;
  for (const auto& k : sharedKeys(pre)) {
    MetricColumn c{k, false, {}};
    for (const auto& run : runs) {
      c.values.push_back(pre.at(run).at(k));
    }
    preCols.push_back(std::move(c));
  }
  std::vector<MetricColumn> downCols;
  for (const auto& k : sharedKeys(down)) {
    MetricColumn c{k, downHib.at(k), {}};
    for (const auto& run : runs) {
      c.values.push_back(down.at(run).at(k));
    }
    downCols.push_back(std::move(c));
  }
  const auto  table = correlationAnalysis(preCols, downCols, a.threshold);
  std::string text  = "pretrain_metric,downstream_metric,rho,signed_rho,p_value,significant\n";
  for (const auto& e : table) {
    text += csvField(e.pretrainMetric) + "," + csvField(e.downstreamMetric) + "," + formatDouble(e.rho) + "," +
            formatDouble(e.signedRho) + "," + formatDouble(e.pValue) + "," + (e.significant ? "1" : "0") + "\n";
  }
  if (a.out.empty()) {
    out << text;
  } else {
    writeText(a.out, text);
    out << "correlation table over " << runs.size() << " runs written to " << a.out << "\n";
  }
  return kExitOk;
}

}  // namespace

FeatureCache readFeatureCache(const std::string& path) {
  CacheReader in(readText(path), path);
  if (in.take(4) != "MFFC" || in.u32() != 1) {
    throw Error(ErrorCode::CorruptHeader, path + ": not a version-1 feature cache");
  }
  FeatureCache cache;
  cache.layoutJson          = in.take(in.u32());
  const std::uint32_t count = in.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    CachedMolecule m;
    m.id           = in.take(in.u32());
    m.nodeFeatures = in.tensor();
    m.edgeFeatures = in.tensor();
    cache.molecules.push_back(std::move(m));
  }
  if (!in.done()) {
    throw Error(ErrorCode::CorruptHeader, path + ": trailing bytes after the last record");
  }
  return cache;
}

int exitCodeFor(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Io:
    case ErrorCode::CorruptHeader: return kExitIo;
    case ErrorCode::NumericFailure:
    case ErrorCode::EigenFailure: return kExitNumeric;
    default: return kExitUsage;
  }
}

DatasetManifest DatasetManifest::load(const std::string& path) {
  json j;
  try {
    j = json::parse(readText(path));
  } catch (const json::exception& e) {
    manifestError(path + ": " + e.what());
  }
  if (!j.is_object()) {
    manifestError(path + ": expected a JSON object");
  }
  static const std::set<std::string> known = {"molecules", "smiles_column", "id_column", "tasks", "node_labels",
                                              "splits",    "exclude"};
  for (const auto& [k, _] : j.items()) {
    if (!known.contains(k)) {
      manifestError(path + ": unknown key \"" + k + "\"");
    }
  }
  const fs::path base    = fs::path(path).parent_path();
  auto           resolve = [&](const std::string& p) {
    return p.empty() || fs::path(p).is_absolute() ? p : (base / p).string();
  };
  auto str = [&](const json& obj, const char* key, const std::string& fallback, bool required) -> std::string {
    if (!obj.contains(key)) {
      if (required) {
        manifestError(path + ": missing \"" + std::string(key) + "\"");
      }
      return fallback;
    }
    if (!obj[key].is_string()) {
      manifestError(path + ": \"" + std::string(key) + "\" must be a string");
    }
    return obj[key].get<std::string>();
  };

  DatasetManifest m;
  m.moleculesPath  = resolve(str(j, "molecules", "", true));
  m.smilesColumn   = str(j, "smiles_column", "smiles", false);
  m.idColumn       = str(j, "id_column", "", false);
  m.nodeLabelsPath = resolve(str(j, "node_labels", "", false));
  m.exclusionPath  = resolve(str(j, "exclude", "", false));
  if (j.contains("splits")) {
    const json& s = j["splits"];
    if (!s.is_object()) {
      manifestError(path + ": \"splits\" must be an object");
    }
    m.trainIds = resolve(str(s, "train", "", true));
    m.validIds = resolve(str(s, "valid", "", false));
    m.testIds  = resolve(str(s, "test", "", false));
  }
  if (j.contains("tasks")) {
    if (!j["tasks"].is_array()) {
      manifestError(path + ": \"tasks\" must be an array");
    }
    std::set<std::string> names;
    for (const json& t : j["tasks"]) {
      if (!t.is_object()) {
        manifestError(path + ": each task must be an object");
      }
      TaskColumn tc;
      try {
        tc.spec.name  = str(t, "name", "", true);
        tc.column     = str(t, "column", tc.spec.name, false);
        tc.spec.level = parseTaskLevel(str(t, "level", "graph", false));
        tc.spec.kind  = parseTaskKind(str(t, "kind", "regression", false));
        tc.spec.loss  = t.contains("loss") ? parseLossKind(str(t, "loss", "", true)) : defaultLoss(tc.spec.kind);
        tc.spec.group = parseTaskGroup(str(t, "group", "custom", false));
        if (t.contains("num_classes")) {
          if (!t["num_classes"].is_number_unsigned()) {
            manifestError(path + ": \"num_classes\" must be a positive integer");
          }
          tc.spec.numClasses = t["num_classes"].get<std::size_t>();
        }
        tc.spec.validate();
      } catch (const Error& e) {
        if (e.code() == ErrorCode::InvalidManifest) {
          throw;
        }
        manifestError(path + ": task " + std::to_string(m.tasks.size()) + ": " + e.what());
      }
      if (!names.insert(tc.spec.name).second) {
        manifestError(path + ": duplicate task name '" + tc.spec.name + "'");
      }
      m.tasks.push_back(std::move(tc));
    }
  }
  return m;
}

std::string RunConfig::serialize() const {
  std::string s = "# minifp run configuration\n";
  s += model.serialize();
  s += "epochs = " + std::to_string(train.epochs) + "\n";
  s += "peak_lr = " + formatDouble(train.peakLr) + "\n";
  s += "warmup_epochs = " + std::to_string(train.warmupEpochs) + "\n";
  s += "schedule = " + toString(train.schedule) + "\n";
  s += "batch_size = " + std::to_string(train.batchSize) + "\n";
  s += "head_hidden = " + std::to_string(headHidden) + "\n";
  s += "k = " + formatDouble(weights.k) + "\n";
  s += "max_heavy = " + std::to_string(maxHeavy) + "\n";
  s += "split_train = " + formatDouble(split.train) + "\n";
  s += "split_valid = " + formatDouble(split.valid) + "\n";
  s += "split_test = " + formatDouble(split.test) + "\n";
  s += "manifest = " + manifest + "\n";
  s += "out_dir = " + outDir + "\n";
  return s;
}

RunConfig RunConfig::fromKeyValues(BackboneKind backbone, const KeyValues& kv) {
  kv.requireKnown({"backbone", "num_layers", "d_node", "d_edge", "d_global", "k_pe", "rw_steps", "dropout", "seed",
                   "gine_epsilon_mode", "pooling", "readout", "epochs", "peak_lr", "warmup_epochs", "schedule",
                   "batch_size", "head_hidden", "k", "max_heavy", "split_train", "split_valid", "split_test",
                   "manifest", "out_dir"});
  RunConfig rc;
  rc.model = ModelConfig::defaults(kv.has("backbone") ? parseBackboneKind(kv.getString("backbone")) : backbone);
  ModelConfig& m = rc.model;
  if (kv.has("num_layers")) m.numLayers = static_cast<int>(kv.getInt("num_layers"));
  if (kv.has("d_node")) m.dNode = kv.getUnsigned("d_node");
  if (kv.has("d_edge")) m.dEdge = kv.getUnsigned("d_edge");
  if (kv.has("d_global")) m.dGlobal = kv.getUnsigned("d_global");
  if (kv.has("k_pe")) m.kPe = static_cast<int>(kv.getInt("k_pe"));
  if (kv.has("rw_steps")) m.rwSteps = static_cast<int>(kv.getInt("rw_steps"));
  if (kv.has("dropout")) m.dropout = kv.getDouble("dropout");
  if (kv.has("gine_epsilon_mode")) m.gineMode = parseGineEpsilonMode(kv.getString("gine_epsilon_mode"));
  if (kv.has("pooling")) m.pooling = parsePooling(kv.getString("pooling"));
  if (kv.has("readout")) m.readout = parseGraphReadout(kv.getString("readout"));
  TrainConfig& t = rc.train;
  if (kv.has("epochs")) t.epochs = static_cast<int>(kv.getInt("epochs"));
  if (kv.has("peak_lr")) t.peakLr = kv.getDouble("peak_lr");
  if (kv.has("warmup_epochs")) t.warmupEpochs = static_cast<int>(kv.getInt("warmup_epochs"));
  if (kv.has("schedule")) t.schedule = parseSchedule(kv.getString("schedule"));
  if (kv.has("batch_size")) t.batchSize = kv.getUnsigned("batch_size");
  if (kv.has("head_hidden")) rc.headHidden = kv.getUnsigned("head_hidden");
  if (kv.has("k")) rc.weights.k = kv.getDouble("k");
  if (kv.has("max_heavy")) rc.maxHeavy = kv.getUnsigned("max_heavy");
  if (kv.has("split_train")) rc.split.train = kv.getDouble("split_train");
  if (kv.has("split_valid")) rc.split.valid = kv.getDouble("split_valid");
  if (kv.has("split_test")) rc.split.test = kv.getDouble("split_test");
  if (kv.has("manifest")) rc.manifest = kv.getString("manifest");
  if (kv.has("out_dir")) rc.outDir = kv.getString("out_dir");
  rc.seed       = kv.has("seed") ? kv.getUnsigned("seed") : 0;
  m.seed        = rc.seed;
  t.seed        = rc.seed;
  rc.split.seed = rc.seed;
  m.validate();
  t.validate();
  if (rc.headHidden == 0) {
    throw Error(ErrorCode::InvalidConfig, "head_hidden must be positive");
  }
  if (!(rc.weights.k > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "k must be positive");
  }
  return rc;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"minifp: molecular graph fingerprints from multi-task pre-training", "minifp"};
  app.require_subcommand(1);

  FeaturizeArgs featurize;
  auto*         fz = app.add_subcommand("featurize", "Parse and encode every molecule of a manifest");
  fz->add_option("manifest", featurize.manifest, "Dataset manifest (JSON)")->required();
  fz->add_option("--out", featurize.out, "Output directory")->required();
  fz->add_option("--config", featurize.config, "key = value file (k_pe, rw_steps)");

  PretrainArgs pretrainArgs;
  auto*        pt = app.add_subcommand("pretrain", "Multi-task pre-training of a backbone");
  pt->add_option("manifest", pretrainArgs.manifest, "Dataset manifest (JSON); may come from the config");
  pt->add_option("--backbone", pretrainArgs.backbone, "gcn | gine | mpnnpp");
  pt->add_option("--config", pretrainArgs.config, "key = value file");
  pt->add_option("--out", pretrainArgs.out, "Run directory");
  pt->add_option("--seed", pretrainArgs.seed, "Master seed (MINIFP_SEED takes precedence)");

  FingerprintArgs fpArgs;
  auto*           fp = app.add_subcommand("fingerprint", "Extract fingerprints with a trained backbone");
  fp->add_option("checkpoint", fpArgs.checkpoint, "Checkpoint (with .config sidecar)")->required();
  fp->add_option("molecules", fpArgs.molecules, "CSV with a smiles column, or one SMILES per line")->required();
  fp->add_option("--pool", fpArgs.pool, "sum | mean | max")->check(CLI::IsMember({"sum", "mean", "max"}));
  fp->add_option("--source", fpArgs.source, "pooled | global")->check(CLI::IsMember({"pooled", "global"}));
  fp->add_option("--smiles-column", fpArgs.smilesColumn, "SMILES column of a CSV input");
  fp->add_option("--out", fpArgs.out, "Store path")->required();

  DownstreamArgs dsArgs;
  auto*          ds = app.add_subcommand("downstream", "Sweep, k-fold ensemble and evaluate task heads");
  ds->add_option("store", dsArgs.store, "Fingerprint store")->required();
  ds->add_option("task", dsArgs.task, "Task manifest (JSON)")->required();
  ds->add_option("--sweep", dsArgs.sweepName, "config1 | config2 | none")
    ->check(CLI::IsMember({"config1", "config2", "none"}));
  ds->add_option("--folds", dsArgs.folds, "Folds per repetition")->check(CLI::Range(2, 1000));
  ds->add_option("--reps", dsArgs.reps, "Repetitions")->check(CLI::Range(1, 1000));
  ds->add_option("--out", dsArgs.out, "Run directory");
  ds->add_option("--seed", dsArgs.seed, "Master seed (MINIFP_SEED takes precedence)");
  ds->add_option("--head-config", dsArgs.headConfig, "key = value overrides applied to every sweep point");

  CorrelateArgs crArgs;
  auto*         cr = app.add_subcommand("correlate", "Sign-adjusted Spearman table of pre-training vs downstream");
  cr->add_option("logs", crArgs.logGlob, "Glob of pre-training log.jsonl files")->required();
  cr->add_option("results", crArgs.results, "CSV with run, metric, value, higher_is_better")->required();
  cr->add_option("--out", crArgs.out, "Output CSV (default: standard output)");
  cr->add_option("--threshold", crArgs.threshold, "Significance threshold");

  std::vector<const char*> argv;
  for (const auto& a : args) {
    argv.push_back(a.c_str());
  }
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (fz->parsed()) {
      return cmdFeaturize(featurize, out);
    }
    if (pt->parsed()) {
      return cmdPretrain(pretrainArgs, out, err);
    }
    if (fp->parsed()) {
      return cmdFingerprint(fpArgs, out, err);
    }
    if (ds->parsed()) {
      return cmdDownstream(dsArgs, out, err);
    }
    return cmdCorrelate(crArgs, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exitCodeFor(e.code());
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

}  // namespace minifp::cli
