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

#include "minifp/fingerprints.h"

#include <algorithm>
#include <bit>
#include <charconv>
#include <fstream>
#include <iterator>

#include "enum_names.h"
#include "minifp/csv.h"
#include "minifp/encodings.h"
#include "minifp/error.h"
#include "minifp/molgraph.h"

namespace minifp {

namespace {

constexpr std::pair<const char*, FingerprintSource> kSourceNames[] = {
  {"pooled", FingerprintSource::PooledNodes}, {"global", FingerprintSource::Global}};

constexpr char         kMagic[4] = {'M', 'F', 'P', 'S'};
constexpr std::uint8_t kVersion  = 1;

void putU32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
  }
}

class Reader {
 public:
  Reader(const std::string& bytes, const std::string& path) : bytes_(bytes), path_(path) {}

  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw Error(ErrorCode::CorruptHeader, "truncated fingerprint store " + path_);
    }
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += 4;
    return v;
  }
  std::string take(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  [[nodiscard]] bool done() const noexcept { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  const std::string& path_;
  std::size_t        pos_ = 0;
};

}  // namespace

std::string toString(FingerprintSource source) {
  return detail::enumName(source, kSourceNames);
}

FingerprintSource parseFingerprintSource(const std::string& text) {
  return detail::parseEnum(text, kSourceNames, "fingerprint source");
}

std::vector<double> poolNodes(const Tensor& nodes, Pooling pooling) {
  if (nodes.rows() == 0) {
    throw Error(ErrorCode::EmptyGraph, "cannot pool a graph without nodes");
  }
  std::vector<double> out(nodes.cols());
  std::vector<double> column(nodes.rows());
  for (std::size_t c = 0; c < nodes.cols(); ++c) {
    for (std::size_t r = 0; r < nodes.rows(); ++r) {
      column[r] = nodes(r, c);
    }
    switch (pooling) {
      case Pooling::Sum:  out[c] = orderedSum(column); break;
      case Pooling::Mean: out[c] = orderedSum(column) / static_cast<double>(nodes.rows()); break;
      case Pooling::Max:  out[c] = *std::max_element(column.begin(), column.end()); break;
    }
  }
  return out;
}

void FingerprintStore::add(const std::string& id, std::span<const float> vector) {
  if (vector.size() != dimension_) {
    throw Error(ErrorCode::DimensionMismatch, "fingerprint for '" + id + "' has length " +
                                                  std::to_string(vector.size()) + ", store dimension is " +
                                                  std::to_string(dimension_));
  }
  if (!index_.emplace(id, ids_.size()).second) {
    throw Error(ErrorCode::InvalidConfig, "duplicate fingerprint id '" + id + "'");
  }
  ids_.push_back(id);
  values_.insert(values_.end(), vector.begin(), vector.end());
}

void FingerprintStore::add(const std::string& id, std::span<const double> vector) {
  std::vector<float> f(vector.begin(), vector.end());
  add(id, std::span<const float>(f));
}

std::span<const float> FingerprintStore::vector(std::size_t i) const {
  if (i >= ids_.size()) {
    throw Error(ErrorCode::ShapeMismatch, "fingerprint index out of range");
  }
  return std::span<const float>(values_).subspan(i * dimension_, dimension_);
}

std::optional<std::size_t> FingerprintStore::find(const std::string& id) const {
  const auto it = index_.find(id);
  if (it == index_.end()) {
    return std::nullopt;
  }
  return it->second;
}

std::span<const float> FingerprintStore::at(const std::string& id) const {
  const auto i = find(id);
  if (!i) {
    throw Error(ErrorCode::MissingFingerprint, "no fingerprint for '" + id + "'");
  }
  return vector(*i);
}

void writeStore(const std::string& path, const FingerprintStore& store) {
  std::string out(kMagic, 4);
  out.push_back(static_cast<char>(kVersion));
  putU32(out, static_cast<std::uint32_t>(store.dimension()));
  putU32(out, static_cast<std::uint32_t>(store.size()));
  for (std::size_t i = 0; i < store.size(); ++i) {
    putU32(out, static_cast<std::uint32_t>(store.id(i).size()));
    out += store.id(i);
    for (const float v : store.vector(i)) {
      putU32(out, std::bit_cast<std::uint32_t>(v));
    }
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f || !f.write(out.data(), static_cast<std::streamsize>(out.size()))) {
    throw Error(ErrorCode::Io, "cannot write " + path);
  }
}

FingerprintStore readStore(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) {
    throw Error(ErrorCode::Io, "cannot open " + path);
  }
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader            in(bytes, path);
  if (in.take(4) != std::string(kMagic, 4)) {
    throw Error(ErrorCode::CorruptHeader, path + " is not a fingerprint store");
  }
  if (static_cast<std::uint8_t>(in.take(1)[0]) != kVersion) {
    throw Error(ErrorCode::CorruptHeader, "unsupported fingerprint store version in " + path);
  }
  const std::uint32_t dim   = in.u32();
  const std::uint32_t count = in.u32();
  FingerprintStore    store(dim);
  std::vector<float>  v(dim);
  for (std::uint32_t r = 0; r < count; ++r) {
    const std::string id = in.take(in.u32());
    in.need(4ull * dim);
    for (auto& x : v) {
      x = std::bit_cast<float>(in.u32());
    }
    try {
      store.add(id, std::span<const float>(v));
    } catch (const Error&) {
      throw Error(ErrorCode::CorruptHeader, "duplicate id '" + id + "' in " + path);
    }
  }
  if (!in.done()) {
    throw Error(ErrorCode::CorruptHeader, "trailing bytes in " + path);
  }
  return store;
}

FingerprintStore readStore(const std::string& path, std::size_t expectedDimension) {
  FingerprintStore store = readStore(path);
  if (store.dimension() != expectedDimension) {
    throw Error(ErrorCode::DimensionMismatch, path + " holds " + std::to_string(store.dimension()) +
                                                  "-dimensional fingerprints, expected " +
                                                  std::to_string(expectedDimension));
  }
  return store;
}

void writeStoreCsv(const std::string& path, const FingerprintStore& store) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) {
    throw Error(ErrorCode::Io, "cannot write " + path);
  }
  f << "id";
  for (std::size_t c = 0; c < store.dimension(); ++c) {
    f << ",v" << c;
  }
  f << '\n';
  char buf[32];
  for (std::size_t i = 0; i < store.size(); ++i) {
    f << csvField(store.id(i));
    for (const float v : store.vector(i)) {
      const auto res = std::to_chars(buf, buf + sizeof(buf), v);
      f << ',' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
    }
    f << '\n';
  }
}

ExtractionReport extractFingerprints(const Backbone& model, std::span<const std::string> smiles,
                                     const ExtractionOptions& options) {
  const ModelConfig& config = model.config();
  if (options.source == FingerprintSource::Global && !config.readsGlobal()) {
    throw Error(ErrorCode::InvalidConfig, "global fingerprints need an mpnn++ backbone");
  }
  if (options.batchSize == 0) {
    throw Error(ErrorCode::InvalidConfig, "batch size must be positive");
  }
  const std::size_t dim = options.source == FingerprintSource::Global ? config.dGlobal : config.dNode;
  ExtractionReport  report;
  report.store = FingerprintStore(dim);

  struct Pending {
    std::string       id;
    MolecularGraph    graph;
    AssembledFeatures features;
  };
  std::vector<Pending>            pending;
  std::unordered_map<std::string, bool> seen;
  for (std::size_t i = 0; i < smiles.size(); ++i) {
    try {
      const std::string id = normalizeSmiles(smiles[i]);
      if (!seen.emplace(id, true).second) {
        ++report.duplicates;
        continue;
      }
      Pending p;
      p.id       = id;
      p.graph    = parseSmiles(smiles[i]);
      if (p.graph.numAtoms() == 0) {
        throw Error(ErrorCode::EmptyGraph, "molecule has no atoms");
      }
      p.features = assemble(p.graph, config.kPe, config.rwSteps, config.seed, config.dGlobal);
      pending.push_back(std::move(p));
    } catch (const Error& e) {
      report.failures.push_back({i, smiles[i], e.what()});
    }
  }

  for (std::size_t begin = 0; begin < pending.size(); begin += options.batchSize) {
    const std::size_t                     end = std::min(pending.size(), begin + options.batchSize);
    std::vector<const MolecularGraph*>    graphs;
    std::vector<const AssembledFeatures*> feats;
    for (std::size_t k = begin; k < end; ++k) {
      graphs.push_back(&pending[k].graph);
      feats.push_back(&pending[k].features);
    }
    const GraphBatch batch = makeBatch(graphs, feats);
    Tape             tape;
    const GraphState state = model.forward(tape, batch);
    if (options.source == FingerprintSource::Global) {
      const Tensor& g = state.globals.value();
      for (std::size_t k = begin; k < end; ++k) {
        report.store.add(pending[k].id, g.row(k - begin));
      }
      continue;
    }
    const Tensor&            x = state.nodes.value();
    std::vector<std::size_t> offset(end - begin + 1, 0);
    for (std::size_t n = 0; n < batch.numNodes(); ++n) {
      ++offset[static_cast<std::size_t>(batch.nodeGraph[n]) + 1];
    }
    for (std::size_t k = 1; k < offset.size(); ++k) {
      offset[k] += offset[k - 1];
    }
    for (std::size_t k = begin; k < end; ++k) {
      const std::size_t g = k - begin;
      Tensor            rows(offset[g + 1] - offset[g], x.cols());
      for (std::size_t r = 0; r < rows.rows(); ++r) {
        std::copy(x.row(offset[g] + r).begin(), x.row(offset[g] + r).end(), rows.row(r).begin());
      }
      const std::vector<double> fp = poolNodes(rows, options.pooling);
      report.store.add(pending[k].id, std::span<const double>(fp));
    }
  }
  return report;
}

}  // namespace minifp
