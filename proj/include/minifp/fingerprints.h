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

#ifndef MINIFP_FINGERPRINTS_H
#define MINIFP_FINGERPRINTS_H

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "minifp/backbones.h"
#include "minifp/tensor.h"

namespace minifp {

//! Which final state becomes the fingerprint. Global is MPNN++ only.
enum class FingerprintSource { PooledNodes, Global };
std::string       toString(FingerprintSource source);
FingerprintSource parseFingerprintSource(const std::string& text);

//! Column-wise sum, mean or max over the rows of one graph's node states. Throws EmptyGraph.
std::vector<double> poolNodes(const Tensor& nodes, Pooling pooling);

//! Ordered (id, vector) records of one shared dimension. Vectors are held as float32.
class FingerprintStore {
 public:
  FingerprintStore() = default;
  explicit FingerprintStore(std::size_t dimension) : dimension_(dimension) {}

  //! Throws DimensionMismatch on a wrong length, InvalidConfig on a duplicate id.
  void add(const std::string& id, std::span<const float> vector);
  void add(const std::string& id, std::span<const double> vector);

  [[nodiscard]] std::size_t             dimension() const noexcept { return dimension_; }
  [[nodiscard]] std::size_t             size() const noexcept { return ids_.size(); }
  [[nodiscard]] const std::string&      id(std::size_t i) const { return ids_.at(i); }
  [[nodiscard]] std::span<const float>  vector(std::size_t i) const;
  [[nodiscard]] std::optional<std::size_t> find(const std::string& id) const;
  //! Throws MissingFingerprint.
  [[nodiscard]] std::span<const float>  at(const std::string& id) const;

  bool operator==(const FingerprintStore& other) const {
    return dimension_ == other.dimension_ && ids_ == other.ids_ && values_ == other.values_;
  }

 private:
  std::size_t                                  dimension_ = 0;
  std::vector<std::string>                     ids_;
  std::vector<float>                           values_;
  std::unordered_map<std::string, std::size_t> index_;
};

//! "MFPS", version byte, dimension (u32 LE), record count (u32 LE), then per record the id
//! length (u32 LE), id bytes and dimension float32 LE values.
void             writeStore(const std::string& path, const FingerprintStore& store);
//! Throws CorruptHeader on bad magic, version, truncation or trailing bytes; Io when unreadable.
FingerprintStore readStore(const std::string& path);
//! As readStore, and throws DimensionMismatch unless the store has `expectedDimension`.
FingerprintStore readStore(const std::string& path, std::size_t expectedDimension);
//! Header "id,v0,...,v{d-1}"; values in shortest round-trip form.
void             writeStoreCsv(const std::string& path, const FingerprintStore& store);

struct ExtractionFailure {
  std::size_t index;  //!< position in the input list
  std::string smiles;
  std::string message;
};

struct ExtractionReport {
  FingerprintStore               store;
  std::vector<ExtractionFailure> failures;
  std::size_t                    duplicates = 0;
};

struct ExtractionOptions {
  Pooling           pooling   = Pooling::Max;
  FingerprintSource source    = FingerprintSource::PooledNodes;
  std::size_t       batchSize = 64;
};

//! Dropout-free forward pass over unique molecules. Ids are normalized SMILES; records follow
//! first occurrence. Molecules that fail to parse or featurize are reported, not fatal.
ExtractionReport extractFingerprints(const Backbone& model, std::span<const std::string> smiles,
                                     const ExtractionOptions& options = {});

}  // namespace minifp

#endif  // MINIFP_FINGERPRINTS_H
