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

#include "minifp/tensor.h"

#include <algorithm>

#include "minifp/error.h"

namespace minifp {

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows_ * cols_) {
    throw Error(ErrorCode::ShapeMismatch, "value count " + std::to_string(values_.size()) + " does not match " +
                                              shapeString());
  }
}

Tensor::Tensor(std::initializer_list<std::initializer_list<double>> rows) : rows_(rows.size()) {
  cols_ = rows.size() == 0 ? 0 : rows.begin()->size();
  values_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) {
      throw Error(ErrorCode::ShapeMismatch, "ragged initializer rows");
    }
    values_.insert(values_.end(), r.begin(), r.end());
  }
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    t(i, i) = 1.0;
  }
  return t;
}

Tensor Tensor::rowVector(std::span<const double> values) {
  return Tensor(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

std::string Tensor::shapeString() const {
  return "[" + std::to_string(rows_) + " x " + std::to_string(cols_) + "]";
}

double Tensor::item() const {
  if (values_.size() != 1) {
    throw Error(ErrorCode::ShapeMismatch, "item() on tensor of shape " + shapeString());
  }
  return values_[0];
}

void Tensor::fill(double value) noexcept {
  std::fill(values_.begin(), values_.end(), value);
}

void Tensor::addInPlace(const Tensor& other) {
  if (!sameShape(other)) {
    throw Error(ErrorCode::ShapeMismatch, shapeString() + " vs " + other.shapeString());
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    values_[i] += other.values_[i];
  }
}

double orderedSum(std::vector<double>& values) {
  std::sort(values.begin(), values.end());
  double total = 0.0;
  for (const double v : values) {
    total += v;
  }
  return total;
}

}  // namespace minifp
