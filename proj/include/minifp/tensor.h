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

#ifndef MINIFP_TENSOR_H
#define MINIFP_TENSOR_H

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace minifp {

//! Dense row-major 2-D array of doubles. Vectors are 1 x n, scalars 1 x 1.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), values_(rows * cols, fill) {}
  Tensor(std::size_t rows, std::size_t cols, std::vector<double> values);
  Tensor(std::initializer_list<std::initializer_list<double>> rows);

  static Tensor scalar(double value) { return Tensor(1, 1, value); }
  static Tensor identity(std::size_t n);
  static Tensor rowVector(std::span<const double> values);

  [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
  [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
  [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }
  [[nodiscard]] bool        empty() const noexcept { return values_.empty(); }
  [[nodiscard]] std::vector<std::size_t> shape() const { return {rows_, cols_}; }
  [[nodiscard]] std::string shapeString() const;
  [[nodiscard]] bool        sameShape(const Tensor& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  double&       operator()(std::size_t r, std::size_t c) noexcept { return values_[r * cols_ + c]; }
  double        operator()(std::size_t r, std::size_t c) const noexcept { return values_[r * cols_ + c]; }
  double&       operator[](std::size_t i) noexcept { return values_[i]; }
  double        operator[](std::size_t i) const noexcept { return values_[i]; }
  [[nodiscard]] double item() const;

  std::span<double>                     row(std::size_t r) noexcept { return {values_.data() + r * cols_, cols_}; }
  [[nodiscard]] std::span<const double> row(std::size_t r) const noexcept {
    return {values_.data() + r * cols_, cols_};
  }
  std::span<double>                     values() noexcept { return values_; }
  [[nodiscard]] std::span<const double> values() const noexcept { return values_; }

  void fill(double value) noexcept;
  //! this += other, elementwise (shapes must match).
  void addInPlace(const Tensor& other);

  bool operator==(const Tensor& other) const = default;

 private:
  std::size_t         rows_ = 0;
  std::size_t         cols_ = 0;
  std::vector<double> values_;
};

//! Sums values in ascending order, so the result does not depend on input order.
double orderedSum(std::vector<double>& values);

}  // namespace minifp

#endif  // MINIFP_TENSOR_H
