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

#include "minifp/rng.h"

#include <cmath>
#include <numbers>

namespace minifp {

std::uint64_t streamSeed(std::uint64_t seed, std::string_view name) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (const char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return mix64(seed ^ mix64(h));
}

std::uint64_t Rng::below(std::uint64_t n) noexcept {
  if (n <= 1) {
    return 0;
  }
  // Rejection sampling keeps the result unbiased.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t       r     = next();
  while (r >= limit) {
    r = next();
  }
  return r % n;
}

double Rng::normal() noexcept {
  if (hasSpare_) {
    hasSpare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) {
    u1 = uniform();
  }
  const double u2     = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double theta  = 2.0 * std::numbers::pi * u2;
  spare_              = radius * std::sin(theta);
  hasSpare_           = true;
  return radius * std::cos(theta);
}

}  // namespace minifp
