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

#ifndef MINIFP_SRC_ENUM_NAMES_H
#define MINIFP_SRC_ENUM_NAMES_H

#include <string>
#include <utility>

#include "minifp/error.h"

namespace minifp::detail {

template <typename Enum, std::size_t N>
Enum parseEnum(const std::string& text, const std::pair<const char*, Enum> (&table)[N], const char* what) {
  for (const auto& [name, value] : table) {
    if (text == name) {
      return value;
    }
  }
  throw Error(ErrorCode::InvalidConfig, std::string("unknown ") + what + " '" + text + "'");
}

template <typename Enum, std::size_t N>
std::string enumName(Enum value, const std::pair<const char*, Enum> (&table)[N]) {
  for (const auto& [name, v] : table) {
    if (v == value) {
      return name;
    }
  }
  return "?";
}

}  // namespace minifp::detail

#endif  // MINIFP_SRC_ENUM_NAMES_H
