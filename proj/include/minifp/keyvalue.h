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

#ifndef MINIFP_KEYVALUE_H
#define MINIFP_KEYVALUE_H

#include <cstdint>
#include <map>
#include <string>

namespace minifp {

//! Flat "key = value" text. Blank lines and lines starting with '#' are skipped.
class KeyValues {
 public:
  static KeyValues parse(const std::string& text, const std::string& origin = "config");
  static KeyValues load(const std::string& path);

  [[nodiscard]] bool has(const std::string& key) const { return values_.contains(key); }
  void               set(const std::string& key, std::string value) { values_[key] = std::move(value); }

  [[nodiscard]] std::string   getString(const std::string& key) const;
  [[nodiscard]] std::int64_t  getInt(const std::string& key) const;
  [[nodiscard]] std::uint64_t getUnsigned(const std::string& key) const;
  [[nodiscard]] double        getDouble(const std::string& key) const;
  [[nodiscard]] bool          getBool(const std::string& key) const;

  [[nodiscard]] const std::map<std::string, std::string>& entries() const noexcept { return values_; }
  //! Throws InvalidConfig naming the first key not in `known`.
  void requireKnown(std::initializer_list<std::string_view> known) const;

 private:
  std::string                        origin_;
  std::map<std::string, std::string> values_;
};

//! Shortest decimal text that parses back to the same double.
std::string formatDouble(double value);

}  // namespace minifp

#endif  // MINIFP_KEYVALUE_H
