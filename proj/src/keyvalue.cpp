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

#include "minifp/keyvalue.h"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "minifp/error.h"

namespace minifp {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) {
    return {};
  }
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

template <typename T>
T parseNumber(const std::string& origin, const std::string& key, const std::string& text) {
  T          value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw Error(ErrorCode::InvalidConfig, origin + ": '" + key + "' expects a number, got '" + text + "'");
  }
  return value;
}

}  // namespace

KeyValues KeyValues::parse(const std::string& text, const std::string& origin) {
  KeyValues          kv;
  kv.origin_ = origin;
  std::istringstream in(text);
  std::string        line;
  int                lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') {
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::InvalidConfig, origin + ":" + std::to_string(lineNo) + ": expected key = value");
    }
    const std::string key = trim(std::string_view(t).substr(0, eq));
    if (key.empty()) {
      throw Error(ErrorCode::InvalidConfig, origin + ":" + std::to_string(lineNo) + ": empty key");
    }
    if (kv.values_.contains(key)) {
      throw Error(ErrorCode::InvalidConfig, origin + ":" + std::to_string(lineNo) + ": duplicate key '" + key + "'");
    }
    kv.values_[key] = trim(std::string_view(t).substr(eq + 1));
  }
  return kv;
}

KeyValues KeyValues::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::Io, "cannot open " + path);
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str(), path);
}

std::string KeyValues::getString(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) {
    throw Error(ErrorCode::InvalidConfig, origin_ + ": missing key '" + key + "'");
  }
  return it->second;
}

std::int64_t KeyValues::getInt(const std::string& key) const {
  return parseNumber<std::int64_t>(origin_, key, getString(key));
}

std::uint64_t KeyValues::getUnsigned(const std::string& key) const {
  return parseNumber<std::uint64_t>(origin_, key, getString(key));
}

double KeyValues::getDouble(const std::string& key) const {
  return parseNumber<double>(origin_, key, getString(key));
}

bool KeyValues::getBool(const std::string& key) const {
  const std::string v = getString(key);
  if (v == "true" || v == "1") {
    return true;
  }
  if (v == "false" || v == "0") {
    return false;
  }
  throw Error(ErrorCode::InvalidConfig, origin_ + ": '" + key + "' expects true/false, got '" + v + "'");
}

void KeyValues::requireKnown(std::initializer_list<std::string_view> known) const {
  for (const auto& [key, value] : values_) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw Error(ErrorCode::InvalidConfig, origin_ + ": unknown key '" + key + "'");
    }
  }
}

std::string formatDouble(double value) {
  char       buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

}  // namespace minifp
