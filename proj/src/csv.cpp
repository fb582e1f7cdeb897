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

#include "minifp/csv.h"

#include <fstream>
#include <iterator>

#include "minifp/error.h"

namespace minifp {

std::optional<std::size_t> CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) {
      return i;
    }
  }
  return std::nullopt;
}

CsvTable parseCsv(const std::string& text, const std::string& origin) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string>              record;
  std::string                           field;
  bool                                  quoted   = false;
  bool                                  anyField = false;
  std::size_t                           line     = 1;
  auto endRecord = [&] {
    record.push_back(field);
    field.clear();
    if (!(record.size() == 1 && record[0].empty() && !anyField)) {
      records.push_back(std::move(record));
    }
    record.clear();
    anyField = false;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        line += c == '\n' ? 1 : 0;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        quoted   = true;
        anyField = true;
        break;
      case ',':
        record.push_back(field);
        field.clear();
        anyField = true;
        break;
      case '\r': break;
      case '\n':
        endRecord();
        ++line;
        break;
      default:
        field.push_back(c);
        anyField = true;
    }
  }
  if (quoted) {
    throw Error(ErrorCode::InvalidManifest, origin + ": unterminated quote near line " + std::to_string(line));
  }
  if (anyField || !field.empty()) {
    endRecord();
  }
  CsvTable table;
  if (records.empty()) {
    throw Error(ErrorCode::InvalidManifest, origin + ": missing header row");
  }
  table.header = std::move(records.front());
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != table.header.size()) {
      throw Error(ErrorCode::InvalidManifest, origin + ": row " + std::to_string(r) + " has " +
                                                  std::to_string(records[r].size()) + " fields, header has " +
                                                  std::to_string(table.header.size()));
    }
    table.rows.push_back(std::move(records[r]));
  }
  return table;
}

CsvTable readCsv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::Io, "cannot open " + path);
  }
  return parseCsv(std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>()), path);
}

std::string csvField(const std::string& value) {
  if (value.find_first_of(",\"\n\r") == std::string::npos) {
    return value;
  }
  std::string out = "\"";
  for (const char c : value) {
    out += c == '"' ? "\"\"" : std::string(1, c);
  }
  return out + "\"";
}

}  // namespace minifp
