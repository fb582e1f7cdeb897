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

#ifndef MINIFP_CSV_H
#define MINIFP_CSV_H

#include <optional>
#include <string>
#include <vector>

namespace minifp {

//! Comma-separated table with a header row. Fields may be double-quoted ("" escapes a quote).
struct CsvTable {
  std::vector<std::string>              header;
  std::vector<std::vector<std::string>> rows;

  //! Column position, if present.
  [[nodiscard]] std::optional<std::size_t> column(const std::string& name) const;
};

//! Throws InvalidManifest on ragged rows or unterminated quotes.
CsvTable    parseCsv(const std::string& text, const std::string& origin = "csv");
//! Throws Io when the file cannot be read.
CsvTable    readCsv(const std::string& path);
//! Quotes the field when it contains a comma, quote or line break.
std::string csvField(const std::string& value);

}  // namespace minifp

#endif  // MINIFP_CSV_H
