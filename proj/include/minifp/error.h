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

#ifndef MINIFP_ERROR_H
#define MINIFP_ERROR_H

#include <stdexcept>
#include <string>
#include <string_view>

namespace minifp {

enum class ErrorCode {
  EmptyInput,
  UnbalancedBranch,
  UnclosedRing,
  UnknownAtom,
  InvalidSmiles,
  EigenFailure,
  ShapeMismatch,
  DisconnectedGraph,
  ClassOutOfRange,
  InvalidConfig,
  TooFewMolecules,
  NumericFailure,
  EmptyGraph,
  CorruptHeader,
  DimensionMismatch,
  MissingFingerprint,
  FoldTooSmall,
  SingleClass,
  ZeroVariance,
  InvalidManifest,
  Io,
};

std::string_view errorCodeName(ErrorCode code);

//! Single exception type for the library; the code identifies the failure class.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(errorCodeName(code)) + ": " + message), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace minifp

#endif  // MINIFP_ERROR_H
