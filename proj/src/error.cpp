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

#include "minifp/error.h"

namespace minifp {

std::string_view errorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyInput:         return "EmptyInput";
    case ErrorCode::UnbalancedBranch:   return "UnbalancedBranch";
    case ErrorCode::UnclosedRing:       return "UnclosedRing";
    case ErrorCode::UnknownAtom:        return "UnknownAtom";
    case ErrorCode::InvalidSmiles:      return "InvalidSmiles";
    case ErrorCode::EigenFailure:       return "EigenFailure";
    case ErrorCode::ShapeMismatch:      return "ShapeMismatch";
    case ErrorCode::DisconnectedGraph:  return "DisconnectedGraph";
    case ErrorCode::ClassOutOfRange:    return "ClassOutOfRange";
    case ErrorCode::InvalidConfig:      return "InvalidConfig";
    case ErrorCode::TooFewMolecules:    return "TooFewMolecules";
    case ErrorCode::NumericFailure:     return "NumericFailure";
    case ErrorCode::EmptyGraph:         return "EmptyGraph";
    case ErrorCode::CorruptHeader:      return "CorruptHeader";
    case ErrorCode::DimensionMismatch:  return "DimensionMismatch";
    case ErrorCode::MissingFingerprint: return "MissingFingerprint";
    case ErrorCode::FoldTooSmall:       return "FoldTooSmall";
    case ErrorCode::SingleClass:        return "SingleClass";
    case ErrorCode::ZeroVariance:       return "ZeroVariance";
    case ErrorCode::InvalidManifest:    return "InvalidManifest";
    case ErrorCode::Io:                 return "Io";
  }
  return "Unknown";
}

}  // namespace minifp
