/*
 * Copyright 2026 The kahm-encoder Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *
 */

#include "kahm/common.hpp"

namespace kahm {

std::string_view error_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kDegenerateData: return "DegenerateData";
    case ErrorCode::kSingularCovariance: return "SingularCovariance";
    case ErrorCode::kZeroData: return "ZeroData";
    case ErrorCode::kNoConvergence: return "NoConvergence";
    case ErrorCode::kUnstableDenominator: return "UnstableDenominator";
    case ErrorCode::kTooFewSamples: return "TooFewSamples";
    case ErrorCode::kNoNeighbor: return "NoNeighbor";
    case ErrorCode::kEmptyRegistry: return "EmptyRegistry";
    case ErrorCode::kZeroRow: return "ZeroRow";
    case ErrorCode::kDuplicateId: return "DuplicateId";
    case ErrorCode::kEmptyQuery: return "EmptyQuery";
    case ErrorCode::kCutoffTooLarge: return "CutoffTooLarge";
    case ErrorCode::kMissingPrior: return "MissingPrior";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kMalformedManifest: return "MalformedManifest";
    case ErrorCode::kSizeMismatch: return "SizeMismatch";
    case ErrorCode::kNonFiniteValue: return "NonFiniteValue";
    case ErrorCode::kBadMagic: return "BadMagic";
    case ErrorCode::kVersionUnsupported: return "VersionUnsupported";
    case ErrorCode::kCorruptSection: return "CorruptSection";
    case ErrorCode::kIoFailure: return "IoFailure";
    case ErrorCode::kIdMismatch: return "IdMismatch";
  }
  return "Unknown";
}

int error_exit_class(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kCutoffTooLarge:
    case ErrorCode::kEmptyInput:
    case ErrorCode::kEmptyRegistry:
    case ErrorCode::kEmptyQuery:
      return 2;
    case ErrorCode::kDegenerateData:
    case ErrorCode::kSingularCovariance:
    case ErrorCode::kZeroData:
    case ErrorCode::kNoConvergence:
    case ErrorCode::kUnstableDenominator:
      return 4;
    default:
      return 3;
  }
}

void fail(ErrorCode code, const std::string& message) {
  throw Error(code, std::string(error_name(code)) + ": " + message);
}

bool all_finite(const Matrix& m) noexcept { return m.allFinite(); }

}  // namespace kahm
