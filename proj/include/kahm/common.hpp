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

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace kahm {

// Row-major storage matches the on-disk payload layout.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

enum class ErrorCode : int {
  kInvalidArgument = 1,
  // geometry
  kDegenerateData,
  kSingularCovariance,
  kZeroData,
  kNoConvergence,
  kUnstableDenominator,
  // clustering / training
  kTooFewSamples,
  kNoNeighbor,
  // gateway / index
  kEmptyRegistry,
  kZeroRow,
  kDuplicateId,
  kEmptyQuery,
  // evaluation
  kCutoffTooLarge,
  kMissingPrior,
  kEmptyInput,
  // io
  kMalformedManifest,
  kSizeMismatch,
  kNonFiniteValue,
  kBadMagic,
  kVersionUnsupported,
  kCorruptSection,
  kIoFailure,
  kIdMismatch,
};

std::string_view error_name(ErrorCode code) noexcept;

// Process exit code class: 2 validation, 3 data, 4 numerical.
int error_exit_class(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

bool all_finite(const Matrix& m) noexcept;

}  // namespace kahm
