// Copyright 2026 The popcast Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace popcast {

enum class ErrorCode {
  // ingest
  MissingColumn,
  DuplicateVideoId,
  MalformedRow,
  BadHeader,
  DimMismatch,
  NonFiniteValue,
  ManifestMissingSource,
  CoverageBelowThreshold,
  // features
  AllMissing,
  DegenerateRange,
  DomainError,
  // gbdt
  EmptyData,
  NonFiniteTarget,
  UnknownFeature,
  TooFewRows,
  EmptySpace,
  // fusion
  BadHeadShape,
  DuplicateSource,
  ShapeMismatch,
  MissingSourceInBatch,
  DivergedLoss,
  // evaluate
  LengthMismatch,
  RowIdMismatch,
  MissingTarget,
  // ablate
  BadLabel,
  MissingSource,
  // general
  InvalidArgument,
  Io,
  BadModelFile,
  MissingArtifact,
};

/// Broad failure class; drives CLI exit codes (2 input, 3 state, 4 numeric).
enum class ErrorCategory { Input, State, Numeric };

std::string_view to_string(ErrorCode code);
ErrorCategory category(ErrorCode code);
int exit_code(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace popcast
