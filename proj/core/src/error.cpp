// Copyright 2026 The popcast Authors
// SPDX-License-Identifier: Apache-2.0

#include "popcast/error.hpp"

namespace popcast {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::DuplicateVideoId: return "DuplicateVideoId";
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::BadHeader: return "BadHeader";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::ManifestMissingSource: return "ManifestMissingSource";
    case ErrorCode::CoverageBelowThreshold: return "CoverageBelowThreshold";
    case ErrorCode::AllMissing: return "AllMissing";
    case ErrorCode::DegenerateRange: return "DegenerateRange";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::EmptyData: return "EmptyData";
    case ErrorCode::NonFiniteTarget: return "NonFiniteTarget";
    case ErrorCode::UnknownFeature: return "UnknownFeature";
    case ErrorCode::TooFewRows: return "TooFewRows";
    case ErrorCode::EmptySpace: return "EmptySpace";
    case ErrorCode::BadHeadShape: return "BadHeadShape";
    case ErrorCode::DuplicateSource: return "DuplicateSource";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::MissingSourceInBatch: return "MissingSourceInBatch";
    case ErrorCode::DivergedLoss: return "DivergedLoss";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::RowIdMismatch: return "RowIdMismatch";
    case ErrorCode::MissingTarget: return "MissingTarget";
    case ErrorCode::BadLabel: return "BadLabel";
    case ErrorCode::MissingSource: return "MissingSource";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
    case ErrorCode::BadModelFile: return "BadModelFile";
    case ErrorCode::MissingArtifact: return "MissingArtifact";
  }
  return "Unknown";
}

ErrorCategory category(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingArtifact:
      return ErrorCategory::State;
    case ErrorCode::DivergedLoss:
    case ErrorCode::NonFiniteTarget:
    case ErrorCode::DomainError:
      return ErrorCategory::Numeric;
    default:
      return ErrorCategory::Input;
  }
}

int exit_code(ErrorCode code) {
  switch (category(code)) {
    case ErrorCategory::Input: return 2;
    case ErrorCategory::State: return 3;
    case ErrorCategory::Numeric: return 4;
  }
  return 1;
}

}  // namespace popcast
