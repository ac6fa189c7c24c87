// Copyright 2026 ERN Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace ern {

enum class ErrorCode {
  // audio / io
  NotFound,
  UnsupportedEncoding,
  CorruptHeader,
  EmptyInput,
  // dsp
  SegmentTooShort,
  TooManyCoefficients,
  // neural
  ShapeMismatch,
  NonFiniteActivation,
  EmptyDataset,
  DivergedLoss,
  DegenerateTensor,
  // weight files
  BadMagic,
  VersionMismatch,
  ChecksumMismatch,
  // config documents
  SchemaError,
  UnknownMode,
  DuplicateRule,
  DuplicateRuleId,
  BoundOutOfRange,
  UnknownParameterField,
  UnknownTemplate,
  ConfigError,
  // agents
  NoViolations,
  LengthMismatch,
  // cli / preconditions
  UsageError,
};

inline const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::UnsupportedEncoding: return "UnsupportedEncoding";
    case ErrorCode::CorruptHeader: return "CorruptHeader";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::SegmentTooShort: return "SegmentTooShort";
    case ErrorCode::TooManyCoefficients: return "TooManyCoefficients";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFiniteActivation: return "NonFiniteActivation";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::DivergedLoss: return "DivergedLoss";
    case ErrorCode::DegenerateTensor: return "DegenerateTensor";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::ChecksumMismatch: return "ChecksumMismatch";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::UnknownMode: return "UnknownMode";
    case ErrorCode::DuplicateRule: return "DuplicateRule";
    case ErrorCode::DuplicateRuleId: return "DuplicateRuleId";
    case ErrorCode::BoundOutOfRange: return "BoundOutOfRange";
    case ErrorCode::UnknownParameterField: return "UnknownParameterField";
    case ErrorCode::UnknownTemplate: return "UnknownTemplate";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::NoViolations: return "NoViolations";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::UsageError: return "UsageError";
  }
  return "Unknown";
}

/// True for failures caused by a bad config document or bad invocation
/// (CLI exit code 2); everything else is a runtime/domain error (exit 1).
inline bool is_config_error(ErrorCode c) {
  switch (c) {
    case ErrorCode::SchemaError:
    case ErrorCode::UnknownMode:
    case ErrorCode::DuplicateRule:
    case ErrorCode::DuplicateRuleId:
    case ErrorCode::BoundOutOfRange:
    case ErrorCode::UnknownParameterField:
    case ErrorCode::UnknownTemplate:
    case ErrorCode::ConfigError:
    case ErrorCode::UsageError:
      return true;
    default:
      return false;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + detail),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ern
