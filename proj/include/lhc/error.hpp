#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lhc {

enum class ErrorCode {
  DimensionMismatch,
  LabelOutOfRange,
  NonFiniteValue,
  LengthMismatch,
  InvalidHyperparams,
  InstanceTooLarge,
  EmptyDataset,
  MissingLabels,
  QpFailure,
  NumericalInstability,
  DegenerateInput,
  ParseError,
  SchemaVersionUnsupported,
  ValidationError,
  EmptySplit,
  InvalidSpec,
  EmptyInput,
  InsufficientSubjects,
  Io,
};

[[nodiscard]] std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string &message)
      : std::runtime_error(message), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

// Builds "<what>: expected <expected>, got <actual>".
[[nodiscard]] Error dimension_mismatch(std::string_view what, std::size_t expected,
                                       std::size_t actual);

} // namespace lhc
