#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hiertraj {

enum class ErrorCode {
  // geometry
  InvalidDepth,
  OutOfImage,
  DimensionMismatch,
  DegenerateCloud,
  InvalidArgument,
  // world
  UnknownTask,
  PlacementExhausted,
  SceneFormat,
  // perception
  EmptyMask,
  InsufficientSpread,
  ObjectNotVisible,
  BackendFailure,
  // planner
  AllPointsInvalid,
  MissingTarget,
  FrameRequired,
  BudgetExceeded,
  // knowledge
  DuplicateId,
  BankFormat,
  // grasp
  EmptyCloud,
  NoCandidates,
  // protocol
  IllegalDelimiter,
  MissingAnsBlock,
  MalformedTuple,
  RangeViolation,
  DuplicateLabel,
  UnknownAction,
  TokenAlternation,
  EmptyPlan,
  Timeout,
  BackendUnavailable,
  // datagen
  SchemaVersionMismatch,
  CorruptFrame,
  DegenerateX,
  Io,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries a code so callers can branch on
// the failure kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace hiertraj
