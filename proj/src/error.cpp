#include "hiertraj/error.hpp"

namespace hiertraj {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidDepth: return "InvalidDepth";
    case ErrorCode::OutOfImage: return "OutOfImage";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::DegenerateCloud: return "DegenerateCloud";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::UnknownTask: return "UnknownTask";
    case ErrorCode::PlacementExhausted: return "PlacementExhausted";
    case ErrorCode::SceneFormat: return "SceneFormat";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::InsufficientSpread: return "InsufficientSpread";
    case ErrorCode::ObjectNotVisible: return "ObjectNotVisible";
    case ErrorCode::BackendFailure: return "BackendFailure";
    case ErrorCode::AllPointsInvalid: return "AllPointsInvalid";
    case ErrorCode::MissingTarget: return "MissingTarget";
    case ErrorCode::FrameRequired: return "FrameRequired";
    case ErrorCode::BudgetExceeded: return "BudgetExceeded";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::BankFormat: return "BankFormat";
    case ErrorCode::EmptyCloud: return "EmptyCloud";
    case ErrorCode::NoCandidates: return "NoCandidates";
    case ErrorCode::IllegalDelimiter: return "IllegalDelimiter";
    case ErrorCode::MissingAnsBlock: return "MissingAnsBlock";
    case ErrorCode::MalformedTuple: return "MalformedTuple";
    case ErrorCode::RangeViolation: return "RangeViolation";
    case ErrorCode::DuplicateLabel: return "DuplicateLabel";
    case ErrorCode::UnknownAction: return "UnknownAction";
    case ErrorCode::TokenAlternation: return "TokenAlternation";
    case ErrorCode::EmptyPlan: return "EmptyPlan";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::SchemaVersionMismatch: return "SchemaVersionMismatch";
    case ErrorCode::CorruptFrame: return "CorruptFrame";
    case ErrorCode::DegenerateX: return "DegenerateX";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace hiertraj
