#pragma once

#include <stdexcept>
#include <string>

namespace cgcn {

enum class Errc {
  IndexOutOfRange,
  SelfLoop,
  DuplicateEdge,
  DirectedCycle,
  NonFiniteCoordinate,
  ZeroLengthBone,
  NegativeWeight,
  DisconnectedGraph,
  IsolatedNode,
  DimensionMismatch,
  MissingCache,
  KernelLargerThanSequence,
  BatchTooSmall,
  InvalidLabel,
  ShapeMismatch,
  NonFiniteGradient,
  NonFiniteActivation,
  EmptyDataset,
  SchemaViolation,
  UnknownTemplate,
  StreamClassMismatch,
  IoError,
  InvalidConfig,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::IndexOutOfRange: return "IndexOutOfRange";
    case Errc::SelfLoop: return "SelfLoop";
    case Errc::DuplicateEdge: return "DuplicateEdge";
    case Errc::DirectedCycle: return "DirectedCycle";
    case Errc::NonFiniteCoordinate: return "NonFiniteCoordinate";
    case Errc::ZeroLengthBone: return "ZeroLengthBone";
    case Errc::NegativeWeight: return "NegativeWeight";
    case Errc::DisconnectedGraph: return "DisconnectedGraph";
    case Errc::IsolatedNode: return "IsolatedNode";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::MissingCache: return "MissingCache";
    case Errc::KernelLargerThanSequence: return "KernelLargerThanSequence";
    case Errc::BatchTooSmall: return "BatchTooSmall";
    case Errc::InvalidLabel: return "InvalidLabel";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::NonFiniteGradient: return "NonFiniteGradient";
    case Errc::NonFiniteActivation: return "NonFiniteActivation";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::SchemaViolation: return "SchemaViolation";
    case Errc::UnknownTemplate: return "UnknownTemplate";
    case Errc::StreamClassMismatch: return "StreamClassMismatch";
    case Errc::IoError: return "IoError";
    case Errc::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

/// Domain error carrying a machine-checkable code.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool cond, Errc code, const std::string& message) {
  if (!cond) fail(code, message);
}

}  // namespace cgcn
