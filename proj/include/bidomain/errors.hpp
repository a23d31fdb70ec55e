#pragma once

#include <stdexcept>
#include <string>

namespace bidomain {

enum class ErrorKind {
  Parse,
  Geometry,
  Validation,
  SingularPoint,
  QuadratureFailure,
  EmptySupport,
  PointOnBoundary,
  SolveFailure,
  IncompatibleData,
  AllAlphaFailed,
  DegenerateLCurve,
  SupportTouchesBoundary,
  MissingInteriorData,
  Resolvability,
  OutOfGeometry,
  ShapeMismatch,
};

const char* to_string(ErrorKind kind);

// Every library failure is a bidomain::Error carrying a kind, so callers can
// branch on the category without a zoo of catch clauses.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  // Validation-type errors map to CLI exit code 2, numerical ones to 3.
  bool is_validation() const noexcept;

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Parse: return "ParseError";
    case ErrorKind::Geometry: return "GeometryError";
    case ErrorKind::Validation: return "ValidationError";
    case ErrorKind::SingularPoint: return "SingularPoint";
    case ErrorKind::QuadratureFailure: return "QuadratureFailure";
    case ErrorKind::EmptySupport: return "EmptySupport";
    case ErrorKind::PointOnBoundary: return "PointOnBoundary";
    case ErrorKind::SolveFailure: return "SolveFailure";
    case ErrorKind::IncompatibleData: return "IncompatibleData";
    case ErrorKind::AllAlphaFailed: return "AllAlphaFailed";
    case ErrorKind::DegenerateLCurve: return "DegenerateLCurve";
    case ErrorKind::SupportTouchesBoundary: return "SupportTouchesBoundary";
    case ErrorKind::MissingInteriorData: return "MissingInteriorData";
    case ErrorKind::Resolvability: return "ResolvabilityError";
    case ErrorKind::OutOfGeometry: return "OutOfGeometry";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
  }
  return "Error";
}

inline bool Error::is_validation() const noexcept {
  switch (kind_) {
    case ErrorKind::Parse:
    case ErrorKind::Geometry:
    case ErrorKind::Validation:
    case ErrorKind::IncompatibleData:
    case ErrorKind::SupportTouchesBoundary:
    case ErrorKind::MissingInteriorData:
    case ErrorKind::Resolvability:
    case ErrorKind::OutOfGeometry:
    case ErrorKind::ShapeMismatch:
    case ErrorKind::PointOnBoundary:
      return true;
    default:
      return false;
  }
}

}  // namespace bidomain
