#pragma once

#include <stdexcept>
#include <string>

namespace dho {

enum class ErrorCode {
  InvalidParams,
  Overdamped,
  ConstraintInfeasible,
  QuadratureUnderResolved,
  TruncationLeak,
  ToleranceUnachievable,
  SeriesDivergence,
  ContourUnderResolved,
};

const char* to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so the
/// CLI can map it to an exit status without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Raised by the ODE route when probability reaches the top of the retained
/// Fock window. `suggested_nmax` is the next truncation worth trying.
class TruncationLeakError : public Error {
 public:
  TruncationLeakError(const std::string& what, int suggested_nmax)
      : Error(ErrorCode::TruncationLeak, what), suggested_nmax_(suggested_nmax) {}

  int suggested_nmax() const noexcept { return suggested_nmax_; }

 private:
  int suggested_nmax_;
};

}  // namespace dho
