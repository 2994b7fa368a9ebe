#pragma once

#include <stdexcept>
#include <string>

namespace h2k {

enum class ErrorKind {
  InvalidArgument,
  DimensionMismatch,
  ZeroVariance,
  NotPositiveDefinite,
  NonIdentifiable,
  RankDeficient,
  IllConditioned,
  DivisionByZero,
  NonFinite,
  NonConvergence,
  Infeasible,
  Config,
  Io,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace h2k
