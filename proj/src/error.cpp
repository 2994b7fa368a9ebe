#include "h2k/error.hpp"

namespace h2k {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::ZeroVariance: return "ZeroVariance";
    case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorKind::NonIdentifiable: return "NonIdentifiable";
    case ErrorKind::RankDeficient: return "RankDeficient";
    case ErrorKind::IllConditioned: return "IllConditioned";
    case ErrorKind::DivisionByZero: return "DivisionByZero";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::NonConvergence: return "NonConvergence";
    case ErrorKind::Infeasible: return "Infeasible";
    case ErrorKind::Config: return "Config";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace h2k
