#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "h2k/core_model.hpp"

namespace h2k {

/// Deterministic random stream identified by (seed, replicate). Named
/// sub-streams are derived by hashing, so consumers that draw different
/// quantities never share state and replicates can run in any order.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t replicate = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t replicate() const { return replicate_; }

  /// Independent child stream for a named purpose ("genotypes", "noise", ...).
  RngStream substream(std::string_view tag) const;

  std::mt19937_64& engine() { return engine_; }

  double uniform(double lo, double hi);
  double normal();
  Vector normal_vector(Index n);
  Matrix normal_matrix(Index rows, Index cols);

 private:
  RngStream(std::uint64_t seed, std::uint64_t replicate, std::uint64_t key);

  std::uint64_t seed_;
  std::uint64_t replicate_;
  std::uint64_t key_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace h2k
