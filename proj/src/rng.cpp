#include "h2k/rng.hpp"

namespace h2k {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

namespace {

std::uint64_t hash_tag(std::string_view tag) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t replicate, std::uint64_t key) {
  const std::uint64_t a = splitmix64(seed ^ splitmix64(replicate + 0x5bd1e995ULL));
  const std::uint64_t b = splitmix64(a ^ key);
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t replicate)
    : RngStream(seed, replicate, 0) {}

RngStream::RngStream(std::uint64_t seed, std::uint64_t replicate, std::uint64_t key)
    : seed_(seed), replicate_(replicate), key_(key), engine_(make_engine(seed, replicate, key)) {}

RngStream RngStream::substream(std::string_view tag) const {
  return RngStream(seed_, replicate_, splitmix64(key_ ^ hash_tag(tag)));
}

double RngStream::uniform(double lo, double hi) {
  if (lo == hi) return lo;
  return std::uniform_real_distribution<double>(lo, hi)(engine_);
}

double RngStream::normal() { return normal_(engine_); }

Vector RngStream::normal_vector(Index n) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = normal_(engine_);
  return v;
}

Matrix RngStream::normal_matrix(Index rows, Index cols) {
  // Row-major fill so that row i depends only on the draws before it.
  Matrix x(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) x(i, j) = normal_(engine_);
  return x;
}

}  // namespace h2k
