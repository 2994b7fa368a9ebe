#include "h2k/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include <fmt/core.h>

namespace h2k {

namespace {

std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

// ---------------------------------------------------------------- MafVector

MafVector::MafVector(Vector p) : p_(std::move(p)) {
  for (Index j = 0; j < p_.size(); ++j) {
    const double v = p_[j];
    if (!(v > 0.0 && v <= 0.5)) {
      throw Error(ErrorKind::InvalidArgument,
                  fmt::format("MAF at index {} is {}; must lie in (0, 0.5]", j, v));
    }
  }
}

double MafVector::max_adjacent_gap() const {
  double gap = 0.0;
  for (Index j = 0; j + 1 < p_.size(); ++j) gap = std::max(gap, std::abs(p_[j] - p_[j + 1]));
  return gap;
}

// ----------------------------------------------------------------- LDMatrix

namespace {
std::vector<Matrix> one_block(Matrix m) {
  std::vector<Matrix> v;
  v.push_back(std::move(m));
  return v;
}
}  // namespace

LDMatrix::LDMatrix(Matrix dense) : LDMatrix(one_block(std::move(dense))) {}

LDMatrix::LDMatrix(std::vector<Matrix> blocks) {
  if (blocks.empty()) throw Error(ErrorKind::InvalidArgument, "LD matrix has no blocks");
  Index offset = 0;
  for (auto& b : blocks) {
    if (b.rows() == 0 || b.rows() != b.cols()) {
      throw Error(ErrorKind::DimensionMismatch, "LD block must be square and nonempty");
    }
    if (!b.allFinite()) throw Error(ErrorKind::NonFinite, "LD block has non-finite entries");
    const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
    const double asym = (b - b.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-12 * scale) {
      throw Error(ErrorKind::InvalidArgument,
                  fmt::format("LD block is not symmetric (max asymmetry {:.3g})", asym));
    }
    Block blk;
    blk.offset = offset;
    blk.sigma = 0.5 * (b + b.transpose());
    offset += b.rows();
    blocks_.push_back(std::move(blk));
  }
  size_ = offset;
  factorize();
}

void LDMatrix::factorize() {
  min_eigenvalue_ = std::numeric_limits<double>::infinity();
  max_eigenvalue_ = -std::numeric_limits<double>::infinity();
  std::vector<Eigen::SelfAdjointEigenSolver<Matrix>> solvers;
  solvers.reserve(blocks_.size());
  for (const auto& b : blocks_) {
    solvers.emplace_back(b.sigma);
    const Vector& ev = solvers.back().eigenvalues();
    min_eigenvalue_ = std::min(min_eigenvalue_, ev.minCoeff());
    max_eigenvalue_ = std::max(max_eigenvalue_, ev.maxCoeff());
  }
  if (!(max_eigenvalue_ > 0.0) || min_eigenvalue_ < kEigenvalueFloor * max_eigenvalue_) {
    throw Error(ErrorKind::NotPositiveDefinite,
                fmt::format("LD matrix eigenvalues span [{:.3g}, {:.3g}]; smallest must exceed "
                            "{:.0e} x largest",
                            min_eigenvalue_, max_eigenvalue_, kEigenvalueFloor));
  }
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    auto& b = blocks_[i];
    const Matrix& v = solvers[i].eigenvectors();
    b.eigenvalues = solvers[i].eigenvalues();
    const Vector s = b.eigenvalues.array().sqrt();
    b.sqrt = v * s.asDiagonal() * v.transpose();
    b.inv_sqrt = v * s.cwiseInverse().asDiagonal() * v.transpose();
    b.inverse = v * b.eigenvalues.cwiseInverse().asDiagonal() * v.transpose();
    // Exact symmetry of the cached factors.
    b.sqrt = 0.5 * (b.sqrt + b.sqrt.transpose()).eval();
    b.inv_sqrt = 0.5 * (b.inv_sqrt + b.inv_sqrt.transpose()).eval();
    b.inverse = 0.5 * (b.inverse + b.inverse.transpose()).eval();
  }
}

double LDMatrix::operator()(Index i, Index j) const {
  for (const auto& b : blocks_) {
    const Index end = b.offset + b.sigma.rows();
    if (i >= b.offset && i < end) {
      return (j >= b.offset && j < end) ? b.sigma(i - b.offset, j - b.offset) : 0.0;
    }
  }
  throw Error(ErrorKind::InvalidArgument, fmt::format("LD index ({}, {}) out of range", i, j));
}

namespace {

template <typename Get>
Matrix assemble(const std::vector<LDMatrix::Block>& blocks, Index m, Get get) {
  Matrix out = Matrix::Zero(m, m);
  for (const auto& b : blocks) {
    const Index s = b.sigma.rows();
    out.block(b.offset, b.offset, s, s) = get(b);
  }
  return out;
}

}  // namespace

Matrix LDMatrix::dense() const {
  return assemble(blocks_, size_, [](const Block& b) -> const Matrix& { return b.sigma; });
}
Matrix LDMatrix::dense_sqrt() const {
  return assemble(blocks_, size_, [](const Block& b) -> const Matrix& { return b.sqrt; });
}
Matrix LDMatrix::dense_inv_sqrt() const {
  return assemble(blocks_, size_, [](const Block& b) -> const Matrix& { return b.inv_sqrt; });
}
Matrix LDMatrix::dense_inverse() const {
  return assemble(blocks_, size_, [](const Block& b) -> const Matrix& { return b.inverse; });
}

Matrix LDMatrix::submatrix(std::span<const Index> rows, std::span<const Index> cols) const {
  // Map each index to (block, local) once.
  std::vector<std::pair<std::size_t, Index>> where(static_cast<std::size_t>(size_));
  for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
    const auto& b = blocks_[bi];
    for (Index l = 0; l < b.sigma.rows(); ++l) where[static_cast<std::size_t>(b.offset + l)] = {bi, l};
  }
  auto locate = [&](Index i) {
    if (i < 0 || i >= size_) throw Error(ErrorKind::InvalidArgument, "LD index out of range");
    return where[static_cast<std::size_t>(i)];
  };
  Matrix out = Matrix::Zero(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto [br, lr] = locate(rows[r]);
    for (std::size_t c = 0; c < cols.size(); ++c) {
      const auto [bc, lc] = locate(cols[c]);
      if (br == bc) out(static_cast<Index>(r), static_cast<Index>(c)) = blocks_[br].sigma(lr, lc);
    }
  }
  return out;
}

LDMatrix LDMatrix::restrict_to(std::span<const Index> subset) const {
  validate_index_set(subset, size_, "LD restriction");
  std::vector<Matrix> parts;
  std::size_t pos = 0;
  for (const auto& b : blocks_) {
    const Index end = b.offset + b.sigma.rows();
    std::vector<Index> local;
    while (pos < subset.size() && subset[pos] < end) {
      local.push_back(subset[pos] - b.offset);
      ++pos;
    }
    if (local.empty()) continue;
    const auto k = static_cast<Index>(local.size());
    Matrix part(k, k);
    for (Index r = 0; r < k; ++r)
      for (Index c = 0; c < k; ++c) part(r, c) = b.sigma(local[r], local[c]);
    parts.push_back(std::move(part));
  }
  return LDMatrix(std::move(parts));
}

Matrix LDMatrix::apply_right(const Matrix& x, Factor f) const {
  if (x.cols() != size_) {
    throw Error(ErrorKind::DimensionMismatch,
                fmt::format("matrix has {} columns, LD matrix is {} x {}", x.cols(), size_, size_));
  }
  Matrix out(x.rows(), x.cols());
  for (const auto& b : blocks_) {
    const Index s = b.sigma.rows();
    const Matrix* factor = nullptr;
    switch (f) {
      case Factor::Sigma: factor = &b.sigma; break;
      case Factor::Sqrt: factor = &b.sqrt; break;
      case Factor::InvSqrt: factor = &b.inv_sqrt; break;
      case Factor::Inverse: factor = &b.inverse; break;
    }
    out.middleCols(b.offset, s).noalias() = x.middleCols(b.offset, s) * (*factor);
  }
  return out;
}

Matrix LDMatrix::right_multiply(const Matrix& x) const { return apply_right(x, Factor::Sigma); }
Matrix LDMatrix::right_multiply_sqrt(const Matrix& x) const { return apply_right(x, Factor::Sqrt); }
Matrix LDMatrix::right_multiply_inv_sqrt(const Matrix& x) const {
  return apply_right(x, Factor::InvSqrt);
}
Matrix LDMatrix::right_multiply_inverse(const Matrix& x) const {
  return apply_right(x, Factor::Inverse);
}

Vector LDMatrix::multiply(const Vector& v) const {
  if (v.size() != size_) throw Error(ErrorKind::DimensionMismatch, "vector length != LD size");
  Vector out(size_);
  for (const auto& b : blocks_) {
    const Index s = b.sigma.rows();
    out.segment(b.offset, s).noalias() = b.sigma * v.segment(b.offset, s);
  }
  return out;
}

double LDMatrix::quadratic_form(const Vector& u) const { return u.dot(multiply(u)); }

std::uint64_t LDMatrix::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& b : blocks_) {
    const std::int64_t dims[2] = {b.offset, b.sigma.rows()};
    h = fnv1a(dims, sizeof(dims), h);
    h = fnv1a(b.sigma.data(), sizeof(double) * static_cast<std::size_t>(b.sigma.size()), h);
  }
  return h;
}

// --------------------------------------------------------- genotype types

RawGenotypeMatrix::RawGenotypeMatrix(CountMatrix counts, MafVector mafs)
    : f_(std::move(counts)), mafs_(std::move(mafs)) {
  if (f_.cols() != mafs_.size()) {
    throw Error(ErrorKind::DimensionMismatch,
                fmt::format("{} genotype columns but {} MAFs", f_.cols(), mafs_.size()));
  }
  if (f_.size() > 0 && f_.maxCoeff() > 2) {
    throw Error(ErrorKind::InvalidArgument, "allele counts must be 0, 1 or 2");
  }
}

GenotypeMatrix::GenotypeMatrix(Matrix z) : z_(std::move(z)) {
  if (!z_.allFinite()) throw Error(ErrorKind::NonFinite, "genotype matrix has non-finite entries");
}

GenotypeMatrix standardize(const CountMatrix& counts, const MafVector& mafs) {
  if (counts.cols() != mafs.size()) {
    throw Error(ErrorKind::DimensionMismatch,
                fmt::format("{} genotype columns but {} MAFs", counts.cols(), mafs.size()));
  }
  Matrix z(counts.rows(), counts.cols());
  for (Index j = 0; j < counts.cols(); ++j) {
    const double p = mafs[j];
    const double centre = 2.0 * p;
    const double scale = std::sqrt(2.0 * p * (1.0 - p));
    for (Index i = 0; i < counts.rows(); ++i) {
      z(i, j) = (static_cast<double>(counts(i, j)) - centre) / scale;
    }
  }
  return GenotypeMatrix(std::move(z));
}

GenotypeMatrix standardize(const RawGenotypeMatrix& raw) {
  return standardize(raw.counts(), raw.mafs());
}

GenotypeMatrix standardize_empirical(const CountMatrix& counts) {
  if (counts.rows() == 0) throw Error(ErrorKind::InvalidArgument, "no individuals");
  Matrix z(counts.rows(), counts.cols());
  for (Index j = 0; j < counts.cols(); ++j) {
    const Vector f = counts.col(j).cast<double>();
    const double q = f.sum() / (2.0 * static_cast<double>(counts.rows()));
    if (q <= 0.0 || q >= 1.0) {
      throw Error(ErrorKind::ZeroVariance, fmt::format("SNP {} is monomorphic in the sample", j));
    }
    z.col(j) = (f.array() - 2.0 * q) / std::sqrt(2.0 * q * (1.0 - q));
  }
  return GenotypeMatrix(std::move(z));
}

MafVector estimate_mafs(const CountMatrix& counts) {
  if (counts.rows() == 0) throw Error(ErrorKind::InvalidArgument, "no individuals");
  Vector p(counts.cols());
  for (Index j = 0; j < counts.cols(); ++j) {
    const double freq = counts.col(j).cast<double>().sum() / (2.0 * static_cast<double>(counts.rows()));
    p[j] = std::min(freq, 1.0 - freq);
    if (p[j] <= 0.0) {
      throw Error(ErrorKind::ZeroVariance, fmt::format("SNP {} is monomorphic in the sample", j));
    }
  }
  return MafVector(std::move(p));
}

// ------------------------------------------------------------ EffectVector

EffectVector::EffectVector(Vector u, IndexSet causal, Vector psi)
    : u_(std::move(u)), causal_(std::move(causal)), psi_(std::move(psi)) {
  if (psi_.size() != u_.size()) throw Error(ErrorKind::DimensionMismatch, "psi length != u length");
  validate_index_set(causal_, u_.size(), "causal set");
  std::vector<bool> in(static_cast<std::size_t>(u_.size()), false);
  for (Index j : causal_) in[static_cast<std::size_t>(j)] = true;
  for (Index j = 0; j < u_.size(); ++j) {
    if (!in[static_cast<std::size_t>(j)] && (u_[j] != 0.0 || psi_[j] != 0.0)) {
      throw Error(ErrorKind::InvalidArgument,
                  fmt::format("effect at non-causal index {} is nonzero", j));
    }
  }
}

EffectVector EffectVector::zero(Index m) { return EffectVector(Vector::Zero(m), {}, Vector::Zero(m)); }

EffectVector EffectVector::combined_with(const EffectVector& other) const {
  if (other.size() != size()) throw Error(ErrorKind::DimensionMismatch, "effect vectors differ in length");
  IndexSet merged;
  std::set_union(causal_.begin(), causal_.end(), other.causal_.begin(), other.causal_.end(),
                 std::back_inserter(merged));
  if (merged.size() != causal_.size() + other.causal_.size()) {
    throw Error(ErrorKind::InvalidArgument, "causal sets overlap");
  }
  return EffectVector(u_ + other.u_, std::move(merged), psi_ + other.psi_);
}

// --------------------------------------------------------------- phenotype

PhenotypeVector center(const Vector& raw) {
  if (raw.size() < 2) throw Error(ErrorKind::InvalidArgument, "phenotype needs at least 2 entries");
  if (!raw.allFinite()) throw Error(ErrorKind::NonFinite, "phenotype has non-finite entries");
  const double mean = raw.mean();
  Vector y = raw.array() - mean;
  const double scale = raw.cwiseAbs().maxCoeff();
  if (y.cwiseAbs().maxCoeff() <= 1e-14 * std::max(scale, 1e-300)) {
    throw Error(ErrorKind::ZeroVariance, "phenotype is constant");
  }
  return PhenotypeVector(std::move(y));
}

// ------------------------------------------------------------ KernelMatrix

const char* to_string(KernelKind kind) {
  switch (kind) {
    case KernelKind::Euclidean: return "euclidean";
    case KernelKind::Mahalanobis: return "mahalanobis";
    case KernelKind::Custom: return "custom";
  }
  return "unknown";
}

KernelMatrix::KernelMatrix(Matrix k, KernelKind kind, double divisor)
    : k_(std::move(k)), kind_(kind), divisor_(divisor) {
  if (k_.rows() != k_.cols()) throw Error(ErrorKind::DimensionMismatch, "kernel must be square");
  if (!k_.allFinite()) throw Error(ErrorKind::NonFinite, "kernel has non-finite entries");
  const double scale = std::max(1.0, k_.cwiseAbs().maxCoeff());
  if ((k_ - k_.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw Error(ErrorKind::InvalidArgument, "kernel is not symmetric");
  }
}

// ---------------------------------------------------------- ProjectionSpec

ProjectionSpec ProjectionSpec::identity(Index m) {
  if (m < 1) throw Error(ErrorKind::InvalidArgument, "identity projection needs m >= 1");
  return ProjectionSpec(Identity{m});
}

ProjectionSpec ProjectionSpec::subset(IndexSet s, Index m) {
  if (s.empty()) throw Error(ErrorKind::InvalidArgument, "subset projection needs a nonempty set");
  validate_index_set(s, m, "subset projection");
  return ProjectionSpec(Subset{std::move(s), m});
}

ProjectionSpec ProjectionSpec::general(Matrix c) {
  if (c.rows() == 0 || c.cols() == 0 || c.cols() > c.rows()) {
    throw Error(ErrorKind::DimensionMismatch, "projection must be m x k with 1 <= k <= m");
  }
  Eigen::JacobiSVD<Matrix> svd(c);
  const Vector& sv = svd.singularValues();
  if (!(sv[sv.size() - 1] > 1e-10 * sv[0])) {
    throw Error(ErrorKind::RankDeficient, "projection matrix is not of full column rank");
  }
  return ProjectionSpec(General{std::move(c)});
}

Index ProjectionSpec::ambient_dim() const {
  return std::visit(
      [](const auto& s) -> Index {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, General>) return s.c.rows();
        else return s.m;
      },
      spec_);
}

Index ProjectionSpec::rank() const {
  return std::visit(
      [](const auto& s) -> Index {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Identity>) return s.m;
        else if constexpr (std::is_same_v<T, Subset>) return static_cast<Index>(s.indices.size());
        else return s.c.cols();
      },
      spec_);
}

Matrix ProjectionSpec::matrix() const {
  return std::visit(
      [](const auto& s) -> Matrix {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Identity>) {
          return Matrix::Identity(s.m, s.m);
        } else if constexpr (std::is_same_v<T, Subset>) {
          Matrix c = Matrix::Zero(s.m, static_cast<Index>(s.indices.size()));
          for (std::size_t t = 0; t < s.indices.size(); ++t) c(s.indices[t], static_cast<Index>(t)) = 1.0;
          return c;
        } else {
          return s.c;
        }
      },
      spec_);
}

// ---------------------------------------------------- HeritabilityEstimate

HeritabilityEstimate HeritabilityEstimate::from_eta2(std::string method, double eta2, double sigma2) {
  HeritabilityEstimate e;
  e.method = std::move(method);
  e.eta2_hat = eta2;
  e.h2_hat = eta2 / (1.0 + eta2);
  e.sigma2_hat = sigma2;
  return e;
}

// ------------------------------------------------------------- index sets

void validate_index_set(std::span<const Index> s, Index m, const char* what) {
  for (std::size_t t = 0; t < s.size(); ++t) {
    if (s[t] < 0 || s[t] >= m) {
      throw Error(ErrorKind::InvalidArgument,
                  fmt::format("{}: index {} outside [0, {})", what, s[t], m));
    }
    if (t > 0 && s[t] <= s[t - 1]) {
      throw Error(ErrorKind::InvalidArgument,
                  fmt::format("{}: indices must be sorted and duplicate-free (at {})", what, s[t]));
    }
  }
}

IndexSet complement(std::span<const Index> s, Index m) {
  validate_index_set(s, m, "complement");
  IndexSet out;
  out.reserve(static_cast<std::size_t>(m) - s.size());
  std::size_t pos = 0;
  for (Index j = 0; j < m; ++j) {
    if (pos < s.size() && s[pos] == j) {
      ++pos;
      continue;
    }
    out.push_back(j);
  }
  return out;
}

}  // namespace h2k
