#pragma once

// Shared domain types for the heritability library. Every type here is
// immutable once constructed; constructors validate and throw h2k::Error.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "h2k/error.hpp"

namespace h2k {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using CountMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;
using IndexSet = std::vector<Index>;

/// Minor-allele frequencies, one per SNP, each in (0, 0.5].
class MafVector {
 public:
  MafVector() = default;
  explicit MafVector(Vector p);

  const Vector& values() const { return p_; }
  Index size() const { return p_.size(); }
  double operator[](Index j) const { return p_[j]; }

  /// Largest |p_j - p_{j+1}| over adjacent SNPs (0 for m < 2).
  double max_adjacent_gap() const;

 private:
  Vector p_;
};

/// Population LD matrix: block-diagonal symmetric positive definite, with
/// symmetric square-root factors computed eagerly per block. A dense matrix
/// is stored as a single block.
class LDMatrix {
 public:
  static constexpr double kEigenvalueFloor = 1e-10;

  struct Block {
    Index offset = 0;
    Matrix sigma;
    Vector eigenvalues;
    Matrix sqrt;
    Matrix inv_sqrt;
    Matrix inverse;
  };

  explicit LDMatrix(Matrix dense);
  explicit LDMatrix(std::vector<Matrix> blocks);

  Index size() const { return size_; }
  const std::vector<Block>& blocks() const { return blocks_; }
  double min_eigenvalue() const { return min_eigenvalue_; }
  double max_eigenvalue() const { return max_eigenvalue_; }

  double operator()(Index i, Index j) const;
  Matrix dense() const;
  Matrix dense_sqrt() const;
  Matrix dense_inv_sqrt() const;
  Matrix dense_inverse() const;

  /// Dense Σ[rows, cols].
  Matrix submatrix(std::span<const Index> rows, std::span<const Index> cols) const;

  /// Principal submatrix Σ[S, S] for sorted, duplicate-free S. Block
  /// structure is kept, so factorizations stay block-local.
  LDMatrix restrict_to(std::span<const Index> subset) const;

  Matrix right_multiply(const Matrix& x) const;           // x Σ
  Matrix right_multiply_sqrt(const Matrix& x) const;      // x Σ^{1/2}
  Matrix right_multiply_inv_sqrt(const Matrix& x) const;  // x Σ^{-1/2}
  Matrix right_multiply_inverse(const Matrix& x) const;   // x Σ^{-1}
  Vector multiply(const Vector& v) const;                 // Σ v
  double quadratic_form(const Vector& u) const;           // u' Σ u

  /// Stable 64-bit hash of the stored entries.
  std::uint64_t fingerprint() const;

 private:
  enum class Factor { Sigma, Sqrt, InvSqrt, Inverse };
  Matrix apply_right(const Matrix& x, Factor f) const;
  void factorize();

  std::vector<Block> blocks_;
  Index size_ = 0;
  double min_eigenvalue_ = 0.0;
  double max_eigenvalue_ = 0.0;
};

/// Allele counts in {0,1,2} together with the frequencies used to standardize.
class RawGenotypeMatrix {
 public:
  RawGenotypeMatrix(CountMatrix counts, MafVector mafs);

  const CountMatrix& counts() const { return f_; }
  const MafVector& mafs() const { return mafs_; }
  Index rows() const { return f_.rows(); }
  Index cols() const { return f_.cols(); }

 private:
  CountMatrix f_;
  MafVector mafs_;
};

class GenotypeMatrix {
 public:
  GenotypeMatrix() = default;
  explicit GenotypeMatrix(Matrix z);

  const Matrix& z() const { return z_; }
  Index rows() const { return z_.rows(); }
  Index cols() const { return z_.cols(); }

 private:
  Matrix z_;
};

/// Fixed genetic effects with the causal set they were drawn on.
class EffectVector {
 public:
  EffectVector() = default;
  EffectVector(Vector u, IndexSet causal, Vector psi);

  static EffectVector zero(Index m);

  const Vector& u() const { return u_; }
  const IndexSet& causal() const { return causal_; }
  const Vector& psi() const { return psi_; }
  Index size() const { return u_.size(); }

  /// Union of two effect vectors with disjoint causal sets.
  EffectVector combined_with(const EffectVector& other) const;

 private:
  Vector u_;
  IndexSet causal_;
  Vector psi_;
};

class PhenotypeVector {
 public:
  PhenotypeVector() = default;
  const Vector& y() const { return y_; }
  Index size() const { return y_.size(); }

 private:
  friend PhenotypeVector center(const Vector& raw);
  explicit PhenotypeVector(Vector y) : y_(std::move(y)) {}
  Vector y_;
};

enum class KernelKind { Euclidean, Mahalanobis, Custom };
const char* to_string(KernelKind kind);

class KernelMatrix {
 public:
  /// `divisor` records the normalization applied (m, |S| or k).
  KernelMatrix(Matrix k, KernelKind kind, double divisor);

  const Matrix& k() const { return k_; }
  KernelKind kind() const { return kind_; }
  double divisor() const { return divisor_; }
  Index size() const { return k_.rows(); }

 private:
  Matrix k_;
  KernelKind kind_;
  double divisor_;
};

/// Projection C applied to the SNP vector: identity, coordinate selection, or
/// a general full-column-rank m x k matrix.
class ProjectionSpec {
 public:
  struct Identity {
    Index m;
  };
  struct Subset {
    IndexSet indices;
    Index m;
  };
  struct General {
    Matrix c;
  };

  static ProjectionSpec identity(Index m);
  static ProjectionSpec subset(IndexSet s, Index m);
  static ProjectionSpec general(Matrix c);

  Index ambient_dim() const;
  Index rank() const;
  bool is_identity() const { return std::holds_alternative<Identity>(spec_); }
  const std::variant<Identity, Subset, General>& spec() const { return spec_; }

  /// Dense m x k matrix C.
  Matrix matrix() const;

 private:
  explicit ProjectionSpec(std::variant<Identity, Subset, General> s) : spec_(std::move(s)) {}
  std::variant<Identity, Subset, General> spec_;
};

struct HeritabilityEstimate {
  std::string method;
  double h2_hat = 0.0;
  double eta2_hat = 0.0;
  double sigma2_hat = 0.0;
  std::optional<double> se;
  bool boundary_flag = false;
  bool range_flag = false;        // moment estimate outside [0, 1]
  bool ratio_near_one = false;    // |k/n - 1| < 0.05
  int iterations = 0;
  double log_likelihood = 0.0;

  /// Builds an estimate whose h2 is derived from eta2 exactly.
  static HeritabilityEstimate from_eta2(std::string method, double eta2, double sigma2);
};

struct TwoComponentEstimate {
  double sigma2_S = 0.0;
  double sigma2_Sc = 0.0;
  double sigma2_e = 0.0;
  bool reml = false;
  bool converged = false;
  bool pinned_S = false;
  bool pinned_Sc = false;
  bool pinned_e = false;
  int iterations = 0;
  double gradient_norm = 0.0;
  double log_likelihood = 0.0;

  double h2_S() const { return sigma2_S / (sigma2_S + sigma2_Sc + sigma2_e); }
  bool any_pinned() const { return pinned_S || pinned_Sc || pinned_e; }
};

/// z_ij = (f_ij - 2 p_j) / sqrt(2 p_j (1 - p_j)), using the stored frequencies.
GenotypeMatrix standardize(const RawGenotypeMatrix& raw);
GenotypeMatrix standardize(const CountMatrix& counts, const MafVector& mafs);

/// Standardization with the counted allele's frequency estimated from the
/// same sample (not folded, so the column mean is exactly zero).
GenotypeMatrix standardize_empirical(const CountMatrix& counts);
/// Frequencies estimated from the counts, folded to the minor allele.
MafVector estimate_mafs(const CountMatrix& counts);

/// Subtracts the mean; rejects constant or non-finite input.
PhenotypeVector center(const Vector& raw);

/// Validates an index set against [0, m): sorted, unique, in range.
void validate_index_set(std::span<const Index> s, Index m, const char* what);
IndexSet complement(std::span<const Index> s, Index m);

}  // namespace h2k
