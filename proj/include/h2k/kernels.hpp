#pragma once

#include <cstdint>

#include "h2k/core_model.hpp"

namespace h2k {

/// W_C = Z C (C' Σ C)^{-1/2}; rows are N(0, I_k) when rows of Z are N(0, Σ).
struct WhitenedDesign {
  Matrix w;
  ProjectionSpec projection;
  std::uint64_t ld_fingerprint = 0;

  Index k() const { return w.cols(); }
  Index n() const { return w.rows(); }
};

/// K = Z Z' / m.
KernelMatrix euclidean_grm(const GenotypeMatrix& z);

/// K = Z Σ^{-1} Z' / m.
KernelMatrix mahalanobis_grm(const GenotypeMatrix& z, const LDMatrix& sigma);

/// Precomputed m x k whitening map T = C (C' Σ C)^{-1/2}, reusable across
/// genotype draws that share Σ and C.
class Whitener {
 public:
  Whitener(const LDMatrix& sigma, ProjectionSpec projection);

  WhitenedDesign apply(const GenotypeMatrix& z) const;
  const ProjectionSpec& projection() const { return projection_; }
  Index k() const { return projection_.rank(); }

 private:
  ProjectionSpec projection_;
  std::uint64_t fingerprint_;
  // Identity and Subset keep Σ (or Σ[S,S]) in block form; General keeps T.
  std::optional<LDMatrix> restricted_;
  Matrix transform_;
};

WhitenedDesign whitened_design(const GenotypeMatrix& z, const LDMatrix& sigma,
                               const ProjectionSpec& projection);

ProjectionSpec projection_for_subset(IndexSet s, Index m);

/// Z[:, S] as a dense matrix.
Matrix select_columns(const Matrix& z, std::span<const Index> s);

/// X X' / divisor, symmetric by construction.
Matrix scaled_gram(const Matrix& x, double divisor);

}  // namespace h2k
