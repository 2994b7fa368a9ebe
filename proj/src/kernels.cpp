#include "h2k/kernels.hpp"

#include <algorithm>

#include <fmt/core.h>

namespace h2k {

Matrix scaled_gram(const Matrix& x, double divisor) {
  const Index n = x.rows();
  Matrix k = Matrix::Zero(n, n);
  k.selfadjointView<Eigen::Lower>().rankUpdate(x, 1.0 / divisor);
  k.triangularView<Eigen::StrictlyUpper>() = k.transpose();
  return k;
}

Matrix select_columns(const Matrix& z, std::span<const Index> s) {
  Matrix out(z.rows(), static_cast<Index>(s.size()));
  for (std::size_t t = 0; t < s.size(); ++t) out.col(static_cast<Index>(t)) = z.col(s[t]);
  return out;
}

KernelMatrix euclidean_grm(const GenotypeMatrix& z) {
  const Index m = z.cols();
  if (m < 1) throw Error(ErrorKind::InvalidArgument, "GRM needs at least one SNP");
  return KernelMatrix(scaled_gram(z.z(), static_cast<double>(m)), KernelKind::Euclidean,
                      static_cast<double>(m));
}

KernelMatrix mahalanobis_grm(const GenotypeMatrix& z, const LDMatrix& sigma) {
  const Index m = z.cols();
  if (m != sigma.size()) {
    throw Error(ErrorKind::DimensionMismatch,
                fmt::format("genotypes have {} SNPs, LD matrix is {} x {}", m, sigma.size(), sigma.size()));
  }
  // Z Σ^{-1} Z' evaluated through the inverse, not through the whitened design,
  // so the two routes stay independent.
  const Matrix zs = sigma.right_multiply_inverse(z.z());
  Matrix k = zs * z.z().transpose() / static_cast<double>(m);
  k = 0.5 * (k + k.transpose()).eval();
  return KernelMatrix(std::move(k), KernelKind::Mahalanobis, static_cast<double>(m));
}

Whitener::Whitener(const LDMatrix& sigma, ProjectionSpec projection)
    : projection_(std::move(projection)), fingerprint_(sigma.fingerprint()) {
  if (projection_.ambient_dim() != sigma.size()) {
    throw Error(ErrorKind::DimensionMismatch,
                fmt::format("projection acts on {} SNPs, LD matrix is {} x {}",
                            projection_.ambient_dim(), sigma.size(), sigma.size()));
  }
  const auto& spec = projection_.spec();
  if (std::holds_alternative<ProjectionSpec::Identity>(spec)) {
    restricted_.emplace(sigma);
  } else if (const auto* s = std::get_if<ProjectionSpec::Subset>(&spec)) {
    try {
      restricted_.emplace(sigma.restrict_to(s->indices));
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::NotPositiveDefinite) {
        throw Error(ErrorKind::RankDeficient, std::string("Σ[S,S] is singular: ") + e.what());
      }
      throw;
    }
  } else {
    const Matrix& c = std::get<ProjectionSpec::General>(spec).c;
    // C' Σ C via (C' Σ) = (Σ C)' with Σ applied blockwise.
    const Matrix ctsigma = sigma.right_multiply(c.transpose());
    Matrix gram = ctsigma * c;
    gram = 0.5 * (gram + gram.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
    const Vector& ev = es.eigenvalues();
    if (!(ev.minCoeff() > 1e-10 * ev.maxCoeff())) {
      throw Error(ErrorKind::RankDeficient, "C'ΣC is singular; the projection is redundant");
    }
    const Matrix inv_sqrt =
        es.eigenvectors() * ev.cwiseSqrt().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
    transform_ = c * inv_sqrt;
  }
}

WhitenedDesign Whitener::apply(const GenotypeMatrix& z) const {
  if (z.cols() != projection_.ambient_dim()) {
    throw Error(ErrorKind::DimensionMismatch,
                fmt::format("genotypes have {} SNPs, projection expects {}", z.cols(),
                            projection_.ambient_dim()));
  }
  WhitenedDesign out{Matrix(), projection_, fingerprint_};
  const auto& spec = projection_.spec();
  if (std::holds_alternative<ProjectionSpec::Identity>(spec)) {
    out.w = restricted_->right_multiply_inv_sqrt(z.z());
  } else if (const auto* s = std::get_if<ProjectionSpec::Subset>(&spec)) {
    out.w = restricted_->right_multiply_inv_sqrt(select_columns(z.z(), s->indices));
  } else {
    out.w = z.z() * transform_;
  }
  return out;
}

WhitenedDesign whitened_design(const GenotypeMatrix& z, const LDMatrix& sigma,
                               const ProjectionSpec& projection) {
  return Whitener(sigma, projection).apply(z);
}

ProjectionSpec projection_for_subset(IndexSet s, Index m) {
  std::sort(s.begin(), s.end());
  return ProjectionSpec::subset(std::move(s), m);
}

}  // namespace h2k
