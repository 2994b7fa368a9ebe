#include "h2k/copula.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/distributions/normal.hpp>
#include <fmt/core.h>

namespace h2k {

namespace {

struct GaussLegendreRule {
  Vector nodes;    // on [-1, 1]
  Vector weights;
};

// Golub-Welsch.
GaussLegendreRule make_rule(int order) {
  Matrix jacobi = Matrix::Zero(order, order);
  for (int k = 1; k < order; ++k) {
    const double b = k / std::sqrt(4.0 * k * k - 1.0);
    jacobi(k, k - 1) = b;
    jacobi(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(jacobi);
  GaussLegendreRule rule;
  rule.nodes = es.eigenvalues();
  rule.weights = 2.0 * es.eigenvectors().row(0).transpose().array().square();
  return rule;
}

const GaussLegendreRule& gauss_legendre(int order) {
  static std::mutex mutex;
  static std::map<int, GaussLegendreRule> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(order);
  if (it == cache.end()) it = cache.emplace(order, make_rule(order)).first;
  return it->second;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_quantile(double q) {
  static const boost::math::normal standard;
  return boost::math::quantile(standard, q);
}

// Latent thresholds of the count: count >= 1 iff x >= t[0], count == 2 iff x >= t[1].
std::array<double, 2> thresholds(double p) {
  return {normal_quantile((1.0 - p) * (1.0 - p)), normal_quantile(1.0 - p * p)};
}

void check_maf(double p) {
  if (!(p > 0.0 && p <= 0.5)) {
    throw Error(ErrorKind::InvalidArgument, fmt::format("MAF {} outside (0, 0.5]", p));
  }
}

}  // namespace

double copula_achieved_correlation(double rho_z, double p_a, double p_b, int quadrature_order) {
  check_maf(p_a);
  check_maf(p_b);
  if (!(std::abs(rho_z) <= 1.0)) throw Error(ErrorKind::InvalidArgument, "latent correlation outside [-1, 1]");
  if (rho_z == 0.0) return 0.0;
  const auto ta = thresholds(p_a);
  const auto tb = thresholds(p_b);
  // Each unit step of the count moves the standardized value by 1/sd.
  const double step = 1.0 / std::sqrt(2.0 * p_a * (1.0 - p_a) * 2.0 * p_b * (1.0 - p_b));
  const GaussLegendreRule& rule = gauss_legendre(quadrature_order);
  // Phi2(h,k;rho) - Phi(h)Phi(k) = (1/2pi) int_0^{asin rho} exp(-(h^2 - 2hk sin t + k^2)/(2 cos^2 t)) dt
  const double upper = std::asin(rho_z);
  const double half = 0.5 * upper;
  double cov = 0.0;
  for (int q = 0; q < rule.nodes.size(); ++q) {
    const double t = half * (rule.nodes[q] + 1.0);
    const double s = std::sin(t);
    const double c2 = std::cos(t) * std::cos(t);
    double inner = 0.0;
    for (double h : ta)
      for (double k : tb) inner += std::exp(-(h * h - 2.0 * h * k * s + k * k) / (2.0 * c2));
    cov += rule.weights[q] * inner;
  }
  return step * half * cov / (2.0 * std::numbers::pi);
}

std::pair<double, double> copula_correlation_bounds(double p_a, double p_b) {
  check_maf(p_a);
  check_maf(p_b);
  const auto ta = thresholds(p_a);
  const auto tb = thresholds(p_b);
  const double step = 1.0 / std::sqrt(2.0 * p_a * (1.0 - p_a) * 2.0 * p_b * (1.0 - p_b));
  double lo = 0.0;
  double hi = 0.0;
  for (double h : ta) {
    for (double k : tb) {
      const double fh = normal_cdf(h);
      const double fk = normal_cdf(k);
      hi += std::min(fh, fk) - fh * fk;
      lo += std::max(fh + fk - 1.0, 0.0) - fh * fk;
    }
  }
  return {step * lo, step * hi};
}

CopulaSolution copula_intermediate_correlation(double target_rho, double p_a, double p_b,
                                               const CopulaOptions& options) {
  if (!(std::abs(target_rho) < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, fmt::format("target correlation {} not in (-1, 1)", target_rho));
  }
  if (target_rho == 0.0) return {0.0, 0.0, 0};
  const auto [lo, hi] = copula_correlation_bounds(p_a, p_b);
  if (target_rho <= lo || target_rho >= hi) {
    throw Error(ErrorKind::Infeasible,
                fmt::format("target correlation {} outside attainable range ({:.6f}, {:.6f}) for "
                            "MAFs {} and {}",
                            target_rho, lo, hi, p_a, p_b));
  }
  constexpr double kClamp = 0.999;
  CopulaSolution sol;
  sol.rho_z = target_rho;
  // The achieved correlation is increasing in rho_z, so every evaluation
  // tightens a bracket around the solution. The multiplicative step is kept
  // while it stays inside and at least halves the error; otherwise (it can
  // cycle or crawl for rare alleles at strong correlation) the bracket is
  // bisected.
  double below = target_rho > 0.0 ? 0.0 : -kClamp;
  double above = target_rho > 0.0 ? kClamp : 0.0;
  double previous_error = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= options.max_iter; ++it) {
    sol.achieved = copula_achieved_correlation(sol.rho_z, p_a, p_b, options.quadrature_order);
    sol.iterations = it;
    const double error = std::abs(sol.achieved - target_rho);
    if (error < options.tol) return sol;
    (sol.achieved < target_rho ? below : above) = sol.rho_z;
    const double step = std::clamp(sol.rho_z * target_rho / sol.achieved, -kClamp, kClamp);
    const bool progressing = error <= 0.5 * previous_error;
    sol.rho_z = progressing && step > below && step < above ? step : 0.5 * (below + above);
    previous_error = error;
  }
  sol.achieved = copula_achieved_correlation(sol.rho_z, p_a, p_b, options.quadrature_order);
  if (std::abs(sol.achieved - target_rho) < options.tol) return sol;
  throw Error(ErrorKind::NonConvergence,
              fmt::format("intermediate correlation for target {} (MAFs {}, {}) did not converge "
                          "in {} iterations; last achieved {:.6f} at rho_z {:.6f}",
                          target_rho, p_a, p_b, options.max_iter, sol.achieved, sol.rho_z));
}

CopulaSolution CopulaTable::solve(double target_rho, double p_a, double p_b) {
  if (p_a > p_b) std::swap(p_a, p_b);
  const auto key = std::make_tuple(target_rho, p_a, p_b);
  {
    std::shared_lock lock(mutex_);
    auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;
  }
  const CopulaSolution sol = copula_intermediate_correlation(target_rho, p_a, p_b, options_);
  std::unique_lock lock(mutex_);
  memo_.emplace(key, sol);
  return sol;
}

std::size_t CopulaTable::size() const {
  std::shared_lock lock(mutex_);
  return memo_.size();
}

CopulaGenotypeModel::CopulaGenotypeModel(MafVector mafs, const LDMatrix& target, CopulaOptions options)
    : mafs_(std::move(mafs)), repair_indefinite_(options.repair_indefinite) {
  CopulaTable table(options);
  build(target, table);
}

CopulaGenotypeModel::CopulaGenotypeModel(MafVector mafs, const LDMatrix& target, CopulaTable& table)
    : mafs_(std::move(mafs)), repair_indefinite_(table.options().repair_indefinite) {
  build(target, table);
}

void CopulaGenotypeModel::build(const LDMatrix& target, CopulaTable& table) {
  m_ = target.size();
  if (mafs_.size() != m_) {
    throw Error(ErrorKind::DimensionMismatch,
                fmt::format("{} MAFs for a {} x {} LD matrix", mafs_.size(), m_, m_));
  }
  lower_threshold_.resize(m_);
  upper_threshold_.resize(m_);
  for (Index j = 0; j < m_; ++j) {
    const auto t = thresholds(mafs_[j]);
    lower_threshold_[j] = t[0];
    upper_threshold_[j] = t[1];
  }
  constexpr double kNegligible = 1e-12;
  double distortion_sq = 0.0;
  min_latent_eigenvalue_ = std::numeric_limits<double>::infinity();
  for (const auto& tb : target.blocks()) {
    const Index s = tb.sigma.rows();
    Matrix latent = Matrix::Identity(s, s);
    for (Index i = 0; i < s; ++i) {
      if (std::abs(tb.sigma(i, i) - 1.0) > 1e-12) {
        throw Error(ErrorKind::InvalidArgument,
                    "copula target must be a correlation matrix (unit diagonal)");
      }
      for (Index j = i + 1; j < s; ++j) {
        const double target_rho = tb.sigma(i, j);
        if (std::abs(target_rho) < kNegligible) continue;
        const double r = table.solve(target_rho, mafs_[tb.offset + i], mafs_[tb.offset + j]).rho_z;
        latent(i, j) = r;
        latent(j, i) = r;
      }
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(latent);
    const double min_ev = es.eigenvalues().minCoeff();
    min_latent_eigenvalue_ = std::min(min_latent_eigenvalue_, min_ev);
    if (min_ev < 1e-8) {
      if (!repair_indefinite_) {
        throw Error(ErrorKind::NotPositiveDefinite,
                    fmt::format("recovered latent correlation is indefinite (smallest eigenvalue {:.3g})",
                                min_ev));
      }
      const Vector clipped = es.eigenvalues().cwiseMax(1e-8);
      Matrix fixed = es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().transpose();
      const Vector d = fixed.diagonal().cwiseSqrt().cwiseInverse();
      fixed = d.asDiagonal() * fixed * d.asDiagonal();
      fixed = 0.5 * (fixed + fixed.transpose()).eval();
      distortion_sq += (fixed - latent).squaredNorm();
      latent = std::move(fixed);
      repaired_ = true;
    }
    Eigen::LLT<Matrix> llt(latent);
    if (llt.info() != Eigen::Success) {
      throw Error(ErrorKind::NotPositiveDefinite, "latent correlation factorization failed");
    }
    blocks_.push_back({tb.offset, latent, llt.matrixL()});
  }
  distortion_ = std::sqrt(distortion_sq);
}

Matrix CopulaGenotypeModel::latent_correlation() const {
  Matrix out = Matrix::Zero(m_, m_);
  for (const auto& b : blocks_) out.block(b.offset, b.offset, b.latent.rows(), b.latent.rows()) = b.latent;
  return out;
}

RawGenotypeMatrix CopulaGenotypeModel::simulate(Index n, RngStream& rng) const {
  if (n < 1) throw Error(ErrorKind::InvalidArgument, "need at least one individual");
  const Matrix g = rng.normal_matrix(n, m_);
  CountMatrix counts(n, m_);
  for (const auto& b : blocks_) {
    const Index s = b.latent.rows();
    const Matrix x = g.middleCols(b.offset, s) * b.lower_factor.transpose();
    for (Index j = 0; j < s; ++j) {
      const double lo = lower_threshold_[b.offset + j];
      const double hi = upper_threshold_[b.offset + j];
      for (Index i = 0; i < n; ++i) {
        const double v = x(i, j);
        counts(i, b.offset + j) = static_cast<std::uint8_t>((v >= lo) + (v >= hi));
      }
    }
  }
  return RawGenotypeMatrix(std::move(counts), mafs_);
}

RawGenotypeMatrix simulate_binomial_genotypes(Index n, const MafVector& mafs,
                                              const LDMatrix& sigma_target, RngStream& rng) {
  return CopulaGenotypeModel(mafs, sigma_target).simulate(n, rng);
}

}  // namespace h2k
