#include "h2k/estimators.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/tools/minima.hpp>
#include <fmt/core.h>

namespace h2k {

namespace {

Vector checked_spectrum(Vector lambda) {
  const double top = lambda.maxCoeff();
  const double floor = -1e-8 * std::max(top, 0.0);
  for (Index i = 0; i < lambda.size(); ++i) {
    if (lambda[i] < floor) {
      throw Error(ErrorKind::InvalidArgument,
                  fmt::format("kernel is not positive semidefinite (eigenvalue {:.3g})", lambda[i]));
    }
    if (lambda[i] < 0.0) lambda[i] = 0.0;
  }
  return lambda;
}

}  // namespace

SpectralCache::SpectralCache(Vector eigenvalues, Vector q2)
    : lambda_(checked_spectrum(std::move(eigenvalues))), q2_(std::move(q2)) {
  if (lambda_.size() != q2_.size()) throw Error(ErrorKind::DimensionMismatch, "spectrum length mismatch");
  if (!lambda_.allFinite() || !q2_.allFinite()) throw Error(ErrorKind::NonFinite, "non-finite spectrum");
}

SpectralCache SpectralCache::from_kernel(const Matrix& k, const Vector& y) {
  if (k.rows() != y.size() || k.cols() != y.size()) {
    throw Error(ErrorKind::DimensionMismatch,
                fmt::format("kernel is {} x {} but phenotype has {} entries", k.rows(), k.cols(), y.size()));
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(k);
  if (es.info() != Eigen::Success) throw Error(ErrorKind::NonFinite, "kernel eigendecomposition failed");
  Vector q = es.eigenvectors().transpose() * y;
  return SpectralCache(es.eigenvalues(), q.array().square());
}

SpectralCache SpectralCache::from_design(const Matrix& w, const Vector& y) {
  if (w.cols() < 1) throw Error(ErrorKind::InvalidArgument, "whitened design has no columns");
  return from_kernel(scaled_gram(w, static_cast<double>(w.cols())), y);
}

double SpectralCache::profiled_sigma2(double eta2) const {
  return (q2_.array() / (1.0 + eta2 * lambda_.array())).sum() / static_cast<double>(n());
}

double SpectralCache::log_likelihood(double sigma2, double eta2) const {
  const double n = static_cast<double>(this->n());
  const auto d = 1.0 + eta2 * lambda_.array();
  return -0.5 * std::log(sigma2) - d.log().sum() / (2.0 * n) - (q2_.array() / d).sum() / (2.0 * n * sigma2);
}

double SpectralCache::profile_log_likelihood(double eta2) const {
  return log_likelihood(profiled_sigma2(eta2), eta2);
}

std::pair<double, double> SpectralCache::profile_derivatives(double eta2) const {
  const double n = static_cast<double>(this->n());
  const Eigen::ArrayXd d = 1.0 + eta2 * lambda_.array();
  const Eigen::ArrayXd l = lambda_.array();
  const Eigen::ArrayXd q = q2_.array();
  const double b = (q / d).sum();
  const double a = (q * l / d.square()).sum();
  const double c = (q * l.square() / d.cube()).sum();
  const double d1 = (l / d).sum();
  const double d2 = (l.square() / d.square()).sum();
  const double first = 0.5 * a / b - d1 / (2.0 * n);
  const double second = 0.5 * (a * a - 2.0 * c * b) / (b * b) + d2 / (2.0 * n);
  return {first, second};
}

HeritabilityEstimate mle_from_spectrum(const SpectralCache& cache, std::string method,
                                       const MleOptions& options) {
  const Vector& lambda = cache.eigenvalues();
  if (cache.q2().sum() <= 0.0) throw Error(ErrorKind::ZeroVariance, "phenotype has zero variance");
  const double top = lambda.cwiseAbs().maxCoeff();
  if (top <= 0.0 || lambda.maxCoeff() - lambda.minCoeff() <= 1e-10 * top) {
    throw Error(ErrorKind::NonIdentifiable,
                "kernel spectrum is flat; σ² and η² are confounded along a ridge");
  }
  if (!(options.eta2_lower > 0.0 && options.eta2_upper > options.eta2_lower)) {
    throw Error(ErrorKind::InvalidArgument, "invalid η² bounds");
  }
  const double t_lo = std::log(options.eta2_lower);
  const double t_hi = std::log(options.eta2_upper);
  auto objective = [&](double t) {
    const double v = cache.profile_log_likelihood(std::exp(t));
    if (!std::isfinite(v)) {
      throw Error(ErrorKind::NonFinite, fmt::format("likelihood is not finite at log η² = {}", t));
    }
    return -v;
  };

  // Coarse scan guards against a local optimum, then Brent on the bracket.
  const int grid = std::max(options.grid_points, 3);
  const double step = (t_hi - t_lo) / (grid - 1);
  int best = 0;
  double best_value = std::numeric_limits<double>::infinity();
  for (int i = 0; i < grid; ++i) {
    const double v = objective(t_lo + step * i);
    if (v < best_value) {
      best_value = v;
      best = i;
    }
  }
  const double a = t_lo + step * std::max(best - 1, 0);
  const double b = t_lo + step * std::min(best + 1, grid - 1);
  boost::uintmax_t iterations = 200;
  const auto [t_star, f_star] = boost::math::tools::brent_find_minima(objective, a, b, 40, iterations);
  double t = t_star;
  double value = f_star;

  // Newton polish on the profile score in η² so the stationary point is
  // resolved to rounding error.
  double eta2 = std::exp(t);
  for (int it = 0; it < 8; ++it) {
    const auto [g, h] = cache.profile_derivatives(eta2);
    if (!(h < 0.0) || !std::isfinite(g)) break;
    const double next = eta2 - g / h;
    if (!(next > options.eta2_lower && next < options.eta2_upper)) break;
    const double next_value = objective(std::log(next));
    if (next_value > value + 1e-14 * std::abs(value)) break;
    const bool done = std::abs(next - eta2) <= 1e-15 * std::max(eta2, 1e-300);
    eta2 = next;
    value = next_value;
    if (done) break;
  }

  HeritabilityEstimate est = HeritabilityEstimate::from_eta2(std::move(method), eta2, cache.profiled_sigma2(eta2));
  est.boundary_flag = eta2 <= options.eta2_lower * (1.0 + 1e-3) || eta2 >= options.eta2_upper * (1.0 - 1e-3);
  est.iterations = static_cast<int>(iterations);
  const double n = static_cast<double>(cache.n());
  // Full Gaussian log-likelihood (with constants) at the optimum.
  est.log_likelihood = n * cache.log_likelihood(est.sigma2_hat, eta2) - 0.5 * n * std::log(2.0 * std::numbers::pi);
  return est;
}

HeritabilityEstimate mle_single_kernel(const PhenotypeVector& y, const KernelMatrix& k,
                                       const MleOptions& options) {
  const SpectralCache cache = SpectralCache::from_kernel(k.k(), y.y());
  HeritabilityEstimate est =
      mle_from_spectrum(cache, fmt::format("{}-mle", to_string(k.kind())), options);
  const AsymptoticVariance av = asymptotic_se(cache, est.eta2_hat, est.sigma2_hat);
  if (!av.infinite_variance) est.se = av.se_h2;
  return est;
}

HeritabilityEstimate he_regression(const PhenotypeVector& y, const KernelMatrix& k) {
  const Index n = y.size();
  if (n < 3) throw Error(ErrorKind::InvalidArgument, "HE regression needs at least 3 individuals");
  if (k.size() != n) {
    throw Error(ErrorKind::DimensionMismatch,
                fmt::format("kernel is {} x {} but phenotype has {} entries", k.size(), k.size(), n));
  }
  const Vector& v = y.y();
  const Matrix& km = k.k();
  double cross = 0.0;
  double square = 0.0;
  for (Index j = 1; j < n; ++j) {
    for (Index i = 0; i < j; ++i) {
      cross += v[i] * v[j] * km(i, j);
      square += km(i, j) * km(i, j);
    }
  }
  if (square == 0.0) {
    throw Error(ErrorKind::DivisionByZero, "all off-diagonal kernel entries are zero");
  }
  const double pairs = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
  const double cov = cross / pairs;
  const double var = square / pairs;
  const double sigma2_g = cov / var;
  const double total = v.squaredNorm() / static_cast<double>(n);
  const double sigma2_e = total - sigma2_g;

  HeritabilityEstimate est;
  est.method = fmt::format("{}-he", to_string(k.kind()));
  est.h2_hat = sigma2_g / total;
  est.sigma2_hat = sigma2_e;
  est.eta2_hat = sigma2_g / sigma2_e;
  est.range_flag = est.h2_hat < 0.0 || est.h2_hat > 1.0;
  return est;
}

HeritabilityEstimate c_heritability_mle(const PhenotypeVector& y, const WhitenedDesign& w,
                                        const MleOptions& options) {
  if (w.n() != y.size()) {
    throw Error(ErrorKind::DimensionMismatch,
                fmt::format("whitened design has {} rows but phenotype has {} entries", w.n(), y.size()));
  }
  const SpectralCache cache = SpectralCache::from_design(w.w, y.y());
  HeritabilityEstimate est = mle_from_spectrum(cache, "c-mle", options);
  const double ratio = static_cast<double>(w.k()) / static_cast<double>(w.n());
  est.ratio_near_one = std::abs(ratio - 1.0) < 0.05;
  const AsymptoticVariance av = asymptotic_se(cache, est.eta2_hat, est.sigma2_hat);
  if (!av.infinite_variance) est.se = av.se_h2;
  return est;
}

AsymptoticVariance asymptotic_se(const SpectralCache& cache, double eta2_hat, double sigma2_perp_hat) {
  if (!(eta2_hat >= 0.0)) throw Error(ErrorKind::InvalidArgument, "η² must be non-negative");
  if (!(sigma2_perp_hat > 0.0)) throw Error(ErrorKind::InvalidArgument, "σ² must be positive");
  const double n = static_cast<double>(cache.n());
  const Eigen::ArrayXd l = cache.eigenvalues().array();
  const Eigen::ArrayXd j = 1.0 + eta2_hat * l;
  const double tr1 = (l / j).sum();             // tr(I J^{-1})
  const double tr2 = (l.square() / j.square()).sum();  // tr(I² J^{-2})
  const double s2 = sigma2_perp_hat;

  AsymptoticVariance av;
  // ι_α = tr(I^{α-2} J^{2-α}) / (2n σ^{2(4-α)}).
  av.iota_2 = n / (2.0 * n * s2 * s2);
  av.iota_3 = tr1 / (2.0 * n * s2);
  av.iota_4 = tr2 / (2.0 * n);

  const double ratio = tr2 > 0.0 ? tr1 * tr1 / (n * tr2) : 1.0;
  if (!(ratio < 1.0 - 1e-12)) {
    av.infinite_variance = true;
    av.psi = av.psi_trace_form = av.psi_noise = av.psi_noise_trace_form = av.se_h2 =
        std::numeric_limits<double>::infinity();
    return av;
  }
  av.psi = 1.0 / (av.iota_4 - av.iota_3 * av.iota_3 / av.iota_2);
  av.psi_trace_form = 2.0 * n / (tr2 - tr1 * tr1 / n);
  av.psi_noise = 1.0 / (av.iota_2 - av.iota_3 * av.iota_3 / av.iota_4);
  av.psi_noise_trace_form = 2.0 * s2 * s2 / (1.0 - ratio);
  av.se_h2 = std::sqrt(av.psi / (std::pow(1.0 + eta2_hat, 4) * n));
  return av;
}

AsymptoticVariance asymptotic_se(const WhitenedDesign& w, double eta2_hat, double sigma2_perp_hat) {
  const Matrix k = scaled_gram(w.w, static_cast<double>(w.k()));
  Eigen::SelfAdjointEigenSolver<Matrix> es(k, Eigen::EigenvaluesOnly);
  const SpectralCache cache(es.eigenvalues(), Vector::Zero(k.rows()));
  return asymptotic_se(cache, eta2_hat, sigma2_perp_hat);
}

}  // namespace h2k
