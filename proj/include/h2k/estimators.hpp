#pragma once

#include "h2k/core_model.hpp"
#include "h2k/kernels.hpp"

namespace h2k {

/// Eigenvalues of a kernel and squared rotated responses, which reduce the
/// Gaussian likelihood of y ~ N(0, σ²(η² K + I)) to O(n) per evaluation.
class SpectralCache {
 public:
  static SpectralCache from_kernel(const Matrix& k, const Vector& y);
  /// Kernel (1/k) W W'.
  static SpectralCache from_design(const Matrix& w, const Vector& y);
  /// Direct construction from a spectrum (λ_i, q_i²).
  SpectralCache(Vector eigenvalues, Vector q2);

  const Vector& eigenvalues() const { return lambda_; }
  const Vector& q2() const { return q2_; }
  Index n() const { return lambda_.size(); }

  /// Closed-form σ²(η²) = (1/n) y'(η²K + I)^{-1} y.
  double profiled_sigma2(double eta2) const;
  /// l(σ², η²) = -½ log σ² - (1/2n) log det(η²K + I) - (1/2nσ²) y'(η²K + I)^{-1} y.
  double log_likelihood(double sigma2, double eta2) const;
  /// l(σ²(η²), η²).
  double profile_log_likelihood(double eta2) const;
  /// d/dη² of the profile log-likelihood and its second derivative.
  std::pair<double, double> profile_derivatives(double eta2) const;

 private:
  Vector lambda_;
  Vector q2_;
};

struct MleOptions {
  double eta2_lower = 1e-6;
  double eta2_upper = 1e6;
  int grid_points = 61;
};

/// Gaussian MLE of h² for a unit-diagonal-convention kernel.
HeritabilityEstimate mle_single_kernel(const PhenotypeVector& y, const KernelMatrix& k,
                                       const MleOptions& options = {});
HeritabilityEstimate mle_from_spectrum(const SpectralCache& cache, std::string method,
                                       const MleOptions& options = {});

/// Haseman-Elston moment regression of y_i y_j on K_ij over pairs i < j.
HeritabilityEstimate he_regression(const PhenotypeVector& y, const KernelMatrix& k);

/// MLE of C-heritability from the whitened design; also attaches the
/// asymptotic standard error.
HeritabilityEstimate c_heritability_mle(const PhenotypeVector& y, const WhitenedDesign& w,
                                        const MleOptions& options = {});

struct AsymptoticVariance {
  double iota_2 = 0.0;
  double iota_3 = 0.0;
  double iota_4 = 0.0;
  /// Asymptotic variance of sqrt(n)(η̂² - η²): (ι_4 - ι_3²/ι_2)^{-1}.
  double psi = 0.0;
  /// Same quantity from the trace form 2n / (tr(I²J^{-2}) - tr(IJ^{-1})²/n).
  double psi_trace_form = 0.0;
  /// (ι_2 - ι_3²/ι_4)^{-1} = 2σ⁴(1 - tr(IJ^{-1})²/(n tr(I²J^{-2})))^{-1}: the
  /// complementary block, i.e. the asymptotic variance of sqrt(n)(σ̂² - σ²).
  double psi_noise = 0.0;
  double psi_noise_trace_form = 0.0;
  /// sqrt(psi / ((1 + η̂²)⁴ n)).
  double se_h2 = 0.0;
  bool infinite_variance = false;
};

AsymptoticVariance asymptotic_se(const SpectralCache& cache, double eta2_hat, double sigma2_perp_hat);
AsymptoticVariance asymptotic_se(const WhitenedDesign& w, double eta2_hat, double sigma2_perp_hat);

}  // namespace h2k
