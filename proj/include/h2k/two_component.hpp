#pragma once

#include <array>

#include "h2k/core_model.hpp"

namespace h2k {

struct TwoComponentOptions {
  /// Apply the one-degree-of-freedom REML correction for the mean.
  bool reml = false;
  int max_iter = 200;
  double gradient_tol = 1e-7;
  double lower_bound = 1e-8;
  double upper_bound = 1e4;
};

/// Negative per-observation log-likelihood of y ~ N(0, σ_S² K_S + σ_Sc² K_Sc + σ_e² I)
/// in θ = log(σ_S², σ_Sc², σ_e²), constants dropped.
class TwoComponentObjective {
 public:
  TwoComponentObjective(Vector y, Matrix k_s, Matrix k_sc, bool reml);

  struct Evaluation {
    double value = 0.0;
    std::array<double, 3> gradient{};
    /// Average-information approximation to the Hessian in θ (per
    /// observation): ½ (K_i P y)' P (K_j P y) σ_i² σ_j² / n.
    std::array<std::array<double, 3>, 3> information{};
  };

  /// Throws NotPositiveDefinite when V is not numerically SPD.
  Evaluation evaluate(const std::array<double, 3>& theta, bool with_gradient) const;
  double value(const std::array<double, 3>& theta) const { return evaluate(theta, false).value; }

  Index n() const { return y_.size(); }
  const Matrix& k_s() const { return k_s_; }
  const Matrix& k_sc() const { return k_sc_; }

 private:
  Vector y_;
  Matrix k_s_;
  Matrix k_sc_;
  bool reml_;
};

/// Maximum-likelihood fit of the two-kernel model with K_S = Z_S Z_S'/|S| and
/// K_Sc = Z_Sc Z_Sc'/(m - |S|), by projected quasi-Newton in log-parameters
/// with average-information curvature.
TwoComponentEstimate ml_two_component(const PhenotypeVector& y, const GenotypeMatrix& z,
                                      const IndexSet& s, const TwoComponentOptions& options = {});

TwoComponentEstimate ml_two_component(const PhenotypeVector& y, const Matrix& k_s, const Matrix& k_sc,
                                      const TwoComponentOptions& options = {});

}  // namespace h2k
