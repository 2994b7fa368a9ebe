#pragma once

// Fixed-effects heritability estimands computed from a known effect vector
// and population LD matrix.

#include <string>
#include <vector>

#include "h2k/core_model.hpp"

namespace h2k {

/// u'Σu / (u'Σu + σ_e²).
double true_h2_fixed(const EffectVector& u, const LDMatrix& sigma, double sigma_e2);
double true_h2_fixed(const Vector& u, const LDMatrix& sigma, double sigma_e2);

/// (u'Σu - u_c' Σ_{c|S} u_c) / (u'Σu + σ_e²), with Σ_{c|S} the Schur
/// complement of Σ[S,S]. S = [m] gives the total.
double true_partitioned_h2(const Vector& u, const LDMatrix& sigma, const IndexSet& s, double sigma_e2);

/// u'ΣC (C'ΣC)^{-1} C'Σu / (u'Σu + σ_e²).
double true_c_h2(const Vector& u, const LDMatrix& sigma, const ProjectionSpec& c, double sigma_e2);

struct TruthComponents {
  double genetic_variance = 0.0;  // u'Σu
  double sigma_e2 = 0.0;
};

struct TruthReport {
  double h2_total = 0.0;
  std::vector<std::pair<std::string, double>> h2_subsets;
  std::vector<std::pair<std::string, double>> h2_projections;
  TruthComponents components;
  /// u_c' Σ_{c|S} u_c per subset, aligned with h2_subsets.
  std::vector<double> schur_terms;
};

TruthReport truth_report(const Vector& u, const LDMatrix& sigma, double sigma_e2,
                         const std::vector<std::pair<std::string, IndexSet>>& subsets,
                         const std::vector<std::pair<std::string, ProjectionSpec>>& projections = {});

namespace detail {

/// u_c' Σ_{c|S} u_c.
double schur_term(const Vector& u, const LDMatrix& sigma, const IndexSet& s);

/// u'Γu with Γ = Σ except Γ[c,c] = Σ[c,S] Σ[S,S]^{-1} Σ[S,c]. Equals the
/// partitioned-heritability numerator; exposed for property tests.
double gamma_numerator(const Vector& u, const Matrix& sigma, const IndexSet& s);

}  // namespace detail

}  // namespace h2k
