#include "h2k/truth.hpp"

#include <fmt/core.h>

namespace h2k {

namespace {

void check_inputs(const Vector& u, const LDMatrix& sigma, double sigma_e2) {
  if (u.size() != sigma.size()) {
    throw Error(ErrorKind::DimensionMismatch,
                fmt::format("{} effects for a {} x {} LD matrix", u.size(), sigma.size(), sigma.size()));
  }
  if (!(sigma_e2 >= 0.0)) throw Error(ErrorKind::InvalidArgument, "σ_e² must be non-negative");
}

double total_variance(double genetic, double sigma_e2) {
  const double total = genetic + sigma_e2;
  if (!(total > 0.0)) throw Error(ErrorKind::ZeroVariance, "total phenotypic variance is zero");
  return total;
}

constexpr double kMaxCondition = 1e12;

Eigen::LLT<Matrix> checked_cholesky(const Matrix& a, const char* what) {
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorKind::RankDeficient, fmt::format("{} is singular", what));
  }
  if (llt.rcond() < 1.0 / kMaxCondition) {
    throw Error(ErrorKind::IllConditioned,
                fmt::format("{} has condition number above {:.0e}", what, kMaxCondition));
  }
  return llt;
}

}  // namespace

double true_h2_fixed(const Vector& u, const LDMatrix& sigma, double sigma_e2) {
  check_inputs(u, sigma, sigma_e2);
  const double g = sigma.quadratic_form(u);
  return g / total_variance(g, sigma_e2);
}

double true_h2_fixed(const EffectVector& u, const LDMatrix& sigma, double sigma_e2) {
  return true_h2_fixed(u.u(), sigma, sigma_e2);
}

double detail::schur_term(const Vector& u, const LDMatrix& sigma, const IndexSet& s) {
  const Index m = sigma.size();
  validate_index_set(s, m, "partition subset");
  if (s.empty()) throw Error(ErrorKind::InvalidArgument, "partition subset is empty");
  // Σ is block-diagonal, so the conditional covariance of z_{S^c} given z_S
  // is too; each block contributes independently.
  double total = 0.0;
  auto next = s.begin();
  for (const auto& block : sigma.blocks()) {
    const Index size = block.sigma.rows();
    IndexSet in, out;
    for (Index j = 0; j < size; ++j) {
      const Index global = block.offset + j;
      while (next != s.end() && *next < global) ++next;
      if (next != s.end() && *next == global) {
        in.push_back(j);
      } else {
        out.push_back(j);
      }
    }
    if (out.empty()) continue;
    Vector uc(static_cast<Index>(out.size()));
    for (std::size_t t = 0; t < out.size(); ++t) uc[static_cast<Index>(t)] = u[block.offset + out[t]];
    if (uc.isZero(0.0)) continue;
    Matrix scc(uc.size(), uc.size());
    for (std::size_t a = 0; a < out.size(); ++a)
      for (std::size_t b = 0; b < out.size(); ++b)
        scc(static_cast<Index>(a), static_cast<Index>(b)) = block.sigma(out[a], out[b]);
    double term = uc.dot(scc * uc);
    if (!in.empty()) {
      Matrix ss(static_cast<Index>(in.size()), static_cast<Index>(in.size()));
      Matrix ssc(static_cast<Index>(in.size()), uc.size());
      for (std::size_t a = 0; a < in.size(); ++a) {
        for (std::size_t b = 0; b < in.size(); ++b)
          ss(static_cast<Index>(a), static_cast<Index>(b)) = block.sigma(in[a], in[b]);
        for (std::size_t b = 0; b < out.size(); ++b)
          ssc(static_cast<Index>(a), static_cast<Index>(b)) = block.sigma(in[a], out[b]);
      }
      const auto llt = checked_cholesky(ss, "Σ[S,S]");
      const Vector v = ssc * uc;
      term -= v.dot(llt.solve(v));
    }
    total += term;
  }
  return total;
}

double true_partitioned_h2(const Vector& u, const LDMatrix& sigma, const IndexSet& s, double sigma_e2) {
  check_inputs(u, sigma, sigma_e2);
  const double g = sigma.quadratic_form(u);
  const double numerator = g - detail::schur_term(u, sigma, s);
  return numerator / total_variance(g, sigma_e2);
}

double true_c_h2(const Vector& u, const LDMatrix& sigma, const ProjectionSpec& c, double sigma_e2) {
  check_inputs(u, sigma, sigma_e2);
  if (c.ambient_dim() != sigma.size()) {
    throw Error(ErrorKind::DimensionMismatch, "projection and LD matrix disagree in size");
  }
  const Vector sigma_u = sigma.multiply(u);
  const double g = u.dot(sigma_u);
  const Matrix cm = c.matrix();
  const Vector v = cm.transpose() * sigma_u;
  const Matrix ctsc = sigma.right_multiply(cm.transpose()) * cm;
  const auto llt = checked_cholesky(0.5 * (ctsc + ctsc.transpose()), "C'ΣC");
  return v.dot(llt.solve(v)) / total_variance(g, sigma_e2);
}

TruthReport truth_report(const Vector& u, const LDMatrix& sigma, double sigma_e2,
                         const std::vector<std::pair<std::string, IndexSet>>& subsets,
                         const std::vector<std::pair<std::string, ProjectionSpec>>& projections) {
  check_inputs(u, sigma, sigma_e2);
  TruthReport r;
  r.components.genetic_variance = sigma.quadratic_form(u);
  r.components.sigma_e2 = sigma_e2;
  const double total = total_variance(r.components.genetic_variance, sigma_e2);
  r.h2_total = r.components.genetic_variance / total;
  for (const auto& [name, s] : subsets) {
    const double schur = detail::schur_term(u, sigma, s);
    r.schur_terms.push_back(schur);
    r.h2_subsets.emplace_back(name, (r.components.genetic_variance - schur) / total);
  }
  for (const auto& [name, c] : projections) r.h2_projections.emplace_back(name, true_c_h2(u, sigma, c, sigma_e2));
  return r;
}

double detail::gamma_numerator(const Vector& u, const Matrix& sigma, const IndexSet& s) {
  const Index m = sigma.rows();
  validate_index_set(s, m, "partition subset");
  const IndexSet c = complement(s, m);
  auto take = [&](const IndexSet& rows, const IndexSet& cols) {
    Matrix out(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = 0; j < cols.size(); ++j)
        out(static_cast<Index>(i), static_cast<Index>(j)) = sigma(rows[i], cols[j]);
    return out;
  };
  Matrix gamma = sigma;
  if (!c.empty()) {
    const Matrix ssc = take(s, c);
    const Matrix block = ssc.transpose() * take(s, s).llt().solve(ssc);
    for (std::size_t i = 0; i < c.size(); ++i)
      for (std::size_t j = 0; j < c.size(); ++j)
        gamma(c[i], c[j]) = block(static_cast<Index>(i), static_cast<Index>(j));
  }
  return u.dot(gamma * u);
}

}  // namespace h2k
