#include "h2k/two_component.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/core.h>

#include "h2k/kernels.hpp"

namespace h2k {

TwoComponentObjective::TwoComponentObjective(Vector y, Matrix k_s, Matrix k_sc, bool reml)
    : y_(std::move(y)), k_s_(std::move(k_s)), k_sc_(std::move(k_sc)), reml_(reml) {
  const Index n = y_.size();
  if (k_s_.rows() != n || k_s_.cols() != n || k_sc_.rows() != n || k_sc_.cols() != n) {
    throw Error(ErrorKind::DimensionMismatch, "kernels and phenotype disagree in size");
  }
}

TwoComponentObjective::Evaluation TwoComponentObjective::evaluate(const std::array<double, 3>& theta,
                                                                  bool with_gradient) const {
  const Index n = y_.size();
  const double nd = static_cast<double>(n);
  const std::array<double, 3> s{std::exp(theta[0]), std::exp(theta[1]), std::exp(theta[2])};
  Matrix v = s[0] * k_s_ + s[1] * k_sc_;
  v.diagonal().array() += s[2];
  const Eigen::LLT<Matrix> llt(v);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorKind::NotPositiveDefinite, "covariance matrix is not positive definite");
  }
  const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  Vector py = llt.solve(y_);
  Vector vinv1;
  double c = 0.0;
  Evaluation out;
  if (reml_) {
    vinv1 = llt.solve(Vector::Ones(n));
    c = vinv1.sum();
    py -= vinv1 * (vinv1.dot(y_) / c);
    out.value = (logdet + std::log(c) + y_.dot(py)) / (2.0 * nd);
  } else {
    out.value = (logdet + y_.dot(py)) / (2.0 * nd);
  }
  if (!std::isfinite(out.value)) throw Error(ErrorKind::NonFinite, "two-component likelihood is not finite");
  if (!with_gradient) return out;

  const Matrix vinv = llt.solve(Matrix::Identity(n, n));
  auto trace_pk = [&](const Matrix& k) {
    double t = vinv.cwiseProduct(k).sum();
    if (reml_) t -= vinv1.dot(k * vinv1) / c;
    return t;
  };
  double trace_p = vinv.trace();
  if (reml_) trace_p -= vinv1.squaredNorm() / c;

  const double g_s = trace_pk(k_s_) - py.dot(k_s_ * py);
  const double g_sc = trace_pk(k_sc_) - py.dot(k_sc_ * py);
  const double g_e = trace_p - py.squaredNorm();
  out.gradient = {s[0] * g_s / (2.0 * nd), s[1] * g_sc / (2.0 * nd), s[2] * g_e / (2.0 * nd)};

  auto apply_p = [&](const Vector& x) {
    Vector px = llt.solve(x);
    if (reml_) px -= vinv1 * (vinv1.dot(x) / c);
    return px;
  };
  const std::array<Vector, 3> kpy{k_s_ * py, k_sc_ * py, py};
  std::array<Vector, 3> pkpy;
  for (int i = 0; i < 3; ++i) pkpy[i] = apply_p(kpy[i]);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j <= i; ++j) {
      const double a = 0.5 * kpy[i].dot(pkpy[j]) * s[i] * s[j] / nd;
      out.information[i][j] = out.information[j][i] = a;
    }
  }
  return out;
}

namespace {

using Theta = std::array<double, 3>;

Eigen::Vector3d as_vec(const Theta& t) { return {t[0], t[1], t[2]}; }
Theta as_theta(const Eigen::Vector3d& v) { return {v[0], v[1], v[2]}; }

}  // namespace

TwoComponentEstimate ml_two_component(const PhenotypeVector& y, const Matrix& k_s, const Matrix& k_sc,
                                      const TwoComponentOptions& options) {
  const TwoComponentObjective objective(y.y(), k_s, k_sc, options.reml);
  const double total = y.y().squaredNorm() / static_cast<double>(y.size());
  if (!(total > 0.0)) throw Error(ErrorKind::ZeroVariance, "phenotype has zero variance");
  const double lo = std::log(options.lower_bound);
  const double hi = std::log(options.upper_bound);
  auto clamp = [&](Eigen::Vector3d x) {
    for (int i = 0; i < 3; ++i) x[i] = std::clamp(x[i], lo, hi);
    return x;
  };

  // Best of a few variance splits as the starting point.
  static constexpr std::array<std::array<double, 3>, 6> kSplits{{{1.0 / 3, 1.0 / 3, 1.0 / 3},
                                                                  {0.6, 0.2, 0.2},
                                                                  {0.2, 0.6, 0.2},
                                                                  {0.2, 0.2, 0.6},
                                                                  {0.05, 0.05, 0.9},
                                                                  {0.45, 0.45, 0.1}}};
  Eigen::Vector3d x;
  double fx = std::numeric_limits<double>::infinity();
  for (const auto& split : kSplits) {
    const Eigen::Vector3d cand =
        clamp({std::log(split[0] * total), std::log(split[1] * total), std::log(split[2] * total)});
    const double f = objective.value(as_theta(cand));
    if (f < fx) {
      fx = f;
      x = cand;
    }
  }

  auto eval = objective.evaluate(as_theta(x), true);
  Eigen::Vector3d g = as_vec(eval.gradient);
  const double at_bound = 1e-10;

  TwoComponentEstimate est;
  est.reml = options.reml;
  int iter = 0;
  double pg_norm = 0.0;
  bool steepest = false;
  for (; iter < options.max_iter; ++iter) {
    std::array<bool, 3> active{};
    Eigen::Vector3d pg = g;
    for (int i = 0; i < 3; ++i) {
      active[i] = (x[i] <= lo + at_bound && g[i] > 0.0) || (x[i] >= hi - at_bound && g[i] < 0.0);
      if (active[i]) pg[i] = 0.0;
    }
    pg_norm = pg.lpNorm<Eigen::Infinity>();
    if (pg_norm < options.gradient_tol) {
      est.converged = true;
      break;
    }
    // Newton-type step with the information matrix on the free coordinates;
    // the extra diagonal g_i comes from the log parameterization and is kept
    // only where it adds curvature.
    Eigen::Vector3d d = -pg;
    if (!steepest) {
      Eigen::Matrix3d b;
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) b(i, j) = eval.information[i][j];
      for (int i = 0; i < 3; ++i) {
        b(i, i) += std::max(g[i], 0.0);
        if (active[i]) {
          b.row(i).setZero();
          b.col(i).setZero();
          b(i, i) = 1.0;
        }
      }
      const Eigen::LDLT<Eigen::Matrix3d> ldlt(b);
      if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
        const Eigen::Vector3d newton = -ldlt.solve(pg);
        if (newton.allFinite() && newton.dot(pg) < 0.0) d = newton;
      }
    }
    for (int i = 0; i < 3; ++i)
      if (active[i]) d[i] = 0.0;
    // Cap the step at 2 in log-space.
    const double dmax = d.lpNorm<Eigen::Infinity>();
    double step = dmax > 2.0 ? 2.0 / dmax : 1.0;
    bool accepted = false;
    Eigen::Vector3d x_new;
    double f_new = 0.0;
    for (int ls = 0; ls < 40; ++ls) {
      x_new = clamp(x + step * d);
      f_new = objective.value(as_theta(x_new));
      if (f_new <= fx + 1e-4 * g.dot(x_new - x)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (!steepest) {
        steepest = true;
        continue;
      }
      // No descent left at rounding level.
      est.converged = pg_norm < 1e-5;
      break;
    }
    steepest = false;
    x = x_new;
    fx = f_new;
    eval = objective.evaluate(as_theta(x), true);
    g = as_vec(eval.gradient);
  }

  // In log coordinates the gradient vanishes as a component shrinks, so one
  // heading for zero can stall short of the bound; move it there when that
  // does not worsen the objective.
  for (int i = 0; i < 3; ++i) {
    if (x[i] <= lo + at_bound || !(g[i] > 0.0)) continue;
    Eigen::Vector3d cand = x;
    cand[i] = lo;
    const double fc = objective.value(as_theta(cand));
    if (fc <= fx + 1e-12 * std::abs(fx)) {
      x = cand;
      fx = fc;
    }
  }

  const double nd = static_cast<double>(y.size());
  est.sigma2_S = std::exp(x[0]);
  est.sigma2_Sc = std::exp(x[1]);
  est.sigma2_e = std::exp(x[2]);
  est.pinned_S = x[0] <= lo + at_bound;
  est.pinned_Sc = x[1] <= lo + at_bound;
  est.pinned_e = x[2] <= lo + at_bound;
  est.iterations = iter;
  est.gradient_norm = pg_norm;
  est.log_likelihood = -nd * fx - 0.5 * nd * std::log(2.0 * std::numbers::pi);
  return est;
}

TwoComponentEstimate ml_two_component(const PhenotypeVector& y, const GenotypeMatrix& z, const IndexSet& s,
                                      const TwoComponentOptions& options) {
  const Index m = z.cols();
  validate_index_set(s, m, "two-component subset");
  if (s.empty() || static_cast<Index>(s.size()) == m) {
    throw Error(ErrorKind::InvalidArgument, "subset must be a proper nonempty subset of the SNPs");
  }
  if (z.rows() != y.size()) {
    throw Error(ErrorKind::DimensionMismatch,
                fmt::format("genotypes have {} rows but phenotype has {} entries", z.rows(), y.size()));
  }
  const IndexSet sc = complement(s, m);
  const Matrix k_s = scaled_gram(select_columns(z.z(), s), static_cast<double>(s.size()));
  const Matrix k_sc = scaled_gram(select_columns(z.z(), sc), static_cast<double>(sc.size()));
  return ml_two_component(y, k_s, k_sc, options);
}

}  // namespace h2k
