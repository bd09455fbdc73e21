#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "ape/crossfit.hpp"
#include "ape/dataset.hpp"
#include "ape/error.hpp"
#include "ape/linalg.hpp"
#include "ape/stats.hpp"

namespace ape {

enum class Method {
  RolsKnownNu,
  RolsMl,
  OlsFwl,
  DmlPlr,
  SimpleOls,
  InteractedOls,
  PlSpline,
  IvApe,
};

inline const char* method_name(Method m) {
  switch (m) {
    case Method::RolsKnownNu: return "rols_known_nu";
    case Method::RolsMl: return "rols_ml";
    case Method::OlsFwl: return "ols_fwl";
    case Method::DmlPlr: return "dml_plr";
    case Method::SimpleOls: return "simple_ols";
    case Method::InteractedOls: return "interacted_ols";
    case Method::PlSpline: return "pl_spline";
    case Method::IvApe: return "iv_ape";
  }
  return "?";
}

struct ApeEstimate {
  double point = 0.0;
  std::optional<double> std_error;
  std::optional<double> ci_low, ci_high;
  Method method = Method::RolsKnownNu;
  Eigen::Index n_used = 0;
  std::map<std::string, double> diagnostics;

  // 95% normal-approximation interval from the standard error.
  void attach_ci(double z = 1.959963984540054) {
    if (std_error) {
      ci_low = point - z * *std_error;
      ci_high = point + z * *std_error;
    }
  }
};

// beta = sum(nu_i y_i) / sum(nu_i^2), the ratio of raw moments; no intercept
// is fitted because the estimand is a raw-moment ratio, not a covariance
// ratio. `center_nu` demeans nu first for users who want the covariance form.
// The standard error is the univariate HC0 sandwich of the no-intercept
// regression of y on nu.
inline ApeEstimate rols(const Eigen::VectorXd& nu, const Eigen::VectorXd& y,
                        bool center_nu = false) {
  if (nu.size() != y.size())
    throw usage_error("rols: nu and y lengths differ");
  Eigen::VectorXd v = nu;
  if (center_nu) v.array() -= v.mean();
  const double s2 = v.squaredNorm();
  if (!(s2 > 0) || v.maxCoeff() == v.minCoeff())
    throw numeric_error("rols: residualised treatment has zero variance");

  ApeEstimate est;
  est.method = Method::RolsKnownNu;
  est.n_used = y.size();
  est.point = v.dot(y) / s2;
  const Eigen::VectorXd u = y - est.point * v;
  est.std_error = std::sqrt((v.array().square() * u.array().square()).sum()) / s2;
  est.attach_ci();
  return est;
}

// Regresses Y on [X, r(Z), 1]; by Frisch-Waugh-Lovell this equals rols on the
// residual X - fitted(r(Z)). r_values holds the treatment form evaluated at
// every Z row.
inline ApeEstimate ols_fwl(const Dataset& data, const Eigen::VectorXd& r_values) {
  if (r_values.size() != data.n()) throw usage_error("ols_fwl: r(Z) length mismatch");
  DesignMatrix design;
  design.values.resize(data.n(), 3);
  design.values.col(0) = data.x;
  design.values.col(1) = r_values;
  design.values.col(2).setOnes();
  design.labels = {"x", "r(z)", "1"};
  const LeastSquaresFit fit = solve_ls(design, data.y);
  const SandwichCovariance cov = sandwich_variance(design, fit);

  ApeEstimate est;
  est.method = Method::OlsFwl;
  est.n_used = data.n();
  est.point = fit.coefficients[0];
  est.std_error = std::sqrt(cov.matrix(0, 0));
  est.attach_ci();
  return est;
}

// Partialling-out moment for the partially linear model: cross-fit residuals
// of X and Y on Z, theta = E_n[xres*yres] / E_n[xres^2], with the
// influence-function plug-in standard error. One fold partition is shared by
// both nuisance fits.
inline ApeEstimate dml_plr(const Dataset& data, const LearnerSpec& spec_r,
                           const LearnerSpec& spec_l, int folds, std::uint64_t seed,
                           bool in_sample = false) {
  const CrossFitResult cfx =
      crossfit_residualise(data, Target::Treatment, spec_r, folds, seed, in_sample);
  const CrossFitResult cfy =
      crossfit_residualise(data, Target::Outcome, spec_l, folds, seed, in_sample);
  const Eigen::VectorXd& xres = cfx.residuals;
  const Eigen::VectorXd& yres = cfy.residuals;
  const Eigen::Index n = data.n();

  const double denom = xres.squaredNorm() / static_cast<double>(n);
  if (!(denom > 0) || xres.maxCoeff() == xres.minCoeff())
    throw numeric_error("dml_plr: residualised treatment is degenerate");

  ApeEstimate est;
  est.method = Method::DmlPlr;
  est.n_used = n;
  est.point = xres.dot(yres) / xres.squaredNorm();

  const Eigen::ArrayXd psi = (yres.array() - est.point * xres.array()) * xres.array();
  const double psi2 = psi.square().mean();
  est.std_error = std::sqrt(psi2 / (denom * denom) / static_cast<double>(n));
  est.attach_ci();

  est.diagnostics["corr_nu_z_max"] = cfx.corr_resid_z_max;
  for (Eigen::Index k = 0; k < data.z.cols(); ++k)
    est.diagnostics["corr_nu_z" + std::to_string(k + 1)] =
        correlation(xres, data.z.col(k));
  est.diagnostics["rmse_r"] = cfx.rmse;
  est.diagnostics["rmse_l"] = cfy.rmse;
  return est;
}

// Y ~ 1 + X + Z, the textbook benchmark; X coefficient with sandwich SE.
inline ApeEstimate simple_ols(const Dataset& data) {
  const Eigen::Index k = data.num_controls();
  if (data.n() <= k + 2)
    throw usage_error("simple_ols: need n > K + 2");
  DesignMatrix design;
  design.values.resize(data.n(), k + 2);
  design.values.col(0).setOnes();
  design.values.col(1) = data.x;
  design.labels = {"1", "x"};
  for (Eigen::Index j = 0; j < k; ++j) {
    design.values.col(2 + j) = data.z.col(j);
    design.labels.push_back("z" + std::to_string(j + 1));
  }
  const LeastSquaresFit fit = solve_ls(design, data.y);
  const SandwichCovariance cov = sandwich_variance(design, fit);

  ApeEstimate est;
  est.method = Method::SimpleOls;
  est.n_used = data.n();
  est.point = fit.coefficients[1];
  est.std_error = std::sqrt(cov.matrix(1, 1));
  est.attach_ci();
  return est;
}

// Polynomial regression in {X, Z} up to the given total degree. The APE is
// the sample average of the fitted polynomial's analytic X-derivative; its
// variance comes from the delta method with the sandwich coefficient
// covariance.
inline ApeEstimate interacted_ols(const Dataset& data, int degree = 3) {
  PolynomialBasis basis = polynomial_design(data.x, data.z, degree);
  const Eigen::Index q = basis.design.q();
  if (data.n() <= q)
    throw usage_error("interacted_ols: need n > " + std::to_string(q) + " polynomial columns");
  const LeastSquaresFit fit = solve_ls(basis.design, data.y);
  const SandwichCovariance cov = sandwich_variance(basis.design, fit);

  // gradient entry c: mean_i d(monomial_c)/dx at row i
  const Eigen::Index n = data.n();
  Eigen::VectorXd grad(q);
  for (Eigen::Index c = 0; c < q; ++c) {
    const auto& expo = basis.exponents[static_cast<std::size_t>(c)];
    const int a = expo[0];
    if (a == 0) {
      grad[c] = 0.0;
      continue;
    }
    Eigen::ArrayXd deriv = Eigen::ArrayXd::Constant(n, static_cast<double>(a));
    for (int e = 0; e < a - 1; ++e) deriv *= data.x.array();
    for (std::size_t kk = 1; kk < expo.size(); ++kk)
      for (int e = 0; e < expo[kk]; ++e)
        deriv *= data.z.col(static_cast<Eigen::Index>(kk - 1)).array();
    grad[c] = deriv.mean();
  }

  ApeEstimate est;
  est.method = Method::InteractedOls;
  est.n_used = n;
  est.point = grad.dot(fit.coefficients);
  est.std_error = std::sqrt(grad.dot(cov.matrix * grad));
  est.attach_ci();
  return est;
}

// Partially linear baseline Y ~ 1 + X + spline(Z_1) + ... + spline(Z_K);
// a B-spline least-squares stand-in for the paper's GAM.
inline ApeEstimate pl_spline(const Dataset& data, int spline_degree = 3, int knots = 5) {
  if (data.num_controls() < 1) throw usage_error("pl_spline: no control columns");
  SplineDesign sd = bspline_design(data.z, spline_degree, knots);
  DesignMatrix design;
  const Eigen::Index qs = sd.design.q();
  design.values.resize(data.n(), qs + 1);
  design.values.col(0) = sd.design.values.col(0);  // intercept
  design.values.col(1) = data.x;
  design.values.rightCols(qs - 1) = sd.design.values.rightCols(qs - 1);
  design.labels = {"1", "x"};
  design.labels.insert(design.labels.end(), sd.design.labels.begin() + 1, sd.design.labels.end());
  if (data.n() <= design.q()) throw usage_error("pl_spline: need n > number of basis columns");

  const LeastSquaresFit fit = solve_ls(design, data.y);
  const SandwichCovariance cov = sandwich_variance(design, fit);

  ApeEstimate est;
  est.method = Method::PlSpline;
  est.n_used = data.n();
  est.point = fit.coefficients[1];
  est.std_error = std::sqrt(cov.matrix(1, 1));
  est.attach_ci();
  return est;
}

// Just-identified IV ratio beta = E_n[y w~] / E_n[x w~] with the instrument
// demeaned internally; HC0 influence-function standard error.
inline ApeEstimate iv_ape(const Eigen::VectorXd& w, const Eigen::VectorXd& x,
                          const Eigen::VectorXd& y) {
  const Eigen::Index n = w.size();
  if (x.size() != n || y.size() != n) throw usage_error("iv_ape: column lengths differ");
  Eigen::VectorXd wd = w.array() - w.mean();
  const double wx = wd.dot(x);
  const double scale = std::sqrt(wd.squaredNorm() * x.squaredNorm());
  if (wd.maxCoeff() == wd.minCoeff() || std::abs(wx) <= 1e-12 * (1.0 + scale))
    throw numeric_error("iv_ape: degenerate or weak first stage (sum w~x ~ 0)");

  ApeEstimate est;
  est.method = Method::IvApe;
  est.n_used = n;
  est.point = wd.dot(y) / wx;
  Eigen::ArrayXd u = y.array() - est.point * x.array();
  u -= u.mean();
  est.std_error = std::sqrt((wd.array().square() * u.square()).sum()) / std::abs(wx);
  est.attach_ci();
  return est;
}

}  // namespace ape
