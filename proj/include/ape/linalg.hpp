#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "ape/error.hpp"

namespace ape {

struct DesignMatrix {
  Eigen::MatrixXd values;            // n x q
  std::vector<std::string> labels;   // length q, unique

  Eigen::Index n() const { return values.rows(); }
  Eigen::Index q() const { return values.cols(); }

  Eigen::Index column(const std::string& label) const {
    for (std::size_t j = 0; j < labels.size(); ++j)
      if (labels[j] == label) return static_cast<Eigen::Index>(j);
    throw usage_error("design matrix has no column labelled '" + label + "'");
  }
};

struct LeastSquaresFit {
  Eigen::VectorXd coefficients;  // length q
  Eigen::VectorXd fitted;        // length n
  Eigen::VectorXd residuals;     // y - fitted
};

struct SandwichCovariance {
  Eigen::MatrixXd matrix;  // q x q, diagonal entries are squared std. errors
  std::string df_note;
};

// Least squares via column-pivoted Householder QR. Rank is judged against
// tol = n * eps * |R_00| (|R_00| is the largest column norm under pivoting);
// a deficient design reports the first column left out of the pivot basis.
inline LeastSquaresFit solve_ls(const DesignMatrix& design, const Eigen::VectorXd& y) {
  const Eigen::Index n = design.n();
  const Eigen::Index q = design.q();
  if (y.size() != n)
    throw usage_error("solve_ls: y length " + std::to_string(y.size()) + " != design rows " +
                      std::to_string(n));
  if (n < q)
    throw usage_error("solve_ls: need n >= q, got n = " + std::to_string(n) +
                      ", q = " + std::to_string(q));
  {
    std::set<std::string> seen(design.labels.begin(), design.labels.end());
    if (static_cast<Eigen::Index>(seen.size()) != q)
      throw usage_error("solve_ls: design labels are not unique");
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design.values);
  const auto& R = qr.matrixR();
  const double r00 = std::abs(R(0, 0));
  const double tol = static_cast<double>(n) * std::numeric_limits<double>::epsilon() * r00;
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < q; ++i)
    if (std::abs(R(i, i)) > tol) ++rank;

  if (rank < q || r00 == 0.0) {
    // Columns past the numerical rank in pivot order are the dependent ones.
    const auto& piv = qr.colsPermutation().indices();
    const Eigen::Index bad = (r00 == 0.0) ? piv[0] : piv[rank];
    throw numeric_error("solve_ls: design is rank deficient (rank " + std::to_string(rank) +
                        " < " + std::to_string(q) + "); column '" +
                        design.labels[static_cast<std::size_t>(bad)] + "' is linearly dependent");
  }

  LeastSquaresFit fit;
  fit.coefficients = qr.solve(y);
  fit.fitted = design.values * fit.coefficients;
  fit.residuals = y - fit.fitted;
  return fit;
}

// HC0 sandwich (X'X)^-1 (sum_i x_i x_i' u_i^2) (X'X)^-1; with hc1 the meat is
// scaled by n/(n-q). Diagonal entries are the squared coefficient standard
// errors (the finite-sample plug-in of V/n).
inline SandwichCovariance sandwich_variance(const DesignMatrix& design,
                                            const LeastSquaresFit& fit, bool hc1 = false) {
  const Eigen::Index n = design.n();
  const Eigen::Index q = design.q();
  if (fit.residuals.size() != n || fit.coefficients.size() != q)
    throw usage_error("sandwich_variance: fit does not match design");
  if (n <= q)
    throw usage_error("sandwich_variance: need n > q");

  const Eigen::MatrixXd xtx = design.values.transpose() * design.values;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(xtx);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
    throw numeric_error("sandwich_variance: X'X is singular");

  // meat = X' diag(u^2) X
  const Eigen::MatrixXd weighted =
      design.values.array().colwise() * fit.residuals.array().square();
  Eigen::MatrixXd meat = design.values.transpose() * weighted;
  if (hc1) meat *= static_cast<double>(n) / static_cast<double>(n - q);

  const Eigen::MatrixXd bread = ldlt.solve(Eigen::MatrixXd::Identity(q, q));
  Eigen::MatrixXd cov = bread * meat * bread;
  cov = 0.5 * (cov + cov.transpose()).eval();
  for (Eigen::Index i = 0; i < q; ++i) {
    if (cov(i, i) < 0) {
      if (cov(i, i) > -1e-12 * (1.0 + meat.norm())) {
        cov(i, i) = 0.0;
      } else {
        throw numeric_error("sandwich_variance: negative variance on the diagonal");
      }
    }
  }

  SandwichCovariance out;
  out.matrix = std::move(cov);
  out.df_note = hc1 ? "HC1 (n/(n-q))" : "HC0";
  return out;
}

namespace detail {

// Exponent tuples with total degree <= degree, graded lexicographic order
// starting at the intercept.
inline void exponent_tuples(int nvars, int degree, std::vector<std::vector<int>>& out) {
  std::vector<int> cur(static_cast<std::size_t>(nvars), 0);
  for (int total = 0; total <= degree; ++total) {
    // enumerate compositions of `total` into nvars parts, lexicographic
    std::vector<int> comp(static_cast<std::size_t>(nvars), 0);
    auto rec = [&](auto&& self, int pos, int remaining) -> void {
      if (pos == nvars - 1) {
        comp[static_cast<std::size_t>(pos)] = remaining;
        out.push_back(comp);
        return;
      }
      for (int v = remaining; v >= 0; --v) {
        comp[static_cast<std::size_t>(pos)] = v;
        self(self, pos + 1, remaining - v);
      }
    };
    if (nvars == 0) {
      if (total == 0) out.push_back({});
      continue;
    }
    rec(rec, 0, total);
  }
}

inline std::string monomial_label(const std::vector<int>& expo,
                                  const std::vector<std::string>& names) {
  std::string label;
  for (std::size_t k = 0; k < expo.size(); ++k) {
    if (expo[k] == 0) continue;
    if (!label.empty()) label += "*";
    label += names[k];
    if (expo[k] > 1) label += "^" + std::to_string(expo[k]);
  }
  return label.empty() ? "1" : label;
}

}  // namespace detail

// All monomials of the named variables up to the given total degree,
// intercept included. Generic building block for polynomial regressions.
struct PolynomialBasis {
  DesignMatrix design;
  std::vector<std::vector<int>> exponents;  // per column, aligned with labels
  std::vector<std::string> var_names;
  int degree = 0;

  // Evaluates the basis at new points (columns of `vars` in var_names order).
  Eigen::MatrixXd evaluate(const Eigen::MatrixXd& vars) const {
    const Eigen::Index n = vars.rows();
    Eigen::MatrixXd out(n, static_cast<Eigen::Index>(exponents.size()));
    for (std::size_t c = 0; c < exponents.size(); ++c) {
      Eigen::VectorXd col = Eigen::VectorXd::Ones(n);
      for (std::size_t k = 0; k < exponents[c].size(); ++k)
        for (int e = 0; e < exponents[c][k]; ++e)
          col.array() *= vars.col(static_cast<Eigen::Index>(k)).array();
      out.col(static_cast<Eigen::Index>(c)) = col;
    }
    return out;
  }
};

inline PolynomialBasis polynomial_basis(const Eigen::MatrixXd& vars,
                                        const std::vector<std::string>& names, int degree) {
  if (degree < 1) throw usage_error("polynomial basis needs degree >= 1");
  if (static_cast<Eigen::Index>(names.size()) != vars.cols())
    throw usage_error("polynomial basis: names/columns mismatch");
  PolynomialBasis basis;
  basis.var_names = names;
  basis.degree = degree;
  detail::exponent_tuples(static_cast<int>(vars.cols()), degree, basis.exponents);
  basis.design.values = basis.evaluate(vars);
  for (const auto& expo : basis.exponents)
    basis.design.labels.push_back(detail::monomial_label(expo, names));
  return basis;
}

// Design with all interactions of {x, z_1..z_K} up to the total degree.
inline PolynomialBasis polynomial_design(const Eigen::VectorXd& x, const Eigen::MatrixXd& z,
                                         int degree) {
  Eigen::MatrixXd vars(x.size(), 1 + z.cols());
  vars.col(0) = x;
  if (z.cols() > 0) vars.rightCols(z.cols()) = z;
  std::vector<std::string> names{"x"};
  for (Eigen::Index k = 0; k < z.cols(); ++k) names.push_back("z" + std::to_string(k + 1));
  return polynomial_basis(vars, names, degree);
}

namespace detail {

// Empirical quantile with linear interpolation on the sorted sample.
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
  const std::size_t n = sorted.size();
  if (n == 1) return sorted[0];
  const double h = p * static_cast<double>(n - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, n - 1);
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

}  // namespace detail

// One B-spline basis on a clamped knot vector with interior knots at
// empirical quantiles of the training values. Knots are kept so the basis
// can be evaluated at new points (clamped to the training range).
struct BsplineBasis {
  int degree = 3;
  std::vector<double> knots;  // full clamped vector
  Eigen::Index num_basis() const {
    return static_cast<Eigen::Index>(knots.size()) - degree - 1;
  }

  Eigen::MatrixXd evaluate(const Eigen::VectorXd& v) const {
    const Eigen::Index n = v.size();
    const Eigen::Index nb = num_basis();
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, nb);
    const double lo = knots.front();
    const double hi = knots.back();
    const int p = degree;
    const int m = static_cast<int>(knots.size());
    std::vector<double> coxde(static_cast<std::size_t>(m), 0.0);
    for (Eigen::Index i = 0; i < n; ++i) {
      double t = std::min(std::max(v[i], lo), hi);
      // Cox-de Boor over all basis functions at t.
      for (int j = 0; j < m - 1; ++j) {
        const bool last_span = (knots[static_cast<std::size_t>(j)] <= t &&
                                t == hi && knots[static_cast<std::size_t>(j + 1)] >= hi);
        coxde[static_cast<std::size_t>(j)] =
            ((knots[static_cast<std::size_t>(j)] <= t &&
              t < knots[static_cast<std::size_t>(j + 1)]) || last_span)
                ? 1.0 : 0.0;
      }
      for (int d = 1; d <= p; ++d) {
        for (int j = 0; j < m - d - 1; ++j) {
          const double k_j = knots[static_cast<std::size_t>(j)];
          const double k_jd = knots[static_cast<std::size_t>(j + d)];
          const double k_j1 = knots[static_cast<std::size_t>(j + 1)];
          const double k_jd1 = knots[static_cast<std::size_t>(j + d + 1)];
          double a = 0.0, b = 0.0;
          if (k_jd > k_j) a = (t - k_j) / (k_jd - k_j) * coxde[static_cast<std::size_t>(j)];
          if (k_jd1 > k_j1)
            b = (k_jd1 - t) / (k_jd1 - k_j1) * coxde[static_cast<std::size_t>(j + 1)];
          coxde[static_cast<std::size_t>(j)] = a + b;
        }
      }
      for (Eigen::Index j = 0; j < nb; ++j) out(i, j) = coxde[static_cast<std::size_t>(j)];
    }
    return out;
  }
};

inline BsplineBasis make_bspline_basis(const Eigen::VectorXd& v, int degree, int interior_knots) {
  if (degree < 1) throw usage_error("bspline basis needs degree >= 1");
  if (interior_knots < 2) throw usage_error("bspline basis needs at least 2 interior knots");
  std::vector<double> sorted(v.data(), v.data() + v.size());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> uniq(sorted);
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  if (static_cast<int>(uniq.size()) < interior_knots + 2)
    throw numeric_error("bspline basis: fewer distinct values (" + std::to_string(uniq.size()) +
                        ") than required for " + std::to_string(interior_knots) +
                        " interior knots");

  BsplineBasis basis;
  basis.degree = degree;
  const double lo = sorted.front();
  const double hi = sorted.back();
  for (int r = 0; r <= degree; ++r) basis.knots.push_back(lo);
  for (int i = 1; i <= interior_knots; ++i) {
    double q = detail::quantile_sorted(sorted, static_cast<double>(i) /
                                                   static_cast<double>(interior_knots + 1));
    basis.knots.push_back(q);
  }
  for (int r = 0; r <= degree; ++r) basis.knots.push_back(hi);
  std::sort(basis.knots.begin(), basis.knots.end());
  return basis;
}

// Additive spline design: one shared intercept, then per control column its
// B-spline basis with the first basis function dropped for identification.
// No cross-terms between controls.
struct SplineDesign {
  DesignMatrix design;
  std::vector<BsplineBasis> bases;  // one per z column

  Eigen::MatrixXd evaluate(const Eigen::MatrixXd& z) const {
    const Eigen::Index n = z.rows();
    Eigen::Index q = 1;
    for (const auto& b : bases) q += b.num_basis() - 1;
    Eigen::MatrixXd out(n, q);
    out.col(0).setOnes();
    Eigen::Index at = 1;
    for (std::size_t k = 0; k < bases.size(); ++k) {
      Eigen::MatrixXd bk = bases[k].evaluate(z.col(static_cast<Eigen::Index>(k)));
      out.middleCols(at, bk.cols() - 1) = bk.rightCols(bk.cols() - 1);
      at += bk.cols() - 1;
    }
    return out;
  }
};

inline SplineDesign bspline_design(const Eigen::MatrixXd& z, int spline_degree,
                                   int interior_knots) {
  if (z.cols() < 1) throw usage_error("bspline_design needs at least one column");
  SplineDesign sd;
  for (Eigen::Index k = 0; k < z.cols(); ++k)
    sd.bases.push_back(make_bspline_basis(z.col(k), spline_degree, interior_knots));
  sd.design.values = sd.evaluate(z);
  sd.design.labels.push_back("1");
  for (Eigen::Index k = 0; k < z.cols(); ++k) {
    const Eigen::Index nb = sd.bases[static_cast<std::size_t>(k)].num_basis();
    for (Eigen::Index j = 1; j < nb; ++j)
      sd.design.labels.push_back("z" + std::to_string(k + 1) + "_bs" + std::to_string(j));
  }
  return sd;
}

}  // namespace ape
