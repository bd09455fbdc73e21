#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ape/dataset.hpp"
#include "ape/diagnostics.hpp"
#include "ape/distributions.hpp"
#include "ape/error.hpp"
#include "ape/estimators.hpp"
#include "ape/parallel.hpp"
#include "ape/rng.hpp"
#include "ape/stats.hpp"

namespace ape {

// DGP families:
//   additive: Y = X + Z1 + Z2 + e                X = Z1 + Z2 + v
//   simple:   Y = sum_m X^m Z1 Z2 + e            X = Z1 Z2 + v
//   complex:  Y = sum_m X^m cos(Z1) sin(Z2) + e  X = 5 sin(Z1) cos(Z2) + v
//   fig1:     Y = 2(X + X^2) + Z^3 + e           X = exp(Z) + v, Z ~ U(0,2)
// Z1, Z2 ~ N(1,1) and e ~ N(0,1) throughout; v follows error_dist.
enum class YFamily { Additive, Simple, Complex, Fig1 };
enum class XFamily { Additive, Simple, Complex, Fig1 };

inline const char* to_string(YFamily f) {
  switch (f) {
    case YFamily::Additive: return "additive";
    case YFamily::Simple: return "simple";
    case YFamily::Complex: return "complex";
    case YFamily::Fig1: return "fig1";
  }
  return "?";
}
inline const char* to_string(XFamily f) {
  switch (f) {
    case XFamily::Additive: return "additive";
    case XFamily::Simple: return "simple";
    case XFamily::Complex: return "complex";
    case XFamily::Fig1: return "fig1";
  }
  return "?";
}

inline YFamily parse_y_family(const std::string& s) {
  if (s == "additive") return YFamily::Additive;
  if (s == "simple") return YFamily::Simple;
  if (s == "complex") return YFamily::Complex;
  if (s == "fig1") return YFamily::Fig1;
  throw usage_error("unknown Y family '" + s + "'");
}
inline XFamily parse_x_family(const std::string& s) {
  if (s == "additive") return XFamily::Additive;
  if (s == "simple") return XFamily::Simple;
  if (s == "complex") return XFamily::Complex;
  if (s == "fig1") return XFamily::Fig1;
  throw usage_error("unknown X family '" + s + "'");
}

struct DgpSpec {
  YFamily y_family = YFamily::Additive;
  XFamily x_family = XFamily::Additive;
  int m = 1;  // highest X power in the outcome
  ErrorDistribution error_dist = ErrorDistribution::normal(0, 1);
  Eigen::Index n = 1000;

  void validate() const {
    if (m < 1) throw usage_error("DGP needs M >= 1");
    if (n < 2) throw usage_error("DGP needs n >= 2");
    if ((y_family == YFamily::Fig1) != (x_family == XFamily::Fig1))
      throw usage_error("the fig1 Y and X families must be paired");
    if (y_family == YFamily::Additive && m != 1)
      throw usage_error("the additive Y family is linear in X; M must be 1");
    if (y_family == YFamily::Fig1 && m != 2)
      throw usage_error("the fig1 Y family is quadratic in X; M must be 2");
  }
};

// One exact DGP realisation with all latent components exposed.
struct SyntheticDraw {
  Dataset data;                  // nu_known carries the true error
  Eigen::VectorXd nu_true;
  Eigen::VectorXd r_of_z;        // confounding part of X
  Eigen::MatrixXd g_components;  // n x (M+1), column m holds g_m(Z_i)
  Eigen::VectorXd ape_contrib;   // sum_m m X^{m-1} g_m(Z_i) per row
};

inline SyntheticDraw draw(const DgpSpec& spec, std::uint64_t seed) {
  spec.validate();
  const Eigen::Index n = spec.n;
  const bool fig1 = spec.y_family == YFamily::Fig1;
  const Eigen::Index k = fig1 ? 1 : 2;

  Eigen::MatrixXd z(n, k);
  {
    Rng rng(seed, 1);
    if (fig1) {
      for (Eigen::Index i = 0; i < n; ++i) z(i, 0) = rng.uniform(0.0, 2.0);
    } else {
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < k; ++j) z(i, j) = rng.normal(1.0, 1.0);
    }
  }
  Eigen::VectorXd nu = sample(spec.error_dist, n, derive_seed(seed, 2));
  Eigen::VectorXd eps(n);
  {
    Rng rng(seed, 3);
    for (Eigen::Index i = 0; i < n; ++i) eps[i] = rng.normal();
  }

  Eigen::VectorXd r(n);
  switch (spec.x_family) {
    case XFamily::Additive: r = z.col(0) + z.col(1); break;
    case XFamily::Simple: r = z.col(0).cwiseProduct(z.col(1)); break;
    case XFamily::Complex:
      r = 5.0 * z.col(0).array().sin() * z.col(1).array().cos();
      break;
    case XFamily::Fig1: r = z.col(0).array().exp(); break;
  }
  const Eigen::VectorXd x = r + nu;

  Eigen::MatrixXd g(n, spec.m + 1);
  switch (spec.y_family) {
    case YFamily::Additive:
      g.col(0) = z.col(0) + z.col(1);
      g.col(1).setOnes();
      break;
    case YFamily::Simple: {
      const Eigen::VectorXd base = z.col(0).cwiseProduct(z.col(1));
      for (int m = 0; m <= spec.m; ++m) g.col(m) = base;
      break;
    }
    case YFamily::Complex: {
      const Eigen::ArrayXd base = z.col(0).array().cos() * z.col(1).array().sin();
      for (int m = 0; m <= spec.m; ++m) g.col(m) = base;
      break;
    }
    case YFamily::Fig1:
      g.col(0) = z.col(0).array().cube();
      g.col(1).setConstant(2.0);
      g.col(2).setConstant(2.0);
      break;
  }

  Eigen::VectorXd y = eps;
  Eigen::VectorXd ape_contrib = Eigen::VectorXd::Zero(n);
  Eigen::ArrayXd xpow = Eigen::ArrayXd::Ones(n);
  for (int m = 0; m <= spec.m; ++m) {
    y.array() += xpow * g.col(m).array();
    if (m + 1 <= spec.m)
      ape_contrib.array() += static_cast<double>(m + 1) * xpow * g.col(m + 1).array();
    xpow *= x.array();
  }

  SyntheticDraw d;
  d.data = Dataset::create(std::move(y), x, z, std::nullopt, nu);
  d.nu_true = std::move(nu);
  d.r_of_z = std::move(r);
  d.g_components = std::move(g);
  d.ape_contrib = std::move(ape_contrib);
  return d;
}

// Components view used by the diagnostics decompositions.
inline SyntheticDgpHandle make_dgp_handle(DgpSpec spec) {
  return [spec](Eigen::Index n, std::uint64_t seed) {
    DgpSpec s = spec;
    s.n = n;
    const SyntheticDraw d = draw(s, seed);
    SyntheticComponents c;
    c.nu = d.nu_true;
    c.r = d.r_of_z;
    c.g = d.g_components;
    c.y = d.data.y;
    return c;
  };
}

struct TrueApe {
  double value = 0.0;
  double se = 0.0;  // Monte Carlo standard error of the oracle mean
};

// Monte Carlo oracle: the mean of sum_m m X^{m-1} g_m(Z) over a fresh large
// draw. Always recomputed, never hard-coded from table headers.
inline TrueApe true_ape(const DgpSpec& spec, Eigen::Index oracle_n, std::uint64_t seed) {
  if (oracle_n < 1000000) throw usage_error("true_ape: oracle_n must be >= 1e6");
  DgpSpec s = spec;
  s.n = oracle_n;
  const SyntheticDraw d = draw(s, seed);
  TrueApe t;
  t.value = d.ape_contrib.mean();
  t.se = sd_sample(d.ape_contrib) / std::sqrt(static_cast<double>(oracle_n));
  return t;
}

// A named estimator runnable on a synthetic draw. Known-form estimators pull
// nu_true / r_of_z from the draw; ML estimators see only the dataset.
struct EstimatorConfig {
  std::string name;
  std::function<double(const SyntheticDraw&, std::uint64_t seed)> run;
};

namespace detail {

// Splits on commas at parenthesis depth zero.
inline std::vector<std::string> split_top_level(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  int depth = 0;
  for (char ch : s) {
    if (ch == '(') ++depth;
    if (ch == ')') --depth;
    if (ch == ',' && depth == 0) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (!trim(cur).empty() || !out.empty()) out.push_back(cur);
  return out;
}

inline std::map<std::string, std::string> parse_kv_args(const std::string& inner,
                                                        const std::string& context) {
  std::map<std::string, std::string> kv;
  for (const auto& item : split_top_level(inner)) {
    if (trim(item).empty()) continue;
    const std::size_t eq = item.find('=');
    if (eq == std::string::npos)
      throw usage_error("expected key=value in '" + context + "'");
    kv[trim(item.substr(0, eq))] = trim(item.substr(eq + 1));
  }
  return kv;
}

}  // namespace detail

// Builds an estimator from a short spec string:
//   rols_known | ols_fwl | simple_ols | interacted_ols(degree=3)
//   pl_spline(degree=3,knots=5)
//   rols_ml(r=gbt(trees=300,depth=3,lr=0.1,min_leaf=20),folds=5)
//   dml(r=...,l=...,folds=5)
inline EstimatorConfig parse_estimator(const std::string& text) {
  const std::string s = trim(text);
  const std::size_t open = s.find('(');
  const std::string name = (open == std::string::npos) ? s : s.substr(0, open);
  std::map<std::string, std::string> kv;
  if (open != std::string::npos) {
    if (s.back() != ')') throw usage_error("cannot parse estimator spec '" + text + "'");
    kv = detail::parse_kv_args(s.substr(open + 1, s.size() - open - 2), text);
  }
  auto geti = [&](const char* key, int fallback) {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    long long v;
    if (!parse_long(it->second, v)) throw usage_error(std::string("bad integer for '") + key + "'");
    return static_cast<int>(v);
  };

  EstimatorConfig cfg;
  cfg.name = s;
  if (name == "rols_known") {
    cfg.run = [](const SyntheticDraw& d, std::uint64_t) {
      return rols(*d.data.nu_known, d.data.y).point;
    };
  } else if (name == "ols_fwl") {
    cfg.run = [](const SyntheticDraw& d, std::uint64_t) {
      return ols_fwl(d.data, d.r_of_z).point;
    };
  } else if (name == "simple_ols") {
    cfg.run = [](const SyntheticDraw& d, std::uint64_t) { return simple_ols(d.data).point; };
  } else if (name == "interacted_ols") {
    const int degree = geti("degree", 3);
    cfg.run = [degree](const SyntheticDraw& d, std::uint64_t) {
      return interacted_ols(d.data, degree).point;
    };
  } else if (name == "pl_spline") {
    const int degree = geti("degree", 3);
    const int knots = geti("knots", 5);
    cfg.run = [degree, knots](const SyntheticDraw& d, std::uint64_t) {
      return pl_spline(d.data, degree, knots).point;
    };
  } else if (name == "rols_ml") {
    auto it = kv.find("r");
    const LearnerSpec learner =
        (it != kv.end()) ? parse_learner(it->second)
                         : parse_learner("gbt(trees=300,depth=3,lr=0.1,min_leaf=20)");
    const int folds = geti("folds", 5);
    const bool in_sample = geti("in_sample", 0) != 0;
    cfg.run = [learner, folds, in_sample](const SyntheticDraw& d, std::uint64_t seed) {
      const CrossFitResult cf =
          crossfit_residualise(d.data, Target::Treatment, learner, folds, seed, in_sample);
      return rols(cf.residuals, d.data.y).point;
    };
  } else if (name == "dml") {
    auto itr = kv.find("r");
    auto itl = kv.find("l");
    const LearnerSpec lr = (itr != kv.end())
                               ? parse_learner(itr->second)
                               : parse_learner("gbt(trees=300,depth=3,lr=0.1,min_leaf=20)");
    const LearnerSpec ll = (itl != kv.end()) ? parse_learner(itl->second) : lr;
    const int folds = geti("folds", 5);
    cfg.run = [lr, ll, folds](const SyntheticDraw& d, std::uint64_t seed) {
      return dml_plr(d.data, lr, ll, folds, seed).point;
    };
  } else {
    throw usage_error("unknown estimator '" + name + "'");
  }
  return cfg;
}

struct SimCell {
  DgpSpec spec;
  std::string estimator;
  double true_ape = 0.0;
  double true_ape_se = 0.0;
  double mean = 0.0;
  double sd = 0.0;   // population SD across replications
  double mse = 0.0;  // mean squared error against true_ape
  int reps = 0;
  int failures = 0;
  std::vector<double> estimates;  // kept only when requested
};

struct SimReport {
  std::vector<SimCell> cells;
  int reps = 0;
  std::uint64_t base_seed = 0;
};

// Monte Carlo replication engine. Within one replication a single draw is
// shared across every estimator, so cell differences are attributable only
// to method. Replication r of grid cell c uses seed derive(base, c) + r;
// the report is identical for any worker count.
inline SimReport run_grid(const std::vector<DgpSpec>& specs,
                          const std::vector<EstimatorConfig>& estimators, int reps,
                          std::uint64_t base_seed, int workers = 1, bool keep_estimates = false,
                          Eigen::Index oracle_n = 1000000) {
  if (reps < 2) throw usage_error("run_grid: need reps >= 2");
  if (specs.empty() || estimators.empty())
    throw usage_error("run_grid: empty grid or estimator list");

  SimReport report;
  report.reps = reps;
  report.base_seed = base_seed;

  // One oracle evaluation per distinct (families, M, error) combination.
  std::map<std::string, TrueApe> oracle;
  for (const auto& spec : specs) {
    spec.validate();
    const std::string key = std::string(to_string(spec.y_family)) + "|" + to_string(spec.x_family) +
                            "|" + std::to_string(spec.m) + "|" + to_string(spec.error_dist);
    if (!oracle.count(key)) oracle[key] = true_ape(spec, oracle_n, derive_seed(base_seed, 0xA9E));
  }

  for (std::size_t c = 0; c < specs.size(); ++c) {
    const DgpSpec& spec = specs[c];
    const std::string key = std::string(to_string(spec.y_family)) + "|" + to_string(spec.x_family) +
                            "|" + std::to_string(spec.m) + "|" + to_string(spec.error_dist);
    const TrueApe truth = oracle[key];
    const std::uint64_t cell_seed = derive_seed(base_seed, static_cast<std::uint64_t>(c));

    Eigen::MatrixXd est(reps, static_cast<Eigen::Index>(estimators.size()));
    Eigen::Matrix<char, Eigen::Dynamic, Eigen::Dynamic> ok(reps,
                                                           static_cast<Eigen::Index>(estimators.size()));
    parallel_for(reps, workers, [&](int r) {
      const std::uint64_t rep_seed = cell_seed + static_cast<std::uint64_t>(r);
      const SyntheticDraw d = draw(spec, rep_seed);
      for (std::size_t e = 0; e < estimators.size(); ++e) {
        const std::uint64_t est_seed = derive_seed(rep_seed, 0xE57 + static_cast<std::uint64_t>(e));
        try {
          est(r, static_cast<Eigen::Index>(e)) = estimators[e].run(d, est_seed);
          ok(r, static_cast<Eigen::Index>(e)) = 1;
        } catch (const Error&) {
          est(r, static_cast<Eigen::Index>(e)) = 0.0;
          ok(r, static_cast<Eigen::Index>(e)) = 0;
        }
      }
    });

    for (std::size_t e = 0; e < estimators.size(); ++e) {
      SimCell cell;
      cell.spec = spec;
      cell.estimator = estimators[e].name;
      cell.true_ape = truth.value;
      cell.true_ape_se = truth.se;
      cell.reps = reps;
      std::vector<double> vals;
      for (int r = 0; r < reps; ++r) {
        if (ok(r, static_cast<Eigen::Index>(e)))
          vals.push_back(est(r, static_cast<Eigen::Index>(e)));
        else
          ++cell.failures;
      }
      if (!vals.empty()) {
        cell.mean = mean(vals);
        cell.sd = sd_pop(vals);
        double sq = 0.0;
        for (double v : vals) sq += (v - truth.value) * (v - truth.value);
        cell.mse = sq / static_cast<double>(vals.size());
      }
      if (keep_estimates) cell.estimates = std::move(vals);
      report.cells.push_back(std::move(cell));
    }
  }
  return report;
}

struct Fig1Record {
  int rep = 0;
  int epochs = 0;
  double corr_nu_z = 0.0;
  double rols_estimate = 0.0;
  double dml_estimate = 0.0;
  // Sample analog of the residualisation-error bias term
  // E[(r(Z) - rhat(Z)) Y] / E[nu_hat^2]; the estimation error equals
  // nu_hat - nu, both of which the synthetic draw exposes.
  double predicted_bias = 0.0;
};

struct Fig1Result {
  std::vector<Fig1Record> records;
  double true_ape = 0.0;
  int skipped = 0;
};

// The robustness experiment behind the R-OLS vs DML comparison: per
// replication the nuisance networks are trained for a uniformly drawn epoch
// count, creating artificial variation in how well X is residualised; the
// correlation between the residual and Z measures that quality.
inline Fig1Result figure1_experiment(int reps, Eigen::Index n, int epochs_lo, int epochs_hi,
                                     std::uint64_t seed, int workers = 1,
                                     Eigen::Index oracle_n = 1000000) {
  if (reps < 20) throw usage_error("figure1_experiment: need reps >= 20");
  if (n < 200) throw usage_error("figure1_experiment: need n >= 200");
  if (epochs_lo < 1 || epochs_hi < epochs_lo)
    throw usage_error("figure1_experiment: bad epochs range");

  DgpSpec spec;
  spec.y_family = YFamily::Fig1;
  spec.x_family = XFamily::Fig1;
  spec.m = 2;
  spec.error_dist = ErrorDistribution::normal(0, 1);
  spec.n = n;

  Fig1Result result;
  result.true_ape = true_ape(spec, oracle_n, derive_seed(seed, 0xA9E)).value;

  std::vector<Fig1Record> records(static_cast<std::size_t>(reps));
  std::vector<char> ok(static_cast<std::size_t>(reps), 0);
  parallel_for(reps, workers, [&](int r) {
    const std::uint64_t rep_seed = seed + static_cast<std::uint64_t>(r);
    Rng rng(rep_seed, 77);
    const int epochs =
        epochs_lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(epochs_hi - epochs_lo + 1)));

    // Three hidden layers of 64, adam at 1e-3, trained on raw scales so the
    // epoch count genuinely controls how well X is residualised.
    LearnerSpec mlp;
    mlp.kind = LearnerSpec::Kind::Mlp;
    mlp.layers = 3;
    mlp.width = 64;
    mlp.epochs = epochs;
    mlp.learning_rate = 1e-3;
    mlp.batch = 32;
    mlp.mlp_standardize = false;

    try {
      const SyntheticDraw d = draw(spec, rep_seed);
      const CrossFitResult cfx =
          crossfit_residualise(d.data, Target::Treatment, mlp, 4, rep_seed);
      const CrossFitResult cfy =
          crossfit_residualise(d.data, Target::Outcome, mlp, 4, rep_seed);
      Fig1Record rec;
      rec.rep = r;
      rec.epochs = epochs;
      rec.corr_nu_z = correlation(cfx.residuals, d.data.z.col(0));
      rec.rols_estimate = rols(cfx.residuals, d.data.y).point;
      const double denom = cfx.residuals.squaredNorm();
      rec.dml_estimate = cfx.residuals.dot(cfy.residuals) / denom;
      rec.predicted_bias = (cfx.residuals - d.nu_true).dot(d.data.y) / denom;
      records[static_cast<std::size_t>(r)] = rec;
      ok[static_cast<std::size_t>(r)] = 1;
    } catch (const Error&) {
      // skipped with a warning count
    }
  });
  for (int r = 0; r < reps; ++r) {
    if (ok[static_cast<std::size_t>(r)])
      result.records.push_back(records[static_cast<std::size_t>(r)]);
    else
      ++result.skipped;
  }
  return result;
}

struct SlopeFit {
  double slope = 0.0;
  double se = 0.0;
  double z = 0.0;
};

// Least-squares fit of y on [1, x] with the HC0 slope standard error; used
// for the estimate-vs-correlation regression lines.
inline SlopeFit slope_fit(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  DesignMatrix design;
  design.values.resize(x.size(), 2);
  design.values.col(0).setOnes();
  design.values.col(1) = x;
  design.labels = {"1", "x"};
  const LeastSquaresFit fit = solve_ls(design, y);
  const SandwichCovariance cov = sandwich_variance(design, fit);
  SlopeFit s;
  s.slope = fit.coefficients[1];
  s.se = std::sqrt(cov.matrix(1, 1));
  s.z = (s.se > 0) ? s.slope / s.se : 0.0;
  return s;
}

}  // namespace ape
