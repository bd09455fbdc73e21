#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ape/error.hpp"
#include "ape/gbt.hpp"
#include "ape/linalg.hpp"
#include "ape/mlp.hpp"
#include "ape/text.hpp"

namespace ape {

// Pluggable regression learner for the nuisance functions r(Z) = E[X|Z] and
// l(Z) = E[Y|Z].
struct LearnerSpec {
  enum class Kind { PolyRidge, SplineAdditive, Gbt, Mlp };
  Kind kind = Kind::PolyRidge;

  // poly_ridge
  int degree = 2;
  double lambda = 0.0;
  // spline_additive reuses degree, plus:
  int knots = 5;
  // gbt
  int trees = 300;
  int tree_depth = 3;
  double learning_rate = 0.1;
  int min_leaf = 20;
  // mlp
  int layers = 3;
  int width = 64;
  int epochs = 500;
  int batch = 64;
  bool mlp_standardize = true;

  std::uint64_t seed = 0;
};

inline std::string to_string(const LearnerSpec& s) {
  switch (s.kind) {
    case LearnerSpec::Kind::PolyRidge:
      return "poly_ridge(degree=" + std::to_string(s.degree) +
             ",lambda=" + format_double(s.lambda) + ")";
    case LearnerSpec::Kind::SplineAdditive:
      return "spline(degree=" + std::to_string(s.degree) + ",knots=" + std::to_string(s.knots) +
             ")";
    case LearnerSpec::Kind::Gbt:
      return "gbt(trees=" + std::to_string(s.trees) + ",depth=" + std::to_string(s.tree_depth) +
             ",lr=" + format_double(s.learning_rate) + ",min_leaf=" + std::to_string(s.min_leaf) +
             ")";
    case LearnerSpec::Kind::Mlp:
      return "mlp(layers=" + std::to_string(s.layers) + ",width=" + std::to_string(s.width) +
             ",epochs=" + std::to_string(s.epochs) + ",lr=" + format_double(s.learning_rate) +
             ",batch=" + std::to_string(s.batch) +
             (s.mlp_standardize ? "" : ",raw=1") + ")";
  }
  return "?";
}

// Parses e.g. "gbt(trees=300,depth=3,lr=0.1,min_leaf=20)" or
// "mlp(layers=3,width=64,epochs=500,lr=0.001,batch=64)". Unspecified keys
// keep their defaults.
inline LearnerSpec parse_learner(const std::string& text) {
  const std::string s = trim(text);
  const std::size_t open = s.find('(');
  std::string name = (open == std::string::npos) ? s : s.substr(0, open);
  std::map<std::string, std::string> kv;
  if (open != std::string::npos) {
    if (s.back() != ')') throw usage_error("cannot parse learner spec '" + text + "'");
    for (const auto& item : split(s.substr(open + 1, s.size() - open - 2), ',')) {
      if (trim(item).empty()) continue;
      const auto pair = split(item, '=');
      if (pair.size() != 2) throw usage_error("bad key=value in learner spec '" + text + "'");
      kv[trim(pair[0])] = trim(pair[1]);
    }
  }
  auto geti = [&](const char* key, int& target) {
    auto it = kv.find(key);
    if (it == kv.end()) return;
    long long v;
    if (!parse_long(it->second, v)) throw usage_error(std::string("bad integer for '") + key + "'");
    target = static_cast<int>(v);
    kv.erase(it);
  };
  auto getd = [&](const char* key, double& target) {
    auto it = kv.find(key);
    if (it == kv.end()) return;
    double v;
    if (!parse_double(it->second, v)) throw usage_error(std::string("bad number for '") + key + "'");
    target = v;
    kv.erase(it);
  };

  LearnerSpec spec;
  if (name == "poly_ridge" || name == "poly") {
    spec.kind = LearnerSpec::Kind::PolyRidge;
    geti("degree", spec.degree);
    getd("lambda", spec.lambda);
  } else if (name == "spline" || name == "spline_additive") {
    spec.kind = LearnerSpec::Kind::SplineAdditive;
    spec.degree = 3;
    geti("degree", spec.degree);
    geti("knots", spec.knots);
  } else if (name == "gbt") {
    spec.kind = LearnerSpec::Kind::Gbt;
    geti("trees", spec.trees);
    geti("depth", spec.tree_depth);
    getd("lr", spec.learning_rate);
    geti("min_leaf", spec.min_leaf);
  } else if (name == "mlp") {
    spec.kind = LearnerSpec::Kind::Mlp;
    spec.learning_rate = 1e-3;
    geti("layers", spec.layers);
    geti("width", spec.width);
    geti("epochs", spec.epochs);
    getd("lr", spec.learning_rate);
    geti("batch", spec.batch);
    int raw = 0;
    geti("raw", raw);
    spec.mlp_standardize = raw == 0;
  } else {
    throw usage_error("unknown learner '" + name + "'");
  }
  if (!kv.empty()) throw usage_error("unknown key '" + kv.begin()->first + "' in learner spec");

  if (spec.degree < 1 || spec.knots < 2 || spec.trees < 1 || spec.tree_depth < 1 ||
      spec.min_leaf < 1 || spec.layers < 1 || spec.width < 1 || spec.epochs < 1 ||
      spec.batch < 1 || spec.lambda < 0 || !(spec.learning_rate >= 0))
    throw usage_error("learner spec has a non-positive hyperparameter: " + to_string(spec));
  return spec;
}

namespace detail {

inline std::vector<std::string> z_names(Eigen::Index k) {
  std::vector<std::string> names;
  for (Eigen::Index j = 0; j < k; ++j) names.push_back("z" + std::to_string(j + 1));
  return names;
}

inline Eigen::VectorXd fit_predict_poly_ridge(const LearnerSpec& spec,
                                              const Eigen::MatrixXd& z_train,
                                              const Eigen::VectorXd& t_train,
                                              const Eigen::MatrixXd& z_eval) {
  PolynomialBasis basis = polynomial_basis(z_train, z_names(z_train.cols()), spec.degree);
  const Eigen::Index q = basis.design.q();
  if (z_train.rows() < q)
    throw usage_error("poly_ridge: " + std::to_string(z_train.rows()) + " rows for " +
                      std::to_string(q) + " parameters");
  if (spec.lambda == 0.0) {
    LeastSquaresFit fit = solve_ls(basis.design, t_train);
    return basis.evaluate(z_eval) * fit.coefficients;
  }
  // Ridge on centred/scaled columns, intercept unpenalised.
  const Eigen::MatrixXd& b = basis.design.values;
  Eigen::RowVectorXd mu = b.colwise().mean();
  Eigen::RowVectorXd sc(q);
  for (Eigen::Index j = 0; j < q; ++j) {
    const double v = (b.col(j).array() - mu[j]).square().mean();
    sc[j] = v > 0 ? std::sqrt(v) : 1.0;
  }
  Eigen::MatrixXd bs = (b.rowwise() - mu).array().rowwise() / sc.array();
  const double t_mean = t_train.mean();
  Eigen::MatrixXd gram = bs.transpose() * bs;
  gram.diagonal().array() += spec.lambda;
  Eigen::VectorXd coef = gram.ldlt().solve(bs.transpose() * (t_train.array() - t_mean).matrix());
  Eigen::MatrixXd be = basis.evaluate(z_eval);
  Eigen::MatrixXd bes = (be.rowwise() - mu).array().rowwise() / sc.array();
  return (bes * coef).array() + t_mean;
}

inline Eigen::VectorXd fit_predict_spline(const LearnerSpec& spec, const Eigen::MatrixXd& z_train,
                                          const Eigen::VectorXd& t_train,
                                          const Eigen::MatrixXd& z_eval) {
  SplineDesign sd = bspline_design(z_train, spec.degree, spec.knots);
  if (z_train.rows() < sd.design.q())
    throw usage_error("spline: " + std::to_string(z_train.rows()) + " rows for " +
                      std::to_string(sd.design.q()) + " parameters");
  LeastSquaresFit fit = solve_ls(sd.design, t_train);
  return sd.evaluate(z_eval) * fit.coefficients;
}

}  // namespace detail

// Fits the learner on (z_train, t_train) and predicts at z_eval rows.
// Deterministic given spec.seed. A zero-variance training target yields the
// constant predictor plus a warning instead of an error so simulation grids
// never abort mid-run.
inline Eigen::VectorXd fit_predict(const LearnerSpec& spec, const Eigen::MatrixXd& z_train,
                                   const Eigen::VectorXd& t_train, const Eigen::MatrixXd& z_eval,
                                   std::vector<std::string>* warnings = nullptr) {
  if (z_train.rows() != t_train.size())
    throw usage_error("fit_predict: z_train rows " + std::to_string(z_train.rows()) +
                      " != target length " + std::to_string(t_train.size()));
  if (z_eval.cols() != z_train.cols())
    throw usage_error("fit_predict: z_eval has " + std::to_string(z_eval.cols()) +
                      " columns, z_train has " + std::to_string(z_train.cols()));
  if (z_train.cols() < 1) throw usage_error("fit_predict: no features");

  const double t_min = t_train.minCoeff();
  const double t_max = t_train.maxCoeff();
  if (t_min == t_max) {
    if (warnings) warnings->push_back("degenerate training target; using constant predictor");
    return Eigen::VectorXd::Constant(z_eval.rows(), t_min);
  }

  switch (spec.kind) {
    case LearnerSpec::Kind::PolyRidge:
      return detail::fit_predict_poly_ridge(spec, z_train, t_train, z_eval);
    case LearnerSpec::Kind::SplineAdditive:
      return detail::fit_predict_spline(spec, z_train, t_train, z_eval);
    case LearnerSpec::Kind::Gbt: {
      if (z_train.rows() < 10) throw usage_error("gbt: need at least 10 training rows");
      GbtRegressor::Params p;
      p.trees = spec.trees;
      p.depth = spec.tree_depth;
      p.learning_rate = spec.learning_rate;
      p.min_leaf = spec.min_leaf;
      GbtRegressor gbt(p);
      gbt.fit(z_train, t_train);
      return gbt.predict(z_eval);
    }
    case LearnerSpec::Kind::Mlp: {
      if (z_train.rows() < 10) throw usage_error("mlp: need at least 10 training rows");
      MlpRegressor::Params p;
      p.layers = spec.layers;
      p.width = spec.width;
      p.epochs = spec.epochs;
      p.learning_rate = spec.learning_rate;
      p.batch = spec.batch;
      p.standardize = spec.mlp_standardize;
      MlpRegressor mlp(p);
      mlp.fit(z_train, t_train, spec.seed);
      return mlp.predict(z_eval);
    }
  }
  throw usage_error("unknown learner kind");
}

}  // namespace ape
