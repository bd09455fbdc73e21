#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "ape/learners.hpp"
#include "ape/rng.hpp"

using ape::LearnerSpec;
using ape::Rng;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index n, Eigen::Index k, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd m(n, k);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < k; ++j) m(i, j) = rng.normal();
  return m;
}

}  // namespace

TEST_CASE("learner spec strings round-trip", "[learners]") {
  const auto gbt = ape::parse_learner("gbt(trees=300,depth=3,lr=0.1,min_leaf=20)");
  CHECK(gbt.kind == LearnerSpec::Kind::Gbt);
  CHECK(gbt.trees == 300);
  CHECK(gbt.tree_depth == 3);
  CHECK(gbt.learning_rate == Catch::Approx(0.1));
  CHECK(ape::parse_learner(ape::to_string(gbt)).trees == 300);

  const auto mlp = ape::parse_learner("mlp(layers=3,width=64,epochs=500,lr=0.001,batch=64)");
  CHECK(mlp.kind == LearnerSpec::Kind::Mlp);
  CHECK(mlp.width == 64);

  const auto poly = ape::parse_learner("poly_ridge(degree=2,lambda=0.5)");
  CHECK(poly.kind == LearnerSpec::Kind::PolyRidge);
  CHECK(poly.lambda == Catch::Approx(0.5));

  const auto spline = ape::parse_learner("spline(degree=3,knots=7)");
  CHECK(spline.kind == LearnerSpec::Kind::SplineAdditive);
  CHECK(spline.knots == 7);

  CHECK_THROWS_AS(ape::parse_learner("forest(trees=10)"), ape::Error);
  CHECK_THROWS_AS(ape::parse_learner("gbt(depth=0)"), ape::Error);
  CHECK_THROWS_AS(ape::parse_learner("gbt(bogus=1)"), ape::Error);
}

TEST_CASE("poly ridge with lambda=0 recovers exact linear data", "[learners]") {
  const Eigen::MatrixXd z = random_matrix(100, 1, 1);
  const Eigen::VectorXd t = 2.0 * z.col(0);
  LearnerSpec spec;
  spec.kind = LearnerSpec::Kind::PolyRidge;
  spec.degree = 1;
  spec.lambda = 0.0;
  const Eigen::MatrixXd z_eval = random_matrix(40, 1, 2);
  const Eigen::VectorXd pred = ape::fit_predict(spec, z, t, z_eval);
  CHECK((pred - 2.0 * z_eval.col(0)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("poly ridge lambda=0 equals solve_ls on the polynomial design", "[learners]") {
  const Eigen::MatrixXd z = random_matrix(200, 2, 3);
  Rng rng(4);
  Eigen::VectorXd t(200);
  for (Eigen::Index i = 0; i < 200; ++i)
    t[i] = 1.0 + z(i, 0) - 0.5 * z(i, 1) + 0.2 * z(i, 0) * z(i, 1) + 0.1 * rng.normal();
  LearnerSpec spec;
  spec.kind = LearnerSpec::Kind::PolyRidge;
  spec.degree = 2;
  spec.lambda = 0.0;
  const Eigen::VectorXd pred = ape::fit_predict(spec, z, t, z);

  const auto basis = ape::polynomial_basis(z, {"z1", "z2"}, 2);
  const auto fit = ape::solve_ls(basis.design, t);
  CHECK((pred - fit.fitted).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("ridge shrinks towards the mean as lambda grows", "[learners]") {
  const Eigen::MatrixXd z = random_matrix(100, 1, 9);
  const Eigen::VectorXd t = 3.0 * z.col(0);
  LearnerSpec spec;
  spec.kind = LearnerSpec::Kind::PolyRidge;
  spec.degree = 1;
  spec.lambda = 1e8;
  const Eigen::VectorXd pred = ape::fit_predict(spec, z, t, z);
  CHECK((pred.array() - t.mean()).abs().maxCoeff() < 0.01);
}

TEST_CASE("spline learner fits a smooth additive function", "[learners]") {
  Rng rng(5);
  Eigen::MatrixXd z(800, 2);
  Eigen::VectorXd t(800);
  for (Eigen::Index i = 0; i < 800; ++i) {
    z(i, 0) = rng.uniform(-2, 2);
    z(i, 1) = rng.uniform(-2, 2);
    t[i] = std::sin(z(i, 0)) + 0.5 * z(i, 1) * z(i, 1) + 0.05 * rng.normal();
  }
  LearnerSpec spec;
  spec.kind = LearnerSpec::Kind::SplineAdditive;
  spec.degree = 3;
  spec.knots = 8;
  const Eigen::VectorXd pred = ape::fit_predict(spec, z, t, z);
  Eigen::VectorXd truth(800);
  for (Eigen::Index i = 0; i < 800; ++i) truth[i] = std::sin(z(i, 0)) + 0.5 * z(i, 1) * z(i, 1);
  const double rmse = std::sqrt((pred - truth).squaredNorm() / 800.0);
  CHECK(rmse < 0.1);
}

TEST_CASE("gbt with one tree and vanishing learning rate is the mean predictor", "[learners]") {
  const Eigen::MatrixXd z = random_matrix(200, 2, 6);
  Rng rng(7);
  Eigen::VectorXd t(200);
  for (Eigen::Index i = 0; i < 200; ++i) t[i] = z(i, 0) + rng.normal();
  LearnerSpec spec;
  spec.kind = LearnerSpec::Kind::Gbt;
  spec.trees = 1;
  spec.learning_rate = 1e-12;
  spec.min_leaf = 5;
  const Eigen::VectorXd pred = ape::fit_predict(spec, z, t, z);
  CHECK((pred.array() - t.mean()).abs().maxCoeff() < 1e-9);
}

TEST_CASE("gbt learns an interaction surface", "[learners][slow]") {
  // t = Z1*Z2 + noise; out-of-sample RMSE should approach the irreducible 1.
  Rng rng(8);
  const Eigen::Index n = 5000;
  Eigen::MatrixXd z(n, 2), z_test(n, 2);
  Eigen::VectorXd t(n), t_test_mean(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    z(i, 0) = rng.normal(1, 1);
    z(i, 1) = rng.normal(1, 1);
    t[i] = z(i, 0) * z(i, 1) + rng.normal();
    z_test(i, 0) = rng.normal(1, 1);
    z_test(i, 1) = rng.normal(1, 1);
    t_test_mean[i] = z_test(i, 0) * z_test(i, 1);
  }
  const auto spec = ape::parse_learner("gbt(trees=300,depth=3,lr=0.1,min_leaf=20)");
  const Eigen::VectorXd pred = ape::fit_predict(spec, z, t, z_test);
  // prediction error against the true conditional mean, plus irreducible noise
  const double excess = (pred - t_test_mean).squaredNorm() / static_cast<double>(n);
  const double rmse_vs_noisy = std::sqrt(excess + 1.0);
  CHECK(rmse_vs_noisy <= 1.15);
}

TEST_CASE("mlp gradient check against central finite differences", "[learners]") {
  const Eigen::Index n = 20;
  Rng rng(9);
  Eigen::MatrixXd x(2, n);  // columns are samples, already "standardised"
  Eigen::VectorXd t(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    x(0, i) = rng.normal();
    x(1, i) = rng.normal();
    t[i] = std::sin(x(0, i)) + 0.3 * x(1, i);
  }

  ape::MlpRegressor::Params params;
  params.layers = 2;
  params.width = 4;
  ape::MlpRegressor mlp(params);
  mlp.init(2, 33);
  // evaluate at a generic point: zero init biases park dead samples exactly
  // on the rectifier kink, where finite differences are one-sided
  for (auto& b : mlp.biases())
    for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = 0.2 * rng.normal();

  std::vector<Eigen::MatrixXd> gw;
  std::vector<Eigen::VectorXd> gb;
  mlp.loss_and_grad(x, t, gw, gb);

  // step small enough not to cross a rectifier kink on this problem
  const double h = 1e-6;
  double worst_rel = 0.0;
  for (std::size_t l = 0; l < mlp.weights().size(); ++l) {
    for (Eigen::Index i = 0; i < mlp.weights()[l].rows(); ++i) {
      for (Eigen::Index j = 0; j < mlp.weights()[l].cols(); ++j) {
        const double saved = mlp.weights()[l](i, j);
        mlp.weights()[l](i, j) = saved + h;
        const double up = mlp.loss_only(x, t);
        mlp.weights()[l](i, j) = saved - h;
        const double dn = mlp.loss_only(x, t);
        mlp.weights()[l](i, j) = saved;
        const double fd = (up - dn) / (2 * h);
        const double denom = std::max(std::abs(fd), std::abs(gw[l](i, j)));
        if (denom > 1e-10) worst_rel = std::max(worst_rel, std::abs(fd - gw[l](i, j)) / denom);
      }
    }
    for (Eigen::Index i = 0; i < mlp.biases()[l].size(); ++i) {
      const double saved = mlp.biases()[l][i];
      mlp.biases()[l][i] = saved + h;
      const double up = mlp.loss_only(x, t);
      mlp.biases()[l][i] = saved - h;
      const double dn = mlp.loss_only(x, t);
      mlp.biases()[l][i] = saved;
      const double fd = (up - dn) / (2 * h);
      const double denom = std::max(std::abs(fd), std::abs(gb[l][i]));
      if (denom > 1e-10) worst_rel = std::max(worst_rel, std::abs(fd - gb[l][i]) / denom);
    }
  }
  CHECK(worst_rel < 1e-4);
}

TEST_CASE("mlp learns a smooth surface", "[learners][slow]") {
  // t = 5 sin(Z1) cos(Z2) + noise at n = 5000; RMSE close to irreducible 1.
  Rng rng(10);
  const Eigen::Index n = 5000;
  Eigen::MatrixXd z(n, 2), z_test(1000, 2);
  Eigen::VectorXd t(n), truth(1000);
  for (Eigen::Index i = 0; i < n; ++i) {
    z(i, 0) = rng.normal(1, 1);
    z(i, 1) = rng.normal(1, 1);
    t[i] = 5.0 * std::sin(z(i, 0)) * std::cos(z(i, 1)) + rng.normal();
  }
  for (Eigen::Index i = 0; i < 1000; ++i) {
    z_test(i, 0) = rng.normal(1, 1);
    z_test(i, 1) = rng.normal(1, 1);
    truth[i] = 5.0 * std::sin(z_test(i, 0)) * std::cos(z_test(i, 1));
  }
  auto spec = ape::parse_learner("mlp(layers=3,width=64,epochs=120,lr=0.003,batch=64)");
  spec.seed = 77;
  const Eigen::VectorXd pred = ape::fit_predict(spec, z, t, z_test);
  const double excess = (pred - truth).squaredNorm() / 1000.0;
  CHECK(std::sqrt(excess + 1.0) <= 1.25);
}

TEST_CASE("degenerate target gives a constant predictor and a warning", "[learners]") {
  const Eigen::MatrixXd z = random_matrix(50, 2, 11);
  const Eigen::VectorXd t = Eigen::VectorXd::Constant(50, 3.5);
  std::vector<std::string> warnings;
  const auto spec = ape::parse_learner("gbt(trees=10,depth=2,lr=0.1,min_leaf=5)");
  const Eigen::VectorXd pred = ape::fit_predict(spec, z, t, z, &warnings);
  CHECK((pred.array() - 3.5).abs().maxCoeff() == 0.0);
  REQUIRE(warnings.size() == 1);
}

TEST_CASE("dimension mismatches are shape errors", "[learners]") {
  const Eigen::MatrixXd z = random_matrix(50, 2, 12);
  const Eigen::VectorXd t = Eigen::VectorXd::Zero(49);
  const auto spec = ape::parse_learner("poly_ridge(degree=1,lambda=0)");
  CHECK_THROWS_AS(ape::fit_predict(spec, z, t, z), ape::Error);
  const Eigen::MatrixXd z_eval = random_matrix(10, 3, 13);
  CHECK_THROWS_AS(ape::fit_predict(spec, z, Eigen::VectorXd::Zero(50), z_eval), ape::Error);
}

TEST_CASE("learner fits are deterministic given the seed", "[learners]") {
  const Eigen::MatrixXd z = random_matrix(200, 2, 14);
  Rng rng(15);
  Eigen::VectorXd t(200);
  for (Eigen::Index i = 0; i < 200; ++i) t[i] = z(i, 0) * z(i, 1) + rng.normal();
  auto spec = ape::parse_learner("mlp(layers=2,width=8,epochs=20,lr=0.01,batch=32)");
  spec.seed = 5;
  const Eigen::VectorXd a = ape::fit_predict(spec, z, t, z);
  const Eigen::VectorXd b = ape::fit_predict(spec, z, t, z);
  CHECK((a - b).norm() == 0.0);
}
