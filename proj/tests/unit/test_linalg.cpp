#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "ape/linalg.hpp"
#include "ape/rng.hpp"
#include "common/oracles.hpp"

using ape::DesignMatrix;
using ape::Rng;

namespace {

DesignMatrix random_design(Eigen::Index n, Eigen::Index q, std::uint64_t seed) {
  Rng rng(seed);
  DesignMatrix d;
  d.values.resize(n, q);
  d.values.col(0).setOnes();
  d.labels.push_back("1");
  for (Eigen::Index j = 1; j < q; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) d.values(i, j) = rng.normal();
    d.labels.push_back("c" + std::to_string(j));
  }
  return d;
}

}  // namespace

TEST_CASE("solve_ls constant and square systems", "[linalg]") {
  DesignMatrix ones;
  ones.values = Eigen::MatrixXd::Ones(3, 1);
  ones.labels = {"1"};
  Eigen::VectorXd y(3);
  y << 2, 2, 2;
  const auto fit = ape::solve_ls(ones, y);
  CHECK(fit.coefficients[0] == Catch::Approx(2.0));
  CHECK(fit.residuals.norm() == Catch::Approx(0.0).margin(1e-14));

  DesignMatrix eye;
  eye.values = Eigen::MatrixXd::Identity(2, 2);
  eye.labels = {"a", "b"};
  Eigen::VectorXd y2(2);
  y2 << 1, 3;
  const auto fit2 = ape::solve_ls(eye, y2);
  CHECK(fit2.coefficients[0] == Catch::Approx(1.0));
  CHECK(fit2.coefficients[1] == Catch::Approx(3.0));
  CHECK(fit2.residuals.norm() == Catch::Approx(0.0).margin(1e-14));
}

TEST_CASE("solve_ls flags the dependent column", "[linalg]") {
  DesignMatrix d;
  d.values.resize(10, 3);
  Rng rng(1);
  for (Eigen::Index i = 0; i < 10; ++i) {
    d.values(i, 0) = 1.0;
    d.values(i, 1) = rng.normal();
    d.values(i, 2) = 2.0 * d.values(i, 1);  // duplicate direction
  }
  d.labels = {"1", "a", "a_dup"};
  Eigen::VectorXd y = Eigen::VectorXd::Random(10);
  try {
    ape::solve_ls(d, y);
    FAIL("expected singularity error");
  } catch (const ape::Error& e) {
    CHECK(e.kind() == ape::ErrorKind::Numeric);
    const std::string msg = e.what();
    CHECK((msg.find("'a'") != std::string::npos || msg.find("'a_dup'") != std::string::npos));
  }
}

TEST_CASE("solve_ls residual orthogonality on random problems", "[linalg]") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto d = random_design(60, 5, seed);
    Rng rng(seed + 1000);
    Eigen::VectorXd y(60);
    for (Eigen::Index i = 0; i < 60; ++i) y[i] = rng.normal();
    const auto fit = ape::solve_ls(d, y);
    const double bound = 1e-8 * d.values.norm() * y.norm();
    CHECK((d.values.transpose() * fit.residuals).cwiseAbs().maxCoeff() <= bound);
  }
}

TEST_CASE("sandwich_variance equals the naive triple-loop HC0 oracle", "[linalg]") {
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    const Eigen::Index n = 20 + static_cast<Eigen::Index>(seed * 2);
    const Eigen::Index q = 2 + static_cast<Eigen::Index>(seed % 4);
    const auto d = random_design(n, q, seed);
    Rng rng(seed + 500);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) y[i] = rng.normal() * (1.0 + 0.5 * std::abs(d.values(i, 1)));
    const auto fit = ape::solve_ls(d, y);
    const auto cov = ape::sandwich_variance(d, fit);
    const Eigen::MatrixXd oracle = test_oracle::naive_hc0(d.values, fit.residuals);
    REQUIRE(cov.matrix.rows() == oracle.rows());
    const double scale = oracle.cwiseAbs().maxCoeff();
    CHECK((cov.matrix - oracle).cwiseAbs().maxCoeff() <= 1e-10 * scale);
  }
}

TEST_CASE("sandwich_variance is symmetric with zero residuals giving zero", "[linalg]") {
  const auto d = random_design(30, 3, 3);
  const Eigen::VectorXd y = d.values * Eigen::Vector3d(1.0, 2.0, -0.5);
  const auto fit = ape::solve_ls(d, y);
  const auto cov = ape::sandwich_variance(d, fit);
  CHECK(cov.matrix.cwiseAbs().maxCoeff() <= 1e-18);
  CHECK((cov.matrix - cov.matrix.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(cov.df_note == "HC0");
}

TEST_CASE("sandwich close to classical variance under homoskedasticity", "[linalg][slow]") {
  const Eigen::Index n = 10000;
  const auto d = random_design(n, 3, 77);
  Rng rng(78);
  const double sigma = 1.3;
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i)
    y[i] = 2.0 + d.values(i, 1) - d.values(i, 2) + sigma * rng.normal();
  const auto fit = ape::solve_ls(d, y);
  const auto cov = ape::sandwich_variance(d, fit);
  const Eigen::MatrixXd classical =
      sigma * sigma * (d.values.transpose() * d.values).inverse();
  for (Eigen::Index j = 0; j < 3; ++j)
    CHECK(cov.matrix(j, j) == Catch::Approx(classical(j, j)).epsilon(0.15));
}

TEST_CASE("polynomial_design column counts follow the binomial identity", "[linalg]") {
  Rng rng(4);
  Eigen::VectorXd x(30);
  Eigen::MatrixXd z1(30, 1), z2(30, 2);
  for (Eigen::Index i = 0; i < 30; ++i) {
    x[i] = rng.normal();
    z1(i, 0) = rng.normal();
    z2(i, 0) = rng.normal();
    z2(i, 1) = rng.normal();
  }
  const auto b1 = ape::polynomial_design(x, z1, 2);
  CHECK(b1.design.q() == 6);  // C(2+2,2)
  const auto b2 = ape::polynomial_design(x, z2, 3);
  CHECK(b2.design.q() == 20);  // C(3+3,3)
  const auto b3 = ape::polynomial_design(x, z2, 4);
  CHECK(b3.design.q() == 35);  // C(4+3,3)

  // labels of the degree-2 single-control design
  CHECK(b1.design.labels[0] == "1");
  CHECK(std::find(b1.design.labels.begin(), b1.design.labels.end(), "x*z1") !=
        b1.design.labels.end());
  CHECK(std::find(b1.design.labels.begin(), b1.design.labels.end(), "x^2") !=
        b1.design.labels.end());

  CHECK_THROWS_AS(ape::polynomial_design(x, z1, 0), ape::Error);
}

TEST_CASE("bspline basis count and partition of unity", "[linalg]") {
  Rng rng(5);
  Eigen::MatrixXd z(400, 1);
  for (Eigen::Index i = 0; i < 400; ++i) z(i, 0) = rng.uniform(-2, 3);

  const auto basis = ape::make_bspline_basis(z.col(0), 3, 5);
  CHECK(basis.num_basis() == 9);  // order 4 + 5 interior knots

  Eigen::VectorXd probe(100);
  Rng rng2(6);
  for (Eigen::Index i = 0; i < 100; ++i) probe[i] = rng2.uniform(-2, 3);
  const Eigen::MatrixXd b = basis.evaluate(probe);
  for (Eigen::Index i = 0; i < 100; ++i)
    CHECK(b.row(i).sum() == Catch::Approx(1.0).epsilon(1e-10));

  // design drops one basis column per variable for the shared intercept
  const auto sd = ape::bspline_design(z, 3, 5);
  CHECK(sd.design.q() == 1 + 8);

  Eigen::MatrixXd z2(400, 2);
  z2.col(0) = z.col(0);
  for (Eigen::Index i = 0; i < 400; ++i) z2(i, 1) = rng.normal();
  const auto sd2 = ape::bspline_design(z2, 3, 5);
  CHECK(sd2.design.q() == 1 + 8 + 8);  // additive, no cross terms
}

TEST_CASE("bspline rejects constant columns", "[linalg]") {
  Eigen::MatrixXd z = Eigen::MatrixXd::Ones(50, 1);
  CHECK_THROWS_AS(ape::bspline_design(z, 3, 5), ape::Error);
}
