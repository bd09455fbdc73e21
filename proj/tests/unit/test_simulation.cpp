#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "ape/report.hpp"
#include "ape/simulation.hpp"

using ape::DgpSpec;

TEST_CASE("draw satisfies the constructional identities", "[simulation]") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    DgpSpec spec;
    spec.y_family = (seed % 2) ? ape::YFamily::Simple : ape::YFamily::Complex;
    spec.x_family = (seed % 3 == 0) ? ape::XFamily::Complex : ape::XFamily::Simple;
    spec.m = 1 + static_cast<int>(seed % 3);
    spec.n = 50;
    const auto d = ape::draw(spec, seed);

    // x = r(z) + nu exactly (recomputing the sum reproduces the stored bits)
    CHECK((d.data.x - (d.r_of_z + d.nu_true)).cwiseAbs().maxCoeff() == 0.0);

    // y minus the systematic part reconstructs a finite epsilon; rebuilding
    // the systematic part must match bit-for-bit
    Eigen::VectorXd systematic = Eigen::VectorXd::Zero(50);
    Eigen::ArrayXd xpow = Eigen::ArrayXd::Ones(50);
    for (int m = 0; m <= spec.m; ++m) {
      systematic.array() += xpow * d.g_components.col(m).array();
      xpow *= d.data.x.array();
    }
    const Eigen::VectorXd eps = d.data.y - systematic;
    CHECK(eps.array().isFinite().all());

    // ape_contrib row: analytic derivative of the Table-1 form
    Eigen::VectorXd expect = Eigen::VectorXd::Zero(50);
    xpow = Eigen::ArrayXd::Ones(50);
    for (int m = 1; m <= spec.m; ++m) {
      expect.array() += m * xpow * d.g_components.col(m).array();
      xpow *= d.data.x.array();
    }
    CHECK((d.ape_contrib - expect).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("additive draw identities", "[simulation]") {
  DgpSpec spec;
  spec.y_family = ape::YFamily::Additive;
  spec.x_family = ape::XFamily::Additive;
  spec.m = 1;
  spec.n = 5;
  const auto d = ape::draw(spec, 7);
  const Eigen::VectorXd eps =
      d.data.y - d.data.x - d.data.z.col(0) - d.data.z.col(1);
  CHECK(eps.array().isFinite().all());
  CHECK((d.data.x - (d.data.z.col(0) + d.data.z.col(1) + d.nu_true)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((d.ape_contrib.array() - 1.0).abs().maxCoeff() == 0.0);
}

TEST_CASE("complex M=2 ape contribution formula", "[simulation]") {
  DgpSpec spec;
  spec.y_family = ape::YFamily::Complex;
  spec.x_family = ape::XFamily::Simple;
  spec.m = 2;
  spec.n = 20;
  const auto d = ape::draw(spec, 8);
  for (Eigen::Index i = 0; i < 20; ++i) {
    const double g = std::cos(d.data.z(i, 0)) * std::sin(d.data.z(i, 1));
    CHECK(d.ape_contrib[i] ==
          Catch::Approx((1.0 + 2.0 * d.data.x[i]) * g).margin(1e-12));
  }
}

TEST_CASE("spec validation", "[simulation]") {
  DgpSpec bad;
  bad.y_family = ape::YFamily::Additive;
  bad.m = 2;
  CHECK_THROWS_AS(bad.validate(), ape::Error);
  DgpSpec fig;
  fig.y_family = ape::YFamily::Fig1;
  fig.x_family = ape::XFamily::Simple;
  fig.m = 2;
  CHECK_THROWS_AS(fig.validate(), ape::Error);
}

TEST_CASE("true_ape oracle values match the table headers", "[simulation][slow]") {
  auto oracle = [](ape::YFamily y, ape::XFamily x, int m) {
    DgpSpec spec;
    spec.y_family = y;
    spec.x_family = x;
    spec.m = m;
    return ape::true_ape(spec, 1000000, 314).value;
  };
  // additive: the derivative is identically 1
  CHECK(oracle(ape::YFamily::Additive, ape::XFamily::Additive, 1) == 1.0);
  // complex Y, simple X (Table 4 headers: 0.17, -0.14, -2.06)
  CHECK(oracle(ape::YFamily::Complex, ape::XFamily::Simple, 1) == Catch::Approx(0.17).margin(0.02));
  CHECK(oracle(ape::YFamily::Complex, ape::XFamily::Simple, 2) == Catch::Approx(-0.14).margin(0.02));
  CHECK(oracle(ape::YFamily::Complex, ape::XFamily::Simple, 3) == Catch::Approx(-2.06).margin(0.02));
  // complex Y, complex X (Table 5 headers: 0.17, 0.21, 1.52)
  CHECK(oracle(ape::YFamily::Complex, ape::XFamily::Complex, 1) == Catch::Approx(0.17).margin(0.02));
  CHECK(oracle(ape::YFamily::Complex, ape::XFamily::Complex, 2) == Catch::Approx(0.21).margin(0.02));
  CHECK(oracle(ape::YFamily::Complex, ape::XFamily::Complex, 3) == Catch::Approx(1.52).margin(0.02));
  // complex Y, additive X (appendix Table 7 headers: 0.17, 0.53, 0.19)
  CHECK(oracle(ape::YFamily::Complex, ape::XFamily::Additive, 2) == Catch::Approx(0.53).margin(0.02));
  CHECK(oracle(ape::YFamily::Complex, ape::XFamily::Additive, 3) == Catch::Approx(0.19).margin(0.02));
  CHECK_THROWS_AS(ape::true_ape(DgpSpec{}, 1000, 1), ape::Error);  // oracle_n too small
}

TEST_CASE("run_grid determinism and the copycat protocol", "[simulation][slow]") {
  DgpSpec spec;
  spec.y_family = ape::YFamily::Simple;
  spec.x_family = ape::XFamily::Simple;
  spec.m = 2;
  spec.n = 300;
  std::vector<ape::EstimatorConfig> estimators;
  estimators.push_back(ape::parse_estimator("simple_ols"));
  auto copy_a = ape::parse_estimator("interacted_ols(degree=2)");
  copy_a.name = "copycat_a";
  auto copy_b = ape::parse_estimator("interacted_ols(degree=2)");
  copy_b.name = "copycat_b";
  estimators.push_back(copy_a);
  estimators.push_back(copy_b);

  const auto a = ape::run_grid({spec}, estimators, 40, 11, 1, true);
  const auto b = ape::run_grid({spec}, estimators, 40, 11, 2, true);
  REQUIRE(a.cells.size() == 3);

  // identical under different worker counts
  for (std::size_t c = 0; c < a.cells.size(); ++c) {
    CHECK(a.cells[c].mean == b.cells[c].mean);
    CHECK(a.cells[c].sd == b.cells[c].sd);
    CHECK(a.cells[c].mse == b.cells[c].mse);
  }

  // copycat estimators see the same draw, so every estimate matches exactly
  REQUIRE(a.cells[1].estimates.size() == a.cells[2].estimates.size());
  for (std::size_t r = 0; r < a.cells[1].estimates.size(); ++r)
    CHECK(a.cells[1].estimates[r] == a.cells[2].estimates[r]);
}

TEST_CASE("run_grid mse identity and failure accounting", "[simulation][slow]") {
  DgpSpec spec;
  spec.y_family = ape::YFamily::Additive;
  spec.x_family = ape::XFamily::Additive;
  spec.m = 1;
  spec.n = 1000;
  const auto report = ape::run_grid({spec}, {ape::parse_estimator("simple_ols")}, 200, 21, 2);
  REQUIRE(report.cells.size() == 1);
  const auto& cell = report.cells[0];
  CHECK(cell.failures == 0);
  CHECK(cell.mean == Catch::Approx(1.0).margin(0.01));
  const double bias = cell.mean - cell.true_ape;
  CHECK(cell.mse == Catch::Approx(cell.sd * cell.sd + bias * bias).margin(1e-10));
  CHECK_THROWS_AS(ape::run_grid({spec}, {ape::parse_estimator("simple_ols")}, 1, 21), ape::Error);
}

TEST_CASE("estimator spec parsing", "[simulation]") {
  CHECK(ape::parse_estimator("rols_known").name == "rols_known");
  CHECK(ape::parse_estimator("rols_ml(r=gbt(trees=10,depth=2,lr=0.3,min_leaf=5),folds=3)").name ==
        "rols_ml(r=gbt(trees=10,depth=2,lr=0.3,min_leaf=5),folds=3)");
  CHECK_THROWS_AS(ape::parse_estimator("unknown_thing"), ape::Error);
}

TEST_CASE("figure1 experiment runs at a tiny scale", "[simulation][slow]") {
  const auto result = ape::figure1_experiment(20, 300, 3, 10, 5, 2);
  CHECK(result.records.size() + static_cast<std::size_t>(result.skipped) == 20);
  CHECK(result.true_ape == Catch::Approx(2.0 * std::exp(2.0)).margin(0.05));
  for (const auto& rec : result.records) {
    CHECK(rec.epochs >= 3);
    CHECK(rec.epochs <= 10);
    CHECK(std::isfinite(rec.rols_estimate));
    CHECK(std::isfinite(rec.dml_estimate));
  }
  CHECK_THROWS_AS(ape::figure1_experiment(5, 300, 3, 10, 5), ape::Error);
}

TEST_CASE("sim report emitters produce stable text", "[simulation]") {
  DgpSpec spec;
  spec.y_family = ape::YFamily::Additive;
  spec.x_family = ape::XFamily::Additive;
  spec.m = 1;
  spec.n = 200;
  const auto report = ape::run_grid({spec}, {ape::parse_estimator("simple_ols")}, 10, 3, 1);
  const auto rows = ape::sim_report_csv_rows(report);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0][0] == "additive");
  CHECK(rows[0][5] == "simple_ols");
  const std::string text = ape::sim_report_text(report);
  CHECK(text.find("additive Y-DGP") != std::string::npos);
  CHECK(text.find("N=200") != std::string::npos);
}
