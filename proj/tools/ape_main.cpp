// Command-line front end: estimate APEs from CSV data, run the Monte Carlo
// harness, run moment diagnostics, and run the residualisation-robustness
// experiment. Every stochastic path is keyed by an explicit seed (flag or
// APE_SEED) that is echoed into all reports.

#include <CLI11.hpp>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "ape/crossfit.hpp"
#include "ape/dataset.hpp"
#include "ape/diagnostics.hpp"
#include "ape/estimators.hpp"
#include "ape/inference.hpp"
#include "ape/report.hpp"
#include "ape/simulation.hpp"

namespace {

using nlohmann::json;

std::uint64_t resolve_seed(std::optional<std::uint64_t> flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("APE_SEED")) {
    long long v;
    if (ape::parse_long(env, v)) return static_cast<std::uint64_t>(v);
    throw ape::usage_error("APE_SEED is not an integer");
  }
  return 42;
}

std::string timestamp_utc() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

void write_json_report(const std::string& path, const json& config, const json& results) {
  json doc;
  doc["config"] = config;
  doc["results"] = results;
  doc["timestamp"] = timestamp_utc();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ape::data_error("cannot write report file '" + path + "'");
  out << doc.dump(2) << "\n";
}

json estimate_to_json(const ape::ApeEstimate& est) {
  json j;
  j["method"] = ape::method_name(est.method);
  j["point"] = est.point;
  if (est.std_error) j["std_error"] = *est.std_error;
  if (est.ci_low) j["ci_low"] = *est.ci_low;
  if (est.ci_high) j["ci_high"] = *est.ci_high;
  j["n"] = static_cast<long long>(est.n_used);
  for (const auto& [key, value] : est.diagnostics) j["diagnostics"][key] = value;
  return j;
}

struct EstimateArgs {
  std::string data_path;
  std::string outcome, treatment;
  std::string controls_csv;
  std::string instrument, nu_column;
  std::string method;
  std::string learner_r = "gbt(trees=300,depth=3,lr=0.1,min_leaf=20)";
  std::string learner_l;
  int folds = 5;
  int degree = 3;
  int knots = 5;
  int boot = 0;
  double alpha = 0.05;
  bool in_sample = false;
  std::optional<std::uint64_t> seed;
  std::string out_prefix;
};

ape::ColumnRoles roles_from(const EstimateArgs& args) {
  ape::ColumnRoles roles;
  roles.outcome = args.outcome;
  roles.treatment = args.treatment;
  if (!args.controls_csv.empty())
    for (const auto& c : ape::split(args.controls_csv, ','))
      if (!ape::trim(c).empty()) roles.controls.push_back(ape::trim(c));
  if (!args.instrument.empty()) roles.instrument = args.instrument;
  if (!args.nu_column.empty()) roles.known_error = args.nu_column;
  return roles;
}

ape::ApeEstimate run_estimate(const EstimateArgs& args, const ape::Dataset& data,
                              std::uint64_t seed) {
  const std::string& m = args.method;
  if (m == "rols") {
    if (!data.nu_known) throw ape::usage_error("--method rols needs --nu-column");
    return ape::rols(*data.nu_known, data.y);
  }
  if (m == "rols_ml") {
    ape::LearnerSpec spec = ape::parse_learner(args.learner_r);
    const ape::CrossFitResult cf = ape::crossfit_residualise(
        data, ape::Target::Treatment, spec, args.folds, seed, args.in_sample);
    ape::ApeEstimate est = ape::rols(cf.residuals, data.y);
    est.method = ape::Method::RolsMl;
    est.diagnostics["corr_nu_z_max"] = cf.corr_resid_z_max;
    est.diagnostics["rmse_r"] = cf.rmse;
    return est;
  }
  if (m == "dml") {
    const ape::LearnerSpec spec_r = ape::parse_learner(args.learner_r);
    const ape::LearnerSpec spec_l =
        args.learner_l.empty() ? spec_r : ape::parse_learner(args.learner_l);
    return ape::dml_plr(data, spec_r, spec_l, args.folds, seed, args.in_sample);
  }
  if (m == "ols") return ape::simple_ols(data);
  if (m == "interacted") return ape::interacted_ols(data, args.degree);
  if (m == "spline") return ape::pl_spline(data, args.degree, args.knots);
  if (m == "iv") {
    if (!data.w) throw ape::usage_error("--method iv needs --instrument");
    return ape::iv_ape(*data.w, data.x, data.y);
  }
  throw ape::usage_error("unknown --method '" + m + "'");
}

int cmd_estimate(const EstimateArgs& args) {
  const std::uint64_t seed = resolve_seed(args.seed);
  const ape::ColumnRoles roles = roles_from(args);
  const ape::Dataset data = ape::load_csv(args.data_path, roles);
  ape::ApeEstimate est = run_estimate(args, data, seed);

  if (args.boot > 0) {
    const ape::BootstrapResult boot = ape::bootstrap(
        data,
        [&](const ape::Dataset& d, std::uint64_t s) { return run_estimate(args, d, s).point; },
        args.boot, args.alpha, seed);
    est.diagnostics["boot_se"] = boot.se;
    est.ci_low = boot.ci_low;
    est.ci_high = boot.ci_high;
  }

  std::cout << ape::estimate_text(est);

  if (!args.out_prefix.empty()) {
    json config;
    config["command"] = "estimate";
    config["data"] = args.data_path;
    config["method"] = args.method;
    config["outcome"] = args.outcome;
    config["treatment"] = args.treatment;
    config["controls"] = args.controls_csv;
    config["instrument"] = args.instrument;
    config["nu_column"] = args.nu_column;
    config["learner_r"] = args.learner_r;
    config["learner_l"] = args.learner_l;
    config["folds"] = args.folds;
    config["degree"] = args.degree;
    config["knots"] = args.knots;
    config["boot"] = args.boot;
    config["alpha"] = args.alpha;
    config["in_sample"] = args.in_sample;
    config["seed"] = seed;
    write_json_report(args.out_prefix + ".json", config, estimate_to_json(est));

    ape::ConfigEcho echo;
    for (const auto& [key, value] : config.items())
      echo.emplace_back(key, value.is_string() ? value.get<std::string>() : value.dump());
    std::vector<std::string> header{"method", "point", "std_error", "ci_low", "ci_high", "n"};
    std::vector<std::string> row{ape::method_name(est.method), ape::format_double(est.point),
                                 est.std_error ? ape::format_double(*est.std_error) : "",
                                 est.ci_low ? ape::format_double(*est.ci_low) : "",
                                 est.ci_high ? ape::format_double(*est.ci_high) : "",
                                 std::to_string(est.n_used)};
    for (const auto& [key, value] : est.diagnostics) {
      header.push_back(key);
      row.push_back(ape::format_double(value));
    }
    ape::write_csv_report(args.out_prefix + ".csv", echo, header, {row});
  }
  return 0;
}

struct SimulateArgs {
  std::string grid_path;
  std::string preset;
  int reps = 0;  // 0 = use grid/preset default
  std::optional<std::uint64_t> seed;
  int workers = 1;
  std::string out_prefix = "sim_report";
};

struct GridConfig {
  std::vector<ape::DgpSpec> specs;
  std::vector<ape::EstimatorConfig> estimators;
  std::vector<std::string> estimator_texts;
  int reps = 500;
  std::uint64_t seed = 42;
  bool seed_set = false;
};

GridConfig parse_grid_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ape::data_error("cannot open grid config '" + path + "'");
  std::vector<std::string> y_families{"additive"}, x_families{"additive"};
  std::vector<int> m_list{1};
  std::vector<Eigen::Index> n_list{1000};
  ape::ErrorDistribution err = ape::ErrorDistribution::normal(0, 1);
  GridConfig cfg;

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string s = ape::trim(line);
    if (s.empty() || s[0] == '#' || s[0] == '[') continue;
    const std::size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw ape::data_error("grid config line " + std::to_string(lineno) + ": expected key=value");
    const std::string key = ape::trim(s.substr(0, eq));
    const std::string value = ape::trim(s.substr(eq + 1));
    if (key == "y_family") {
      y_families.clear();
      for (const auto& v : ape::split(value, ',')) y_families.push_back(ape::trim(v));
    } else if (key == "x_family") {
      x_families.clear();
      for (const auto& v : ape::split(value, ',')) x_families.push_back(ape::trim(v));
    } else if (key == "m_list" || key == "m") {
      m_list.clear();
      for (const auto& v : ape::split(value, ',')) {
        long long mv;
        if (!ape::parse_long(v, mv)) throw ape::data_error("bad m_list in grid config");
        m_list.push_back(static_cast<int>(mv));
      }
    } else if (key == "n_list" || key == "n") {
      n_list.clear();
      for (const auto& v : ape::split(value, ',')) {
        long long nv;
        if (!ape::parse_long(v, nv)) throw ape::data_error("bad n_list in grid config");
        n_list.push_back(static_cast<Eigen::Index>(nv));
      }
    } else if (key == "error") {
      err = ape::parse_distribution(value);
    } else if (key == "reps") {
      long long rv;
      if (!ape::parse_long(value, rv)) throw ape::data_error("bad reps in grid config");
      cfg.reps = static_cast<int>(rv);
    } else if (key == "seed") {
      long long sv;
      if (!ape::parse_long(value, sv)) throw ape::data_error("bad seed in grid config");
      cfg.seed = static_cast<std::uint64_t>(sv);
      cfg.seed_set = true;
    } else if (key == "estimators") {
      for (const auto& e : ape::split(value, ';')) {
        if (ape::trim(e).empty()) continue;
        cfg.estimator_texts.push_back(ape::trim(e));
        cfg.estimators.push_back(ape::parse_estimator(e));
      }
    } else {
      throw ape::data_error("unknown key '" + key + "' in grid config");
    }
  }
  if (cfg.estimators.empty()) throw ape::data_error("grid config lists no estimators");

  for (const auto& yf : y_families)
    for (const auto& xf : x_families)
      for (int m : m_list)
        for (auto n : n_list) {
          ape::DgpSpec spec;
          spec.y_family = ape::parse_y_family(yf);
          spec.x_family = ape::parse_x_family(xf);
          spec.m = m;
          spec.error_dist = err;
          spec.n = n;
          spec.validate();
          cfg.specs.push_back(spec);
        }
  return cfg;
}

GridConfig preset_grid(const std::string& name) {
  // Desk-scale versions of the simulation tables (the paper runs 10000 reps).
  std::string text;
  if (name == "table3") {
    text =
        "y_family=additive\nx_family=additive,simple,complex\nm_list=1\n"
        "n_list=100,1000,5000\nerror=normal(0,1)\nreps=500\n"
        "estimators=simple_ols;interacted_ols(degree=3);pl_spline(degree=3,knots=5);"
        "rols_ml(r=gbt(trees=400,depth=4,lr=0.05,min_leaf=10),folds=5)\n";
  } else if (name == "table4") {
    text =
        "y_family=complex\nx_family=simple\nm_list=1,2,3\n"
        "n_list=1000,5000\nerror=normal(0,1)\nreps=500\n"
        "estimators=simple_ols;interacted_ols(degree=3);pl_spline(degree=3,knots=5);"
        "rols_ml(r=gbt(trees=400,depth=4,lr=0.05,min_leaf=10),folds=5)\n";
  } else if (name == "table5") {
    text =
        "y_family=complex\nx_family=complex\nm_list=1,2,3\n"
        "n_list=1000,5000\nerror=normal(0,1)\nreps=500\n"
        "estimators=simple_ols;interacted_ols(degree=3);pl_spline(degree=3,knots=5);"
        "rols_ml(r=gbt(trees=400,depth=4,lr=0.05,min_leaf=10),folds=5)\n";
  } else if (name == "table6") {
    text =
        "y_family=complex\nx_family=complex\nm_list=1,2,3\n"
        "n_list=1000,5000\nerror=gmix(0.9)\nreps=500\n"
        "estimators=simple_ols;interacted_ols(degree=3);pl_spline(degree=3,knots=5);"
        "rols_known\n";
  } else if (name == "table7") {
    text =
        "y_family=complex\nx_family=additive\nm_list=1,2,3\n"
        "n_list=1000,5000\nerror=normal(0,1)\nreps=500\n"
        "estimators=simple_ols;interacted_ols(degree=3);pl_spline(degree=3,knots=5);"
        "rols_ml(r=gbt(trees=400,depth=4,lr=0.05,min_leaf=10),folds=5)\n";
  } else {
    throw ape::usage_error("unknown preset '" + name + "'");
  }
  const std::string tmp = "/tmp/ape_preset_" + name + ".cfg";
  {
    std::ofstream out(tmp);
    out << text;
  }
  return parse_grid_file(tmp);
}

int cmd_simulate(const SimulateArgs& args) {
  if (args.preset == "figure1") {
    // routed to the figure1 command with its defaults
    throw ape::usage_error("use the 'figure1' subcommand (or --preset figure1 there)");
  }
  GridConfig grid;
  if (!args.grid_path.empty())
    grid = parse_grid_file(args.grid_path);
  else if (!args.preset.empty())
    grid = preset_grid(args.preset);
  else
    throw ape::usage_error("simulate needs --grid FILE or --preset NAME");

  const int reps = args.reps > 0 ? args.reps : grid.reps;
  const std::uint64_t seed = args.seed ? *args.seed : (grid.seed_set ? grid.seed : resolve_seed(std::nullopt));

  const ape::SimReport report =
      ape::run_grid(grid.specs, grid.estimators, reps, seed, args.workers);

  ape::ConfigEcho echo;
  echo.emplace_back("command", "simulate");
  echo.emplace_back("grid", args.grid_path.empty() ? ("preset:" + args.preset) : args.grid_path);
  echo.emplace_back("reps", std::to_string(reps));
  echo.emplace_back("seed", std::to_string(seed));
  std::string est_list;
  for (const auto& e : grid.estimator_texts) est_list += (est_list.empty() ? "" : ";") + e;
  echo.emplace_back("estimators", est_list);

  ape::write_csv_report(args.out_prefix + ".csv", echo, ape::sim_report_csv_header(),
                        ape::sim_report_csv_rows(report));
  const std::string text = ape::sim_report_text(report);
  {
    std::ofstream out(args.out_prefix + ".txt", std::ios::binary);
    ape::write_config_comments(out, echo);
    out << text;
  }
  std::cout << text;
  std::cout << "report written to " << args.out_prefix << ".csv / .txt\n";
  return 0;
}

struct DiagnoseArgs {
  std::string data_path;
  std::string outcome, treatment;
  std::string controls_csv;
  std::string nu_column;
  std::string learner = "gbt(trees=300,depth=3,lr=0.1,min_leaf=20)";
  bool use_learner = false;
  int folds = 5;
  int max_order = 5;
  int boot = 200;
  int max_p = 3;
  std::optional<std::uint64_t> seed;
  std::string out_prefix;
};

int cmd_diagnose(const DiagnoseArgs& args) {
  const std::uint64_t seed = resolve_seed(args.seed);
  EstimateArgs load;
  load.outcome = args.outcome;
  load.treatment = args.treatment;
  load.controls_csv = args.controls_csv;
  load.nu_column = args.nu_column;
  const ape::Dataset data = ape::load_csv(args.data_path, roles_from(load));

  Eigen::VectorXd nu_hat;
  if (!args.nu_column.empty()) {
    nu_hat = *data.nu_known;
  } else if (args.use_learner) {
    const ape::LearnerSpec spec = ape::parse_learner(args.learner);
    nu_hat = ape::crossfit_residualise(data, ape::Target::Treatment, spec, args.folds, seed)
                 .residuals;
  } else {
    throw ape::usage_error("diagnose needs --nu-column or --learner-r (residual source)");
  }

  const ape::MomentProfile prof = ape::moment_profile(nu_hat, args.max_order, args.boot, seed);
  const std::vector<ape::EmpiricalWeight> weights = ape::empirical_weights(nu_hat, args.max_p);

  std::cout << "moment ladder deviations (flag when |dev| > 2 SE):\n"
            << ape::moment_profile_text(prof) << "\nempirical weights:\n"
            << ape::empirical_weights_text(weights);

  if (!args.out_prefix.empty()) {
    ape::ConfigEcho echo;
    echo.emplace_back("command", "diagnose");
    echo.emplace_back("data", args.data_path);
    echo.emplace_back("nu_column", args.nu_column);
    echo.emplace_back("learner", args.use_learner ? args.learner : "");
    echo.emplace_back("max_order", std::to_string(args.max_order));
    echo.emplace_back("boot", std::to_string(args.boot));
    echo.emplace_back("seed", std::to_string(seed));
    std::vector<std::vector<std::string>> rows;
    for (std::size_t p = 0; p < prof.deviations.size(); ++p)
      rows.push_back({"deviation", std::to_string(p), ape::format_double(prof.deviations[p]),
                      ape::format_double(prof.std_errors[p]), prof.flagged[p] ? "1" : "0"});
    for (const auto& w : weights)
      rows.push_back({"weight", std::to_string(w.p),
                      w.defined ? ape::format_double(w.value) : "undefined", "", ""});
    ape::write_csv_report(args.out_prefix + ".csv", echo,
                          {"kind", "p", "value", "boot_se", "flag"}, rows);
  }
  return 0;
}

struct Fig1Args {
  int reps = 200;
  long long n = 1000;
  std::string epochs = "50:200";
  std::optional<std::uint64_t> seed;
  int workers = 1;
  std::string out_prefix = "figure1";
};

int cmd_figure1(const Fig1Args& args) {
  const std::uint64_t seed = resolve_seed(args.seed);
  const auto parts = ape::split(args.epochs, ':');
  long long lo = 50, hi = 200;
  if (parts.size() != 2 || !ape::parse_long(parts[0], lo) || !ape::parse_long(parts[1], hi))
    throw ape::usage_error("--epochs must look like 50:200");

  const ape::Fig1Result result =
      ape::figure1_experiment(args.reps, static_cast<Eigen::Index>(args.n),
                              static_cast<int>(lo), static_cast<int>(hi), seed, args.workers);

  Eigen::VectorXd corr(static_cast<Eigen::Index>(result.records.size()));
  Eigen::VectorXd rols_est(corr.size()), dml_est(corr.size());
  for (Eigen::Index i = 0; i < corr.size(); ++i) {
    corr[i] = result.records[static_cast<std::size_t>(i)].corr_nu_z;
    rols_est[i] = result.records[static_cast<std::size_t>(i)].rols_estimate;
    dml_est[i] = result.records[static_cast<std::size_t>(i)].dml_estimate;
  }
  const ape::SlopeFit rols_slope = ape::slope_fit(corr, rols_est);
  const ape::SlopeFit dml_slope = ape::slope_fit(corr, dml_est);

  ape::ConfigEcho echo;
  echo.emplace_back("command", "figure1");
  echo.emplace_back("reps", std::to_string(args.reps));
  echo.emplace_back("n", std::to_string(args.n));
  echo.emplace_back("epochs", args.epochs);
  echo.emplace_back("seed", std::to_string(seed));
  ape::write_csv_report(args.out_prefix + ".csv", echo, ape::fig1_csv_header(),
                        ape::fig1_csv_rows(result));

  std::vector<std::vector<std::string>> table;
  table.push_back({"", "slope", "hc0_se", "z"});
  table.push_back({"rols", ape::format_fixed(rols_slope.slope, 4),
                   ape::format_fixed(rols_slope.se, 4), ape::format_fixed(rols_slope.z, 2)});
  table.push_back({"dml", ape::format_fixed(dml_slope.slope, 4),
                   ape::format_fixed(dml_slope.se, 4), ape::format_fixed(dml_slope.z, 2)});
  std::cout << "true APE " << ape::format_fixed(result.true_ape, 4) << ", " << result.records.size()
            << " replications, " << result.skipped << " skipped\n"
            << ape::aligned_table(table) << "per-replication records written to "
            << args.out_prefix << ".csv\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"average partial effect estimation via residualised treatment"};
  app.require_subcommand(1);

  EstimateArgs est_args;
  auto* est = app.add_subcommand("estimate", "estimate the APE from a CSV file");
  est->add_option("--data", est_args.data_path, "CSV data file")->required();
  est->add_option("--outcome", est_args.outcome, "outcome column")->required();
  est->add_option("--treatment", est_args.treatment, "treatment column")->required();
  est->add_option("--controls", est_args.controls_csv, "comma-separated control columns");
  est->add_option("--instrument", est_args.instrument, "instrument column");
  est->add_option("--nu-column", est_args.nu_column, "known exogenous-error column");
  est->add_option("--method", est_args.method,
                  "rols|rols_ml|dml|ols|interacted|spline|iv")->required();
  est->add_option("--learner-r", est_args.learner_r, "learner spec for r(Z)=E[X|Z]");
  est->add_option("--learner-l", est_args.learner_l, "learner spec for l(Z)=E[Y|Z]");
  est->add_option("--folds", est_args.folds, "cross-fitting folds");
  est->add_option("--degree", est_args.degree, "polynomial/spline degree");
  est->add_option("--knots", est_args.knots, "interior spline knots");
  est->add_option("--boot", est_args.boot, "bootstrap replications for the CI (0 = off)");
  est->add_option("--alpha", est_args.alpha, "CI level");
  est->add_flag("--in-sample", est_args.in_sample, "residualise in sample instead of cross-fitting");
  est->add_option("--seed", est_args.seed, "seed (APE_SEED fallback)");
  est->add_option("--out", est_args.out_prefix, "report file prefix");

  SimulateArgs sim_args;
  auto* sim = app.add_subcommand("simulate", "run a Monte Carlo estimator grid");
  sim->add_option("--grid", sim_args.grid_path, "grid config file (key=value lines)");
  sim->add_option("--preset", sim_args.preset, "table3|table4|table5|table6|table7");
  sim->add_option("--reps", sim_args.reps, "replications (overrides grid)");
  sim->add_option("--seed", sim_args.seed, "seed");
  sim->add_option("--workers", sim_args.workers, "worker threads");
  sim->add_option("--out", sim_args.out_prefix, "report file prefix");

  DiagnoseArgs diag_args;
  auto* diag = app.add_subcommand("diagnose", "moment-ladder and weight diagnostics");
  diag->add_option("--data", diag_args.data_path, "CSV data file")->required();
  diag->add_option("--outcome", diag_args.outcome, "outcome column")->required();
  diag->add_option("--treatment", diag_args.treatment, "treatment column")->required();
  diag->add_option("--controls", diag_args.controls_csv, "comma-separated control columns");
  diag->add_option("--nu-column", diag_args.nu_column, "known exogenous-error column");
  auto* lopt = diag->add_option("--learner-r", diag_args.learner, "learner spec to residualise X");
  diag->add_option("--folds", diag_args.folds, "cross-fitting folds");
  diag->add_option("--max-order", diag_args.max_order, "highest moment order");
  diag->add_option("--max-p", diag_args.max_p, "highest weight order");
  diag->add_option("--boot", diag_args.boot, "bootstrap replications for deviation SEs");
  diag->add_option("--seed", diag_args.seed, "seed");
  diag->add_option("--out", diag_args.out_prefix, "report file prefix");

  Fig1Args fig_args;
  auto* fig = app.add_subcommand("figure1", "R-OLS vs DML robustness experiment");
  fig->add_option("--reps", fig_args.reps, "replications");
  fig->add_option("--n", fig_args.n, "sample size per replication");
  fig->add_option("--epochs", fig_args.epochs, "epoch range lo:hi");
  fig->add_option("--seed", fig_args.seed, "seed");
  fig->add_option("--workers", fig_args.workers, "worker threads");
  fig->add_option("--out", fig_args.out_prefix, "report file prefix");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (est->parsed()) return cmd_estimate(est_args);
    if (sim->parsed()) return cmd_simulate(sim_args);
    if (diag->parsed()) {
      diag_args.use_learner = lopt->count() > 0;
      return cmd_diagnose(diag_args);
    }
    if (fig->parsed()) return cmd_figure1(fig_args);
  } catch (const ape::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
