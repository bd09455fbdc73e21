#pragma once

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ape/diagnostics.hpp"
#include "ape/error.hpp"
#include "ape/estimators.hpp"
#include "ape/simulation.hpp"
#include "ape/text.hpp"

namespace ape {

// Resolved run configuration echoed into every report so a rerun of the
// embedded settings reproduces the file byte for byte.
using ConfigEcho = std::vector<std::pair<std::string, std::string>>;

inline void write_config_comments(std::ostream& out, const ConfigEcho& config) {
  for (const auto& [key, value] : config) out << "# " << key << "=" << value << "\n";
}

inline void write_csv_report(const std::string& path, const ConfigEcho& config,
                             const std::vector<std::string>& header,
                             const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("cannot write report file '" + path + "'");
  write_config_comments(out, config);
  for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
  out << "\n";
  for (const auto& row : rows) {
    for (std::size_t j = 0; j < row.size(); ++j) out << (j ? "," : "") << row[j];
    out << "\n";
  }
}

inline std::string aligned_table(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> widths;
  for (const auto& row : rows) {
    if (widths.size() < row.size()) widths.resize(row.size(), 0);
    for (std::size_t j = 0; j < row.size(); ++j) widths[j] = std::max(widths[j], row[j].size());
  }
  std::ostringstream out;
  for (const auto& row : rows) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      out << std::left << std::setw(static_cast<int>(widths[j]) + 2) << row[j];
    }
    out << "\n";
  }
  return out.str();
}

inline std::vector<std::string> sim_report_csv_header() {
  return {"y_family", "x_family", "m",    "error", "n",  "estimator", "reps",
          "failures", "true_ape", "mean", "sd",    "mse"};
}

inline std::vector<std::vector<std::string>> sim_report_csv_rows(const SimReport& report) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& cell : report.cells) {
    rows.push_back({to_string(cell.spec.y_family), to_string(cell.spec.x_family),
                    std::to_string(cell.spec.m), to_string(cell.spec.error_dist),
                    std::to_string(cell.spec.n), cell.estimator, std::to_string(cell.reps),
                    std::to_string(cell.failures), format_double(cell.true_ape),
                    format_double(cell.mean), format_double(cell.sd), format_double(cell.mse)});
  }
  return rows;
}

// Tables shaped like the simulation section: one block per DGP, estimator
// rows, sample-size columns, "mean (sd) [mse]" cells.
inline std::string sim_report_text(const SimReport& report) {
  // group cells by (y, x, m, error)
  std::map<std::string, std::vector<const SimCell*>> groups;
  std::vector<std::string> group_order;
  for (const auto& cell : report.cells) {
    const std::string key = std::string(to_string(cell.spec.y_family)) + " Y-DGP, " +
                            to_string(cell.spec.x_family) + " X-DGP, M=" +
                            std::to_string(cell.spec.m) + ", errors " +
                            to_string(cell.spec.error_dist);
    if (!groups.count(key)) group_order.push_back(key);
    groups[key].push_back(&cell);
  }

  std::ostringstream out;
  for (const auto& key : group_order) {
    const auto& cells = groups[key];
    std::vector<Eigen::Index> ns;
    std::vector<std::string> estimators;
    for (const auto* cellp : cells) {
      if (std::find(ns.begin(), ns.end(), cellp->spec.n) == ns.end()) ns.push_back(cellp->spec.n);
      if (std::find(estimators.begin(), estimators.end(), cellp->estimator) == estimators.end())
        estimators.push_back(cellp->estimator);
    }
    out << key << "  (true APE " << format_fixed(cells.front()->true_ape, 4) << ", " << report.reps
        << " reps)\n";
    std::vector<std::vector<std::string>> table;
    std::vector<std::string> head{"estimator"};
    for (auto n : ns) head.push_back("N=" + std::to_string(n));
    table.push_back(head);
    for (const auto& est : estimators) {
      std::vector<std::string> row{est};
      for (auto n : ns) {
        std::string cell_text = "-";
        for (const auto* cellp : cells) {
          if (cellp->estimator == est && cellp->spec.n == n) {
            cell_text = format_fixed(cellp->mean, 2) + " (" + format_fixed(cellp->sd, 2) + ") [" +
                        format_fixed(cellp->mse, 2) + "]";
            if (cellp->failures > 0)
              cell_text += " {" + std::to_string(cellp->failures) + " failed}";
          }
        }
        row.push_back(cell_text);
      }
      table.push_back(row);
    }
    out << aligned_table(table) << "\n";
  }
  return out.str();
}

inline std::vector<std::string> fig1_csv_header() {
  return {"rep", "epochs", "corr_nu_z", "rols_estimate", "dml_estimate", "predicted_bias"};
}

inline std::vector<std::vector<std::string>> fig1_csv_rows(const Fig1Result& result) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& rec : result.records) {
    rows.push_back({std::to_string(rec.rep), std::to_string(rec.epochs),
                    format_double(rec.corr_nu_z), format_double(rec.rols_estimate),
                    format_double(rec.dml_estimate), format_double(rec.predicted_bias)});
  }
  return rows;
}

inline std::string estimate_text(const ApeEstimate& est) {
  std::vector<std::vector<std::string>> table;
  table.push_back({"method", method_name(est.method)});
  table.push_back({"point", format_double(est.point)});
  if (est.std_error) table.push_back({"std_error", format_double(*est.std_error)});
  if (est.ci_low) table.push_back({"ci_low", format_double(*est.ci_low)});
  if (est.ci_high) table.push_back({"ci_high", format_double(*est.ci_high)});
  table.push_back({"n", std::to_string(est.n_used)});
  for (const auto& [key, value] : est.diagnostics) table.push_back({key, format_double(value)});
  return aligned_table(table);
}

inline std::string moment_profile_text(const MomentProfile& prof) {
  std::vector<std::vector<std::string>> table;
  table.push_back({"p", "deviation", "boot_se", "flag"});
  for (std::size_t p = 0; p < prof.deviations.size(); ++p) {
    table.push_back({std::to_string(p), format_double(prof.deviations[p]),
                     format_double(prof.std_errors[p]), prof.flagged[p] ? "FLAG" : ""});
  }
  return aligned_table(table);
}

inline std::string empirical_weights_text(const std::vector<EmpiricalWeight>& weights) {
  std::vector<std::vector<std::string>> table;
  table.push_back({"p", "weight"});
  for (const auto& w : weights)
    table.push_back({std::to_string(w.p), w.defined ? format_double(w.value) : "undefined"});
  return aligned_table(table);
}

}  // namespace ape
