#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "ape/error.hpp"
#include "ape/rng.hpp"
#include "ape/text.hpp"

namespace ape {

// Immutable columnar sample. All columns share length n >= 2 and every value
// is finite; both are enforced at construction so downstream code never
// re-checks.
struct Dataset {
  Eigen::VectorXd y;                       // outcome
  Eigen::VectorXd x;                       // treatment
  Eigen::MatrixXd z;                       // controls, n x K (K may be 0)
  std::optional<Eigen::VectorXd> w;        // instrument
  std::optional<Eigen::VectorXd> nu_known; // known exogenous error

  Eigen::Index n() const { return y.size(); }
  Eigen::Index num_controls() const { return z.cols(); }

  static Dataset create(Eigen::VectorXd y, Eigen::VectorXd x, Eigen::MatrixXd z,
                        std::optional<Eigen::VectorXd> w = std::nullopt,
                        std::optional<Eigen::VectorXd> nu = std::nullopt) {
    const Eigen::Index n = y.size();
    if (n < 2) throw data_error("dataset needs at least 2 rows, got " + std::to_string(n));
    auto check_len = [n](Eigen::Index m, const char* name) {
      if (m != n)
        throw data_error(std::string("column '") + name + "' length " + std::to_string(m) +
                         " != n = " + std::to_string(n));
    };
    check_len(x.size(), "treatment");
    if (z.cols() > 0) check_len(z.rows(), "controls");
    if (z.cols() == 0) z.resize(n, 0);
    if (w) check_len(w->size(), "instrument");
    if (nu) check_len(nu->size(), "known-error");

    auto check_finite = [](const double* p, Eigen::Index m, const char* name) {
      for (Eigen::Index i = 0; i < m; ++i)
        if (!std::isfinite(p[i]))
          throw data_error(std::string("non-finite value in '") + name + "' at row " +
                           std::to_string(i + 1));
    };
    check_finite(y.data(), n, "outcome");
    check_finite(x.data(), n, "treatment");
    check_finite(z.data(), z.size(), "controls");
    if (w) check_finite(w->data(), n, "instrument");
    if (nu) check_finite(nu->data(), n, "known-error");

    Dataset d;
    d.y = std::move(y);
    d.x = std::move(x);
    d.z = std::move(z);
    d.w = std::move(w);
    d.nu_known = std::move(nu);
    return d;
  }

  // Row resample (bootstrap); all present columns are resampled jointly.
  Dataset take_rows(const std::vector<Eigen::Index>& idx) const {
    const Eigen::Index m = static_cast<Eigen::Index>(idx.size());
    Eigen::VectorXd ny(m), nx(m);
    Eigen::MatrixXd nz(m, z.cols());
    std::optional<Eigen::VectorXd> nw, nnu;
    if (w) nw = Eigen::VectorXd(m);
    if (nu_known) nnu = Eigen::VectorXd(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      const Eigen::Index j = idx[static_cast<std::size_t>(i)];
      ny[i] = y[j];
      nx[i] = x[j];
      nz.row(i) = z.row(j);
      if (nw) (*nw)[i] = (*w)[j];
      if (nnu) (*nnu)[i] = (*nu_known)[j];
    }
    return create(std::move(ny), std::move(nx), std::move(nz), std::move(nw), std::move(nnu));
  }
};

struct ColumnRoles {
  std::string outcome;
  std::string treatment;
  std::vector<std::string> controls;
  std::optional<std::string> instrument;
  std::optional<std::string> known_error;
};

namespace detail {

inline Eigen::Index find_column(const std::vector<std::string>& header, const std::string& name,
                                const std::string& role) {
  for (std::size_t j = 0; j < header.size(); ++j)
    if (header[j] == name) return static_cast<Eigen::Index>(j);
  throw data_error("column '" + name + "' mapped to role '" + role + "' not found in header");
}

}  // namespace detail

// Reads an RFC-4180-style CSV (header row required, '.' decimal separator)
// and assembles a Dataset from the role mapping. Row order is preserved.
inline Dataset load_csv(const std::string& path, const ColumnRoles& roles) {
  if (roles.outcome.empty()) throw data_error("role mapping lacks an outcome column");
  if (roles.treatment.empty()) throw data_error("role mapping lacks a treatment column");

  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open data file '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) throw data_error("empty file '" + path + "'");
  const std::vector<std::string> header = split_csv_record(line);

  const Eigen::Index jy = detail::find_column(header, roles.outcome, "outcome");
  const Eigen::Index jx = detail::find_column(header, roles.treatment, "treatment");
  std::vector<Eigen::Index> jz;
  for (const auto& c : roles.controls) jz.push_back(detail::find_column(header, c, "control"));
  std::optional<Eigen::Index> jw, jnu;
  if (roles.instrument) jw = detail::find_column(header, *roles.instrument, "instrument");
  if (roles.known_error) jnu = detail::find_column(header, *roles.known_error, "known-error");

  std::vector<std::vector<double>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
    const std::vector<std::string> fields = split_csv_record(line);
    if (fields.size() != header.size())
      throw data_error("row " + std::to_string(lineno) + " has " + std::to_string(fields.size()) +
                       " fields, header has " + std::to_string(header.size()));
    std::vector<double> vals(fields.size());
    for (std::size_t j = 0; j < fields.size(); ++j) {
      double v;
      if (!parse_double(fields[j], v) || !std::isfinite(v))
        throw data_error("non-numeric or non-finite value '" + fields[j] + "' at row " +
                         std::to_string(lineno) + ", column '" + header[j] + "'");
      vals[j] = v;
    }
    rows.push_back(std::move(vals));
  }

  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  if (n < 2) throw data_error("need at least 2 data rows, got " + std::to_string(n));

  Eigen::VectorXd y(n), x(n);
  Eigen::MatrixXd z(n, static_cast<Eigen::Index>(jz.size()));
  std::optional<Eigen::VectorXd> w, nu;
  if (jw) w = Eigen::VectorXd(n);
  if (jnu) nu = Eigen::VectorXd(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    y[i] = r[static_cast<std::size_t>(jy)];
    x[i] = r[static_cast<std::size_t>(jx)];
    for (std::size_t k = 0; k < jz.size(); ++k)
      z(i, static_cast<Eigen::Index>(k)) = r[static_cast<std::size_t>(jz[k])];
    if (jw) (*w)[i] = r[static_cast<std::size_t>(*jw)];
    if (jnu) (*nu)[i] = r[static_cast<std::size_t>(*jnu)];
  }
  return Dataset::create(std::move(y), std::move(x), std::move(z), std::move(w), std::move(nu));
}

// Writes the dataset back out with the given role names; values are printed
// in shortest round-trip form so a reload is bit-identical.
inline void write_csv(const std::string& path, const Dataset& d, const ColumnRoles& roles) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("cannot write data file '" + path + "'");
  out << roles.outcome << "," << roles.treatment;
  for (std::size_t k = 0; k < roles.controls.size(); ++k) out << "," << roles.controls[k];
  if (roles.instrument) out << "," << *roles.instrument;
  if (roles.known_error) out << "," << *roles.known_error;
  out << "\n";
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    out << format_double(d.y[i]) << "," << format_double(d.x[i]);
    for (Eigen::Index k = 0; k < d.z.cols(); ++k) out << "," << format_double(d.z(i, k));
    if (d.w) out << "," << format_double((*d.w)[i]);
    if (d.nu_known) out << "," << format_double((*d.nu_known)[i]);
    out << "\n";
  }
}

// Deterministic pseudo-random partition of [0, n) into `folds` groups whose
// sizes differ by at most one. Fully determined by (n, folds, seed).
struct FoldAssignment {
  std::vector<int> fold_of;
  int folds = 0;
  std::uint64_t seed = 0;

  std::vector<std::vector<Eigen::Index>> fold_indices() const {
    std::vector<std::vector<Eigen::Index>> out(static_cast<std::size_t>(folds));
    for (std::size_t i = 0; i < fold_of.size(); ++i)
      out[static_cast<std::size_t>(fold_of[i])].push_back(static_cast<Eigen::Index>(i));
    return out;
  }
};

inline FoldAssignment make_folds(Eigen::Index n, int folds, std::uint64_t seed) {
  if (folds < 2 || static_cast<Eigen::Index>(folds) > n)
    throw usage_error("folds must satisfy 2 <= folds <= n; got folds = " + std::to_string(folds) +
                      ", n = " + std::to_string(n));
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
  Rng rng(seed, derive_seed(static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(folds)));
  rng.shuffle(perm.data(), perm.size());
  FoldAssignment fa;
  fa.folds = folds;
  fa.seed = seed;
  fa.fold_of.assign(static_cast<std::size_t>(n), 0);
  for (std::size_t j = 0; j < perm.size(); ++j)
    fa.fold_of[static_cast<std::size_t>(perm[j])] = static_cast<int>(j % static_cast<std::size_t>(folds));
  return fa;
}

}  // namespace ape
