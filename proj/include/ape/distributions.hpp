#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ape/error.hpp"
#include "ape/rng.hpp"
#include "ape/text.hpp"

namespace ape {

// Error distributions with analytically known moments. The Gaussian mixture
// is 0.5 N(mu, 1-mu^2) + 0.5 N(-mu, 1-mu^2) (unit variance overall); the
// uniform mixture is 0.5 U(-1,1) + 0.5 U(-a,a), mesokurtotic at
// a = sqrt(5 + sqrt(24)).
struct ErrorDistribution {
  enum class Kind { Normal, GaussianMixture, UniformMixture, Uniform };
  Kind kind = Kind::Normal;
  double p0 = 0.0;  // Normal: mean; GaussianMixture: mu; UniformMixture: a; Uniform: lo
  double p1 = 1.0;  // Normal: sd; Uniform: hi

  static ErrorDistribution normal(double mean, double sd) {
    if (!(sd > 0)) throw usage_error("normal distribution needs sd > 0");
    return {Kind::Normal, mean, sd};
  }
  static ErrorDistribution gaussian_mixture(double mu) {
    if (!(mu > 0 && mu < 1))
      throw usage_error("gaussian mixture needs 0 < mu < 1 (component variance 1 - mu^2)");
    return {Kind::GaussianMixture, mu, 0.0};
  }
  static ErrorDistribution uniform_mixture(double a) {
    if (!(a > 0)) throw usage_error("uniform mixture needs a > 0");
    return {Kind::UniformMixture, a, 0.0};
  }
  static ErrorDistribution uniform(double lo, double hi) {
    if (!(lo < hi)) throw usage_error("uniform distribution needs lo < hi");
    return {Kind::Uniform, lo, hi};
  }
};

// The mixture parameter that makes the uniform mixture mesokurtotic
// (kurtosis exactly 3).
inline double mesokurtotic_uniform_a() { return std::sqrt(5.0 + std::sqrt(24.0)); }

inline Eigen::VectorXd sample(const ErrorDistribution& dist, Eigen::Index n, std::uint64_t seed) {
  if (n < 1) throw usage_error("sample needs n >= 1");
  Rng rng(seed);
  Eigen::VectorXd out(n);
  switch (dist.kind) {
    case ErrorDistribution::Kind::Normal:
      for (Eigen::Index i = 0; i < n; ++i) out[i] = rng.normal(dist.p0, dist.p1);
      break;
    case ErrorDistribution::Kind::GaussianMixture: {
      const double sd = std::sqrt(1.0 - dist.p0 * dist.p0);
      for (Eigen::Index i = 0; i < n; ++i) {
        // component label and variate from the same stream, in that order
        const double mean = (rng.uniform01() < 0.5) ? dist.p0 : -dist.p0;
        out[i] = rng.normal(mean, sd);
      }
      break;
    }
    case ErrorDistribution::Kind::UniformMixture:
      for (Eigen::Index i = 0; i < n; ++i) {
        const double a = (rng.uniform01() < 0.5) ? 1.0 : dist.p0;
        out[i] = rng.uniform(-a, a);
      }
      break;
    case ErrorDistribution::Kind::Uniform:
      for (Eigen::Index i = 0; i < n; ++i) out[i] = rng.uniform(dist.p0, dist.p1);
      break;
  }
  return out;
}

namespace detail {

// E[X^k] for X ~ N(mean, sd^2) by the recursion
// E[X^{p+2}] = mean E[X^{p+1}] + sd^2 (p+1) E[X^p].
inline double normal_moment(double mean, double sd, int order) {
  std::vector<double> m(static_cast<std::size_t>(order) + 2, 0.0);
  m[0] = 1.0;
  if (order >= 1) m[1] = mean;
  for (int p = 0; p + 2 <= order; ++p)
    m[static_cast<std::size_t>(p) + 2] =
        mean * m[static_cast<std::size_t>(p) + 1] +
        sd * sd * static_cast<double>(p + 1) * m[static_cast<std::size_t>(p)];
  return m[static_cast<std::size_t>(order)];
}

// E[X^k] for X ~ U(lo, hi): (hi^{k+1} - lo^{k+1}) / ((k+1)(hi - lo)).
inline double uniform_moment(double lo, double hi, int order) {
  const double k1 = static_cast<double>(order) + 1.0;
  return (std::pow(hi, k1) - std::pow(lo, k1)) / (k1 * (hi - lo));
}

}  // namespace detail

inline double analytic_moment(const ErrorDistribution& dist, int order) {
  if (order < 0) throw usage_error("moment order must be >= 0");
  switch (dist.kind) {
    case ErrorDistribution::Kind::Normal:
      return detail::normal_moment(dist.p0, dist.p1, order);
    case ErrorDistribution::Kind::GaussianMixture: {
      const double sd = std::sqrt(1.0 - dist.p0 * dist.p0);
      return 0.5 * detail::normal_moment(dist.p0, sd, order) +
             0.5 * detail::normal_moment(-dist.p0, sd, order);
    }
    case ErrorDistribution::Kind::UniformMixture:
      return 0.5 * detail::uniform_moment(-1.0, 1.0, order) +
             0.5 * detail::uniform_moment(-dist.p0, dist.p0, order);
    case ErrorDistribution::Kind::Uniform:
      return detail::uniform_moment(dist.p0, dist.p1, order);
  }
  throw usage_error("unknown distribution kind");
}

// Deviations from the moment ladder E[v^{p+2}] / ((p+1) E[v^2]) = E[v^p] for
// p = 0..max_m-1; all-zero iff the ladder holds through order max_m.
inline std::vector<double> assumption2_deviation(const ErrorDistribution& dist, int max_m) {
  if (max_m < 1) throw usage_error("assumption2_deviation needs max_m >= 1");
  const double m2 = analytic_moment(dist, 2);
  if (!(m2 > 0)) throw numeric_error("assumption2_deviation: degenerate distribution, E[v^2] = 0");
  std::vector<double> dev(static_cast<std::size_t>(max_m));
  for (int p = 0; p < max_m; ++p)
    dev[static_cast<std::size_t>(p)] =
        analytic_moment(dist, p + 2) / (static_cast<double>(p + 1) * m2) -
        analytic_moment(dist, p);
  return dev;
}

inline std::string to_string(const ErrorDistribution& dist) {
  switch (dist.kind) {
    case ErrorDistribution::Kind::Normal:
      return "normal(" + format_double(dist.p0) + "," + format_double(dist.p1) + ")";
    case ErrorDistribution::Kind::GaussianMixture:
      return "gmix(" + format_double(dist.p0) + ")";
    case ErrorDistribution::Kind::UniformMixture:
      return "umix(" + format_double(dist.p0) + ")";
    case ErrorDistribution::Kind::Uniform:
      return "uniform(" + format_double(dist.p0) + "," + format_double(dist.p1) + ")";
  }
  return "?";
}

// Parses "normal(0,1)", "gmix(0.9)", "umix(auto)", "umix(2.2)", "uniform(-1,1)".
inline ErrorDistribution parse_distribution(const std::string& text) {
  const std::string s = trim(text);
  const std::size_t open = s.find('(');
  if (open == std::string::npos || s.back() != ')')
    throw usage_error("cannot parse distribution spec '" + text + "'");
  const std::string name = s.substr(0, open);
  const std::vector<std::string> args = split(s.substr(open + 1, s.size() - open - 2), ',');
  auto arg_num = [&](std::size_t i) {
    double v;
    if (i >= args.size() || !parse_double(args[i], v))
      throw usage_error("bad argument in distribution spec '" + text + "'");
    return v;
  };
  if (name == "normal") {
    if (args.size() != 2) throw usage_error("normal(mean,sd) takes two arguments");
    return ErrorDistribution::normal(arg_num(0), arg_num(1));
  }
  if (name == "gmix") {
    if (args.size() != 1) throw usage_error("gmix(mu) takes one argument");
    return ErrorDistribution::gaussian_mixture(arg_num(0));
  }
  if (name == "umix") {
    if (args.size() != 1) throw usage_error("umix(a|auto) takes one argument");
    if (trim(args[0]) == "auto") return ErrorDistribution::uniform_mixture(mesokurtotic_uniform_a());
    return ErrorDistribution::uniform_mixture(arg_num(0));
  }
  if (name == "uniform") {
    if (args.size() != 2) throw usage_error("uniform(lo,hi) takes two arguments");
    return ErrorDistribution::uniform(arg_num(0), arg_num(1));
  }
  throw usage_error("unknown distribution '" + name + "'");
}

}  // namespace ape
