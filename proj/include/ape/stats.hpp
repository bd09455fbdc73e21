#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace ape {

// Reductions used for reported numbers run as plain sequential loops: Eigen's
// vectorised redux peels by runtime pointer alignment, which lets the same
// values sum in a different order from one process to the next (Maps over
// malloc'd storage). Byte-identical reports need a fixed summation order.

template <typename Derived>
double mean(const Eigen::DenseBase<Derived>& v) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) acc += v(i);
  return acc / static_cast<double>(v.size());
}

inline double mean(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc / static_cast<double>(v.size());
}

namespace detail {

template <typename Access>
double sq_dev_sum(const Access& at, Eigen::Index n, double center) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = at(i) - center;
    acc += d * d;
  }
  return acc;
}

}  // namespace detail

// Population variance (divide by n).
template <typename Derived>
double variance_pop(const Eigen::DenseBase<Derived>& v) {
  const double m = mean(v);
  return detail::sq_dev_sum([&](Eigen::Index i) { return v(i); }, v.size(), m) /
         static_cast<double>(v.size());
}

inline double variance_pop(const std::vector<double>& v) {
  const double m = mean(v);
  return detail::sq_dev_sum([&](Eigen::Index i) { return v[static_cast<std::size_t>(i)]; },
                            static_cast<Eigen::Index>(v.size()), m) /
         static_cast<double>(v.size());
}

// Sample variance (divide by n-1).
template <typename Derived>
double variance_sample(const Eigen::DenseBase<Derived>& v) {
  const double m = mean(v);
  return detail::sq_dev_sum([&](Eigen::Index i) { return v(i); }, v.size(), m) /
         static_cast<double>(v.size() - 1);
}

inline double variance_sample(const std::vector<double>& v) {
  const double m = mean(v);
  return detail::sq_dev_sum([&](Eigen::Index i) { return v[static_cast<std::size_t>(i)]; },
                            static_cast<Eigen::Index>(v.size()), m) /
         static_cast<double>(v.size() - 1);
}

template <typename T>
double sd_pop(const T& v) {
  return std::sqrt(variance_pop(v));
}
template <typename T>
double sd_sample(const T& v) {
  return std::sqrt(variance_sample(v));
}

template <typename DerivedA, typename DerivedB>
double correlation(const Eigen::DenseBase<DerivedA>& a, const Eigen::DenseBase<DerivedB>& b) {
  const double ma = mean(a);
  const double mb = mean(b);
  double saa = 0.0, sbb = 0.0, sab = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double da = a(i) - ma;
    const double db = b(i) - mb;
    saa += da * da;
    sbb += db * db;
    sab += da * db;
  }
  const double denom = std::sqrt(saa * sbb);
  if (denom == 0.0) return 0.0;
  return sab / denom;
}

// Empirical quantile with linear interpolation (R type 7).
inline double quantile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n == 1) return v[0];
  const double h = p * static_cast<double>(n - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, n - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

template <typename Derived>
double raw_moment(const Eigen::DenseBase<Derived>& v, int order) {
  if (order == 0) return 1.0;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    double p = 1.0;
    for (int k = 0; k < order; ++k) p *= v(i);
    acc += p;
  }
  return acc / static_cast<double>(v.size());
}

// Inverse standard-normal CDF (Acklam's rational approximation, |err| < 1e-9).
inline double normal_quantile(double p) {
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  if (!(p > 0.0 && p < 1.0)) return std::numeric_limits<double>::quiet_NaN();
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - plow) {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace ape
