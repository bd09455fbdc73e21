#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ape/dataset.hpp"
#include "ape/error.hpp"
#include "ape/parallel.hpp"
#include "ape/rng.hpp"
#include "ape/stats.hpp"

namespace ape {

enum class CiMethod { Percentile, NormalApprox };

struct BootstrapResult {
  std::vector<double> estimates;  // length B minus skips, resample order
  double point = 0.0;             // full-sample estimate
  double se = 0.0;                // sample SD of estimates (B-1 denominator)
  double ci_low = 0.0, ci_high = 0.0;
  CiMethod method = CiMethod::Percentile;
  int skipped = 0;
};

// The full estimation pipeline reruns on every resample, so the estimator
// callback receives a derived seed and must key any internal randomness
// (fold draws, learner initialisation) off it.
using BootstrapEstimator = std::function<double(const Dataset&, std::uint64_t seed)>;

// Nonparametric bootstrap: B joint row resamples with replacement of size n.
// A failing resample is retried once with a derived seed, then skipped; more
// than 10% skips aborts. Deterministic given seed, including under workers>1.
inline BootstrapResult bootstrap(const Dataset& data, const BootstrapEstimator& estimator, int b_reps,
                                 double alpha, std::uint64_t seed,
                                 CiMethod method = CiMethod::Percentile, int workers = 1) {
  if (b_reps < 50) throw usage_error("bootstrap: need B >= 50");
  if (!(alpha > 0 && alpha < 1)) throw usage_error("bootstrap: need 0 < alpha < 1");
  const Eigen::Index n = data.n();

  BootstrapResult result;
  result.method = method;
  result.point = estimator(data, derive_seed(seed, 0xF011));

  std::vector<double> est(static_cast<std::size_t>(b_reps));
  std::vector<char> ok(static_cast<std::size_t>(b_reps), 0);
  parallel_for(b_reps, workers, [&](int b) {
    Rng rng(seed, static_cast<std::uint64_t>(b) + 1);
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i)
      idx[static_cast<std::size_t>(i)] =
          static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
    const Dataset resample = data.take_rows(idx);
    const std::uint64_t est_seed = derive_seed(seed, static_cast<std::uint64_t>(b) + 1);
    try {
      est[static_cast<std::size_t>(b)] = estimator(resample, est_seed);
      ok[static_cast<std::size_t>(b)] = 1;
    } catch (const Error&) {
      try {
        est[static_cast<std::size_t>(b)] = estimator(resample, derive_seed(est_seed, 0x52545259));
        ok[static_cast<std::size_t>(b)] = 1;
      } catch (const Error&) {
        // skipped; counted below
      }
    }
  });

  for (int b = 0; b < b_reps; ++b) {
    if (ok[static_cast<std::size_t>(b)])
      result.estimates.push_back(est[static_cast<std::size_t>(b)]);
    else
      ++result.skipped;
  }
  if (result.skipped * 10 > b_reps)
    throw numeric_error("bootstrap: estimator failed on more than 10% of resamples (" +
                        std::to_string(result.skipped) + "/" + std::to_string(b_reps) + ")");

  result.se = sd_sample(result.estimates);
  if (method == CiMethod::Percentile) {
    result.ci_low = quantile(result.estimates, alpha / 2.0);
    result.ci_high = quantile(result.estimates, 1.0 - alpha / 2.0);
  } else {
    // normal approximation; 1.96 for the default alpha = 0.05
    const double z = normal_quantile(1.0 - alpha / 2.0);
    result.ci_low = result.point - z * result.se;
    result.ci_high = result.point + z * result.se;
  }
  return result;
}

}  // namespace ape
