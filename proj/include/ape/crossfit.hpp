#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ape/dataset.hpp"
#include "ape/error.hpp"
#include "ape/learners.hpp"
#include "ape/rng.hpp"
#include "ape/stats.hpp"

namespace ape {

enum class Target { Treatment, Outcome };

// Out-of-fold predictions and residuals: the prediction for row i comes from
// a learner that never saw row i.
struct CrossFitResult {
  Eigen::VectorXd predictions;
  Eigen::VectorXd residuals;  // target - prediction, exactly
  FoldAssignment folds;
  double rmse = 0.0;              // sqrt(mean residual^2)
  double corr_resid_z_max = 0.0;  // max_k |corr(residual, Z_k)|
  std::vector<std::string> warnings;
};

// Residualises the chosen column on Z with K-fold cross-fitting. Per-fold
// learner seeds are derived from (seed, fold, target) so a worker pool gives
// results identical to sequential execution. `in_sample = true` instead
// trains once on the full sample and predicts it (the paper's tables fit the
// network this way; cross-fitting is the default).
inline CrossFitResult crossfit_residualise(const Dataset& data, Target target, LearnerSpec spec,
                                           int folds, std::uint64_t seed,
                                           bool in_sample = false) {
  if (data.num_controls() < 1)
    throw usage_error("crossfit_residualise: no control columns to residualise on");
  const Eigen::Index n = data.n();
  const Eigen::VectorXd& t = (target == Target::Treatment) ? data.x : data.y;
  const std::uint64_t target_tag = (target == Target::Treatment) ? 0u : 1u;

  CrossFitResult out;
  out.folds = make_folds(n, folds, seed);
  out.predictions.resize(n);

  if (in_sample) {
    spec.seed = derive_seed(seed, 0x5EEDull + target_tag);
    out.predictions = fit_predict(spec, data.z, t, data.z, &out.warnings);
  } else {
    const auto groups = out.folds.fold_indices();
    for (int f = 0; f < folds; ++f) {
      const auto& hold = groups[static_cast<std::size_t>(f)];
      const Eigen::Index n_hold = static_cast<Eigen::Index>(hold.size());
      const Eigen::Index n_train = n - n_hold;
      Eigen::MatrixXd z_train(n_train, data.z.cols());
      Eigen::VectorXd t_train(n_train);
      Eigen::MatrixXd z_hold(n_hold, data.z.cols());
      Eigen::Index at = 0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (out.folds.fold_of[static_cast<std::size_t>(i)] == f) continue;
        z_train.row(at) = data.z.row(i);
        t_train[at] = t[i];
        ++at;
      }
      for (Eigen::Index j = 0; j < n_hold; ++j) z_hold.row(j) = data.z.row(hold[static_cast<std::size_t>(j)]);

      spec.seed = derive_seed(seed, 2ull * static_cast<std::uint64_t>(f) + target_tag);
      const Eigen::VectorXd pred = fit_predict(spec, z_train, t_train, z_hold, &out.warnings);
      for (Eigen::Index j = 0; j < n_hold; ++j)
        out.predictions[hold[static_cast<std::size_t>(j)]] = pred[j];
    }
  }

  out.residuals = t - out.predictions;
  out.rmse = std::sqrt(out.residuals.squaredNorm() / static_cast<double>(n));
  out.corr_resid_z_max = 0.0;
  for (Eigen::Index k = 0; k < data.z.cols(); ++k)
    out.corr_resid_z_max =
        std::max(out.corr_resid_z_max, std::abs(correlation(out.residuals, data.z.col(k))));
  return out;
}

}  // namespace ape
