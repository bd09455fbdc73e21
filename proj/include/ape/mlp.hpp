#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <vector>

#include "ape/error.hpp"
#include "ape/rng.hpp"

namespace ape {

// Fully connected regressor: rectified-linear hidden layers, squared-error
// loss, mini-batch Adam with a fixed step. Inputs and target are standardised
// internally; predictions are mapped back. No early stopping, so the epoch
// count directly controls how well trained the network is.
class MlpRegressor {
 public:
  struct Params {
    int layers = 3;  // hidden layers
    int width = 64;
    int epochs = 500;
    double learning_rate = 1e-3;
    int batch = 64;
    // When false, train on raw feature/target scales (the scikit-learn
    // convention); convergence then depends strongly on the target scale.
    bool standardize = true;
  };

  explicit MlpRegressor(Params params) : params_(params) {
    if (params_.layers < 1 || params_.width < 1 || params_.epochs < 1 || params_.batch < 1)
      throw usage_error("mlp: layers, width, epochs, batch must be >= 1");
    if (!(params_.learning_rate > 0)) throw usage_error("mlp: learning rate must be > 0");
  }

  void init(Eigen::Index in_dim, std::uint64_t seed) {
    in_dim_ = in_dim;
    weights_.clear();
    biases_.clear();
    Rng rng(seed, 1);
    Eigen::Index fan_in = in_dim;
    for (int l = 0; l < params_.layers; ++l) {
      push_layer(params_.width, fan_in, rng);
      fan_in = params_.width;
    }
    push_layer(1, fan_in, rng);
  }

  void fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& t, std::uint64_t seed) {
    const Eigen::Index n = x.rows();
    if (t.size() != n) throw usage_error("mlp: feature/target size mismatch");

    if (params_.standardize) {
      x_mean_ = x.colwise().mean();
      x_sd_.resize(x.cols());
      for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const double v = (x.col(j).array() - x_mean_[j]).square().mean();
        x_sd_[j] = v > 0 ? std::sqrt(v) : 1.0;
      }
      t_mean_ = t.mean();
      const double tv = (t.array() - t_mean_).square().mean();
      t_sd_ = tv > 0 ? std::sqrt(tv) : 1.0;
    } else {
      x_mean_ = Eigen::RowVectorXd::Zero(x.cols());
      x_sd_ = Eigen::RowVectorXd::Ones(x.cols());
      t_mean_ = 0.0;
      t_sd_ = 1.0;
    }

    Eigen::MatrixXd xs = standardize(x).transpose();  // in_dim x n
    Eigen::VectorXd ts = (t.array() - t_mean_) / t_sd_;

    init(x.cols(), seed);
    init_adam();

    std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;

    std::vector<Eigen::MatrixXd> gw;
    std::vector<Eigen::VectorXd> gb;
    Eigen::MatrixXd xb;
    Eigen::VectorXd tb;
    for (int epoch = 0; epoch < params_.epochs; ++epoch) {
      Rng shuffle_rng(seed, 1000 + static_cast<std::uint64_t>(epoch));
      shuffle_rng.shuffle(perm.data(), perm.size());
      for (Eigen::Index start = 0; start < n; start += params_.batch) {
        const Eigen::Index m = std::min<Eigen::Index>(params_.batch, n - start);
        xb.resize(in_dim_, m);
        tb.resize(m);
        for (Eigen::Index i = 0; i < m; ++i) {
          xb.col(i) = xs.col(perm[static_cast<std::size_t>(start + i)]);
          tb[i] = ts[perm[static_cast<std::size_t>(start + i)]];
        }
        backward(xb, tb, gw, gb);
        adam_step(gw, gb);
      }
    }
  }

  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const {
    Eigen::MatrixXd a = standardize(x).transpose();
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      a = (weights_[l] * a).colwise() + biases_[l];
      if (l + 1 < weights_.size()) a = a.cwiseMax(0.0);
    }
    return (a.row(0).transpose().array() * t_sd_ + t_mean_).matrix();
  }

  // Full-batch loss 0.5*mean((f(x)-t)^2) and parameter gradients in network
  // coordinates (already-standardised inputs). Used by the finite-difference
  // gradient check.
  double loss_and_grad(const Eigen::MatrixXd& x_std_cols, const Eigen::VectorXd& t_std,
                       std::vector<Eigen::MatrixXd>& gw, std::vector<Eigen::VectorXd>& gb) const {
    return backward(x_std_cols, t_std, gw, gb);
  }

  double loss_only(const Eigen::MatrixXd& x_std_cols, const Eigen::VectorXd& t_std) const {
    Eigen::MatrixXd a = x_std_cols;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      a = (weights_[l] * a).colwise() + biases_[l];
      if (l + 1 < weights_.size()) a = a.cwiseMax(0.0);
    }
    return 0.5 * (a.row(0).transpose() - t_std).squaredNorm() / static_cast<double>(t_std.size());
  }

  std::vector<Eigen::MatrixXd>& weights() { return weights_; }
  std::vector<Eigen::VectorXd>& biases() { return biases_; }

 private:
  void push_layer(Eigen::Index out_dim, Eigen::Index fan_in, Rng& rng) {
    Eigen::MatrixXd w(out_dim, fan_in);
    const double scale = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (Eigen::Index i = 0; i < out_dim; ++i)
      for (Eigen::Index j = 0; j < fan_in; ++j) w(i, j) = scale * rng.normal();
    weights_.push_back(std::move(w));
    biases_.push_back(Eigen::VectorXd::Zero(out_dim));
  }

  Eigen::MatrixXd standardize(const Eigen::MatrixXd& x) const {
    Eigen::MatrixXd out = x;
    for (Eigen::Index j = 0; j < out.cols(); ++j)
      out.col(j) = (out.col(j).array() - x_mean_[j]) / x_sd_[j];
    return out;
  }

  // Returns batch loss; fills gradients. Columns of x are samples.
  double backward(const Eigen::MatrixXd& x, const Eigen::VectorXd& t,
                  std::vector<Eigen::MatrixXd>& gw, std::vector<Eigen::VectorXd>& gb) const {
    const std::size_t nl = weights_.size();
    const double inv_m = 1.0 / static_cast<double>(t.size());
    std::vector<Eigen::MatrixXd> act(nl + 1);
    act[0] = x;
    for (std::size_t l = 0; l < nl; ++l) {
      act[l + 1] = (weights_[l] * act[l]).colwise() + biases_[l];
      if (l + 1 < nl) act[l + 1] = act[l + 1].cwiseMax(0.0);
    }
    const Eigen::VectorXd err = act[nl].row(0).transpose() - t;
    const double loss = 0.5 * err.squaredNorm() * inv_m;

    gw.resize(nl);
    gb.resize(nl);
    Eigen::MatrixXd delta = (err.transpose() * inv_m).eval();  // 1 x m
    for (std::size_t l = nl; l-- > 0;) {
      gw[l] = delta * act[l].transpose();
      gb[l] = delta.rowwise().sum();
      if (l > 0) {
        delta = (weights_[l].transpose() * delta).eval();
        delta.array() *= (act[l].array() > 0.0).cast<double>();
      }
    }
    return loss;
  }

  void init_adam() {
    adam_mw_.clear();
    adam_vw_.clear();
    adam_mb_.clear();
    adam_vb_.clear();
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      adam_mw_.push_back(Eigen::MatrixXd::Zero(weights_[l].rows(), weights_[l].cols()));
      adam_vw_.push_back(Eigen::MatrixXd::Zero(weights_[l].rows(), weights_[l].cols()));
      adam_mb_.push_back(Eigen::VectorXd::Zero(biases_[l].size()));
      adam_vb_.push_back(Eigen::VectorXd::Zero(biases_[l].size()));
    }
    adam_t_ = 0;
  }

  void adam_step(const std::vector<Eigen::MatrixXd>& gw, const std::vector<Eigen::VectorXd>& gb) {
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    ++adam_t_;
    const double c1 = 1.0 - std::pow(b1, adam_t_);
    const double c2 = 1.0 - std::pow(b2, adam_t_);
    const double lr = params_.learning_rate;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      adam_mw_[l] = b1 * adam_mw_[l] + (1.0 - b1) * gw[l];
      adam_vw_[l] = b2 * adam_vw_[l] + (1.0 - b2) * gw[l].array().square().matrix();
      weights_[l].array() -=
          lr * (adam_mw_[l].array() / c1) / ((adam_vw_[l].array() / c2).sqrt() + eps);
      adam_mb_[l] = b1 * adam_mb_[l] + (1.0 - b1) * gb[l];
      adam_vb_[l] = b2 * adam_vb_[l] + (1.0 - b2) * gb[l].array().square().matrix();
      biases_[l].array() -=
          lr * (adam_mb_[l].array() / c1) / ((adam_vb_[l].array() / c2).sqrt() + eps);
    }
  }

  Params params_;
  Eigen::Index in_dim_ = 0;
  std::vector<Eigen::MatrixXd> weights_;
  std::vector<Eigen::VectorXd> biases_;
  Eigen::RowVectorXd x_mean_;
  Eigen::RowVectorXd x_sd_;
  double t_mean_ = 0.0, t_sd_ = 1.0;

  std::vector<Eigen::MatrixXd> adam_mw_, adam_vw_;
  std::vector<Eigen::VectorXd> adam_mb_, adam_vb_;
  int adam_t_ = 0;
};

}  // namespace ape
