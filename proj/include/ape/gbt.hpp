#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "ape/error.hpp"

namespace ape {

// Gradient-boosted regression trees for squared error: depth-limited trees on
// variance-reduction splits with quantile-binned thresholds. Fitting is
// deterministic (no row or column subsampling), so results depend only on the
// data and hyperparameters.
class GbtRegressor {
 public:
  struct Params {
    int trees = 300;
    int depth = 3;
    double learning_rate = 0.1;
    int min_leaf = 20;
    int bins = 256;
  };

  explicit GbtRegressor(Params params) : params_(params) {
    if (params_.trees < 1 || params_.depth < 1 || params_.min_leaf < 1 || params_.bins < 2)
      throw usage_error("gbt: trees, depth, min_leaf must be >= 1");
    if (!(params_.learning_rate >= 0))
      throw usage_error("gbt: learning rate must be non-negative");
  }

  void fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& t) {
    const Eigen::Index n = x.rows();
    const Eigen::Index k = x.cols();
    if (t.size() != n) throw usage_error("gbt: feature/target size mismatch");

    build_bins(x);
    Eigen::MatrixXi binned(n, k);
    for (Eigen::Index j = 0; j < k; ++j)
      for (Eigen::Index i = 0; i < n; ++i) binned(i, j) = bin_of(x(i, j), j);

    base_ = t.mean();
    Eigen::VectorXd fitted = Eigen::VectorXd::Constant(n, base_);
    trees_.clear();
    trees_.reserve(static_cast<std::size_t>(params_.trees));
    for (int m = 0; m < params_.trees; ++m) {
      const Eigen::VectorXd resid = t - fitted;
      Tree tree = grow_tree(binned, resid);
      // leaves already know their training rows; update fits directly
      for (const auto& node : tree.nodes)
        if (node.feature < 0)
          for (Eigen::Index i : node.rows) fitted[i] += params_.learning_rate * node.value;
      for (auto& node : tree.nodes) node.rows.clear();
      trees_.push_back(std::move(tree));
    }
  }

  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const {
    const Eigen::Index n = x.rows();
    Eigen::VectorXd out = Eigen::VectorXd::Constant(n, base_);
    for (const auto& tree : trees_) {
      for (Eigen::Index i = 0; i < n; ++i) {
        int node = 0;
        while (tree.nodes[static_cast<std::size_t>(node)].feature >= 0) {
          const auto& nd = tree.nodes[static_cast<std::size_t>(node)];
          node = (x(i, nd.feature) <= nd.threshold) ? nd.left : nd.right;
        }
        out[i] += params_.learning_rate * tree.nodes[static_cast<std::size_t>(node)].value;
      }
    }
    return out;
  }

 private:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
    std::vector<Eigen::Index> rows;  // training rows, cleared after fitting
  };
  struct Tree {
    std::vector<Node> nodes;
  };

  void build_bins(const Eigen::MatrixXd& x) {
    const Eigen::Index k = x.cols();
    cuts_.assign(static_cast<std::size_t>(k), {});
    for (Eigen::Index j = 0; j < k; ++j) {
      std::vector<double> col(x.col(j).data(), x.col(j).data() + x.rows());
      std::sort(col.begin(), col.end());
      std::vector<double>& cuts = cuts_[static_cast<std::size_t>(j)];
      for (int b = 1; b < params_.bins; ++b) {
        const double q = static_cast<double>(b) / static_cast<double>(params_.bins);
        const std::size_t idx = std::min(
            static_cast<std::size_t>(q * static_cast<double>(col.size())), col.size() - 1);
        cuts.push_back(col[idx]);
      }
      cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    }
  }

  // bin(x) = index of the first cut >= x, so "bin <= b" <=> "x <= cuts[b]".
  int bin_of(double v, Eigen::Index feature) const {
    const auto& cuts = cuts_[static_cast<std::size_t>(feature)];
    return static_cast<int>(std::lower_bound(cuts.begin(), cuts.end(), v) - cuts.begin());
  }

  Tree grow_tree(const Eigen::MatrixXi& binned, const Eigen::VectorXd& resid) const {
    const Eigen::Index n = binned.rows();
    const Eigen::Index k = binned.cols();
    Tree tree;
    tree.nodes.emplace_back();
    tree.nodes[0].rows.resize(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) tree.nodes[0].rows[static_cast<std::size_t>(i)] = i;

    std::vector<int> frontier{0};
    for (int level = 0; level < params_.depth && !frontier.empty(); ++level) {
      std::vector<int> next;
      for (int node_id : frontier) {
        const std::vector<Eigen::Index> rows = tree.nodes[static_cast<std::size_t>(node_id)].rows;
        const double total_cnt = static_cast<double>(rows.size());
        if (total_cnt < 2.0 * params_.min_leaf) continue;
        double total_sum = 0.0;
        for (Eigen::Index i : rows) total_sum += resid[i];

        int best_feature = -1;
        int best_bin = -1;
        double best_gain = 1e-12 * (1.0 + total_sum * total_sum / total_cnt);
        for (Eigen::Index j = 0; j < k; ++j) {
          const auto& cuts = cuts_[static_cast<std::size_t>(j)];
          if (cuts.empty()) continue;
          hist_cnt_.assign(cuts.size() + 1, 0.0);
          hist_sum_.assign(cuts.size() + 1, 0.0);
          for (Eigen::Index i : rows) {
            const int b = binned(i, j);
            hist_cnt_[static_cast<std::size_t>(b)] += 1.0;
            hist_sum_[static_cast<std::size_t>(b)] += resid[i];
          }
          double cnt_l = 0.0, sum_l = 0.0;
          for (std::size_t b = 0; b < cuts.size(); ++b) {
            cnt_l += hist_cnt_[b];
            sum_l += hist_sum_[b];
            const double cnt_r = total_cnt - cnt_l;
            if (cnt_l < params_.min_leaf || cnt_r < params_.min_leaf) continue;
            const double sum_r = total_sum - sum_l;
            const double gain = sum_l * sum_l / cnt_l + sum_r * sum_r / cnt_r -
                                total_sum * total_sum / total_cnt;
            if (gain > best_gain) {
              best_gain = gain;
              best_feature = static_cast<int>(j);
              best_bin = static_cast<int>(b);
            }
          }
        }
        if (best_feature < 0) continue;

        Node left, right;
        for (Eigen::Index i : rows) {
          if (binned(i, best_feature) <= best_bin)
            left.rows.push_back(i);
          else
            right.rows.push_back(i);
        }
        auto& parent = tree.nodes[static_cast<std::size_t>(node_id)];
        parent.feature = best_feature;
        parent.threshold = cuts_[static_cast<std::size_t>(best_feature)][static_cast<std::size_t>(best_bin)];
        parent.rows.clear();
        parent.left = static_cast<int>(tree.nodes.size());
        parent.right = parent.left + 1;
        next.push_back(parent.left);
        next.push_back(parent.right);
        tree.nodes.push_back(std::move(left));
        tree.nodes.push_back(std::move(right));
      }
      frontier = std::move(next);
    }

    for (auto& node : tree.nodes) {
      if (node.feature >= 0) continue;
      double s = 0.0;
      for (Eigen::Index i : node.rows) s += resid[i];
      node.value = node.rows.empty() ? 0.0 : s / static_cast<double>(node.rows.size());
    }
    return tree;
  }

  Params params_;
  double base_ = 0.0;
  std::vector<std::vector<double>> cuts_;
  std::vector<Tree> trees_;
  mutable std::vector<double> hist_cnt_;
  mutable std::vector<double> hist_sum_;
};

}  // namespace ape
