#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

namespace mireg {

// One anchor's positive and negative feature distances. pos_overlap scales
// the positive exponent per entry (region overlap in [0, 1], typically).
struct CircleAnchor {
  std::vector<double> pos_dist;
  std::vector<double> pos_overlap;
  std::vector<double> neg_dist;
};

struct LossConfig {
  double delta_p = 0.1;  // positive margin
  double delta_n = 1.4;  // negative margin
  double gamma = 1.0;    // sharpness
};

// Per anchor: log(1 + sum_pos exp(overlap * gamma * (d - delta_p)^2)
//                    * sum_neg exp(gamma * (delta_n - d)^2)),
// averaged over the anchors. An anchor missing positives or negatives
// contributes 0. Empty input gives 0.
double circle_loss_side(const std::vector<CircleAnchor>& anchors, const LossConfig& config);

// gradients with respect to every pos_dist / neg_dist entry, same shapes
void circle_loss_side_grad(const std::vector<CircleAnchor>& anchors, const LossConfig& config,
                           std::vector<std::vector<double>>* pos_grad,
                           std::vector<std::vector<double>>* neg_grad);

// both directions averaged
double circle_loss(const std::vector<CircleAnchor>& source_anchors,
                   const std::vector<CircleAnchor>& target_anchors, const LossConfig& config);

// Supervision for a slack-augmented assignment matrix: matched pairs index
// real rows/columns, unmatched rows map to the slack column and unmatched
// columns to the slack row.
struct MatchSupervision {
  std::vector<std::pair<int, int>> gt_pairs;
  std::vector<int> unmatched_rows;
  std::vector<int> unmatched_cols;
};

// Mean negative log of the supervised entries, probabilities clamped at
// 1e-12. Empty supervision gives 0.
double nll_loss(const Eigen::MatrixXd& assignment, const MatchSupervision& supervision);

// d(loss)/d(assignment), nonzero only at supervised entries above the clamp
Eigen::MatrixXd nll_loss_grad(const Eigen::MatrixXd& assignment,
                              const MatchSupervision& supervision);

// Mean binary cross entropy plus a soft-overlap penalty
// 1 - 2 (pred . gt + 1) / (sum pred + sum gt + 1); the penalty reaches its
// floor -1/(2s+1) when pred equals a gt with s ones.
double mask_loss(const Eigen::VectorXd& pred, const Eigen::VectorXd& gt);

Eigen::VectorXd mask_loss_grad(const Eigen::VectorXd& pred, const Eigen::VectorXd& gt);

struct LossWeights {
  double circle = 1.0;
  double nll = 1.0;
  double mask = 1.0;
};

double total_loss(double circle, double nll, double mask, const LossWeights& weights = {});

}  // namespace mireg
