#include "mireg/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace mireg {

namespace {

constexpr double kProbClamp = 1e-12;

void check_anchor(const CircleAnchor& a) {
  if (a.pos_overlap.size() != a.pos_dist.size())
    throw std::invalid_argument("CircleAnchor: pos_overlap and pos_dist disagree in length");
  for (double d : a.pos_dist)
    if (!std::isfinite(d)) throw std::invalid_argument("CircleAnchor: non-finite distance");
  for (double d : a.neg_dist)
    if (!std::isfinite(d)) throw std::invalid_argument("CircleAnchor: non-finite distance");
  for (double w : a.pos_overlap)
    if (!std::isfinite(w) || w < 0.0)
      throw std::invalid_argument("CircleAnchor: overlaps must be finite and non-negative");
}

void check_config(const LossConfig& c) {
  if (!(c.gamma > 0.0) || !(c.delta_n > c.delta_p))
    throw std::invalid_argument("LossConfig: need gamma > 0 and delta_n > delta_p");
}

}  // namespace

double circle_loss_side(const std::vector<CircleAnchor>& anchors, const LossConfig& config) {
  check_config(config);
  if (anchors.empty()) return 0.0;
  double total = 0.0;
  for (const CircleAnchor& a : anchors) {
    check_anchor(a);
    double pos = 0.0;
    for (std::size_t i = 0; i < a.pos_dist.size(); ++i) {
      const double m = a.pos_dist[i] - config.delta_p;
      pos += std::exp(a.pos_overlap[i] * config.gamma * m * m);
    }
    double neg = 0.0;
    for (double d : a.neg_dist) {
      const double m = config.delta_n - d;
      neg += std::exp(config.gamma * m * m);
    }
    total += std::log1p(pos * neg);
  }
  return total / static_cast<double>(anchors.size());
}

void circle_loss_side_grad(const std::vector<CircleAnchor>& anchors, const LossConfig& config,
                           std::vector<std::vector<double>>* pos_grad,
                           std::vector<std::vector<double>>* neg_grad) {
  check_config(config);
  if (pos_grad) pos_grad->assign(anchors.size(), {});
  if (neg_grad) neg_grad->assign(anchors.size(), {});
  if (anchors.empty()) return;
  const double inv_n = 1.0 / static_cast<double>(anchors.size());
  for (std::size_t ai = 0; ai < anchors.size(); ++ai) {
    const CircleAnchor& a = anchors[ai];
    check_anchor(a);
    std::vector<double> pos_terms(a.pos_dist.size());
    std::vector<double> neg_terms(a.neg_dist.size());
    double pos = 0.0, neg = 0.0;
    for (std::size_t i = 0; i < a.pos_dist.size(); ++i) {
      const double m = a.pos_dist[i] - config.delta_p;
      pos_terms[i] = std::exp(a.pos_overlap[i] * config.gamma * m * m);
      pos += pos_terms[i];
    }
    for (std::size_t i = 0; i < a.neg_dist.size(); ++i) {
      const double m = config.delta_n - a.neg_dist[i];
      neg_terms[i] = std::exp(config.gamma * m * m);
      neg += neg_terms[i];
    }
    const double denom = 1.0 + pos * neg;
    if (pos_grad) {
      auto& g = (*pos_grad)[ai];
      g.resize(a.pos_dist.size());
      for (std::size_t i = 0; i < a.pos_dist.size(); ++i) {
        const double m = a.pos_dist[i] - config.delta_p;
        g[i] = inv_n * neg * pos_terms[i] * 2.0 * a.pos_overlap[i] * config.gamma * m / denom;
      }
    }
    if (neg_grad) {
      auto& g = (*neg_grad)[ai];
      g.resize(a.neg_dist.size());
      for (std::size_t i = 0; i < a.neg_dist.size(); ++i) {
        const double m = config.delta_n - a.neg_dist[i];
        g[i] = -inv_n * pos * neg_terms[i] * 2.0 * config.gamma * m / denom;
      }
    }
  }
}

double circle_loss(const std::vector<CircleAnchor>& source_anchors,
                   const std::vector<CircleAnchor>& target_anchors, const LossConfig& config) {
  return 0.5 * (circle_loss_side(source_anchors, config) +
                circle_loss_side(target_anchors, config));
}

namespace {

std::vector<std::pair<int, int>> supervised_entries(const Eigen::MatrixXd& assignment,
                                                    const MatchSupervision& supervision) {
  const int rows = static_cast<int>(assignment.rows());
  const int cols = static_cast<int>(assignment.cols());
  if (rows < 2 || cols < 2)
    throw std::invalid_argument("nll_loss: assignment must include a slack row and column");
  std::vector<std::pair<int, int>> entries;
  for (const auto& [r, c] : supervision.gt_pairs) {
    if (r < 0 || r >= rows - 1 || c < 0 || c >= cols - 1)
      throw std::invalid_argument("nll_loss: gt pair outside the real block");
    entries.emplace_back(r, c);
  }
  for (int r : supervision.unmatched_rows) {
    if (r < 0 || r >= rows - 1) throw std::invalid_argument("nll_loss: unmatched row out of range");
    entries.emplace_back(r, cols - 1);
  }
  for (int c : supervision.unmatched_cols) {
    if (c < 0 || c >= cols - 1) throw std::invalid_argument("nll_loss: unmatched col out of range");
    entries.emplace_back(rows - 1, c);
  }
  return entries;
}

}  // namespace

double nll_loss(const Eigen::MatrixXd& assignment, const MatchSupervision& supervision) {
  const auto entries = supervised_entries(assignment, supervision);
  if (entries.empty()) return 0.0;
  double total = 0.0;
  for (const auto& [r, c] : entries)
    total -= std::log(std::max(assignment(r, c), kProbClamp));
  return total / static_cast<double>(entries.size());
}

Eigen::MatrixXd nll_loss_grad(const Eigen::MatrixXd& assignment,
                              const MatchSupervision& supervision) {
  const auto entries = supervised_entries(assignment, supervision);
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(assignment.rows(), assignment.cols());
  if (entries.empty()) return grad;
  const double inv_n = 1.0 / static_cast<double>(entries.size());
  for (const auto& [r, c] : entries)
    if (assignment(r, c) > kProbClamp) grad(r, c) -= inv_n / assignment(r, c);
  return grad;
}

double mask_loss(const Eigen::VectorXd& pred, const Eigen::VectorXd& gt) {
  if (pred.size() != gt.size()) throw std::invalid_argument("mask_loss: size mismatch");
  if (pred.size() == 0) return 0.0;
  double bce = 0.0;
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    if (pred[i] < 0.0 || pred[i] > 1.0 || (gt[i] != 0.0 && gt[i] != 1.0))
      throw std::invalid_argument("mask_loss: pred must be in [0,1] and gt binary");
    bce -= gt[i] * std::log(std::max(pred[i], kProbClamp)) +
           (1.0 - gt[i]) * std::log(std::max(1.0 - pred[i], kProbClamp));
  }
  bce /= static_cast<double>(pred.size());
  const double soft = 1.0 - 2.0 * (pred.dot(gt) + 1.0) / (pred.sum() + gt.sum() + 1.0);
  return bce + soft;
}

Eigen::VectorXd mask_loss_grad(const Eigen::VectorXd& pred, const Eigen::VectorXd& gt) {
  if (pred.size() != gt.size()) throw std::invalid_argument("mask_loss_grad: size mismatch");
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(pred.size());
  if (pred.size() == 0) return grad;
  const double inv_n = 1.0 / static_cast<double>(pred.size());
  const double s = pred.sum() + gt.sum() + 1.0;
  const double overlap = pred.dot(gt) + 1.0;
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    double bce = 0.0;
    if (pred[i] > kProbClamp) bce -= gt[i] / pred[i];
    if (1.0 - pred[i] > kProbClamp) bce += (1.0 - gt[i]) / (1.0 - pred[i]);
    grad[i] = inv_n * bce - 2.0 * gt[i] / s + 2.0 * overlap / (s * s);
  }
  return grad;
}

double total_loss(double circle, double nll, double mask, const LossWeights& weights) {
  return weights.circle * circle + weights.nll * nll + weights.mask * mask;
}

}  // namespace mireg
