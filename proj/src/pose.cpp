#include "mireg/pose.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <unordered_set>

#include <Eigen/SVD>

#include "mireg/rng.hpp"

namespace mireg {

RigidTransform solve_weighted_svd(const std::vector<std::pair<int, int>>& pairs,
                                  const PointCloud& source, const PointCloud& target,
                                  const std::vector<double>& weights) {
  if (pairs.size() < 3) throw std::invalid_argument("solve_weighted_svd: need at least 3 pairs");
  if (weights.size() != pairs.size())
    throw std::invalid_argument("solve_weighted_svd: weights and pairs disagree in length");
  double wsum = 0.0;
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0.0)
      throw std::invalid_argument("solve_weighted_svd: weights must be finite and non-negative");
    wsum += w;
  }
  if (wsum <= 0.0) throw std::invalid_argument("solve_weighted_svd: no positive weight");

  Eigen::Vector3d cs = Eigen::Vector3d::Zero();
  Eigen::Vector3d ct = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto [s, t] = pairs[i];
    if (s < 0 || s >= static_cast<int>(source.size()) || t < 0 ||
        t >= static_cast<int>(target.size()))
      throw std::invalid_argument("solve_weighted_svd: pair index out of range");
    cs += weights[i] * source.points[s];
    ct += weights[i] * target.points[t];
  }
  cs /= wsum;
  ct /= wsum;

  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto [s, t] = pairs[i];
    h += weights[i] * (source.points[s] - cs) * (target.points[t] - ct).transpose();
  }

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d sigma = svd.singularValues();
  // rank < 2 leaves a free rotation about the support axis
  if (!(sigma[0] > 0.0) || sigma[1] <= 1e-12 * sigma[0])
    throw std::runtime_error("solve_weighted_svd: degenerate pair support");

  Eigen::Matrix3d u = svd.matrixU();
  Eigen::Matrix3d v = svd.matrixV();
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  d(2, 2) = (v * u.transpose()).determinant() < 0.0 ? -1.0 : 1.0;

  RigidTransform out;
  out.rotation = v * d * u.transpose();
  out.translation = ct - out.rotation * cs;
  return out;
}

double add_similarity(const RigidTransform& a, const RigidTransform& b, const PointCloud& source,
                      double r) {
  if (source.empty()) throw std::invalid_argument("add_similarity: empty source");
  if (!(r > 0.0)) throw std::invalid_argument("add_similarity: r must be positive");
  double add = 0.0;
  for (const Eigen::Vector3d& p : source.points)
    add += ((a.rotation * p + a.translation) - (b.rotation * p + b.translation)).norm();
  add /= static_cast<double>(source.size());
  return std::max(0.0, 1.0 - add / r);
}

OverlapStrategy overlap_strategy_from_string(const std::string& name) {
  if (name == "point_to_point") return OverlapStrategy::point_to_point;
  if (name == "point_to_plane") return OverlapStrategy::point_to_plane;
  throw std::invalid_argument("unknown overlap strategy: " + name);
}

std::string to_string(OverlapStrategy strategy) {
  return strategy == OverlapStrategy::point_to_point ? "point_to_point" : "point_to_plane";
}

double overlap_ratio(const RigidTransform& transform, const PointCloud& source,
                     const PointCloud& target, double d_op, OverlapStrategy strategy,
                     const GridIndex* target_grid) {
  if (source.empty() || target.empty()) throw std::invalid_argument("overlap_ratio: empty cloud");
  if (!(d_op > 0.0)) throw std::invalid_argument("overlap_ratio: d_op must be positive");
  if (strategy == OverlapStrategy::point_to_plane && !target.has_normals())
    throw std::invalid_argument("overlap_ratio: point_to_plane needs target normals");

  std::optional<GridIndex> local;
  if (!target_grid)
    local.emplace(target.points, GridIndex::suggested_cell(target.points));
  const GridIndex& grid = target_grid ? *target_grid : *local;

  int within = 0;
  for (const Eigen::Vector3d& p : source.points) {
    const Eigen::Vector3d q = transform.rotation * p + transform.translation;
    const int nn = grid.nearest(q);
    double dist;
    if (strategy == OverlapStrategy::point_to_point) {
      dist = (q - target.points[nn]).norm();
    } else {
      dist = std::abs((q - target.points[nn]).dot(target.normals[nn]));
    }
    if (dist <= d_op) ++within;
  }
  return static_cast<double>(within) / static_cast<double>(source.size());
}

namespace {

struct Pool {
  std::vector<std::pair<int, int>> pairs;
  std::vector<double> scores;
};

// first appearance wins, order follows the candidate list
Pool dedup_pool(const std::vector<CandidateInstance>& candidates) {
  Pool pool;
  std::unordered_set<long long> seen;
  for (const CandidateInstance& cand : candidates) {
    for (std::size_t i = 0; i < cand.dense.size(); ++i) {
      const long long key =
          static_cast<long long>(cand.dense.pairs[i].first) * 1000000007LL +
          cand.dense.pairs[i].second;
      if (!seen.insert(key).second) continue;
      pool.pairs.push_back(cand.dense.pairs[i]);
      pool.scores.push_back(cand.dense.scores[i]);
    }
  }
  return pool;
}

std::vector<int> select_inliers(const RigidTransform& t, const Pool& pool,
                                const PointCloud& source, const PointCloud& target, double d_op) {
  std::vector<int> inliers;
  for (int i = 0; i < static_cast<int>(pool.pairs.size()); ++i) {
    const auto [s, q] = pool.pairs[i];
    const double d = ((t.rotation * source.points[s] + t.translation) - target.points[q]).norm();
    if (d <= d_op) inliers.push_back(i);
  }
  return inliers;
}

}  // namespace

std::vector<PoseCandidate> filter_and_optimize(const std::vector<CandidateInstance>& candidates,
                                               const PointCloud& source, const PointCloud& target,
                                               const FilterConfig& config, Diagnostics* diag) {
  if (!(config.theta > 0.0) || !(config.r_norm > 0.0) || !(config.d_op > 0.0))
    throw std::invalid_argument("filter_and_optimize: thresholds must be positive");
  if (source.empty() || target.empty())
    throw std::invalid_argument("filter_and_optimize: empty cloud");

  GridIndex target_grid(target.points, GridIndex::suggested_cell(target.points));

  struct Fitted {
    RigidTransform transform;
    double overlap;
    int index;
  };
  std::vector<Fitted> fitted;
  for (int c = 0; c < static_cast<int>(candidates.size()); ++c) {
    const CorrespondenceSet& dense = candidates[c].dense;
    if (dense.size() < 3) {
      if (diag) (*diag)["undersized_candidates"] += 1;
      continue;
    }
    RigidTransform t;
    try {
      t = solve_weighted_svd(dense.pairs, source, target, dense.scores);
    } catch (const std::runtime_error&) {
      if (diag) (*diag)["degenerate_candidates"] += 1;
      continue;
    }
    const double ov =
        overlap_ratio(t, source, target, config.d_op, config.strategy, &target_grid);
    fitted.push_back({t, ov, c});
  }

  std::sort(fitted.begin(), fitted.end(), [](const Fitted& a, const Fitted& b) {
    if (a.overlap != b.overlap) return a.overlap > b.overlap;
    return a.index < b.index;
  });

  // anything within theta of a better candidate folds into it, chains included
  std::vector<int> keepers;
  for (int i = 0; i < static_cast<int>(fitted.size()); ++i) {
    bool duplicate = false;
    for (int j = 0; j < i; ++j) {
      if (add_similarity(fitted[i].transform, fitted[j].transform, source, config.r_norm) >=
          config.theta) {
        duplicate = true;
        break;
      }
    }
    if (duplicate) {
      if (diag) (*diag)["merged_candidates"] += 1;
    } else {
      keepers.push_back(i);
    }
  }

  const Pool pool = dedup_pool(candidates);
  std::vector<PoseCandidate> out;
  for (int idx : keepers) {
    PoseCandidate cand;
    cand.transform = fitted[idx].transform;
    std::vector<int> inliers = select_inliers(cand.transform, pool, source, target, config.d_op);
    cand.refine_history.push_back(static_cast<int>(inliers.size()));
    for (int step = 0; step < config.max_refine_iters; ++step) {
      if (inliers.size() < 3) break;
      std::vector<std::pair<int, int>> pairs;
      std::vector<double> weights;
      for (int i : inliers) {
        pairs.push_back(pool.pairs[i]);
        weights.push_back(pool.scores[i]);
      }
      RigidTransform refined;
      try {
        refined = solve_weighted_svd(pairs, source, target, weights);
      } catch (const std::runtime_error&) {
        break;
      }
      std::vector<int> next = select_inliers(refined, pool, source, target, config.d_op);
      if (next.size() < inliers.size()) break;  // losing support, keep the previous pose
      cand.transform = refined;
      inliers = std::move(next);
      cand.refine_history.push_back(static_cast<int>(inliers.size()));
    }
    cand.inlier_count = static_cast<int>(inliers.size());
    cand.dense.level = CorrespondenceLevel::dense;
    for (int i : inliers) {
      cand.dense.pairs.push_back(pool.pairs[i]);
      cand.dense.scores.push_back(pool.scores[i]);
    }
    cand.overlap = overlap_ratio(cand.transform, source, target, config.d_op, config.strategy,
                                 &target_grid);
    if (cand.overlap < config.overlap_floor) {
      if (diag) (*diag)["floor_dropped"] += 1;
      continue;
    }
    out.push_back(std::move(cand));
  }

  std::stable_sort(out.begin(), out.end(),
                   [](const PoseCandidate& a, const PoseCandidate& b) {
                     return a.overlap > b.overlap;
                   });
  if (diag) (*diag)["final_instances"] += static_cast<long>(out.size());
  return out;
}

std::vector<PoseCandidate> sequential_ransac(const CorrespondenceSet& correspondences,
                                             const PointCloud& source, const PointCloud& target,
                                             const RansacConfig& config, Diagnostics* diag) {
  correspondences.validate();
  if (config.trials < 1 || config.min_inliers < 3 || config.max_instances < 1)
    throw std::invalid_argument("sequential_ransac: bad configuration");
  if (!(config.d_op > 0.0)) throw std::invalid_argument("sequential_ransac: d_op must be positive");
  if (source.empty() || target.empty())
    throw std::invalid_argument("sequential_ransac: empty cloud");

  GridIndex target_grid(target.points, GridIndex::suggested_cell(target.points));
  Rng rng(config.seed);

  std::vector<int> remaining(correspondences.size());
  std::iota(remaining.begin(), remaining.end(), 0);

  auto count_inliers = [&](const RigidTransform& t, std::vector<int>* keep) {
    int n = 0;
    for (int idx : remaining) {
      const auto [s, q] = correspondences.pairs[idx];
      const double d =
          ((t.rotation * source.points[s] + t.translation) - target.points[q]).norm();
      if (d <= config.d_op) {
        ++n;
        if (keep) keep->push_back(idx);
      }
    }
    return n;
  };

  std::vector<PoseCandidate> out;
  const std::vector<double> unit(3, 1.0);
  while (static_cast<int>(out.size()) < config.max_instances &&
         static_cast<int>(remaining.size()) >= config.min_inliers) {
    RigidTransform best_t;
    int best_count = 0;
    for (int trial = 0; trial < config.trials; ++trial) {
      int a = remaining[rng.uniform_int(0, static_cast<int>(remaining.size()) - 1)];
      int b = a, c = a;
      while (b == a) b = remaining[rng.uniform_int(0, static_cast<int>(remaining.size()) - 1)];
      while (c == a || c == b)
        c = remaining[rng.uniform_int(0, static_cast<int>(remaining.size()) - 1)];
      RigidTransform t;
      try {
        t = solve_weighted_svd({correspondences.pairs[a], correspondences.pairs[b],
                                correspondences.pairs[c]},
                               source, target, unit);
      } catch (const std::runtime_error&) {
        continue;
      }
      const int n = count_inliers(t, nullptr);
      if (n > best_count) {
        best_count = n;
        best_t = t;
      }
    }
    if (best_count < config.min_inliers) break;

    std::vector<int> support;
    count_inliers(best_t, &support);
    std::vector<std::pair<int, int>> pairs;
    std::vector<double> weights;
    for (int idx : support) {
      pairs.push_back(correspondences.pairs[idx]);
      weights.push_back(1.0);
    }
    RigidTransform refit = best_t;
    try {
      refit = solve_weighted_svd(pairs, source, target, weights);
    } catch (const std::runtime_error&) {
    }
    std::vector<int> final_support;
    const int final_count = count_inliers(refit, &final_support);
    if (final_count < config.min_inliers) break;

    PoseCandidate cand;
    cand.transform = refit;
    cand.inlier_count = final_count;
    cand.dense.level = correspondences.level;
    for (int idx : final_support) {
      cand.dense.pairs.push_back(correspondences.pairs[idx]);
      cand.dense.scores.push_back(correspondences.scores[idx]);
    }
    cand.overlap = overlap_ratio(refit, source, target, config.d_op,
                                 OverlapStrategy::point_to_point, &target_grid);
    cand.refine_history.push_back(final_count);
    out.push_back(std::move(cand));

    std::unordered_set<int> used(final_support.begin(), final_support.end());
    std::vector<int> next_remaining;
    for (int idx : remaining)
      if (!used.count(idx)) next_remaining.push_back(idx);
    remaining = std::move(next_remaining);
  }
  if (diag) (*diag)["ransac_instances"] += static_cast<long>(out.size());
  return out;
}

}  // namespace mireg
