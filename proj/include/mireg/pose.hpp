#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mireg/grid.hpp"
#include "mireg/matching_types.hpp"
#include "mireg/types.hpp"

namespace mireg {

// Weighted least-squares rigid fit with the reflection corrected through the
// determinant sign. Throws on fewer than 3 pairs, non-finite or all-zero
// weights, or collinear support (the fit would be underdetermined).
RigidTransform solve_weighted_svd(const std::vector<std::pair<int, int>>& pairs,
                                  const PointCloud& source, const PointCloud& target,
                                  const std::vector<double>& weights);

// 1 - (mean displacement of the source points between the two poses) / r,
// clamped at 0. Symmetric in its arguments; 1 exactly when the poses agree.
double add_similarity(const RigidTransform& a, const RigidTransform& b, const PointCloud& source,
                      double r);

enum class OverlapStrategy { point_to_point, point_to_plane };

OverlapStrategy overlap_strategy_from_string(const std::string& name);
std::string to_string(OverlapStrategy strategy);

// Fraction of source points whose transformed image lies within d_op of the
// target: nearest-neighbor distance for point_to_point, distance along the
// neighbor's normal for point_to_plane (requires target normals). A
// caller-supplied grid must index target.points.
double overlap_ratio(const RigidTransform& transform, const PointCloud& source,
                     const PointCloud& target, double d_op, OverlapStrategy strategy,
                     const GridIndex* target_grid = nullptr);

struct PoseCandidate {
  RigidTransform transform;
  CorrespondenceSet dense;  // pairs supporting the pose
  double overlap = 0.0;
  int inlier_count = 0;
  std::vector<int> refine_history;  // inlier count after each accepted step
};

struct FilterConfig {
  double theta = 0.8;        // pose-similarity merge threshold
  double r_norm = 0.1;       // displacement normalizer for the similarity
  double d_op = 0.05;        // inlier / overlap distance
  OverlapStrategy strategy = OverlapStrategy::point_to_point;
  int max_refine_iters = 10;
  double overlap_floor = 0.3;
};

// Fit, deduplicate, refine, and prune candidate instances:
//  1. each candidate gets a weighted fit from its dense pairs (degenerate or
//     undersized candidates are dropped),
//  2. a candidate is merged away when any higher-overlap candidate sits
//     within theta of it (chains collapse onto the best member),
//  3. survivors are refined by re-fitting on the pairs they explain within
//     d_op, drawn from the deduplicated pool of every candidate's pairs; a
//     step that loses inliers is reverted and refinement stops,
//  4. survivors below the overlap floor are discarded.
// Result is sorted by final overlap, best first.
std::vector<PoseCandidate> filter_and_optimize(const std::vector<CandidateInstance>& candidates,
                                               const PointCloud& source, const PointCloud& target,
                                               const FilterConfig& config,
                                               Diagnostics* diag = nullptr);

struct RansacConfig {
  int trials = 1024;
  int min_inliers = 12;
  int max_instances = 16;
  double d_op = 0.05;
  std::uint64_t seed = 0;
};

// Repeated 3-point consensus over one flat correspondence set; each accepted
// model consumes its inliers before the search continues. Serves as the
// reference the pipeline is compared against.
std::vector<PoseCandidate> sequential_ransac(const CorrespondenceSet& correspondences,
                                             const PointCloud& source, const PointCloud& target,
                                             const RansacConfig& config,
                                             Diagnostics* diag = nullptr);

}  // namespace mireg
