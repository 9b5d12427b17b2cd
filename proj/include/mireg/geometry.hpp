#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "mireg/types.hpp"

namespace mireg {

// Coarse level of a point cloud: voxel centroids, their k-nearest-neighbor
// table, and the dense-point-to-centroid assignment.
struct SuperpointGraph {
  PointCloud superpoints;
  Eigen::MatrixXi neighbor_index;  // |superpoints| x k, no self entries
  std::vector<int> assignment;     // dense point -> superpoint index
  double resolution = 0.0;         // median nearest-neighbor spacing of the dense cloud

  int k() const { return static_cast<int>(neighbor_index.cols()); }
};

// One point per occupied voxel at the centroid of its members. Output order is
// sorted by integer voxel key, so it is independent of input order inside a
// voxel and stable across runs.
PointCloud voxel_downsample(const PointCloud& cloud, double voxel);

// Exact k nearest reference points per query point (the query point itself is
// a legal result when the clouds share storage). Rows are ascending by
// (distance, index). Throws when k < 1 or k > |reference|.
Eigen::MatrixXi knn(const PointCloud& query, const PointCloud& reference, int k);

// Greedy farthest point sampling; `start` defaults to the point farthest from
// the centroid (ties toward the lower index).
std::vector<int> farthest_point_sampling(const PointCloud& cloud, int n,
                                         std::optional<int> start = std::nullopt);
int default_fps_start(const PointCloud& cloud);

// Per-point normal (smallest covariance eigenvector over the k-neighborhood,
// sign fixed so the largest-magnitude component is positive) and curvature
// lambda0 / (lambda0 + lambda1 + lambda2). Coincident neighborhoods fall back
// to +z / 0 and bump diag["degenerate_neighborhoods"].
PointCloud estimate_normals_curvature(const PointCloud& cloud, int k,
                                      Diagnostics* diag = nullptr);

// Shortest-path distance from `source` to every superpoint over the
// symmetrized neighbor graph with Euclidean edge weights. Unreachable nodes
// get +infinity.
std::vector<double> geodesic_distances(const SuperpointGraph& graph, int source);

// Geodesic distance from each superpoint to each of its graph neighbors,
// |superpoints| x k. Same semantics as geodesic_distances, computed with an
// early-stopping search per row.
Eigen::MatrixXd neighbor_geodesics(const SuperpointGraph& graph);

// Median nearest-neighbor distance (self excluded). Throws below 2 points.
double cloud_resolution(const PointCloud& cloud);

// Nearest superpoint per dense point, ties toward the lower superpoint index.
std::vector<int> assign_to_nearest(const PointCloud& dense, const PointCloud& superpoints);

SuperpointGraph build_superpoint_graph(const PointCloud& cloud, double voxel, int k,
                                       Diagnostics* diag = nullptr);

// Dense point indices grouped by owning superpoint.
std::vector<std::vector<int>> superpoint_patches(const std::vector<int>& assignment,
                                                 int n_superpoints);

}  // namespace mireg
