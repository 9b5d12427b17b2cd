#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "mireg/geometry.hpp"
#include "mireg/matching_types.hpp"
#include "mireg/types.hpp"

namespace mireg {

struct SceneConfig {
  int instances = 1;
  double noise_sigma = 0.0;        // isotropic Gaussian, meters
  double outlier_fraction = 0.0;   // background points relative to instance points
  double occlusion_fraction = 0.0; // per-instance half-space cut, fraction removed
  double margin = 0.15;            // extra bounding-sphere separation
  std::string model_id = "model";
};

struct SceneAnnotation {
  std::vector<RigidTransform> instance_transforms;
  std::vector<int> per_point_label;  // -1 = background
  std::string model_id;
  double noise_sigma = 0.0;
  double outlier_fraction = 0.0;
  double occlusion_fraction = 0.0;
  double margin = 0.0;
  std::uint64_t seed = 0;
};

struct GeneratedScene {
  PointCloud target;
  SceneAnnotation annotation;
};

// Asymmetric rigid assembly (box base, two cylinders, sphere, fin) sampled
// uniformly by surface area, with analytic outward normals. Having no
// rotational symmetry keeps ground-truth poses unique.
PointCloud make_test_model(int n_points, std::uint64_t seed);

// Places `instances` copies of the model with uniform random rotations inside
// a workspace cube, rejecting placements whose bounding-sphere centers come
// closer than (1 + margin) * diameter. Instance points keep the model's point
// order; background outliers are appended last with label -1. Throws
// "workspace too small" when 1000 attempts cannot place an instance.
GeneratedScene generate_scene(const PointCloud& model, const SceneConfig& config,
                              std::uint64_t seed);

// Majority label of the dense points assigned to each superpoint; ties go to
// the lower label value. Superpoints with no assigned points get -1.
std::vector<int> superpoint_labels(const SuperpointGraph& graph,
                                   const std::vector<int>& point_labels);

// Entry (i, slot) is 0 when superpoint i and its neighbor share a non-negative
// instance label, -infinity otherwise.
Eigen::MatrixXd ground_truth_masks(const SuperpointGraph& graph,
                                   const std::vector<int>& point_labels);

// n correspondences between model and target points: ceil(n * inlier_ratio)
// true pairs (model point -> nearest target point to its transformed image,
// score 1 + small Gaussian jitter) followed by uniformly random pairs with
// uniform scores in [0, 1).
CorrespondenceSet oracle_correspondences(const PointCloud& model, const PointCloud& target,
                                         const SceneAnnotation& annotation, double inlier_ratio,
                                         int n, std::uint64_t seed);

// Fixture-scale helper: fraction of each target patch that lands within
// `radius` of its back-projected source patch. Background patches get 0.
Eigen::MatrixXd superpoint_patch_overlaps(const PointCloud& model, const SuperpointGraph& gp,
                                          const PointCloud& target, const SuperpointGraph& gq,
                                          const SceneAnnotation& annotation, double radius);

}  // namespace mireg
