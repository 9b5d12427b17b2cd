#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

namespace mireg {

// Named counters surfaced by operations that can hit degenerate inputs.
using Diagnostics = std::map<std::string, long>;

struct PointCloud {
  std::vector<Eigen::Vector3d> points;
  std::vector<Eigen::Vector3d> normals;  // empty, or one per point (unit length)
  std::vector<double> curvature;         // empty, or one per point, in [0, 1/3]
  std::vector<int> labels;               // empty, or one per point; -1 = background

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_normals() const { return !normals.empty(); }
  bool has_curvature() const { return !curvature.empty(); }
  bool has_labels() const { return !labels.empty(); }

  Eigen::Vector3d centroid() const;

  // Throws std::invalid_argument when optional attribute sizes disagree or a
  // coordinate is non-finite.
  void validate() const;
};

struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return rotation * p + translation; }
  RigidTransform inverse() const;
  // this after inner: result maps p -> this(inner(p))
  RigidTransform compose(const RigidTransform& inner) const;
  // orthonormal with determinant +1 within tol
  bool is_valid(double tol = 1e-9) const;
};

PointCloud apply_transform(const PointCloud& cloud, const RigidTransform& t);

double bounding_box_diagonal(const PointCloud& cloud);

void merge_diagnostics(Diagnostics& into, const Diagnostics& from);

}  // namespace mireg
