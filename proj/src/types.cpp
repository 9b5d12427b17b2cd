#include "mireg/types.hpp"

#include <cmath>
#include <stdexcept>

namespace mireg {

Eigen::Vector3d PointCloud::centroid() const {
  if (points.empty()) throw std::invalid_argument("centroid of empty cloud");
  Eigen::Vector3d c = Eigen::Vector3d::Zero();
  for (const auto& p : points) c += p;
  return c / static_cast<double>(points.size());
}

void PointCloud::validate() const {
  const std::size_t n = points.size();
  if (!normals.empty() && normals.size() != n)
    throw std::invalid_argument("normals size does not match point count");
  if (!curvature.empty() && curvature.size() != n)
    throw std::invalid_argument("curvature size does not match point count");
  if (!labels.empty() && labels.size() != n)
    throw std::invalid_argument("labels size does not match point count");
  for (const auto& p : points)
    if (!p.allFinite()) throw std::invalid_argument("non-finite point coordinate");
  for (const auto& m : normals)
    if (!m.allFinite()) throw std::invalid_argument("non-finite normal");
}

RigidTransform RigidTransform::inverse() const {
  RigidTransform r;
  r.rotation = rotation.transpose();
  r.translation = -(rotation.transpose() * translation);
  return r;
}

RigidTransform RigidTransform::compose(const RigidTransform& inner) const {
  RigidTransform r;
  r.rotation = rotation * inner.rotation;
  r.translation = rotation * inner.translation + translation;
  return r;
}

bool RigidTransform::is_valid(double tol) const {
  if (!rotation.allFinite() || !translation.allFinite()) return false;
  const Eigen::Matrix3d rtr = rotation.transpose() * rotation;
  if ((rtr - Eigen::Matrix3d::Identity()).norm() > tol) return false;
  return std::abs(rotation.determinant() - 1.0) <= tol;
}

PointCloud apply_transform(const PointCloud& cloud, const RigidTransform& t) {
  PointCloud out = cloud;
  for (auto& p : out.points) p = t.apply(p);
  for (auto& m : out.normals) m = t.rotation * m;
  return out;
}

double bounding_box_diagonal(const PointCloud& cloud) {
  if (cloud.empty()) return 0.0;
  Eigen::Vector3d lo = cloud.points.front();
  Eigen::Vector3d hi = cloud.points.front();
  for (const auto& p : cloud.points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  return (hi - lo).norm();
}

void merge_diagnostics(Diagnostics& into, const Diagnostics& from) {
  for (const auto& [key, value] : from) into[key] += value;
}

}  // namespace mireg
