#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <unordered_map>
#include <vector>

namespace mireg {

// Uniform hash grid for exact nearest-neighbor queries. Ties are always broken
// toward the lower point index, so results match an exhaustive scan bit for
// bit regardless of cell size.
class GridIndex {
 public:
  GridIndex(const std::vector<Eigen::Vector3d>& points, double cell);

  // Exact nearest point index; `exclude` skips one index (-1 = none).
  // Returns -1 when no candidate exists.
  int nearest(const Eigen::Vector3d& q, int exclude = -1) const;
  double nearest_distance(const Eigen::Vector3d& q, int exclude = -1) const;

  // Exact k nearest, ascending by (distance, index). k is clamped to the
  // number of available candidates.
  std::vector<int> nearest_k(const Eigen::Vector3d& q, int k, int exclude = -1) const;

  double cell() const { return cell_; }

  // Reasonable default cell size: cube-root of bounding volume per point.
  static double suggested_cell(const std::vector<Eigen::Vector3d>& points);

 private:
  struct CellCoord {
    long x, y, z;
  };
  CellCoord coord_of(const Eigen::Vector3d& p) const;
  static std::uint64_t pack(const CellCoord& c);

  const std::vector<Eigen::Vector3d>& points_;
  double cell_;
  Eigen::Vector3d origin_;
  std::unordered_map<std::uint64_t, std::vector<int>> cells_;
};

}  // namespace mireg
