#include "mireg/grid.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>

namespace mireg {

namespace {
constexpr long kMaxCellsPerAxis = (1L << 20) - 1;
}

double GridIndex::suggested_cell(const std::vector<Eigen::Vector3d>& points) {
  if (points.empty()) return 1.0;
  Eigen::Vector3d lo = points.front(), hi = points.front();
  for (const auto& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Eigen::Vector3d e = hi - lo;
  const double longest = std::max({e.x(), e.y(), e.z()});
  if (longest <= 0.0) return 1.0;
  // pad degenerate axes so flat clouds still get a sane cell volume
  const double pad = 0.01 * longest;
  const double volume = (e.x() + pad) * (e.y() + pad) * (e.z() + pad);
  return std::max(std::cbrt(volume / static_cast<double>(points.size())), 1e-9);
}

GridIndex::GridIndex(const std::vector<Eigen::Vector3d>& points, double cell)
    : points_(points), cell_(cell) {
  if (!(cell > 0.0)) throw std::invalid_argument("grid cell size must be positive");
  origin_ = Eigen::Vector3d::Zero();
  if (!points_.empty()) {
    Eigen::Vector3d lo = points_.front(), hi = points_.front();
    for (const auto& p : points_) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    origin_ = lo;
    const double longest = (hi - lo).maxCoeff();
    if (longest / cell_ > static_cast<double>(kMaxCellsPerAxis))
      cell_ = longest / static_cast<double>(kMaxCellsPerAxis);
  }
  for (int i = 0; i < static_cast<int>(points_.size()); ++i)
    cells_[pack(coord_of(points_[i]))].push_back(i);
}

GridIndex::CellCoord GridIndex::coord_of(const Eigen::Vector3d& p) const {
  return {static_cast<long>(std::floor((p.x() - origin_.x()) / cell_)),
          static_cast<long>(std::floor((p.y() - origin_.y()) / cell_)),
          static_cast<long>(std::floor((p.z() - origin_.z()) / cell_))};
}

std::uint64_t GridIndex::pack(const CellCoord& c) {
  // 21 bits per axis, offset so slightly-negative query cells stay distinct
  const std::uint64_t bias = 1u << 20;
  return ((static_cast<std::uint64_t>(c.x + bias) & 0x1fffffULL) << 42) |
         ((static_cast<std::uint64_t>(c.y + bias) & 0x1fffffULL) << 21) |
         (static_cast<std::uint64_t>(c.z + bias) & 0x1fffffULL);
}

std::vector<int> GridIndex::nearest_k(const Eigen::Vector3d& q, int k, int exclude) const {
  std::vector<int> out;
  if (k <= 0 || points_.empty()) return out;

  using Entry = std::pair<double, int>;  // (squared distance, index)
  std::priority_queue<Entry> best;       // worst kept candidate on top

  const CellCoord c0 = coord_of(q);
  long max_ring = 2;
  {
    // enough rings to cover the whole occupied grid from the query cell
    Eigen::Vector3d lo = points_.front(), hi = points_.front();
    for (const auto& p : points_) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    const CellCoord clo = coord_of(lo);
    const CellCoord chi = coord_of(hi);
    max_ring = std::max({std::labs(c0.x - clo.x), std::labs(chi.x - c0.x),
                         std::labs(c0.y - clo.y), std::labs(chi.y - c0.y),
                         std::labs(c0.z - clo.z), std::labs(chi.z - c0.z)}) +
               1;
  }

  auto scan_cell = [&](long x, long y, long z) {
    const auto it = cells_.find(pack({x, y, z}));
    if (it == cells_.end()) return;
    for (int idx : it->second) {
      if (idx == exclude) continue;
      const double d2 = (points_[idx] - q).squaredNorm();
      const Entry e{d2, idx};
      if (static_cast<int>(best.size()) < k) {
        best.push(e);
      } else if (e < best.top()) {
        best.pop();
        best.push(e);
      }
    }
  };

  for (long r = 0; r <= max_ring; ++r) {
    if (r > 0 && static_cast<int>(best.size()) == k) {
      // distance from q to anything outside the already-scanned cell box
      const double lo_x = origin_.x() + static_cast<double>(c0.x - (r - 1)) * cell_;
      const double lo_y = origin_.y() + static_cast<double>(c0.y - (r - 1)) * cell_;
      const double lo_z = origin_.z() + static_cast<double>(c0.z - (r - 1)) * cell_;
      const double hi_x = origin_.x() + static_cast<double>(c0.x + r) * cell_;
      const double hi_y = origin_.y() + static_cast<double>(c0.y + r) * cell_;
      const double hi_z = origin_.z() + static_cast<double>(c0.z + r) * cell_;
      const double margin = std::min({q.x() - lo_x, hi_x - q.x(), q.y() - lo_y, hi_y - q.y(),
                                      q.z() - lo_z, hi_z - q.z()});
      if (margin > 0.0 && margin * margin > best.top().first) break;
    }
    if (r == 0) {
      scan_cell(c0.x, c0.y, c0.z);
      continue;
    }
    for (long dx = -r; dx <= r; ++dx)
      for (long dy = -r; dy <= r; ++dy) {
        scan_cell(c0.x + dx, c0.y + dy, c0.z - r);
        scan_cell(c0.x + dx, c0.y + dy, c0.z + r);
      }
    for (long dz = -r + 1; dz <= r - 1; ++dz) {
      for (long dx = -r; dx <= r; ++dx) {
        scan_cell(c0.x + dx, c0.y - r, c0.z + dz);
        scan_cell(c0.x + dx, c0.y + r, c0.z + dz);
      }
      for (long dy = -r + 1; dy <= r - 1; ++dy) {
        scan_cell(c0.x - r, c0.y + dy, c0.z + dz);
        scan_cell(c0.x + r, c0.y + dy, c0.z + dz);
      }
    }
  }

  std::vector<Entry> sorted;
  sorted.reserve(best.size());
  while (!best.empty()) {
    sorted.push_back(best.top());
    best.pop();
  }
  std::sort(sorted.begin(), sorted.end());
  out.reserve(sorted.size());
  for (const auto& e : sorted) out.push_back(e.second);
  return out;
}

int GridIndex::nearest(const Eigen::Vector3d& q, int exclude) const {
  const auto r = nearest_k(q, 1, exclude);
  return r.empty() ? -1 : r.front();
}

double GridIndex::nearest_distance(const Eigen::Vector3d& q, int exclude) const {
  const int idx = nearest(q, exclude);
  if (idx < 0) throw std::invalid_argument("nearest-neighbor query on empty index");
  return (points_[idx] - q).norm();
}

}  // namespace mireg
