#include "mireg/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <queue>
#include <stdexcept>
#include <tuple>

#include "mireg/grid.hpp"

namespace mireg {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Brute-force exact kNN rows for one query point.
void knn_row_brute(const Eigen::Vector3d& q, const std::vector<Eigen::Vector3d>& ref, int k,
                   int* out) {
  std::vector<std::pair<double, int>> d(ref.size());
  for (int j = 0; j < static_cast<int>(ref.size()); ++j)
    d[j] = {(ref[j] - q).squaredNorm(), j};
  std::partial_sort(d.begin(), d.begin() + k, d.end());
  for (int j = 0; j < k; ++j) out[j] = d[j].second;
}

std::vector<std::vector<std::pair<int, double>>> symmetric_adjacency(
    const SuperpointGraph& graph) {
  const int n = static_cast<int>(graph.superpoints.size());
  const int k = graph.k();
  std::vector<std::vector<int>> nbrs(n);
  for (int i = 0; i < n; ++i)
    for (int s = 0; s < k; ++s) {
      const int j = graph.neighbor_index(i, s);
      nbrs[std::min(i, j)].push_back(std::max(i, j));
    }
  std::vector<std::vector<std::pair<int, double>>> adj(n);
  for (int i = 0; i < n; ++i) {
    std::sort(nbrs[i].begin(), nbrs[i].end());
    nbrs[i].erase(std::unique(nbrs[i].begin(), nbrs[i].end()), nbrs[i].end());
    for (int j : nbrs[i]) {
      const double w = (graph.superpoints.points[i] - graph.superpoints.points[j]).norm();
      adj[i].push_back({j, w});
      adj[j].push_back({i, w});
    }
  }
  return adj;
}

// Dijkstra; when `targets` is non-null the search stops after all of them are
// settled.
std::vector<double> dijkstra(const std::vector<std::vector<std::pair<int, double>>>& adj,
                             int source, const std::vector<int>* targets) {
  const int n = static_cast<int>(adj.size());
  std::vector<double> dist(n, kInf);
  std::vector<bool> settled(n, false);
  int remaining = targets ? static_cast<int>(targets->size()) : -1;
  std::vector<char> is_target;
  if (targets) {
    is_target.assign(n, 0);
    for (int t : *targets)
      if (!is_target[t]) is_target[t] = 1;
    remaining = 0;
    for (int t = 0; t < n; ++t) remaining += is_target[t];
  }
  using Node = std::pair<double, int>;
  std::priority_queue<Node, std::vector<Node>, std::greater<Node>> heap;
  dist[source] = 0.0;
  heap.push({0.0, source});
  while (!heap.empty()) {
    const auto [d, u] = heap.top();
    heap.pop();
    if (settled[u]) continue;
    settled[u] = true;
    if (targets && is_target[u] && --remaining == 0) break;
    for (const auto& [v, w] : adj[u]) {
      if (dist[u] + w < dist[v]) {
        dist[v] = dist[u] + w;
        heap.push({dist[v], v});
      }
    }
  }
  return dist;
}

}  // namespace

PointCloud voxel_downsample(const PointCloud& cloud, double voxel) {
  if (!(voxel > 0.0)) throw std::invalid_argument("voxel size must be positive");
  using Key = std::tuple<long, long, long>;
  std::map<Key, std::pair<Eigen::Vector3d, int>> cells;
  for (const auto& p : cloud.points) {
    const Key key{static_cast<long>(std::floor(p.x() / voxel)),
                  static_cast<long>(std::floor(p.y() / voxel)),
                  static_cast<long>(std::floor(p.z() / voxel))};
    auto& cell = cells[key];
    if (cell.second == 0) cell.first = Eigen::Vector3d::Zero();
    cell.first += p;
    cell.second += 1;
  }
  PointCloud out;
  out.points.reserve(cells.size());
  for (const auto& [key, cell] : cells)
    out.points.push_back(cell.first / static_cast<double>(cell.second));
  return out;
}

Eigen::MatrixXi knn(const PointCloud& query, const PointCloud& reference, int k) {
  if (k < 1) throw std::invalid_argument("k must be at least 1");
  if (static_cast<std::size_t>(k) > reference.size())
    throw std::invalid_argument("insufficient points: k exceeds reference size");
  const int nq = static_cast<int>(query.size());
  Eigen::MatrixXi out(nq, k);
  if (reference.size() <= 2000) {
    std::vector<int> row(k);
    for (int i = 0; i < nq; ++i) {
      knn_row_brute(query.points[i], reference.points, k, row.data());
      for (int j = 0; j < k; ++j) out(i, j) = row[j];
    }
  } else {
    // grid-accelerated path; identical results, same tie rule
    GridIndex grid(reference.points, GridIndex::suggested_cell(reference.points));
    for (int i = 0; i < nq; ++i) {
      const auto idx = grid.nearest_k(query.points[i], k);
      for (int j = 0; j < k; ++j) out(i, j) = idx[j];
    }
  }
  return out;
}

int default_fps_start(const PointCloud& cloud) {
  const Eigen::Vector3d c = cloud.centroid();
  int best = 0;
  double best_d = -1.0;
  for (int i = 0; i < static_cast<int>(cloud.size()); ++i) {
    const double d = (cloud.points[i] - c).squaredNorm();
    if (d > best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

std::vector<int> farthest_point_sampling(const PointCloud& cloud, int n,
                                         std::optional<int> start) {
  const int total = static_cast<int>(cloud.size());
  if (n < 1 || n > total) throw std::invalid_argument("sample count out of range");
  const int s = start.value_or(total > 0 ? default_fps_start(cloud) : 0);
  if (s < 0 || s >= total) throw std::invalid_argument("start index out of range");
  std::vector<int> picked;
  picked.reserve(n);
  std::vector<double> min_d(total, kInf);
  int current = s;
  picked.push_back(current);
  for (int round = 1; round < n; ++round) {
    int next = -1;
    double next_d = -1.0;
    for (int i = 0; i < total; ++i) {
      const double d = (cloud.points[i] - cloud.points[current]).squaredNorm();
      if (d < min_d[i]) min_d[i] = d;
      if (min_d[i] > next_d) {
        next_d = min_d[i];
        next = i;
      }
    }
    picked.push_back(next);
    current = next;
  }
  return picked;
}

PointCloud estimate_normals_curvature(const PointCloud& cloud, int k, Diagnostics* diag) {
  if (k < 3) throw std::invalid_argument("normal estimation needs k >= 3");
  if (cloud.size() <= static_cast<std::size_t>(k))
    throw std::invalid_argument("insufficient points for normal estimation");
  const Eigen::MatrixXi nbr = knn(cloud, cloud, k);
  PointCloud out = cloud;
  out.normals.assign(cloud.size(), Eigen::Vector3d::UnitZ());
  out.curvature.assign(cloud.size(), 0.0);
  for (int i = 0; i < static_cast<int>(cloud.size()); ++i) {
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (int s = 0; s < k; ++s) mean += cloud.points[nbr(i, s)];
    mean /= static_cast<double>(k);
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (int s = 0; s < k; ++s) {
      const Eigen::Vector3d d = cloud.points[nbr(i, s)] - mean;
      cov += d * d.transpose();
    }
    cov /= static_cast<double>(k);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    const Eigen::Vector3d evals = eig.eigenvalues();  // ascending
    const double total = evals.sum();
    if (!(evals(2) > 1e-24)) {
      if (diag) (*diag)["degenerate_neighborhoods"] += 1;
      continue;  // keep +z / 0 fallback
    }
    Eigen::Vector3d n = eig.eigenvectors().col(0);
    int axis = 0;
    for (int c = 1; c < 3; ++c)
      if (std::abs(n(c)) > std::abs(n(axis))) axis = c;
    if (n(axis) < 0.0) n = -n;
    out.normals[i] = n.normalized();
    out.curvature[i] = total > 0.0 ? std::max(evals(0), 0.0) / total : 0.0;
  }
  return out;
}

std::vector<double> geodesic_distances(const SuperpointGraph& graph, int source) {
  const int n = static_cast<int>(graph.superpoints.size());
  if (source < 0 || source >= n) throw std::invalid_argument("source index out of range");
  return dijkstra(symmetric_adjacency(graph), source, nullptr);
}

Eigen::MatrixXd neighbor_geodesics(const SuperpointGraph& graph) {
  const int n = static_cast<int>(graph.superpoints.size());
  const int k = graph.k();
  const auto adj = symmetric_adjacency(graph);
  Eigen::MatrixXd out(n, k);
  std::vector<int> targets(k);
  for (int i = 0; i < n; ++i) {
    for (int s = 0; s < k; ++s) targets[s] = graph.neighbor_index(i, s);
    const auto dist = dijkstra(adj, i, &targets);
    for (int s = 0; s < k; ++s) out(i, s) = dist[targets[s]];
  }
  return out;
}

double cloud_resolution(const PointCloud& cloud) {
  const int n = static_cast<int>(cloud.size());
  if (n < 2) throw std::invalid_argument("cloud resolution requires at least 2 points");
  std::vector<double> nn(n);
  if (n <= 500) {
    for (int i = 0; i < n; ++i) {
      double best = kInf;
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        best = std::min(best, (cloud.points[j] - cloud.points[i]).squaredNorm());
      }
      nn[i] = std::sqrt(best);
    }
  } else {
    GridIndex grid(cloud.points, GridIndex::suggested_cell(cloud.points));
    for (int i = 0; i < n; ++i) nn[i] = grid.nearest_distance(cloud.points[i], i);
  }
  std::sort(nn.begin(), nn.end());
  if (n % 2 == 1) return nn[n / 2];
  return 0.5 * (nn[n / 2 - 1] + nn[n / 2]);
}

std::vector<int> assign_to_nearest(const PointCloud& dense, const PointCloud& superpoints) {
  if (superpoints.empty()) throw std::invalid_argument("no superpoints to assign to");
  std::vector<int> assignment(dense.size());
  if (superpoints.size() <= 200) {
    for (int i = 0; i < static_cast<int>(dense.size()); ++i) {
      int best = 0;
      double best_d = kInf;
      for (int j = 0; j < static_cast<int>(superpoints.size()); ++j) {
        const double d = (superpoints.points[j] - dense.points[i]).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = j;
        }
      }
      assignment[i] = best;
    }
  } else {
    GridIndex grid(superpoints.points, GridIndex::suggested_cell(superpoints.points));
    for (int i = 0; i < static_cast<int>(dense.size()); ++i)
      assignment[i] = grid.nearest(dense.points[i]);
  }
  return assignment;
}

SuperpointGraph build_superpoint_graph(const PointCloud& cloud, double voxel, int k,
                                       Diagnostics* diag) {
  if (cloud.size() < 2) throw std::invalid_argument("insufficient points for a graph");
  SuperpointGraph g;
  g.superpoints = voxel_downsample(cloud, voxel);
  const int n = static_cast<int>(g.superpoints.size());
  if (n < 2) throw std::invalid_argument("voxel size collapses the cloud to one superpoint");
  int kk = std::min(k, n - 1);
  if (kk < k && diag) (*diag)["clamped_graph_k"] += 1;
  // pull k+1 and drop the self entry (or the worst) per row
  const Eigen::MatrixXi raw = knn(g.superpoints, g.superpoints, kk + 1);
  g.neighbor_index.resize(n, kk);
  for (int i = 0; i < n; ++i) {
    int w = 0;
    for (int s = 0; s <= kk && w < kk; ++s) {
      if (raw(i, s) == i) continue;
      g.neighbor_index(i, w++) = raw(i, s);
    }
    // row had no self entry (duplicate coordinates); drop the farthest
    for (; w < kk; ++w) g.neighbor_index(i, w) = raw(i, w);
  }
  g.assignment = assign_to_nearest(cloud, g.superpoints);
  g.resolution = cloud_resolution(cloud);
  return g;
}

std::vector<std::vector<int>> superpoint_patches(const std::vector<int>& assignment,
                                                 int n_superpoints) {
  std::vector<std::vector<int>> patches(n_superpoints);
  for (int i = 0; i < static_cast<int>(assignment.size()); ++i)
    patches[assignment[i]].push_back(i);
  return patches;
}

}  // namespace mireg
