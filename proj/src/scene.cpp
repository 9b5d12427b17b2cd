#include "mireg/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "mireg/grid.hpp"
#include "mireg/rng.hpp"

namespace mireg {

namespace {

struct Surface {
  double area;
  // appends one sample (point + outward normal) drawn uniformly on the surface
  void (*sample)(Rng&, PointCloud&);
};

// box half-extents and center are fixed per primitive; samplers are plain
// functions so the area table stays trivially readable

void sample_base_box(Rng& rng, PointCloud& out) {
  const Eigen::Vector3d c(0.0, 0.0, 0.10);
  const Eigen::Vector3d h(0.35, 0.22, 0.10);
  const double ax = h.y() * h.z(), ay = h.x() * h.z(), az = h.x() * h.y();
  const double total = 2.0 * (ax + ay + az);
  double pick = rng.uniform(0.0, total);
  int face;  // 0..5: -x +x -y +y -z +z
  if (pick < 2.0 * ax) face = pick < ax ? 0 : 1;
  else if (pick < 2.0 * ax + 2.0 * ay) face = pick < 2.0 * ax + ay ? 2 : 3;
  else face = pick < 2.0 * ax + 2.0 * ay + az ? 4 : 5;
  const double u = rng.uniform(-1.0, 1.0), v = rng.uniform(-1.0, 1.0);
  Eigen::Vector3d p, n;
  switch (face) {
    case 0: p = {-h.x(), u * h.y(), v * h.z()}; n = {-1, 0, 0}; break;
    case 1: p = {h.x(), u * h.y(), v * h.z()}; n = {1, 0, 0}; break;
    case 2: p = {u * h.x(), -h.y(), v * h.z()}; n = {0, -1, 0}; break;
    case 3: p = {u * h.x(), h.y(), v * h.z()}; n = {0, 1, 0}; break;
    case 4: p = {u * h.x(), v * h.y(), -h.z()}; n = {0, 0, -1}; break;
    default: p = {u * h.x(), v * h.y(), h.z()}; n = {0, 0, 1}; break;
  }
  out.points.push_back(c + p);
  out.normals.push_back(n);
}

void sample_arm_cylinder(Rng& rng, PointCloud& out) {
  // vertical cylinder on the base top, radius 0.08, z in [0.20, 0.70]
  const double theta = rng.uniform(0.0, 2.0 * M_PI);
  const double z = rng.uniform(0.20, 0.70);
  const Eigen::Vector3d axis_pos(0.18, 0.05, 0.0);
  const Eigen::Vector3d n(std::cos(theta), std::sin(theta), 0.0);
  out.points.push_back(axis_pos + 0.08 * n + Eigen::Vector3d(0, 0, z));
  out.normals.push_back(n);
}

void sample_elbow_sphere(Rng& rng, PointCloud& out) {
  const Eigen::Vector3d c(0.18, 0.05, 0.75);
  Eigen::Vector3d n = rng.unit_vector();
  out.points.push_back(c + 0.12 * n);
  out.normals.push_back(n);
}

void sample_forearm_cylinder(Rng& rng, PointCloud& out) {
  // horizontal cylinder from the elbow along +x, radius 0.06, length 0.40
  const double theta = rng.uniform(0.0, 2.0 * M_PI);
  const double x = rng.uniform(0.18, 0.58);
  const Eigen::Vector3d n(0.0, std::cos(theta), std::sin(theta));
  out.points.push_back(Eigen::Vector3d(x, 0.05, 0.75) + 0.06 * n);
  out.normals.push_back(n);
}

void sample_fin_box(Rng& rng, PointCloud& out) {
  // thin asymmetric fin on one corner of the base
  const Eigen::Vector3d c(-0.25, -0.15, 0.30);
  const Eigen::Vector3d h(0.02, 0.10, 0.15);
  const double ax = h.y() * h.z(), ay = h.x() * h.z(), az = h.x() * h.y();
  const double total = 2.0 * (ax + ay + az);
  double pick = rng.uniform(0.0, total);
  int face;
  if (pick < 2.0 * ax) face = pick < ax ? 0 : 1;
  else if (pick < 2.0 * ax + 2.0 * ay) face = pick < 2.0 * ax + ay ? 2 : 3;
  else face = pick < 2.0 * ax + 2.0 * ay + az ? 4 : 5;
  const double u = rng.uniform(-1.0, 1.0), v = rng.uniform(-1.0, 1.0);
  Eigen::Vector3d p, n;
  switch (face) {
    case 0: p = {-h.x(), u * h.y(), v * h.z()}; n = {-1, 0, 0}; break;
    case 1: p = {h.x(), u * h.y(), v * h.z()}; n = {1, 0, 0}; break;
    case 2: p = {u * h.x(), -h.y(), v * h.z()}; n = {0, -1, 0}; break;
    case 3: p = {u * h.x(), h.y(), v * h.z()}; n = {0, 1, 0}; break;
    case 4: p = {u * h.x(), v * h.y(), -h.z()}; n = {0, 0, -1}; break;
    default: p = {u * h.x(), v * h.y(), h.z()}; n = {0, 0, 1}; break;
  }
  out.points.push_back(c + p);
  out.normals.push_back(n);
}

}  // namespace

PointCloud make_test_model(int n_points, std::uint64_t seed) {
  if (n_points < 1) throw std::invalid_argument("model needs at least 1 point");
  const Surface surfaces[] = {
      {2.0 * (0.22 * 0.10 + 0.35 * 0.10 + 0.35 * 0.22), &sample_base_box},
      {2.0 * M_PI * 0.08 * 0.50, &sample_arm_cylinder},
      {4.0 * M_PI * 0.12 * 0.12, &sample_elbow_sphere},
      {2.0 * M_PI * 0.06 * 0.40, &sample_forearm_cylinder},
      {2.0 * (0.10 * 0.15 + 0.02 * 0.15 + 0.02 * 0.10), &sample_fin_box},
  };
  double total_area = 0.0;
  for (const auto& s : surfaces) total_area += s.area;

  Rng rng(seed);
  PointCloud model;
  model.points.reserve(n_points);
  model.normals.reserve(n_points);
  for (int i = 0; i < n_points; ++i) {
    double pick = rng.uniform(0.0, total_area);
    int which = 0;
    for (; which < 4; ++which) {
      if (pick < surfaces[which].area) break;
      pick -= surfaces[which].area;
    }
    surfaces[which].sample(rng, model);
  }
  return model;
}

GeneratedScene generate_scene(const PointCloud& model, const SceneConfig& config,
                              std::uint64_t seed) {
  model.validate();
  if (model.empty()) throw std::invalid_argument("model cloud is empty");
  if (config.instances < 1) throw std::invalid_argument("instances must be >= 1");
  if (config.noise_sigma < 0.0 || config.outlier_fraction < 0.0 ||
      config.occlusion_fraction < 0.0 || config.occlusion_fraction >= 1.0 ||
      config.margin < 0.0)
    throw std::invalid_argument("scene config values out of range");

  const Eigen::Vector3d centroid = model.centroid();
  double radius = 0.0;
  for (const auto& p : model.points) radius = std::max(radius, (p - centroid).norm());
  const double diameter = 2.0 * radius;
  const double side =
      std::cbrt(static_cast<double>(config.instances)) * diameter * 2.0 * (1.0 + config.margin);
  const double t_half = std::max(side / 2.0 - radius, 0.1 * diameter);

  Rng rng(seed);
  std::vector<RigidTransform> transforms;
  std::vector<Eigen::Vector3d> centers;
  for (int j = 0; j < config.instances; ++j) {
    bool placed = false;
    for (int attempt = 0; attempt < 1000; ++attempt) {
      RigidTransform t;
      t.rotation = rng.rotation();
      t.translation = {rng.uniform(-t_half, t_half), rng.uniform(-t_half, t_half),
                       rng.uniform(-t_half, t_half)};
      const Eigen::Vector3d center = t.apply(centroid);
      bool ok = true;
      for (const auto& c : centers)
        if ((center - c).norm() < (1.0 + config.margin) * diameter) {
          ok = false;
          break;
        }
      if (ok) {
        transforms.push_back(t);
        centers.push_back(center);
        placed = true;
        break;
      }
    }
    if (!placed) throw std::runtime_error("workspace too small");
  }

  GeneratedScene scene;
  PointCloud& target = scene.target;
  const bool with_normals = model.has_normals();

  for (int j = 0; j < config.instances; ++j) {
    PointCloud inst = apply_transform(model, transforms[j]);
    std::vector<int> keep(inst.size());
    for (std::size_t i = 0; i < inst.size(); ++i) keep[i] = static_cast<int>(i);
    if (config.occlusion_fraction > 0.0) {
      const Eigen::Vector3d dir = rng.unit_vector();
      const int cut = static_cast<int>(
          std::floor(config.occlusion_fraction * static_cast<double>(inst.size())));
      if (cut > 0) {
        std::vector<std::pair<double, int>> proj(inst.size());
        for (std::size_t i = 0; i < inst.size(); ++i)
          proj[i] = {dir.dot(inst.points[i]), static_cast<int>(i)};
        std::sort(proj.begin(), proj.end());
        keep.clear();
        for (std::size_t i = 0; i + cut < proj.size(); ++i) keep.push_back(proj[i].second);
        std::sort(keep.begin(), keep.end());  // preserve model point order
      }
    }
    for (int idx : keep) {
      Eigen::Vector3d p = inst.points[idx];
      if (config.noise_sigma > 0.0)
        p += config.noise_sigma * Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());
      target.points.push_back(p);
      if (with_normals) target.normals.push_back(inst.normals[idx]);
      scene.annotation.per_point_label.push_back(j);
    }
  }

  const long instance_points = static_cast<long>(target.size());
  const long n_outliers = static_cast<long>(
      std::ceil(config.outlier_fraction * static_cast<double>(instance_points)));
  for (long i = 0; i < n_outliers; ++i) {
    target.points.push_back({rng.uniform(-side / 2.0, side / 2.0),
                             rng.uniform(-side / 2.0, side / 2.0),
                             rng.uniform(-side / 2.0, side / 2.0)});
    if (with_normals) target.normals.push_back(rng.unit_vector());
    scene.annotation.per_point_label.push_back(-1);
  }

  target.labels = scene.annotation.per_point_label;
  scene.annotation.instance_transforms = std::move(transforms);
  scene.annotation.model_id = config.model_id;
  scene.annotation.noise_sigma = config.noise_sigma;
  scene.annotation.outlier_fraction = config.outlier_fraction;
  scene.annotation.occlusion_fraction = config.occlusion_fraction;
  scene.annotation.margin = config.margin;
  scene.annotation.seed = seed;
  return scene;
}

std::vector<int> superpoint_labels(const SuperpointGraph& graph,
                                   const std::vector<int>& point_labels) {
  if (point_labels.size() != graph.assignment.size())
    throw std::invalid_argument("label count does not match the graph's dense cloud");
  const int n = static_cast<int>(graph.superpoints.size());
  std::vector<std::map<int, int>> votes(n);
  for (std::size_t i = 0; i < graph.assignment.size(); ++i)
    votes[graph.assignment[i]][point_labels[i]] += 1;
  std::vector<int> labels(n, -1);
  for (int s = 0; s < n; ++s) {
    int best = -1, best_count = 0;
    // map iteration is ascending by label, so ties resolve to the lower label
    for (const auto& [label, count] : votes[s])
      if (count > best_count) {
        best_count = count;
        best = label;
      }
    labels[s] = best_count > 0 ? best : -1;
  }
  return labels;
}

Eigen::MatrixXd ground_truth_masks(const SuperpointGraph& graph,
                                   const std::vector<int>& point_labels) {
  const auto labels = superpoint_labels(graph, point_labels);
  const int n = static_cast<int>(graph.superpoints.size());
  const int k = graph.k();
  const double neg = -std::numeric_limits<double>::infinity();
  Eigen::MatrixXd mask(n, k);
  for (int i = 0; i < n; ++i)
    for (int s = 0; s < k; ++s) {
      const int j = graph.neighbor_index(i, s);
      mask(i, s) = (labels[i] >= 0 && labels[i] == labels[j]) ? 0.0 : neg;
    }
  return mask;
}

CorrespondenceSet oracle_correspondences(const PointCloud& model, const PointCloud& target,
                                         const SceneAnnotation& annotation, double inlier_ratio,
                                         int n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("correspondence count must be >= 1");
  if (inlier_ratio < 0.0 || inlier_ratio > 1.0)
    throw std::invalid_argument("inlier ratio must lie in [0, 1]");
  if (annotation.instance_transforms.empty())
    throw std::invalid_argument("annotation has no instances");
  if (model.empty() || target.empty()) throw std::invalid_argument("empty cloud");

  Rng rng(splitmix64(seed ^ 0x6f7261636c65ULL));
  GridIndex grid(target.points, GridIndex::suggested_cell(target.points));
  CorrespondenceSet out;
  out.level = CorrespondenceLevel::dense;
  const int n_inliers = static_cast<int>(std::ceil(inlier_ratio * static_cast<double>(n)));
  const int n_instances = static_cast<int>(annotation.instance_transforms.size());
  for (int i = 0; i < n_inliers; ++i) {
    const int inst = rng.uniform_int(0, n_instances - 1);
    const int src = rng.uniform_int(0, static_cast<int>(model.size()) - 1);
    const Eigen::Vector3d image = annotation.instance_transforms[inst].apply(model.points[src]);
    const int tgt = grid.nearest(image);
    out.pairs.push_back({src, tgt});
    out.scores.push_back(1.0 + 0.05 * rng.normal());
  }
  for (int i = n_inliers; i < n; ++i) {
    out.pairs.push_back({rng.uniform_int(0, static_cast<int>(model.size()) - 1),
                         rng.uniform_int(0, static_cast<int>(target.size()) - 1)});
    out.scores.push_back(rng.uniform());
  }
  return out;
}

Eigen::MatrixXd superpoint_patch_overlaps(const PointCloud& model, const SuperpointGraph& gp,
                                          const PointCloud& target, const SuperpointGraph& gq,
                                          const SceneAnnotation& annotation, double radius) {
  const auto labels_q = superpoint_labels(gq, annotation.per_point_label);
  const auto patches_p = superpoint_patches(gp.assignment, static_cast<int>(gp.superpoints.size()));
  const auto patches_q = superpoint_patches(gq.assignment, static_cast<int>(gq.superpoints.size()));
  const int np = static_cast<int>(gp.superpoints.size());
  const int nq = static_cast<int>(gq.superpoints.size());
  Eigen::MatrixXd overlap = Eigen::MatrixXd::Zero(np, nq);
  for (int j = 0; j < nq; ++j) {
    if (labels_q[j] < 0 || patches_q[j].empty()) continue;
    const RigidTransform inv = annotation.instance_transforms[labels_q[j]].inverse();
    std::vector<Eigen::Vector3d> back;
    back.reserve(patches_q[j].size());
    for (int idx : patches_q[j]) back.push_back(inv.apply(target.points[idx]));
    for (int i = 0; i < np; ++i) {
      if (patches_p[i].empty()) continue;
      int hit = 0;
      for (const auto& b : back) {
        for (int pidx : patches_p[i])
          if ((model.points[pidx] - b).norm() <= radius) {
            ++hit;
            break;
          }
      }
      overlap(i, j) = static_cast<double>(hit) / static_cast<double>(back.size());
    }
  }
  return overlap;
}

}  // namespace mireg
