#include "mireg/oracle.hpp"

#include <cmath>
#include <stdexcept>

namespace mireg {

namespace {

void fill_position(FeatureMatrix& f, int row, const Eigen::Vector3d& p, double scale) {
  f.row(row).setZero();
  f(row, 0) = p.x() / scale;
  f(row, 1) = p.y() / scale;
  f(row, 2) = p.z() / scale;
}

void fill_decoy(FeatureMatrix& f, int row, double unit, Rng& rng) {
  f.row(row).setZero();
  for (int c = 0; c < 3; ++c) f(row, c) = rng.uniform(50.0, 150.0) * unit;
}

}  // namespace

OracleFeatures oracle_features(const PointCloud& model, const SuperpointGraph& model_graph,
                               const PointCloud& target, const SuperpointGraph& target_graph,
                               const SceneAnnotation& annotation,
                               const OracleFeatureConfig& config) {
  if (config.dim < 3) throw std::invalid_argument("oracle_features: dim must be at least 3");
  if (!(config.inlier_ratio > 0.0) || config.inlier_ratio > 1.0)
    throw std::invalid_argument("oracle_features: inlier_ratio must be in (0, 1]");
  if (annotation.per_point_label.size() != target.size())
    throw std::invalid_argument("oracle_features: annotation does not label the target");
  if (annotation.instance_transforms.empty())
    throw std::invalid_argument("oracle_features: no instances in annotation");
  if (model_graph.assignment.size() != model.size() ||
      target_graph.assignment.size() != target.size())
    throw std::invalid_argument("oracle_features: graphs do not match the clouds");

  const int n_instances = static_cast<int>(annotation.instance_transforms.size());
  const double diameter = bounding_box_diagonal(model);

  const double sp_scale =
      model_graph.superpoints.size() >= 2 ? cloud_resolution(model_graph.superpoints) : 1.0;
  const double dense_scale = model_graph.resolution > 0.0 ? model_graph.resolution : 1.0;

  OracleFeatures out;
  const int d = config.dim;
  out.source_superpoint.resize(model_graph.superpoints.size(), d);
  out.target_superpoint.resize(target_graph.superpoints.size(), d);
  out.source_dense.resize(model.size(), d);
  out.target_dense.resize(target.size(), d);

  for (int i = 0; i < out.source_superpoint.rows(); ++i)
    fill_position(out.source_superpoint, i, model_graph.superpoints.points[i], sp_scale);
  for (int i = 0; i < out.source_dense.rows(); ++i)
    fill_position(out.source_dense, i, model.points[i], dense_scale);

  const std::vector<int> sp_labels = superpoint_labels(target_graph, annotation.per_point_label);
  for (int lbl : sp_labels)
    if (lbl >= n_instances)
      throw std::invalid_argument("oracle_features: label outside the annotation");

  Rng rng(splitmix64(config.seed ^ 0x6665617473656564ULL));

  // phase 1: pick the corrupted superpoints of each instance
  std::vector<char> corrupted(sp_labels.size(), 0);
  for (int lbl = 0; lbl < n_instances; ++lbl) {
    std::vector<int> members;
    for (int i = 0; i < static_cast<int>(sp_labels.size()); ++i)
      if (sp_labels[i] == lbl) members.push_back(i);
    const int n_corrupt = static_cast<int>(
        std::llround((1.0 - config.inlier_ratio) * static_cast<double>(members.size())));
    for (int i = 0; i < n_corrupt; ++i) {
      const int j = rng.uniform_int(i, static_cast<int>(members.size()) - 1);
      std::swap(members[i], members[j]);
      corrupted[members[i]] = 1;
    }
  }

  // phase 2: superpoint rows in order, decoys drawn as encountered
  const double sp_unit = diameter / sp_scale;
  for (int i = 0; i < static_cast<int>(sp_labels.size()); ++i) {
    const int lbl = sp_labels[i];
    if (lbl < 0 || corrupted[i]) {
      fill_decoy(out.target_superpoint, i, sp_unit, rng);
      continue;
    }
    const RigidTransform& t = annotation.instance_transforms[lbl];
    const Eigen::Vector3d back =
        t.rotation.transpose() * (target_graph.superpoints.points[i] - t.translation);
    fill_position(out.target_superpoint, i, back, sp_scale);
  }

  // phase 3: dense rows in order; labels apply as-is, no extra corruption
  const double dense_unit = diameter / dense_scale;
  for (int i = 0; i < static_cast<int>(target.size()); ++i) {
    const int lbl = annotation.per_point_label[i];
    if (lbl >= n_instances)
      throw std::invalid_argument("oracle_features: point label outside the annotation");
    if (lbl < 0) {
      fill_decoy(out.target_dense, i, dense_unit, rng);
      continue;
    }
    const RigidTransform& t = annotation.instance_transforms[lbl];
    const Eigen::Vector3d back = t.rotation.transpose() * (target.points[i] - t.translation);
    fill_position(out.target_dense, i, back, dense_scale);
  }
  return out;
}

}  // namespace mireg
