#pragma once

#include <string>
#include <vector>

#include "mireg/config.hpp"
#include "mireg/metrics.hpp"
#include "mireg/pose.hpp"
#include "mireg/scene.hpp"

namespace mireg {

// On-disk layout: model.ply, scene.ply, annotation.json in one directory
struct SceneBundle {
  PointCloud model;
  PointCloud target;
  SceneAnnotation annotation;  // instance_transforms empty when unannotated

  bool has_annotation() const { return !annotation.instance_transforms.empty(); }
};

void save_scene_bundle(const SceneBundle& bundle, const std::string& dir);

// Missing annotation.json is fine unless require_annotation is set.
SceneBundle load_scene_bundle(const std::string& dir, bool require_annotation = false);

struct RegistrationResult {
  std::vector<PoseCandidate> instances;  // best overlap first
  double d_op = 0.0;                     // resolved inlier distance
  Diagnostics diagnostics;
};

// Full engine: graphs, features (label-informed oracle or seeded attention),
// hypothesis growth, dense expansion, transport matching, fit and filter.
RegistrationResult run_pipeline(const SceneBundle& bundle, const PipelineConfig& config);

// Sequential consensus over one flat correspondence set, as the comparison
// point. Uses the same annotation-derived correspondences the oracle sees.
RegistrationResult run_baseline(const SceneBundle& bundle, const PipelineConfig& config);

void write_results_json(const RegistrationResult& result, const PipelineConfig& config,
                        const std::string& path);

// Reads back what write_results_json stored (transform, overlap, inlier count
// per instance). Throws std::invalid_argument on a wrong format tag.
std::vector<PoseCandidate> load_results_json(const std::string& path);

struct EvalOutput {
  EvalReport report;
  std::vector<InstanceMatch> matches;
};

EvalOutput evaluate_instances(const std::vector<RigidTransform>& predicted,
                              const SceneAnnotation& annotation, const SuccessProfile& profile);

void write_report_json(const EvalOutput& eval, const SuccessProfile& profile,
                       const std::string& path);
void write_report_csv(const EvalOutput& eval, const std::string& path);

}  // namespace mireg
