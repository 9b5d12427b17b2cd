#include "mireg/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "mireg/matching.hpp"
#include "mireg/oracle.hpp"
#include "mireg/ply.hpp"
#include "mireg/weights.hpp"

namespace mireg {

namespace {

using nlohmann::json;

json transform_to_json(const RigidTransform& t) {
  json rot = json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) rot.push_back(t.rotation(r, c));
  return json{{"rotation", rot},
              {"translation", {t.translation.x(), t.translation.y(), t.translation.z()}}};
}

RigidTransform transform_from_json(const json& j) {
  const auto& rot = j.at("rotation");
  const auto& tr = j.at("translation");
  if (rot.size() != 9 || tr.size() != 3)
    throw std::invalid_argument("transform: expected 9 rotation and 3 translation entries");
  RigidTransform t;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) t.rotation(r, c) = rot[3 * r + c].get<double>();
  for (int i = 0; i < 3; ++i) t.translation[i] = tr[i].get<double>();
  return t;
}

json config_to_json(const PipelineConfig& c) {
  return json{{"voxel", c.voxel},
              {"k_neighbors", c.k_neighbors},
              {"tau", c.tau},
              {"theta", c.theta},
              {"d_op_factor", c.d_op_factor},
              {"n_l", c.n_l},
              {"blocks", c.blocks},
              {"mode", c.mode},
              {"seed", c.seed},
              {"profile", c.profile},
              {"feature_dim", c.feature_dim},
              {"geo_dim", c.geo_dim},
              {"strategy", c.strategy},
              {"overlap_floor", c.overlap_floor},
              {"max_refine_iters", c.max_refine_iters},
              {"ot_iterations", c.ot_iterations},
              {"inlier_ratio", c.inlier_ratio},
              {"weights_path", c.weights_path}};
}

constexpr const char* kAnnotationFormat = "mireg.annotation.v1";
constexpr const char* kResultsFormat = "mireg.results.v1";
constexpr const char* kReportFormat = "mireg.report.v1";

void write_json_file(const json& doc, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << doc.dump(2) << "\n";
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(path + " is not valid JSON: " + std::string(e.what()));
  }
  return doc;
}

void require_format(const json& doc, const char* tag, const std::string& path) {
  if (!doc.contains("format") || doc["format"].get<std::string>() != tag)
    throw std::invalid_argument(path + " does not carry format tag " + tag);
}

}  // namespace

void save_scene_bundle(const SceneBundle& bundle, const std::string& dir) {
  std::filesystem::create_directories(dir);
  write_ply(bundle.model, dir + "/model.ply");
  write_ply(bundle.target, dir + "/scene.ply");

  json instances = json::array();
  for (const RigidTransform& t : bundle.annotation.instance_transforms)
    instances.push_back(transform_to_json(t));
  json doc{{"format", kAnnotationFormat},
           {"model_id", bundle.annotation.model_id},
           {"seed", bundle.annotation.seed},
           {"noise_sigma", bundle.annotation.noise_sigma},
           {"outlier_fraction", bundle.annotation.outlier_fraction},
           {"occlusion_fraction", bundle.annotation.occlusion_fraction},
           {"margin", bundle.annotation.margin},
           {"instances", instances},
           {"labels", bundle.annotation.per_point_label}};
  write_json_file(doc, dir + "/annotation.json");
}

SceneBundle load_scene_bundle(const std::string& dir, bool require_annotation) {
  SceneBundle bundle;
  bundle.model = read_ply(dir + "/model.ply");
  bundle.target = read_ply(dir + "/scene.ply");
  const std::string annotation_path = dir + "/annotation.json";
  if (!std::filesystem::exists(annotation_path)) {
    if (require_annotation)
      throw std::invalid_argument("scene bundle has no annotation.json: " + dir);
    return bundle;
  }
  const json doc = read_json_file(annotation_path);
  require_format(doc, kAnnotationFormat, annotation_path);
  SceneAnnotation& a = bundle.annotation;
  a.model_id = doc.at("model_id").get<std::string>();
  a.seed = doc.at("seed").get<std::uint64_t>();
  a.noise_sigma = doc.at("noise_sigma").get<double>();
  a.outlier_fraction = doc.at("outlier_fraction").get<double>();
  a.occlusion_fraction = doc.at("occlusion_fraction").get<double>();
  a.margin = doc.at("margin").get<double>();
  for (const auto& t : doc.at("instances")) a.instance_transforms.push_back(transform_from_json(t));
  a.per_point_label = doc.at("labels").get<std::vector<int>>();
  if (a.per_point_label.size() != bundle.target.size())
    throw std::invalid_argument("annotation labels do not match the scene size: " + dir);
  return bundle;
}

RegistrationResult run_pipeline(const SceneBundle& bundle, const PipelineConfig& config) {
  config.validate();
  if (bundle.model.empty() || bundle.target.empty())
    throw std::invalid_argument("run_pipeline: empty cloud");

  RegistrationResult result;
  Diagnostics& diag = result.diagnostics;

  const SuperpointGraph source_graph =
      build_superpoint_graph(bundle.model, config.voxel, config.k_neighbors, &diag);
  const SuperpointGraph target_graph =
      build_superpoint_graph(bundle.target, config.voxel, config.k_neighbors, &diag);
  result.d_op = config.d_op_factor * target_graph.resolution;

  FeatureMatrix src_sp, tgt_sp, src_dense, tgt_dense;
  NeighborMask mask;
  if (config.mode == "oracle") {
    if (!bundle.has_annotation())
      throw std::invalid_argument("run_pipeline: oracle mode needs an annotated scene");
    OracleFeatureConfig ocfg;
    ocfg.dim = config.feature_dim;
    ocfg.inlier_ratio = config.inlier_ratio;
    ocfg.seed = config.seed;
    OracleFeatures feats = oracle_features(bundle.model, source_graph, bundle.target,
                                           target_graph, bundle.annotation, ocfg);
    src_sp = std::move(feats.source_superpoint);
    tgt_sp = std::move(feats.target_superpoint);
    src_dense = std::move(feats.source_dense);
    tgt_dense = std::move(feats.target_dense);
    mask.values = ground_truth_masks(target_graph, bundle.annotation.per_point_label);
    mask.confidence = Eigen::MatrixXd::Zero(mask.values.rows(), mask.values.cols());
    for (int i = 0; i < mask.values.rows(); ++i)
      for (int s = 0; s < mask.values.cols(); ++s)
        if (mask.values(i, s) == 0.0) mask.confidence(i, s) = 1.0;
  } else {
    const AttentionParams params =
        config.weights_path.empty()
            ? AttentionParams::seeded(config.feature_dim, config.geo_dim, config.seed)
            : load_weights(config.weights_path);
    if (params.dim != config.feature_dim || params.geo_dim != config.geo_dim)
      throw std::invalid_argument("run_pipeline: weights do not match the configured dims");
    const double scale = target_graph.resolution > 0.0 ? target_graph.resolution : 1.0;
    const SuperpointGeometry geometry = compute_superpoint_geometry(target_graph, &diag);
    const IftOutput ift = instance_focused_forward(
        coordinate_features(source_graph.superpoints, config.feature_dim, scale),
        coordinate_features(target_graph.superpoints, config.feature_dim, scale), source_graph,
        target_graph, geometry, params, config.tau, config.blocks, &diag);
    src_sp = ift.source;
    tgt_sp = ift.target;
    mask = ift.mask;
    src_dense = coordinate_features(bundle.model, config.feature_dim, scale);
    tgt_dense = coordinate_features(bundle.target, config.feature_dim, scale);
  }

  const Eigen::MatrixXd scores = similarity_scores(src_sp, tgt_sp);
  const std::vector<SeedHypothesis> hypotheses =
      instance_hypothesis_generation(scores, target_graph, mask, config.n_l, &diag);

  OtConfig ot;
  ot.iterations = config.ot_iterations;
  const std::vector<CandidateInstance> candidates = expand_to_dense(
      hypotheses, source_graph, target_graph, mask, src_dense, tgt_dense, ot, &diag);

  FilterConfig fcfg;
  fcfg.theta = config.theta;
  fcfg.r_norm = 0.1 * bounding_box_diagonal(bundle.model);
  fcfg.d_op = result.d_op;
  fcfg.strategy = overlap_strategy_from_string(config.strategy);
  fcfg.max_refine_iters = config.max_refine_iters;
  fcfg.overlap_floor = config.overlap_floor;
  result.instances = filter_and_optimize(candidates, bundle.model, bundle.target, fcfg, &diag);
  return result;
}

RegistrationResult run_baseline(const SceneBundle& bundle, const PipelineConfig& config) {
  config.validate();
  if (!bundle.has_annotation())
    throw std::invalid_argument("run_baseline: needs an annotated scene");

  RegistrationResult result;
  Diagnostics& diag = result.diagnostics;
  const SuperpointGraph target_graph =
      build_superpoint_graph(bundle.target, config.voxel, config.k_neighbors, &diag);
  result.d_op = config.d_op_factor * target_graph.resolution;

  const CorrespondenceSet correspondences = oracle_correspondences(
      bundle.model, bundle.target, bundle.annotation, config.inlier_ratio, 5000, config.seed);

  RansacConfig rcfg;
  rcfg.d_op = result.d_op;
  rcfg.seed = config.seed;
  result.instances =
      sequential_ransac(correspondences, bundle.model, bundle.target, rcfg, &diag);
  return result;
}

void write_results_json(const RegistrationResult& result, const PipelineConfig& config,
                        const std::string& path) {
  json instances = json::array();
  for (const PoseCandidate& cand : result.instances) {
    json entry = transform_to_json(cand.transform);
    entry["overlap"] = cand.overlap;
    entry["inlier_count"] = cand.inlier_count;
    instances.push_back(entry);
  }
  json diagnostics = json::object();
  for (const auto& [key, value] : result.diagnostics) diagnostics[key] = value;
  json doc{{"format", kResultsFormat},
           {"config", config_to_json(config)},
           {"d_op", result.d_op},
           {"instances", instances},
           {"diagnostics", diagnostics}};
  write_json_file(doc, path);
}

std::vector<PoseCandidate> load_results_json(const std::string& path) {
  const json doc = read_json_file(path);
  require_format(doc, kResultsFormat, path);
  std::vector<PoseCandidate> out;
  for (const auto& entry : doc.at("instances")) {
    PoseCandidate cand;
    cand.transform = transform_from_json(entry);
    cand.overlap = entry.at("overlap").get<double>();
    cand.inlier_count = entry.at("inlier_count").get<int>();
    out.push_back(std::move(cand));
  }
  return out;
}

EvalOutput evaluate_instances(const std::vector<RigidTransform>& predicted,
                              const SceneAnnotation& annotation, const SuccessProfile& profile) {
  EvalOutput out;
  out.matches = match_instances(predicted, annotation.instance_transforms, profile);
  PairCounts counts;
  counts.matched = static_cast<int>(out.matches.size());
  counts.predicted = static_cast<int>(predicted.size());
  counts.ground_truth = static_cast<int>(annotation.instance_transforms.size());
  out.report = aggregate({counts});
  return out;
}

void write_report_json(const EvalOutput& eval, const SuccessProfile& profile,
                       const std::string& path) {
  json matches = json::array();
  for (const InstanceMatch& m : eval.matches)
    matches.push_back(json{{"predicted", m.predicted},
                           {"ground_truth", m.ground_truth},
                           {"re_deg", m.re},
                           {"te", m.te}});
  const PairCounts& counts = eval.report.per_pair.front();
  json doc{{"format", kReportFormat},
           {"profile", profile.name},
           {"max_rotation_deg", profile.max_rotation_deg},
           {"max_translation", profile.max_translation},
           {"matched", counts.matched},
           {"predicted", counts.predicted},
           {"ground_truth", counts.ground_truth},
           {"mr", eval.report.mr},
           {"mp", eval.report.mp},
           {"mf", eval.report.mf},
           {"matches", matches}};
  write_json_file(doc, path);
}

void write_report_csv(const EvalOutput& eval, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "predicted,ground_truth,re_deg,te\n";
  out.precision(17);
  for (const InstanceMatch& m : eval.matches)
    out << m.predicted << ',' << m.ground_truth << ',' << m.re << ',' << m.te << '\n';
}

}  // namespace mireg
