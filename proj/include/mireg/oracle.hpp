#pragma once

#include <cstdint>

#include "mireg/attention.hpp"
#include "mireg/scene.hpp"

namespace mireg {

// Label-informed stand-in for a trained feature extractor. A labeled target
// element is mapped back into the source frame through its instance's
// transform and keyed by that position, so true counterparts land near each
// other in feature space. Background elements, and a seeded fraction
// (1 - inlier_ratio) of each instance's target superpoints, instead receive
// positions drawn far outside the data so nothing real matches them.
struct OracleFeatureConfig {
  int dim = 32;
  double inlier_ratio = 1.0;
  std::uint64_t seed = 0;
};

struct OracleFeatures {
  FeatureMatrix source_superpoint;
  FeatureMatrix target_superpoint;
  FeatureMatrix source_dense;
  FeatureMatrix target_dense;
};

OracleFeatures oracle_features(const PointCloud& model, const SuperpointGraph& model_graph,
                               const PointCloud& target, const SuperpointGraph& target_graph,
                               const SceneAnnotation& annotation,
                               const OracleFeatureConfig& config);

}  // namespace mireg
