#pragma once

#include <cstdint>
#include <string>

namespace mireg {

// Every knob of the end-to-end run. File form is one `pipeline.<key> = value`
// per line with # comments; serialize/parse round-trip exactly.
struct PipelineConfig {
  double voxel = 0.05;          // downsampling cell edge
  int k_neighbors = 32;         // graph degree
  double tau = 0.5;             // neighbor-mask keep threshold
  double theta = 0.8;           // duplicate-pose merge threshold
  double d_op_factor = 1.5;     // inlier distance as a multiple of target resolution
  int n_l = 128;                // hypothesis budget
  int blocks = 3;               // attention rounds (seeded mode)
  std::string mode = "oracle";  // oracle | seeded
  std::uint64_t seed = 0;
  std::string profile = "welding";
  int feature_dim = 32;
  int geo_dim = 16;
  std::string strategy = "point_to_point";
  double overlap_floor = 0.3;
  int max_refine_iters = 10;
  int ot_iterations = 100;
  double inlier_ratio = 1.0;  // oracle corruption control
  std::string weights_path;   // seeded mode; empty derives weights from the seed

  void validate() const;  // throws std::invalid_argument
};

PipelineConfig parse_config_file(const std::string& path);

// one key, one value, as they would appear in the file
void apply_config_entry(PipelineConfig& config, const std::string& key, const std::string& value);

std::string serialize_config(const PipelineConfig& config);

}  // namespace mireg
