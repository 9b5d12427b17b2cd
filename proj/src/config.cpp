#include "mireg/config.hpp"

#include <climits>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "mireg/metrics.hpp"
#include "mireg/pose.hpp"

namespace mireg {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

double parse_double(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  double v;
  try {
    v = std::stod(value, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("config: " + key + " expects a number, got '" + value + "'");
  }
  if (used != value.size())
    throw std::invalid_argument("config: " + key + " has trailing junk: '" + value + "'");
  return v;
}

int parse_int(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  long long v;
  try {
    v = std::stoll(value, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("config: " + key + " expects an integer, got '" + value + "'");
  }
  if (used != value.size() || v < INT_MIN || v > INT_MAX)
    throw std::invalid_argument("config: " + key + " is not a valid integer: '" + value + "'");
  return static_cast<int>(v);
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  unsigned long long v;
  try {
    v = std::stoull(value, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("config: " + key + " expects an unsigned integer, got '" + value +
                                "'");
  }
  if (used != value.size())
    throw std::invalid_argument("config: " + key + " has trailing junk: '" + value + "'");
  return v;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void PipelineConfig::validate() const {
  if (!(voxel > 0.0)) throw std::invalid_argument("config: voxel must be positive");
  if (k_neighbors < 1) throw std::invalid_argument("config: k_neighbors must be positive");
  if (tau < 0.0 || tau > 1.0) throw std::invalid_argument("config: tau must be in [0, 1]");
  if (!(theta > 0.0) || theta > 1.0)
    throw std::invalid_argument("config: theta must be in (0, 1]");
  if (!(d_op_factor > 0.0)) throw std::invalid_argument("config: d_op_factor must be positive");
  if (n_l < 1) throw std::invalid_argument("config: n_l must be positive");
  if (blocks < 1) throw std::invalid_argument("config: blocks must be positive");
  if (mode != "oracle" && mode != "seeded")
    throw std::invalid_argument("config: mode must be oracle or seeded");
  profile_by_name(profile);               // throws on unknown names
  overlap_strategy_from_string(strategy);
  if (feature_dim < 3) throw std::invalid_argument("config: feature_dim must be at least 3");
  if (geo_dim < 1) throw std::invalid_argument("config: geo_dim must be positive");
  if (feature_dim > 2 * geo_dim)
    throw std::invalid_argument("config: feature_dim must not exceed 2 * geo_dim");
  if (overlap_floor < 0.0 || overlap_floor > 1.0)
    throw std::invalid_argument("config: overlap_floor must be in [0, 1]");
  if (max_refine_iters < 0)
    throw std::invalid_argument("config: max_refine_iters must be non-negative");
  if (ot_iterations < 1) throw std::invalid_argument("config: ot_iterations must be positive");
  if (!(inlier_ratio > 0.0) || inlier_ratio > 1.0)
    throw std::invalid_argument("config: inlier_ratio must be in (0, 1]");
}

void apply_config_entry(PipelineConfig& c, const std::string& key, const std::string& value) {
  if (key == "pipeline.voxel") c.voxel = parse_double(key, value);
  else if (key == "pipeline.k_neighbors") c.k_neighbors = parse_int(key, value);
  else if (key == "pipeline.tau") c.tau = parse_double(key, value);
  else if (key == "pipeline.theta") c.theta = parse_double(key, value);
  else if (key == "pipeline.d_op_factor") c.d_op_factor = parse_double(key, value);
  else if (key == "pipeline.n_l") c.n_l = parse_int(key, value);
  else if (key == "pipeline.blocks") c.blocks = parse_int(key, value);
  else if (key == "pipeline.mode") c.mode = value;
  else if (key == "pipeline.seed") c.seed = parse_u64(key, value);
  else if (key == "pipeline.profile") c.profile = value;
  else if (key == "pipeline.feature_dim") c.feature_dim = parse_int(key, value);
  else if (key == "pipeline.geo_dim") c.geo_dim = parse_int(key, value);
  else if (key == "pipeline.strategy") c.strategy = value;
  else if (key == "pipeline.overlap_floor") c.overlap_floor = parse_double(key, value);
  else if (key == "pipeline.max_refine_iters") c.max_refine_iters = parse_int(key, value);
  else if (key == "pipeline.ot_iterations") c.ot_iterations = parse_int(key, value);
  else if (key == "pipeline.inlier_ratio") c.inlier_ratio = parse_double(key, value);
  else if (key == "pipeline.weights_path") c.weights_path = value;
  else throw std::invalid_argument("config: unknown key '" + key + "'");
}

PipelineConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path);
  PipelineConfig c;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: line " + std::to_string(lineno) +
                                  " is not 'key = value'");
    apply_config_entry(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  c.validate();
  return c;
}

std::string serialize_config(const PipelineConfig& c) {
  std::ostringstream out;
  out << "pipeline.voxel = " << format_double(c.voxel) << "\n";
  out << "pipeline.k_neighbors = " << c.k_neighbors << "\n";
  out << "pipeline.tau = " << format_double(c.tau) << "\n";
  out << "pipeline.theta = " << format_double(c.theta) << "\n";
  out << "pipeline.d_op_factor = " << format_double(c.d_op_factor) << "\n";
  out << "pipeline.n_l = " << c.n_l << "\n";
  out << "pipeline.blocks = " << c.blocks << "\n";
  out << "pipeline.mode = " << c.mode << "\n";
  out << "pipeline.seed = " << c.seed << "\n";
  out << "pipeline.profile = " << c.profile << "\n";
  out << "pipeline.feature_dim = " << c.feature_dim << "\n";
  out << "pipeline.geo_dim = " << c.geo_dim << "\n";
  out << "pipeline.strategy = " << c.strategy << "\n";
  out << "pipeline.overlap_floor = " << format_double(c.overlap_floor) << "\n";
  out << "pipeline.max_refine_iters = " << c.max_refine_iters << "\n";
  out << "pipeline.ot_iterations = " << c.ot_iterations << "\n";
  out << "pipeline.inlier_ratio = " << format_double(c.inlier_ratio) << "\n";
  out << "pipeline.weights_path = " << c.weights_path << "\n";
  return out.str();
}

}  // namespace mireg
