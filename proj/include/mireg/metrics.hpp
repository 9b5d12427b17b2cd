#pragma once

#include <string>
#include <vector>

#include "mireg/types.hpp"

namespace mireg {

// geodesic angle between the rotations, in degrees
double rotation_error_deg(const Eigen::Matrix3d& gt, const Eigen::Matrix3d& est);

double translation_error(const Eigen::Vector3d& gt, const Eigen::Vector3d& est);

struct SuccessProfile {
  std::string name;
  double max_rotation_deg = 15.0;
  double max_translation = 0.2;
};

SuccessProfile welding_profile();   // 15 degrees, 0.2
SuccessProfile scan2cad_profile();  // 15 degrees, 0.1
SuccessProfile profile_by_name(const std::string& name);

struct InstanceMatch {
  int predicted = -1;
  int ground_truth = -1;
  double re = 0.0;
  double te = 0.0;
};

// One-to-one greedy matching among pairs inside the profile, repeatedly
// taking the smallest (re, te, predicted, ground_truth).
std::vector<InstanceMatch> match_instances(const std::vector<RigidTransform>& predicted,
                                           const std::vector<RigidTransform>& ground_truth,
                                           const SuccessProfile& profile);

struct PairCounts {
  int matched = 0;
  int predicted = 0;
  int ground_truth = 0;
};

struct EvalReport {
  std::vector<PairCounts> per_pair;
  double mr = 0.0;  // mean per-pair recall
  double mp = 0.0;  // mean per-pair precision; a pair with no predictions scores 0
  double mf = 0.0;  // harmonic mean of mr and mp
};

EvalReport aggregate(const std::vector<PairCounts>& pairs);

}  // namespace mireg
