#include "mireg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mireg {

double rotation_error_deg(const Eigen::Matrix3d& gt, const Eigen::Matrix3d& est) {
  const double c = std::clamp(((gt.transpose() * est).trace() - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c) * 180.0 / std::acos(-1.0);
}

double translation_error(const Eigen::Vector3d& gt, const Eigen::Vector3d& est) {
  return (est - gt).norm();
}

SuccessProfile welding_profile() { return {"welding", 15.0, 0.2}; }

SuccessProfile scan2cad_profile() { return {"scan2cad", 15.0, 0.1}; }

SuccessProfile profile_by_name(const std::string& name) {
  if (name == "welding") return welding_profile();
  if (name == "scan2cad") return scan2cad_profile();
  throw std::invalid_argument("unknown success profile: " + name);
}

std::vector<InstanceMatch> match_instances(const std::vector<RigidTransform>& predicted,
                                           const std::vector<RigidTransform>& ground_truth,
                                           const SuccessProfile& profile) {
  struct Entry {
    double re, te;
    int p, g;
  };
  std::vector<Entry> entries;
  for (int p = 0; p < static_cast<int>(predicted.size()); ++p) {
    for (int g = 0; g < static_cast<int>(ground_truth.size()); ++g) {
      const double re = rotation_error_deg(ground_truth[g].rotation, predicted[p].rotation);
      const double te = translation_error(ground_truth[g].translation, predicted[p].translation);
      if (re <= profile.max_rotation_deg && te <= profile.max_translation)
        entries.push_back({re, te, p, g});
    }
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.re != b.re) return a.re < b.re;
    if (a.te != b.te) return a.te < b.te;
    if (a.p != b.p) return a.p < b.p;
    return a.g < b.g;
  });
  std::vector<char> used_p(predicted.size(), 0), used_g(ground_truth.size(), 0);
  std::vector<InstanceMatch> matches;
  for (const Entry& e : entries) {
    if (used_p[e.p] || used_g[e.g]) continue;
    used_p[e.p] = used_g[e.g] = 1;
    matches.push_back({e.p, e.g, e.re, e.te});
  }
  return matches;
}

EvalReport aggregate(const std::vector<PairCounts>& pairs) {
  EvalReport report;
  report.per_pair = pairs;
  if (pairs.empty()) return report;
  double recall = 0.0, precision = 0.0;
  for (const PairCounts& pc : pairs) {
    if (pc.matched < 0 || pc.predicted < 0 || pc.ground_truth < 0 ||
        pc.matched > std::min(pc.predicted, pc.ground_truth))
      throw std::invalid_argument("aggregate: inconsistent pair counts");
    recall += pc.ground_truth > 0 ? static_cast<double>(pc.matched) / pc.ground_truth : 1.0;
    precision += pc.predicted > 0 ? static_cast<double>(pc.matched) / pc.predicted : 0.0;
  }
  report.mr = recall / static_cast<double>(pairs.size());
  report.mp = precision / static_cast<double>(pairs.size());
  report.mf = (report.mr + report.mp) > 0.0
                  ? 2.0 * report.mr * report.mp / (report.mr + report.mp)
                  : 0.0;
  return report;
}

}  // namespace mireg
