#pragma once

#include <utility>
#include <vector>

namespace mireg {

enum class CorrespondenceLevel { superpoint, dense };

struct CorrespondenceSet {
  std::vector<std::pair<int, int>> pairs;  // (source index, target index)
  std::vector<double> scores;              // one per pair
  CorrespondenceLevel level = CorrespondenceLevel::dense;

  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
  void validate() const;  // throws when scores and pairs disagree
};

// Group of coarse pairs believed to cover one instance, plus the dense points
// gathered around each pair. `dense` is filled by the assignment step.
struct CandidateInstance {
  std::vector<std::pair<int, int>> patch_pairs;     // superpoint-level pairs
  std::vector<std::vector<int>> source_patches;     // dense indices per pair
  std::vector<std::vector<int>> target_patches;     // dense indices per pair
  CorrespondenceSet dense;
};

}  // namespace mireg
