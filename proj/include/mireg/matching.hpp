#pragma once

#include <string>
#include <vector>

#include "mireg/attention.hpp"
#include "mireg/matching_types.hpp"

namespace mireg {

// exp(-||f_src - f_tgt||), rows = source, cols = target; values in (0, 1]
Eigen::MatrixXd similarity_scores(const FeatureMatrix& source, const FeatureMatrix& target);

struct SeedHypothesis {
  int source = -1;  // source superpoint
  int target = -1;  // target superpoint
  double score = 0.0;
};

// Region growing over the target graph from the n_l best-scoring pairs. A
// popped superpoint joins the grown set and spreads to its neighbors only
// when its mask row keeps every slot; seeds landing on an already visited
// superpoint are skipped. When the grown set reaches n_l it is resampled by
// farthest-point sampling and every survivor is paired with its best-scoring
// source column; otherwise the original seed pairs are returned unchanged.
std::vector<SeedHypothesis> instance_hypothesis_generation(const Eigen::MatrixXd& scores,
                                                           const SuperpointGraph& target_graph,
                                                           const NeighborMask& mask, int n_l,
                                                           Diagnostics* diag = nullptr);

struct PointToNodePartition {
  std::vector<int> assignment;           // dense index -> superpoint
  std::vector<std::vector<int>> patches;  // superpoint -> dense indices, ascending
};

PointToNodePartition point_to_node_partition(const PointCloud& dense,
                                             const PointCloud& superpoints);

struct SinkhornResult {
  Eigen::MatrixXd assignment;
  int iterations_used = 0;
  bool converged = false;
};

// Alternating row/column normalization in the plain (non-log) domain. With
// with_slack the last row and column are treated as dustbins whose marginals
// absorb the opposite side's mass; otherwise all marginals are 1 (square
// input expected). Stops early once every marginal is within tol.
SinkhornResult sinkhorn(const Eigen::MatrixXd& affinity, int iterations, bool with_slack,
                        double tol = 1e-9);

struct OtConfig {
  int iterations = 100;
  double min_score = 0.1;  // mutual matches below this are discarded
  // affinity assigned to the dustbin row/column before normalization
  double slack = 0.36787944117144233;  // exp(-1)
};

// Matches two dense patches through slack-augmented optimal transport and
// keeps mutually best pairs. Indices in the result refer to the full dense
// clouds, not patch-local positions.
CorrespondenceSet optimal_transport_match(const FeatureMatrix& source_features,
                                          const FeatureMatrix& target_features,
                                          const std::vector<int>& source_patch,
                                          const std::vector<int>& target_patch,
                                          const OtConfig& config, Diagnostics* diag = nullptr);

// Gathers a dense patch around each hypothesis (the superpoint's own points
// plus those of its graph neighbors; on the target side only neighbors kept
// by the center's mask row contribute), drops hypotheses with an empty side,
// groups the rest by shared dense target points, and fills each group's
// dense correspondences patch pair by patch pair.
std::vector<CandidateInstance> expand_to_dense(const std::vector<SeedHypothesis>& hypotheses,
                                               const SuperpointGraph& source_graph,
                                               const SuperpointGraph& target_graph,
                                               const NeighborMask& mask,
                                               const FeatureMatrix& dense_source_features,
                                               const FeatureMatrix& dense_target_features,
                                               const OtConfig& config,
                                               Diagnostics* diag = nullptr);

// One row per correspondence: source_idx,target_idx,score,level,candidate_id
void write_correspondence_csv(const std::string& path, const CorrespondenceSet& set,
                              int candidate_id = -1);
void write_correspondence_csv(const std::string& path,
                              const std::vector<CandidateInstance>& candidates);

}  // namespace mireg
