#include "mireg/matching.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <queue>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace mireg {

void CorrespondenceSet::validate() const {
  if (pairs.size() != scores.size())
    throw std::invalid_argument("CorrespondenceSet: pairs and scores disagree in length");
  for (const auto& [s, t] : pairs)
    if (s < 0 || t < 0) throw std::invalid_argument("CorrespondenceSet: negative index");
  for (double v : scores)
    if (!std::isfinite(v)) throw std::invalid_argument("CorrespondenceSet: non-finite score");
}

Eigen::MatrixXd similarity_scores(const FeatureMatrix& source, const FeatureMatrix& target) {
  if (source.cols() != target.cols())
    throw std::invalid_argument("similarity_scores: feature widths differ");
  if (source.rows() == 0 || target.rows() == 0)
    throw std::invalid_argument("similarity_scores: empty feature matrix");
  // ||a-b||^2 = |a|^2 + |b|^2 - 2 a.b, computed as one product for speed
  Eigen::VectorXd sn = source.rowwise().squaredNorm();
  Eigen::VectorXd tn = target.rowwise().squaredNorm();
  Eigen::MatrixXd d2 = (-2.0 * source * target.transpose());
  d2.colwise() += sn;
  d2.rowwise() += tn.transpose();
  return (-d2.cwiseMax(0.0).cwiseSqrt()).array().exp();
}

namespace {

struct Seed {
  double score;
  int i;
  int j;
};

// strict order: higher score first, then lower source, then lower target
bool seed_better(const Seed& a, const Seed& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.i != b.i) return a.i < b.i;
  return a.j < b.j;
}

std::vector<Seed> top_seeds(const Eigen::MatrixXd& scores, int n_l) {
  // priority_queue with "better" puts the worst kept seed on top
  std::priority_queue<Seed, std::vector<Seed>, decltype(&seed_better)> worst_on_top(&seed_better);
  for (int i = 0; i < scores.rows(); ++i) {
    for (int j = 0; j < scores.cols(); ++j) {
      Seed s{scores(i, j), i, j};
      if (static_cast<int>(worst_on_top.size()) < n_l) {
        worst_on_top.push(s);
      } else if (seed_better(s, worst_on_top.top())) {
        worst_on_top.pop();
        worst_on_top.push(s);
      }
    }
  }
  std::vector<Seed> seeds;
  seeds.reserve(worst_on_top.size());
  while (!worst_on_top.empty()) {
    seeds.push_back(worst_on_top.top());
    worst_on_top.pop();
  }
  std::reverse(seeds.begin(), seeds.end());
  return seeds;
}

}  // namespace

std::vector<SeedHypothesis> instance_hypothesis_generation(const Eigen::MatrixXd& scores,
                                                           const SuperpointGraph& target_graph,
                                                           const NeighborMask& mask, int n_l,
                                                           Diagnostics* diag) {
  const int n_tgt = static_cast<int>(target_graph.superpoints.size());
  if (scores.cols() != n_tgt)
    throw std::invalid_argument("instance_hypothesis_generation: score columns != target size");
  if (mask.values.rows() != n_tgt || mask.values.cols() != target_graph.k())
    throw std::invalid_argument("instance_hypothesis_generation: mask shape mismatch");
  if (n_l < 1) throw std::invalid_argument("instance_hypothesis_generation: n_l must be positive");

  const std::vector<Seed> seeds = top_seeds(scores, n_l);
  const int k = target_graph.k();

  std::vector<char> processed(n_tgt, 0);
  std::vector<int> grown;
  for (const Seed& seed : seeds) {
    if (processed[seed.j]) continue;
    std::vector<int> stack{seed.j};
    while (!stack.empty()) {
      const int q = stack.back();
      stack.pop_back();
      if (processed[q]) continue;
      processed[q] = 1;
      bool keeps_all = true;
      for (int s = 0; s < k; ++s)
        if (mask.values(q, s) != 0.0) {
          keeps_all = false;
          break;
        }
      if (!keeps_all) continue;
      grown.push_back(q);
      for (int s = 0; s < k; ++s) stack.push_back(target_graph.neighbor_index(q, s));
    }
  }
  if (diag) (*diag)["hypothesis_grown"] += static_cast<long>(grown.size());

  std::vector<SeedHypothesis> out;
  if (static_cast<int>(grown.size()) < n_l) {
    // growth starved, fall back to the raw seed pairs
    out.reserve(seeds.size());
    for (const Seed& s : seeds) out.push_back({s.i, s.j, s.score});
    if (diag) (*diag)["hypothesis_fallback"] += 1;
    return out;
  }

  PointCloud grown_cloud;
  grown_cloud.points.reserve(grown.size());
  for (int q : grown) grown_cloud.points.push_back(target_graph.superpoints.points[q]);
  const std::vector<int> picked = farthest_point_sampling(grown_cloud, n_l);
  out.reserve(picked.size());
  for (int local : picked) {
    const int q = grown[local];
    int best_i = 0;
    for (int i = 1; i < scores.rows(); ++i)
      if (scores(i, q) > scores(best_i, q)) best_i = i;
    out.push_back({best_i, q, scores(best_i, q)});
  }
  return out;
}

PointToNodePartition point_to_node_partition(const PointCloud& dense,
                                             const PointCloud& superpoints) {
  PointToNodePartition part;
  part.assignment = assign_to_nearest(dense, superpoints);
  part.patches = superpoint_patches(part.assignment, static_cast<int>(superpoints.size()));
  return part;
}

SinkhornResult sinkhorn(const Eigen::MatrixXd& affinity, int iterations, bool with_slack,
                        double tol) {
  const int rows = static_cast<int>(affinity.rows());
  const int cols = static_cast<int>(affinity.cols());
  if (rows < 1 || cols < 1) throw std::invalid_argument("sinkhorn: empty matrix");
  if (with_slack && (rows < 2 || cols < 2))
    throw std::invalid_argument("sinkhorn: slack form needs at least one real row and column");
  if (iterations < 1) throw std::invalid_argument("sinkhorn: iterations must be positive");
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      if (!std::isfinite(affinity(r, c)) || affinity(r, c) < 0.0)
        throw std::invalid_argument("sinkhorn: affinities must be finite and non-negative");

  Eigen::VectorXd row_target = Eigen::VectorXd::Ones(rows);
  Eigen::VectorXd col_target = Eigen::VectorXd::Ones(cols);
  if (with_slack) {
    row_target[rows - 1] = static_cast<double>(cols - 1);
    col_target[cols - 1] = static_cast<double>(rows - 1);
  }

  SinkhornResult result;
  result.assignment = affinity;
  for (int r = 0; r < rows; ++r)
    if (result.assignment.row(r).sum() <= 0.0)
      throw std::invalid_argument("sinkhorn: row with no mass");
  for (int c = 0; c < cols; ++c)
    if (result.assignment.col(c).sum() <= 0.0)
      throw std::invalid_argument("sinkhorn: column with no mass");

  for (int it = 0; it < iterations; ++it) {
    for (int r = 0; r < rows; ++r)
      result.assignment.row(r) *= row_target[r] / result.assignment.row(r).sum();
    for (int c = 0; c < cols; ++c)
      result.assignment.col(c) *= col_target[c] / result.assignment.col(c).sum();
    result.iterations_used = it + 1;
    double err = 0.0;
    for (int r = 0; r < rows; ++r)
      err = std::max(err, std::abs(result.assignment.row(r).sum() - row_target[r]));
    if (err <= tol) {
      result.converged = true;
      break;
    }
  }
  return result;
}

CorrespondenceSet optimal_transport_match(const FeatureMatrix& source_features,
                                          const FeatureMatrix& target_features,
                                          const std::vector<int>& source_patch,
                                          const std::vector<int>& target_patch,
                                          const OtConfig& config, Diagnostics* diag) {
  CorrespondenceSet out;
  out.level = CorrespondenceLevel::dense;
  if (source_patch.empty() || target_patch.empty()) return out;
  const int a = static_cast<int>(source_patch.size());
  const int b = static_cast<int>(target_patch.size());
  for (int r : source_patch)
    if (r < 0 || r >= source_features.rows())
      throw std::invalid_argument("optimal_transport_match: source patch index out of range");
  for (int c : target_patch)
    if (c < 0 || c >= target_features.rows())
      throw std::invalid_argument("optimal_transport_match: target patch index out of range");

  Eigen::MatrixXd aug(a + 1, b + 1);
  for (int r = 0; r < a; ++r)
    for (int c = 0; c < b; ++c)
      aug(r, c) =
          std::exp(-(source_features.row(source_patch[r]) - target_features.row(target_patch[c]))
                        .norm());
  aug.row(a).setConstant(config.slack);
  aug.col(b).setConstant(config.slack);

  const Eigen::MatrixXd p = sinkhorn(aug, config.iterations, true).assignment;

  std::vector<int> row_best(a), col_best(b);
  for (int r = 0; r < a; ++r) {
    int best = 0;
    for (int c = 1; c <= b; ++c)
      if (p(r, c) > p(r, best)) best = c;
    row_best[r] = best;
  }
  for (int c = 0; c < b; ++c) {
    int best = 0;
    for (int r = 1; r <= a; ++r)
      if (p(r, c) > p(best, c)) best = r;
    col_best[c] = best;
  }
  for (int r = 0; r < a; ++r) {
    const int c = row_best[r];
    if (c >= b) continue;  // drained into the dustbin
    if (col_best[c] != r) continue;
    if (p(r, c) < config.min_score) continue;
    out.pairs.emplace_back(source_patch[r], target_patch[c]);
    out.scores.push_back(p(r, c));
  }
  if (diag) (*diag)["ot_matches"] += static_cast<long>(out.size());
  return out;
}

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(int x, int y) {
    x = find(x);
    y = find(y);
    if (x != y) parent[std::max(x, y)] = std::min(x, y);
  }
};

}  // namespace

std::vector<CandidateInstance> expand_to_dense(const std::vector<SeedHypothesis>& hypotheses,
                                               const SuperpointGraph& source_graph,
                                               const SuperpointGraph& target_graph,
                                               const NeighborMask& mask,
                                               const FeatureMatrix& dense_source_features,
                                               const FeatureMatrix& dense_target_features,
                                               const OtConfig& config, Diagnostics* diag) {
  const int n_src = static_cast<int>(source_graph.superpoints.size());
  const int n_tgt = static_cast<int>(target_graph.superpoints.size());
  if (dense_source_features.rows() != static_cast<Eigen::Index>(source_graph.assignment.size()))
    throw std::invalid_argument("expand_to_dense: source feature rows != assigned dense points");
  if (dense_target_features.rows() != static_cast<Eigen::Index>(target_graph.assignment.size()))
    throw std::invalid_argument("expand_to_dense: target feature rows != assigned dense points");
  if (mask.values.rows() != n_tgt || mask.values.cols() != target_graph.k())
    throw std::invalid_argument("expand_to_dense: mask shape mismatch");

  const std::vector<std::vector<int>> src_points =
      superpoint_patches(source_graph.assignment, n_src);
  const std::vector<std::vector<int>> tgt_points =
      superpoint_patches(target_graph.assignment, n_tgt);

  std::unordered_map<int, std::vector<int>> src_patch_cache, tgt_patch_cache;
  auto source_patch = [&](int p) -> const std::vector<int>& {
    auto it = src_patch_cache.find(p);
    if (it != src_patch_cache.end()) return it->second;
    std::vector<int> patch = src_points[p];
    for (int s = 0; s < source_graph.k(); ++s) {
      const auto& extra = src_points[source_graph.neighbor_index(p, s)];
      patch.insert(patch.end(), extra.begin(), extra.end());
    }
    std::sort(patch.begin(), patch.end());
    patch.erase(std::unique(patch.begin(), patch.end()), patch.end());
    return src_patch_cache.emplace(p, std::move(patch)).first->second;
  };
  auto target_patch = [&](int q) -> const std::vector<int>& {
    auto it = tgt_patch_cache.find(q);
    if (it != tgt_patch_cache.end()) return it->second;
    std::vector<int> patch = tgt_points[q];
    for (int s = 0; s < target_graph.k(); ++s) {
      if (mask.values(q, s) != 0.0) continue;
      const auto& extra = tgt_points[target_graph.neighbor_index(q, s)];
      patch.insert(patch.end(), extra.begin(), extra.end());
    }
    std::sort(patch.begin(), patch.end());
    patch.erase(std::unique(patch.begin(), patch.end()), patch.end());
    return tgt_patch_cache.emplace(q, std::move(patch)).first->second;
  };

  std::vector<int> survivors;
  for (int h = 0; h < static_cast<int>(hypotheses.size()); ++h) {
    const SeedHypothesis& hyp = hypotheses[h];
    if (hyp.source < 0 || hyp.source >= n_src || hyp.target < 0 || hyp.target >= n_tgt)
      throw std::invalid_argument("expand_to_dense: hypothesis index out of range");
    if (source_patch(hyp.source).empty() || target_patch(hyp.target).empty()) {
      if (diag) (*diag)["empty_patch_pairs"] += 1;
      continue;
    }
    survivors.push_back(h);
  }

  // hypotheses sharing any dense target point describe the same instance
  UnionFind uf(static_cast<int>(survivors.size()));
  std::unordered_map<int, int> point_owner;
  for (int local = 0; local < static_cast<int>(survivors.size()); ++local) {
    for (int pt : target_patch(hypotheses[survivors[local]].target)) {
      auto [it, inserted] = point_owner.emplace(pt, local);
      if (!inserted) uf.unite(local, it->second);
    }
  }

  std::vector<CandidateInstance> out;
  std::unordered_map<int, int> root_to_candidate;
  for (int local = 0; local < static_cast<int>(survivors.size()); ++local) {
    const int root = uf.find(local);
    auto [it, inserted] = root_to_candidate.emplace(root, static_cast<int>(out.size()));
    if (inserted) out.emplace_back();
    CandidateInstance& cand = out[it->second];
    const SeedHypothesis& hyp = hypotheses[survivors[local]];
    cand.patch_pairs.emplace_back(hyp.source, hyp.target);
    cand.source_patches.push_back(source_patch(hyp.source));
    cand.target_patches.push_back(target_patch(hyp.target));
  }

  for (CandidateInstance& cand : out) {
    std::unordered_set<long long> seen;
    for (std::size_t pp = 0; pp < cand.patch_pairs.size(); ++pp) {
      const CorrespondenceSet matches =
          optimal_transport_match(dense_source_features, dense_target_features,
                                  cand.source_patches[pp], cand.target_patches[pp], config, diag);
      for (std::size_t m = 0; m < matches.size(); ++m) {
        const long long key = static_cast<long long>(matches.pairs[m].first) * 1000000007LL +
                              matches.pairs[m].second;
        if (!seen.insert(key).second) continue;  // keep the first hit of a repeated pair
        cand.dense.pairs.push_back(matches.pairs[m]);
        cand.dense.scores.push_back(matches.scores[m]);
      }
    }
    cand.dense.level = CorrespondenceLevel::dense;
  }
  if (diag) (*diag)["candidate_instances"] += static_cast<long>(out.size());
  return out;
}

namespace {

void write_csv_rows(std::ofstream& out, const CorrespondenceSet& set, int candidate_id) {
  const char* level = set.level == CorrespondenceLevel::dense ? "dense" : "superpoint";
  for (std::size_t i = 0; i < set.size(); ++i) {
    out << set.pairs[i].first << ',' << set.pairs[i].second << ',' << std::setprecision(17)
        << set.scores[i] << ',' << level << ',' << candidate_id << '\n';
  }
}

}  // namespace

void write_correspondence_csv(const std::string& path, const CorrespondenceSet& set,
                              int candidate_id) {
  set.validate();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open csv for writing: " + path);
  out << "source_idx,target_idx,score,level,candidate_id\n";
  write_csv_rows(out, set, candidate_id);
}

void write_correspondence_csv(const std::string& path,
                              const std::vector<CandidateInstance>& candidates) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open csv for writing: " + path);
  out << "source_idx,target_idx,score,level,candidate_id\n";
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    candidates[c].dense.validate();
    write_csv_rows(out, candidates[c].dense, static_cast<int>(c));
  }
}

}  // namespace mireg
