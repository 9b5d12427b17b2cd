#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "mireg/geometry.hpp"
#include "mireg/rng.hpp"
#include "mireg/types.hpp"

namespace mireg {

// rows x dim, row i holds the feature of element i
using FeatureMatrix = Eigen::MatrixXd;

struct Mlp {
  std::vector<Eigen::MatrixXd> weights;  // out x in, per layer
  std::vector<Eigen::VectorXd> biases;
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;  // ReLU between layers, linear last
  static Mlp seeded(const std::vector<int>& dims, double scale, Rng& rng);
};

struct AttentionParams {
  int dim = 32;
  int geo_dim = 16;
  Eigen::MatrixXd w_q, w_k, w_v, w_r;  // dim x dim projections
  Mlp mlp_fuse;  // 2*dim -> dim, fuses pooled context with masked neighbor features
  Mlp mlp_geo;   // 3*geo_dim -> dim, embeds pair geometry channels
  Mlp mlp_mask;  // 2*dim -> 1 logit, neighbor confidence head

  // uniform entries in +-1/sqrt(dim), fixed tensor order, reproducible by seed
  static AttentionParams seeded(int dim, int geo_dim, std::uint64_t seed);
  void validate() const;
};

// Pairwise keep/drop decisions per superpoint neighbor slot. values(i, s) is 0
// when the slot is kept and -infinity when rejected; confidence holds the raw
// sigmoid output (ground-truth masks use exact 0/1).
struct NeighborMask {
  Eigen::MatrixXd values;
  Eigen::MatrixXd confidence;
  // rejection is strict: confidence < tau -> -infinity, confidence == tau kept
  static NeighborMask from_confidence(const Eigen::MatrixXd& confidence, double tau);
};

// interleaved sin/cos ladder, frequencies 10000^(-2p/dim)
Eigen::VectorXd sinusoidal_embedding(double x, int dim);

// Signature of the (i, neighbor-slot) pair: embedded distance and the angle at
// i between the neighbor and the neighborhood centroid, projected to dim with
// a fixed cosine basis. Depends on the graph only through distances and
// angles, so it is invariant under rigid motion of the superpoints.
Eigen::VectorXd geometric_embedding(const SuperpointGraph& graph, int i, int slot, int dim,
                                    int geo_dim);

struct RegionalAssociationResult {
  FeatureMatrix features;          // rows x dim
  Eigen::MatrixXd weights;         // rows x k attention weights (each row sums to 1)
  std::vector<int> fallback_rows;  // rows whose mask rejected every neighbor
};

// Neighborhood attention with geometric keys. `mask` may be null (source
// side). A row whose mask rejects all k slots falls back to uniform weights
// with the mask ignored for that row and is reported in fallback_rows and
// diag["mask_fallback_rows"].
RegionalAssociationResult regional_association(const FeatureMatrix& features,
                                               const SuperpointGraph& graph,
                                               const NeighborMask* mask,
                                               const AttentionParams& params,
                                               Diagnostics* diag = nullptr);

struct CrossAttentionResult {
  FeatureMatrix source;
  FeatureMatrix target;
  Eigen::MatrixXd source_weights;  // filled only when requested
  Eigen::MatrixXd target_weights;
};

// Full bipartite attention in both directions with shared projections.
// Per-row sums are accumulated in a content-determined order, so consistently
// permuting input rows permutes output rows bit for bit.
CrossAttentionResult cross_attention(const FeatureMatrix& source, const FeatureMatrix& target,
                                     const AttentionParams& params, bool keep_weights = false);

struct SuperpointGeometry {
  std::vector<Eigen::Vector3d> normals;
  std::vector<double> curvature;
  Eigen::MatrixXd neighbor_geodesic;  // rows x k, +inf when disconnected
  double diameter = 0.0;              // bounding-box diagonal of the superpoints
  double resolution = 0.0;            // median superpoint spacing
};

SuperpointGeometry compute_superpoint_geometry(const SuperpointGraph& graph,
                                               Diagnostics* diag = nullptr);

// Confidence per neighbor slot from relative normal angle (absolute dot, so
// normal sign conventions cancel), curvature difference, and graph geodesic
// distance (capped at 10x the superpoint diameter before embedding), combined
// with the feature difference of the pair.
NeighborMask predict_neighbor_mask(const FeatureMatrix& features, const SuperpointGraph& graph,
                                   const SuperpointGeometry& geo, const AttentionParams& params,
                                   double tau, Diagnostics* diag = nullptr);

// Deterministic data-dependent init features: per-axis sin/cos ladder of the
// raw coordinates at wavelengths scale * 2^j.
FeatureMatrix coordinate_features(const PointCloud& cloud, int dim, double scale);

struct IftOutput {
  FeatureMatrix source;
  FeatureMatrix target;
  NeighborMask mask;
};

// `blocks` rounds of (source association, masked target association, cross
// attention); the target mask is predicted from the current target features
// before the first block and re-predicted after every block.
IftOutput instance_focused_forward(const FeatureMatrix& init_source,
                                   const FeatureMatrix& init_target,
                                   const SuperpointGraph& source_graph,
                                   const SuperpointGraph& target_graph,
                                   const SuperpointGeometry& target_geometry,
                                   const AttentionParams& params, double tau, int blocks,
                                   Diagnostics* diag = nullptr);

}  // namespace mireg
