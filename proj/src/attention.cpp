#include "mireg/attention.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>
#include <utility>

namespace mireg {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// fixed cosine basis, rows pairwise orthogonal while out <= in
const Eigen::MatrixXd& embedding_projection(int out, int in) {
  thread_local std::map<std::pair<int, int>, Eigen::MatrixXd> cache;
  auto key = std::make_pair(out, in);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  Eigen::MatrixXd p(out, in);
  const double pi = std::acos(-1.0);
  for (int r = 0; r < out; ++r) {
    const double scale = r == 0 ? std::sqrt(1.0 / in) : std::sqrt(2.0 / in);
    for (int c = 0; c < in; ++c) {
      p(r, c) = scale * std::cos(pi * (2.0 * c + 1.0) * r / (2.0 * in));
    }
  }
  return cache.emplace(key, std::move(p)).first->second;
}

// strict content order: higher score first, score ties resolved by the value
// rows themselves so storage order never matters
struct ScoredRow {
  double score;
  int index;
};

std::vector<ScoredRow> content_order(const Eigen::VectorXd& scores, const Eigen::MatrixXd& values) {
  std::vector<ScoredRow> order(scores.size());
  for (int j = 0; j < scores.size(); ++j) order[j] = {scores[j], j};
  std::sort(order.begin(), order.end(), [&](const ScoredRow& a, const ScoredRow& b) {
    if (a.score != b.score) return a.score > b.score;
    for (int c = 0; c < values.cols(); ++c) {
      const double va = values(a.index, c);
      const double vb = values(b.index, c);
      if (va != vb) return va < vb;
    }
    return false;
  });
  return order;
}

void check_features(const FeatureMatrix& features, const SuperpointGraph& graph,
                    const AttentionParams& params, const char* what) {
  if (features.rows() != static_cast<Eigen::Index>(graph.superpoints.size()))
    throw std::invalid_argument(std::string(what) + ": feature rows do not match graph size");
  if (features.cols() != params.dim)
    throw std::invalid_argument(std::string(what) + ": feature width does not match params.dim");
}

}  // namespace

Eigen::VectorXd Mlp::apply(const Eigen::VectorXd& x) const {
  if (weights.empty()) throw std::invalid_argument("Mlp::apply: no layers");
  Eigen::VectorXd h = x;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l].cols() != h.size())
      throw std::invalid_argument("Mlp::apply: input width mismatch");
    h = weights[l] * h + biases[l];
    if (l + 1 < weights.size()) h = h.cwiseMax(0.0);
  }
  return h;
}

Mlp Mlp::seeded(const std::vector<int>& dims, double scale, Rng& rng) {
  if (dims.size() < 2) throw std::invalid_argument("Mlp::seeded: need at least two dims");
  Mlp mlp;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    Eigen::MatrixXd w(dims[l + 1], dims[l]);
    for (int r = 0; r < w.rows(); ++r)
      for (int c = 0; c < w.cols(); ++c) w(r, c) = rng.uniform(-scale, scale);
    Eigen::VectorXd b(dims[l + 1]);
    for (int r = 0; r < b.size(); ++r) b[r] = rng.uniform(-scale, scale);
    mlp.weights.push_back(std::move(w));
    mlp.biases.push_back(std::move(b));
  }
  return mlp;
}

AttentionParams AttentionParams::seeded(int dim, int geo_dim, std::uint64_t seed) {
  if (dim < 1 || geo_dim < 1) throw std::invalid_argument("AttentionParams::seeded: bad dims");
  AttentionParams p;
  p.dim = dim;
  p.geo_dim = geo_dim;
  Rng rng(seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
  auto square = [&](Eigen::MatrixXd& m) {
    m.resize(dim, dim);
    for (int r = 0; r < dim; ++r)
      for (int c = 0; c < dim; ++c) m(r, c) = rng.uniform(-scale, scale);
  };
  square(p.w_q);
  square(p.w_k);
  square(p.w_v);
  square(p.w_r);
  p.mlp_fuse = Mlp::seeded({2 * dim, 2 * dim, dim}, scale, rng);
  p.mlp_geo = Mlp::seeded({3 * geo_dim, 2 * geo_dim, dim}, scale, rng);
  p.mlp_mask = Mlp::seeded({2 * dim, dim, 1}, scale, rng);
  return p;
}

void AttentionParams::validate() const {
  if (dim < 1 || geo_dim < 1) throw std::invalid_argument("AttentionParams: bad dims");
  if (dim > 2 * geo_dim)
    throw std::invalid_argument("AttentionParams: dim must not exceed 2 * geo_dim");
  auto need = [&](const Eigen::MatrixXd& m, const char* name) {
    if (m.rows() != dim || m.cols() != dim)
      throw std::invalid_argument(std::string("AttentionParams: ") + name + " must be dim x dim");
  };
  need(w_q, "w_q");
  need(w_k, "w_k");
  need(w_v, "w_v");
  need(w_r, "w_r");
  auto need_mlp = [](const Mlp& m, int in, int out, const char* name) {
    if (m.weights.empty() || m.weights.front().cols() != in || m.weights.back().rows() != out)
      throw std::invalid_argument(std::string("AttentionParams: ") + name + " has wrong shape");
    for (std::size_t l = 0; l < m.weights.size(); ++l) {
      if (m.biases.size() != m.weights.size() || m.biases[l].size() != m.weights[l].rows())
        throw std::invalid_argument(std::string("AttentionParams: ") + name + " bias mismatch");
      if (l > 0 && m.weights[l].cols() != m.weights[l - 1].rows())
        throw std::invalid_argument(std::string("AttentionParams: ") + name + " layer mismatch");
    }
  };
  need_mlp(mlp_fuse, 2 * dim, dim, "mlp_fuse");
  need_mlp(mlp_geo, 3 * geo_dim, dim, "mlp_geo");
  need_mlp(mlp_mask, 2 * dim, 1, "mlp_mask");
}

NeighborMask NeighborMask::from_confidence(const Eigen::MatrixXd& confidence, double tau) {
  NeighborMask mask;
  mask.confidence = confidence;
  mask.values = Eigen::MatrixXd::Zero(confidence.rows(), confidence.cols());
  for (int i = 0; i < confidence.rows(); ++i)
    for (int s = 0; s < confidence.cols(); ++s)
      if (confidence(i, s) < tau) mask.values(i, s) = kNegInf;
  return mask;
}

Eigen::VectorXd sinusoidal_embedding(double x, int dim) {
  if (dim < 1) throw std::invalid_argument("sinusoidal_embedding: dim must be positive");
  Eigen::VectorXd e(dim);
  for (int c = 0; c < dim; ++c) {
    const int p = c / 2;
    const double freq = std::pow(10000.0, -2.0 * p / dim);
    e[c] = (c % 2 == 0) ? std::sin(x * freq) : std::cos(x * freq);
  }
  return e;
}

Eigen::VectorXd geometric_embedding(const SuperpointGraph& graph, int i, int slot, int dim,
                                    int geo_dim) {
  const int n = static_cast<int>(graph.superpoints.size());
  if (i < 0 || i >= n) throw std::invalid_argument("geometric_embedding: row out of range");
  if (slot < 0 || slot >= graph.k())
    throw std::invalid_argument("geometric_embedding: slot out of range");
  if (dim > 2 * geo_dim)
    throw std::invalid_argument("geometric_embedding: dim must not exceed 2 * geo_dim");
  const Eigen::Vector3d& pi = graph.superpoints.points[i];
  const Eigen::Vector3d& pj = graph.superpoints.points[graph.neighbor_index(i, slot)];
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (int s = 0; s < graph.k(); ++s)
    centroid += graph.superpoints.points[graph.neighbor_index(i, s)];
  centroid /= static_cast<double>(graph.k());

  const double res = graph.resolution > 0.0 ? graph.resolution : 1.0;
  const double dist = (pj - pi).norm() / res;
  const Eigen::Vector3d u = pj - pi;
  const Eigen::Vector3d v = centroid - pi;
  double angle = 0.0;
  if (u.norm() > 1e-15 && v.norm() > 1e-15) {
    const double c = std::clamp(u.dot(v) / (u.norm() * v.norm()), -1.0, 1.0);
    angle = std::acos(c);
  }
  Eigen::VectorXd channels(2 * geo_dim);
  channels << sinusoidal_embedding(dist, geo_dim), sinusoidal_embedding(angle, geo_dim);
  return embedding_projection(dim, 2 * geo_dim) * channels;
}

RegionalAssociationResult regional_association(const FeatureMatrix& features,
                                               const SuperpointGraph& graph,
                                               const NeighborMask* mask,
                                               const AttentionParams& params, Diagnostics* diag) {
  params.validate();
  check_features(features, graph, params, "regional_association");
  const int n = static_cast<int>(features.rows());
  const int k = graph.k();
  const int d = params.dim;
  if (mask && (mask->values.rows() != n || mask->values.cols() != k))
    throw std::invalid_argument("regional_association: mask shape does not match graph");

  // per-row projections keep each output row a function of its input row only
  FeatureMatrix fq(n, d), fk(n, d), fv(n, d);
  for (int i = 0; i < n; ++i) {
    fq.row(i) = features.row(i) * params.w_q;
    fk.row(i) = features.row(i) * params.w_k;
    fv.row(i) = features.row(i) * params.w_v;
  }

  RegionalAssociationResult out;
  out.features.resize(n, d);
  out.weights = Eigen::MatrixXd::Zero(n, k);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));

  for (int i = 0; i < n; ++i) {
    bool fallback = false;
    if (mask) {
      fallback = true;
      for (int s = 0; s < k; ++s)
        if (mask->values(i, s) == 0.0) {
          fallback = false;
          break;
        }
    }
    if (fallback) out.fallback_rows.push_back(i);

    Eigen::VectorXd scores(k);
    for (int s = 0; s < k; ++s) {
      const int j = graph.neighbor_index(i, s);
      const Eigen::VectorXd g = geometric_embedding(graph, i, s, d, params.geo_dim);
      const Eigen::RowVectorXd key = fk.row(j) + (g.transpose() * params.w_r);
      double e = fq.row(i).dot(key) * inv_sqrt_d;
      if (mask && !fallback) e += mask->values(i, s);
      scores[s] = e;
    }
    if (fallback) {
      out.weights.row(i).setConstant(1.0 / k);
    } else {
      const double m = scores.maxCoeff();
      double z = 0.0;
      for (int s = 0; s < k; ++s) z += std::exp(scores[s] - m);
      for (int s = 0; s < k; ++s) out.weights(i, s) = std::exp(scores[s] - m) / z;
    }

    Eigen::RowVectorXd pooled_ctx = Eigen::RowVectorXd::Zero(d);
    for (int s = 0; s < k; ++s)
      pooled_ctx += out.weights(i, s) * fv.row(graph.neighbor_index(i, s));

    // channel-wise soft pooling over the kept slots of [context | neighbor]
    Eigen::MatrixXd stacked(k, 2 * d);
    std::vector<int> kept;
    for (int s = 0; s < k; ++s) {
      const bool keep = fallback || !mask || mask->values(i, s) == 0.0;
      if (!keep) continue;
      stacked.row(static_cast<int>(kept.size()))
          << pooled_ctx, fv.row(graph.neighbor_index(i, s));
      kept.push_back(s);
    }
    const int kk = static_cast<int>(kept.size());
    Eigen::VectorXd pooled(2 * d);
    for (int c = 0; c < 2 * d; ++c) {
      double m = stacked.col(c).head(kk).maxCoeff();
      double z = 0.0;
      for (int s = 0; s < kk; ++s) z += std::exp(stacked(s, c) - m);
      double acc = 0.0;
      for (int s = 0; s < kk; ++s) acc += stacked(s, c) * (std::exp(stacked(s, c) - m) / z);
      pooled[c] = acc;
    }
    out.features.row(i) = params.mlp_fuse.apply(pooled).transpose();
  }
  if (diag) (*diag)["mask_fallback_rows"] += static_cast<long>(out.fallback_rows.size());
  return out;
}

namespace {

// one direction of full attention; accumulation follows content order
FeatureMatrix attend(const FeatureMatrix& queries, const FeatureMatrix& keys_src,
                     const AttentionParams& params, Eigen::MatrixXd* weights_out) {
  const int nq = static_cast<int>(queries.rows());
  const int nk = static_cast<int>(keys_src.rows());
  const int d = params.dim;
  FeatureMatrix fq(nq, d), fk(nk, d), fv(nk, d);
  for (int i = 0; i < nq; ++i) fq.row(i) = queries.row(i) * params.w_q;
  for (int j = 0; j < nk; ++j) {
    fk.row(j) = keys_src.row(j) * params.w_k;
    fv.row(j) = keys_src.row(j) * params.w_v;
  }
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  FeatureMatrix out(nq, d);
  if (weights_out) weights_out->resize(nq, nk);
  for (int i = 0; i < nq; ++i) {
    Eigen::VectorXd scores(nk);
    for (int j = 0; j < nk; ++j) scores[j] = fq.row(i).dot(fk.row(j)) * inv_sqrt_d;
    const double m = scores.maxCoeff();
    const auto order = content_order(scores, fv);
    double z = 0.0;
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(d);
    for (const ScoredRow& r : order) {
      const double w = std::exp(r.score - m);
      z += w;
      acc += w * fv.row(r.index);
    }
    out.row(i) = queries.row(i) + acc / z;
    if (weights_out)
      for (int j = 0; j < nk; ++j) (*weights_out)(i, j) = std::exp(scores[j] - m) / z;
  }
  return out;
}

}  // namespace

CrossAttentionResult cross_attention(const FeatureMatrix& source, const FeatureMatrix& target,
                                     const AttentionParams& params, bool keep_weights) {
  params.validate();
  if (source.cols() != params.dim || target.cols() != params.dim)
    throw std::invalid_argument("cross_attention: feature width does not match params.dim");
  if (source.rows() == 0 || target.rows() == 0)
    throw std::invalid_argument("cross_attention: empty feature matrix");
  CrossAttentionResult out;
  out.source = attend(source, target, params, keep_weights ? &out.source_weights : nullptr);
  out.target = attend(target, source, params, keep_weights ? &out.target_weights : nullptr);
  return out;
}

SuperpointGeometry compute_superpoint_geometry(const SuperpointGraph& graph, Diagnostics* diag) {
  const int n = static_cast<int>(graph.superpoints.size());
  if (n == 0) throw std::invalid_argument("compute_superpoint_geometry: empty graph");
  SuperpointGeometry geo;
  const int k = std::min(std::max(graph.k() + 1, 4), n);
  const PointCloud cloud = estimate_normals_curvature(graph.superpoints, k, diag);
  geo.normals = cloud.normals;
  geo.curvature = cloud.curvature;
  geo.neighbor_geodesic = neighbor_geodesics(graph);
  geo.diameter = bounding_box_diagonal(graph.superpoints);
  geo.resolution = n >= 2 ? cloud_resolution(cloud) : 0.0;
  return geo;
}

NeighborMask predict_neighbor_mask(const FeatureMatrix& features, const SuperpointGraph& graph,
                                   const SuperpointGeometry& geo, const AttentionParams& params,
                                   double tau, Diagnostics* diag) {
  params.validate();
  check_features(features, graph, params, "predict_neighbor_mask");
  const int n = static_cast<int>(features.rows());
  const int k = graph.k();
  if (static_cast<int>(geo.normals.size()) != n || static_cast<int>(geo.curvature.size()) != n ||
      geo.neighbor_geodesic.rows() != n || geo.neighbor_geodesic.cols() != k)
    throw std::invalid_argument("predict_neighbor_mask: geometry does not match graph");

  const double cap = 10.0 * geo.diameter;
  const double res = geo.resolution > 0.0 ? geo.resolution : 1.0;
  const int g = params.geo_dim;
  Eigen::MatrixXd confidence(n, k);
  long rejected = 0;
  for (int i = 0; i < n; ++i) {
    for (int s = 0; s < k; ++s) {
      const int j = graph.neighbor_index(i, s);
      const double nd = std::clamp(std::abs(geo.normals[i].dot(geo.normals[j])), 0.0, 1.0);
      const double normal_angle = std::acos(nd);
      const double curv_diff = std::abs(geo.curvature[i] - geo.curvature[j]);
      double gd = geo.neighbor_geodesic(i, s);
      if (!std::isfinite(gd) || gd > cap) gd = cap;
      Eigen::VectorXd channels(3 * g);
      channels << sinusoidal_embedding(normal_angle, g), sinusoidal_embedding(curv_diff, g),
          sinusoidal_embedding(gd / res, g);
      const Eigen::VectorXd geo_feat = params.mlp_geo.apply(channels);
      Eigen::VectorXd pair_feat(2 * params.dim);
      pair_feat << (features.row(j) - features.row(i)).transpose(), geo_feat;
      const double logit = params.mlp_mask.apply(pair_feat)[0];
      confidence(i, s) = 1.0 / (1.0 + std::exp(-logit));
      if (confidence(i, s) < tau) ++rejected;
    }
  }
  if (diag) (*diag)["mask_rejected_slots"] += rejected;
  return NeighborMask::from_confidence(confidence, tau);
}

FeatureMatrix coordinate_features(const PointCloud& cloud, int dim, double scale) {
  if (dim < 1) throw std::invalid_argument("coordinate_features: dim must be positive");
  if (!(scale > 0.0)) throw std::invalid_argument("coordinate_features: scale must be positive");
  const int n = static_cast<int>(cloud.size());
  FeatureMatrix f(n, dim);
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < dim; ++c) {
      const int level = c / 6;
      const int rem = c % 6;
      const int axis = rem / 2;
      const double lambda = scale * std::pow(2.0, level);
      const double theta = cloud.points[i][axis] / lambda;
      f(i, c) = (rem % 2 == 0) ? std::sin(theta) : std::cos(theta);
    }
  }
  return f;
}

IftOutput instance_focused_forward(const FeatureMatrix& init_source,
                                   const FeatureMatrix& init_target,
                                   const SuperpointGraph& source_graph,
                                   const SuperpointGraph& target_graph,
                                   const SuperpointGeometry& target_geometry,
                                   const AttentionParams& params, double tau, int blocks,
                                   Diagnostics* diag) {
  if (blocks < 1) throw std::invalid_argument("instance_focused_forward: blocks must be positive");
  params.validate();
  check_features(init_source, source_graph, params, "instance_focused_forward source");
  check_features(init_target, target_graph, params, "instance_focused_forward target");

  IftOutput out;
  out.source = init_source;
  out.target = init_target;
  out.mask = predict_neighbor_mask(out.target, target_graph, target_geometry, params, tau, diag);
  for (int b = 0; b < blocks; ++b) {
    out.source = regional_association(out.source, source_graph, nullptr, params, diag).features;
    out.target =
        regional_association(out.target, target_graph, &out.mask, params, diag).features;
    CrossAttentionResult ca = cross_attention(out.source, out.target, params);
    out.source = std::move(ca.source);
    out.target = std::move(ca.target);
    out.mask = predict_neighbor_mask(out.target, target_graph, target_geometry, params, tau, diag);
  }
  return out;
}

}  // namespace mireg
