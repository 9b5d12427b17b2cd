#include "mireg/weights.hpp"

#include <fstream>
#include <stdexcept>
#include <vector>

#include "json.hpp"

namespace mireg {

namespace {

using nlohmann::json;

json tensor_json(const std::string& name, const Eigen::MatrixXd& m) {
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(m.size()));
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c) values.push_back(m(r, c));
  return json{{"name", name},
              {"shape", {m.rows(), m.cols()}},
              {"values", values}};
}

json tensor_json(const std::string& name, const Eigen::VectorXd& v) {
  std::vector<double> values(v.data(), v.data() + v.size());
  return json{{"name", name}, {"shape", {v.size()}}, {"values", values}};
}

void append_mlp(json& tensors, const std::string& prefix, const Mlp& mlp) {
  for (std::size_t l = 0; l < mlp.weights.size(); ++l) {
    tensors.push_back(tensor_json(prefix + ".w" + std::to_string(l), mlp.weights[l]));
    tensors.push_back(tensor_json(prefix + ".b" + std::to_string(l), mlp.biases[l]));
  }
}

const json& find_tensor(const json& tensors, const std::string& name) {
  for (const auto& t : tensors)
    if (t.at("name").get<std::string>() == name) return t;
  throw std::invalid_argument("weights file is missing tensor " + name);
}

Eigen::MatrixXd read_matrix(const json& tensors, const std::string& name) {
  const json& t = find_tensor(tensors, name);
  const auto& shape = t.at("shape");
  if (shape.size() != 2) throw std::invalid_argument("tensor " + name + " is not a matrix");
  const Eigen::Index rows = shape[0].get<Eigen::Index>();
  const Eigen::Index cols = shape[1].get<Eigen::Index>();
  const auto& values = t.at("values");
  if (static_cast<Eigen::Index>(values.size()) != rows * cols)
    throw std::invalid_argument("tensor " + name + " has wrong value count");
  Eigen::MatrixXd m(rows, cols);
  std::size_t idx = 0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = values[idx++].get<double>();
  return m;
}

Eigen::VectorXd read_vector(const json& tensors, const std::string& name) {
  const json& t = find_tensor(tensors, name);
  const auto& shape = t.at("shape");
  if (shape.size() != 1) throw std::invalid_argument("tensor " + name + " is not a vector");
  const Eigen::Index n = shape[0].get<Eigen::Index>();
  const auto& values = t.at("values");
  if (static_cast<Eigen::Index>(values.size()) != n)
    throw std::invalid_argument("tensor " + name + " has wrong value count");
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = values[i].get<double>();
  return v;
}

Mlp read_mlp(const json& tensors, const std::string& prefix, int layers) {
  Mlp mlp;
  for (int l = 0; l < layers; ++l) {
    mlp.weights.push_back(read_matrix(tensors, prefix + ".w" + std::to_string(l)));
    mlp.biases.push_back(read_vector(tensors, prefix + ".b" + std::to_string(l)));
  }
  return mlp;
}

}  // namespace

void save_weights(const AttentionParams& params, const std::string& path) {
  params.validate();
  json tensors = json::array();
  tensors.push_back(tensor_json("w_q", params.w_q));
  tensors.push_back(tensor_json("w_k", params.w_k));
  tensors.push_back(tensor_json("w_v", params.w_v));
  tensors.push_back(tensor_json("w_r", params.w_r));
  append_mlp(tensors, "fuse", params.mlp_fuse);
  append_mlp(tensors, "geo", params.mlp_geo);
  append_mlp(tensors, "mask", params.mlp_mask);
  json doc{{"format", "mireg-weights-v1"},
           {"dim", params.dim},
           {"geo_dim", params.geo_dim},
           {"tensors", tensors}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open weights file for writing: " + path);
  out << doc.dump(2) << "\n";
}

AttentionParams load_weights(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open weights file: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("weights file is not valid JSON: " + std::string(e.what()));
  }
  if (!doc.contains("format") || doc["format"].get<std::string>() != "mireg-weights-v1")
    throw std::invalid_argument("weights file has an unsupported format tag");
  AttentionParams p;
  p.dim = doc.at("dim").get<int>();
  p.geo_dim = doc.at("geo_dim").get<int>();
  const json& tensors = doc.at("tensors");
  p.w_q = read_matrix(tensors, "w_q");
  p.w_k = read_matrix(tensors, "w_k");
  p.w_v = read_matrix(tensors, "w_v");
  p.w_r = read_matrix(tensors, "w_r");
  p.mlp_fuse = read_mlp(tensors, "fuse", 2);
  p.mlp_geo = read_mlp(tensors, "geo", 2);
  p.mlp_mask = read_mlp(tensors, "mask", 2);
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(std::string("weights file shape mismatch: ") + e.what());
  }
  return p;
}

}  // namespace mireg
