#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pmnn/autodiff/graph.hpp"
#include "pmnn/error.hpp"

namespace pmnn {

/// Fully connected tanh network with a scalar linear output.
///
/// Parameters live in one flat vector, layer after layer: the weight matrix
/// W_l (n_out x n_in, row-major) followed by the bias b_l (n_out).
struct Mlp {
  std::vector<int> layer_sizes;
  Eigen::VectorXd params;

  int input_width() const { return layer_sizes.front(); }
  int layer_count() const { return static_cast<int>(layer_sizes.size()) - 1; }

  static Eigen::Index count_params(std::span<const int> sizes) {
    Eigen::Index n = 0;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) n += Eigen::Index(sizes[l]) * sizes[l + 1] + sizes[l + 1];
    return n;
  }

  Eigen::Index param_count() const { return count_params(layer_sizes); }

  /// Offset of W_l in `params`; b_l follows immediately.
  int weight_offset(int l) const {
    int off = 0;
    for (int k = 0; k < l; ++k) off += layer_sizes[k] * layer_sizes[k + 1] + layer_sizes[k + 1];
    return off;
  }
  int bias_offset(int l) const { return weight_offset(l) + layer_sizes[l] * layer_sizes[l + 1]; }

  using RowMajorMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  using ConstRowMajorMap =
      Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

  RowMajorMap weight(int l) {
    return RowMajorMap(params.data() + weight_offset(l), layer_sizes[l + 1], layer_sizes[l]);
  }
  ConstRowMajorMap weight(int l) const {
    return ConstRowMajorMap(params.data() + weight_offset(l), layer_sizes[l + 1], layer_sizes[l]);
  }
  Eigen::Map<Eigen::VectorXd> bias(int l) {
    return Eigen::Map<Eigen::VectorXd>(params.data() + bias_offset(l), layer_sizes[l + 1]);
  }
  Eigen::Map<const Eigen::VectorXd> bias(int l) const {
    return Eigen::Map<const Eigen::VectorXd>(params.data() + bias_offset(l), layer_sizes[l + 1]);
  }
};

inline void validate_layer_sizes(std::span<const int> sizes) {
  if (sizes.size() < 2) throw InvalidArgument("an MLP needs at least an input and an output layer");
  for (int s : sizes)
    if (s < 1) throw InvalidArgument("layer sizes must be positive");
  if (sizes.back() != 1) throw InvalidArgument("output width must be 1");
}

/// Glorot-uniform weights (bound sqrt(6/(n_in+n_out))), zero biases.
inline Mlp init_mlp(std::vector<int> layer_sizes, std::uint64_t seed) {
  validate_layer_sizes(layer_sizes);
  Mlp net;
  net.layer_sizes = std::move(layer_sizes);
  net.params = Eigen::VectorXd::Zero(net.param_count());
  std::mt19937_64 rng(seed);
  for (int l = 0; l < net.layer_count(); ++l) {
    const int n_in = net.layer_sizes[l];
    const int n_out = net.layer_sizes[l + 1];
    const double bound = std::sqrt(6.0 / (n_in + n_out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    auto w = net.weight(l);
    for (int r = 0; r < n_out; ++r)
      for (int c = 0; c < n_in; ++c) w(r, c) = dist(rng);
  }
  return net;
}

/// Graph of the network output for a batch of input features. `inputs`
/// holds one 1-row expression per input unit. Parameter nodes refer to
/// the layout of `net` shifted by `param_offset`.
inline ad::Var forward_expr(const Mlp& net, std::span<const ad::Var> inputs, int param_offset = 0) {
  if (static_cast<int>(inputs.size()) != net.input_width())
    throw DimensionError("network expects " + std::to_string(net.input_width()) + " inputs, got " +
                         std::to_string(inputs.size()));
  ad::Graph& g = ad::graph_of(inputs.front());
  ad::Var h = ad::stack_rows(inputs);
  for (int l = 0; l < net.layer_count(); ++l) {
    ad::Var w = g.parameter(param_offset + net.weight_offset(l), net.layer_sizes[l + 1], net.layer_sizes[l]);
    ad::Var b = g.parameter(param_offset + net.bias_offset(l), net.layer_sizes[l + 1], 1);
    ad::Var z = ad::matmul(w, h) + b;
    h = (l + 1 < net.layer_count()) ? ad::tanh(z) : z;
  }
  return h;
}

/// Direct numeric forward pass; `x` is input_width x N, result has N entries.
inline Eigen::ArrayXd forward(const Mlp& net, const Eigen::MatrixXd& x) {
  if (x.rows() != net.input_width()) throw DimensionError("input width mismatch");
  Eigen::MatrixXd h = x;
  for (int l = 0; l < net.layer_count(); ++l) {
    Eigen::MatrixXd z = net.weight(l) * h;
    z.colwise() += net.bias(l);
    h = (l + 1 < net.layer_count()) ? Eigen::MatrixXd(z.array().tanh().matrix()) : z;
  }
  return h.row(0).transpose().array();
}

// Checkpoint layout (JSON):
//   { "layer_sizes": [n0, ..., 1],
//     "weights": [[W_0 row-major], ...],
//     "biases":  [[b_0], ...] }

inline nlohmann::json to_json(const Mlp& net) {
  nlohmann::json j;
  j["layer_sizes"] = net.layer_sizes;
  j["weights"] = nlohmann::json::array();
  j["biases"] = nlohmann::json::array();
  for (int l = 0; l < net.layer_count(); ++l) {
    const double* w = net.params.data() + net.weight_offset(l);
    const double* b = net.params.data() + net.bias_offset(l);
    j["weights"].push_back(std::vector<double>(w, w + net.layer_sizes[l] * net.layer_sizes[l + 1]));
    j["biases"].push_back(std::vector<double>(b, b + net.layer_sizes[l + 1]));
  }
  return j;
}

inline Mlp mlp_from_json(const nlohmann::json& j) {
  Mlp net;
  net.layer_sizes = j.at("layer_sizes").get<std::vector<int>>();
  validate_layer_sizes(net.layer_sizes);
  net.params = Eigen::VectorXd::Zero(net.param_count());
  const auto& ws = j.at("weights");
  const auto& bs = j.at("biases");
  if (static_cast<int>(ws.size()) != net.layer_count() || static_cast<int>(bs.size()) != net.layer_count())
    throw InvalidArgument("checkpoint layer count does not match layer_sizes");
  for (int l = 0; l < net.layer_count(); ++l) {
    auto w = ws[l].get<std::vector<double>>();
    auto b = bs[l].get<std::vector<double>>();
    if (static_cast<int>(w.size()) != net.layer_sizes[l] * net.layer_sizes[l + 1] ||
        static_cast<int>(b.size()) != net.layer_sizes[l + 1])
      throw InvalidArgument("checkpoint block " + std::to_string(l) + " has the wrong size");
    std::copy(w.begin(), w.end(), net.params.data() + net.weight_offset(l));
    std::copy(b.begin(), b.end(), net.params.data() + net.bias_offset(l));
  }
  return net;
}

inline void save_checkpoint(const Mlp& net, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  // dump() prints doubles with round-trip precision.
  out << to_json(net).dump(1) << '\n';
}

inline Mlp load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  return mlp_from_json(nlohmann::json::parse(in));
}

}  // namespace pmnn
