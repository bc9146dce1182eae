#include "pfe/mlp.hpp"

#include <cmath>
#include <stdexcept>

#include "pfe/rng.hpp"

namespace pfe {

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "identity") return Activation::identity;
  throw std::invalid_argument("parse_activation: unknown activation '" + name + "'");
}

std::string activation_name(Activation a) {
  return a == Activation::relu ? "relu" : "identity";
}

void MlpParams::validate() const {
  if (layers.empty()) throw std::invalid_argument("MlpParams: no layers");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const MlpLayer& layer = layers[l];
    if (layer.weight.rows == 0 || layer.weight.cols == 0)
      throw std::invalid_argument("MlpParams: layer " + std::to_string(l) + " has empty weight");
    if (layer.bias.size() != layer.weight.rows)
      throw std::invalid_argument("MlpParams: layer " + std::to_string(l) +
                                  " bias length does not match weight rows");
    if (l > 0 && layer.weight.cols != layers[l - 1].weight.rows)
      throw std::invalid_argument("MlpParams: layer " + std::to_string(l) +
                                  " input dim does not chain with previous layer");
  }
  if (layers.back().act != Activation::identity)
    throw std::invalid_argument("MlpParams: final layer activation must be identity");
}

MlpParams make_mlp(const std::vector<std::size_t>& dims, Activation hidden_act,
                   std::uint64_t seed) {
  if (dims.size() < 2) throw std::invalid_argument("make_mlp: need at least input and output dim");
  MlpParams params;
  Rng rng(derive_seed(seed, 0x6d6c70));
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    MlpLayer layer;
    const std::size_t in = dims[l];
    const std::size_t out = dims[l + 1];
    const bool last = (l + 2 == dims.size());
    layer.act = last ? Activation::identity : hidden_act;
    // He init for relu, Xavier-ish otherwise
    const double gain = (layer.act == Activation::relu) ? 2.0 : 1.0;
    const double scale = std::sqrt(gain / static_cast<double>(in));
    layer.weight = Matrix(out, in);
    for (double& w : layer.weight.data) w = scale * rng.gaussian();
    layer.bias.assign(out, 0.0);
    params.layers.push_back(std::move(layer));
  }
  params.validate();
  return params;
}

Vec mlp_forward(const MlpParams& params, const Vec& input, MlpTape* tape) {
  params.validate();
  if (input.size() != params.input_dim())
    throw std::invalid_argument("mlp_forward: layer 0 expects input of length " +
                                std::to_string(params.input_dim()) + ", got " +
                                std::to_string(input.size()));
  if (tape) {
    tape->input = input;
    tape->pre_act.assign(params.layers.size(), Vec{});
    tape->post_act.assign(params.layers.size(), Vec{});
    tape->filled = true;
  }
  Vec current = input;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const MlpLayer& layer = params.layers[l];
    Vec z;
    matvec_into(layer.weight, current, z);
    for (std::size_t i = 0; i < z.size(); ++i) z[i] += layer.bias[i];
    if (tape) tape->pre_act[l] = z;
    if (layer.act == Activation::relu)
      for (double& x : z)
        if (x < 0.0) x = 0.0;
    if (tape) tape->post_act[l] = z;
    current = std::move(z);
  }
  return current;
}

MlpParams make_zero_grad(const MlpParams& params) {
  MlpParams grad;
  grad.layers.reserve(params.layers.size());
  for (const MlpLayer& layer : params.layers) {
    MlpLayer g;
    g.weight = Matrix(layer.weight.rows, layer.weight.cols, 0.0);
    g.bias.assign(layer.bias.size(), 0.0);
    g.act = layer.act;
    grad.layers.push_back(std::move(g));
  }
  return grad;
}

void zero_grad(MlpParams& grad) {
  for (MlpLayer& layer : grad.layers) {
    std::fill(layer.weight.data.begin(), layer.weight.data.end(), 0.0);
    std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
  }
}

Vec mlp_backward(const MlpParams& params, const MlpTape& tape, const Vec& output_gradient,
                 MlpParams& grad) {
  const std::size_t n_layers = params.layers.size();
  if (!tape.filled || tape.pre_act.size() != n_layers || tape.post_act.size() != n_layers)
    throw std::invalid_argument("mlp_backward: tape does not match network layer count");
  if (tape.input.size() != params.input_dim())
    throw std::invalid_argument("mlp_backward: tape input length does not match network");
  for (std::size_t l = 0; l < n_layers; ++l)
    if (tape.pre_act[l].size() != params.layers[l].weight.rows)
      throw std::invalid_argument("mlp_backward: tape entry for layer " + std::to_string(l) +
                                  " has wrong length");
  if (output_gradient.size() != params.output_dim())
    throw std::invalid_argument("mlp_backward: output gradient length " +
                                std::to_string(output_gradient.size()) + " does not match layer " +
                                std::to_string(n_layers - 1));
  if (grad.layers.size() != n_layers)
    throw std::invalid_argument("mlp_backward: gradient accumulator shape mismatch");

  Vec delta = output_gradient;  // d loss / d post_act of current layer
  for (std::size_t l = n_layers; l-- > 0;) {
    const MlpLayer& layer = params.layers[l];
    MlpLayer& g = grad.layers[l];
    if (layer.act == Activation::relu) {
      const Vec& z = tape.pre_act[l];
      for (std::size_t i = 0; i < delta.size(); ++i)
        if (z[i] <= 0.0) delta[i] = 0.0;
    }
    const Vec& layer_input = (l == 0) ? tape.input : tape.post_act[l - 1];
    // dW += delta outer layer_input, db += delta
    for (std::size_t i = 0; i < layer.weight.rows; ++i) {
      const double di = delta[i];
      g.bias[i] += di;
      if (di == 0.0) continue;
      double* grow = &g.weight.data[i * g.weight.cols];
      for (std::size_t j = 0; j < layer.weight.cols; ++j) grow[j] += di * layer_input[j];
    }
    Vec prev;
    matvec_transpose_into(layer.weight, delta, prev);
    delta = std::move(prev);
  }
  return delta;  // d loss / d input
}

}  // namespace pfe
