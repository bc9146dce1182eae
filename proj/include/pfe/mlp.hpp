#pragma once

// Small feed-forward networks with an explicit activation tape and manual
// reverse-mode gradients. The tape recorded by mlp_forward is replayed by
// mlp_backward to produce exact parameter and input gradients.

#include <cstdint>
#include <string>
#include <vector>

#include "pfe/matrix.hpp"

namespace pfe {

enum class Activation { identity, relu };

Activation parse_activation(const std::string& name);
std::string activation_name(Activation a);

struct MlpLayer {
  Matrix weight;  // out_dim x in_dim
  Vec bias;       // out_dim
  Activation act = Activation::identity;
};

struct MlpParams {
  std::vector<MlpLayer> layers;

  std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().weight.cols; }
  std::size_t output_dim() const { return layers.empty() ? 0 : layers.back().weight.rows; }

  /// Throws if layer dimensions do not chain or the final activation is not
  /// identity.
  void validate() const;
};

struct MlpTape {
  Vec input;
  std::vector<Vec> pre_act;   // z_l = W_l a_{l-1} + b_l
  std::vector<Vec> post_act;  // a_l = act(z_l)
  bool filled = false;
};

/// Builds a network from a dimension chain, e.g. {8, 32, 32, 4} gives three
/// affine layers. Hidden layers get hidden_act, the final layer is identity.
/// Weights use scaled Gaussian init (He-style for relu), biases start at zero.
MlpParams make_mlp(const std::vector<std::size_t>& dims, Activation hidden_act,
                   std::uint64_t seed);

/// Forward pass; fills tape (when given) with everything backward needs.
Vec mlp_forward(const MlpParams& params, const Vec& input, MlpTape* tape = nullptr);

MlpParams make_zero_grad(const MlpParams& params);
void zero_grad(MlpParams& grad);

/// Reverse-mode replay: accumulates dLoss/dparams into grad (same shape as
/// params, caller zeroes) and returns dLoss/dinput. Throws if the tape does
/// not match the network.
Vec mlp_backward(const MlpParams& params, const MlpTape& tape, const Vec& output_gradient,
                 MlpParams& grad);

}  // namespace pfe
