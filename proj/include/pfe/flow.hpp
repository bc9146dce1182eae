#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "pfe/embedding.hpp"
#include "pfe/matrix.hpp"
#include "pfe/mlp.hpp"

namespace pfe {

struct FlowConfig {
  double sigma_min = 1e-4;
  std::size_t ode_steps = 32;
  std::size_t time_frequencies = 8;  // sin and cos per frequency
};

void validate_flow_config(const FlowConfig& config);

// One training point on the optimal-transport probability path:
//   x = t*x1 + (1 - (1 - sigma_min)*t)*x0,
//   target_field = (x1 - (1 - sigma_min)*x) / (1 - (1 - sigma_min)*t).
// Along this path the target field is constant in t, which is what makes
// Euler integration of the exact field land on x1 + sigma_min*x0.
struct PathSample {
  double t = 0.0;
  Vec x;
  Vec target_field;
  Vec condition;  // filled by the batching layer, not by sample_ot_path
};

PathSample sample_ot_path(const Vec& x1, double t, const Vec& x0, double sigma_min);

// Sinusoidal features: sin and cos of 2*pi*2^k*t for k = 0..frequencies-1.
Vec time_features(double t, std::size_t frequencies);

// Regression network for the vector field. Input is concat(x, condition,
// time features); output has the data dimension.
struct VectorFieldNet {
  MlpParams params;
  std::size_t data_dim = 0;
  std::size_t cond_dim = 0;
  std::size_t time_frequencies = 0;
};

VectorFieldNet make_vector_field_net(std::size_t data_dim, std::size_t cond_dim,
                                     std::size_t hidden_width, std::size_t time_frequencies,
                                     std::uint64_t seed);

Vec field_eval(const VectorFieldNet& net, const Vec& x, const Vec& condition, double t,
               MlpTape* tape = nullptr);

// Mean CFM regression loss over a batch. Each item draws its own t and x0
// from its entry in item_seeds, so the loss does not depend on batch order.
// Gradients w.r.t. the network accumulate into net_grad when given; gradients
// w.r.t. each condition vector are written to condition_grads when given.
double cfm_loss(const VectorFieldNet& net, const std::vector<Vec>& targets,
                const std::vector<Vec>& conditions, const std::vector<std::uint64_t>& item_seeds,
                double sigma_min, MlpParams* net_grad = nullptr,
                std::vector<Vec>* condition_grads = nullptr);

// Explicit Euler from t=0 to t=1 on an arbitrary field, exposed so tests can
// integrate closed-form fields the network cannot represent.
Vec integrate_field(const std::function<Vec(const Vec&, double)>& field, Vec x,
                    const FlowConfig& config);

SpeakerEmbedding integrate(const VectorFieldNet& net, const Vec& condition, const Vec& x0,
                           const FlowConfig& config);

struct FlowTrainConfig {
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  std::size_t epochs = 200;
  std::uint64_t seed = 1;
};

struct FlowTrainResult {
  Vec epoch_losses;
};

// Adam on cfm_loss over fixed (condition, target) pairs. Joint training of
// upstream encoders happens in the pipeline layer via condition_grads.
FlowTrainResult train_flow(VectorFieldNet& net, const std::vector<Vec>& conditions,
                           const std::vector<Vec>& targets, const FlowConfig& flow_config,
                           const FlowTrainConfig& train_config);

}  // namespace pfe
