#include "pfe/flow.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>

#include "pfe/adam.hpp"
#include "pfe/rng.hpp"

namespace pfe {

void validate_flow_config(const FlowConfig& config) {
  if (!(config.sigma_min > 0.0) || config.sigma_min >= 1.0) {
    throw std::invalid_argument("validate_flow_config: sigma_min must lie in (0, 1), got " +
                                std::to_string(config.sigma_min));
  }
  if (config.ode_steps < 1) {
    throw std::invalid_argument("validate_flow_config: ode_steps must be at least 1");
  }
  if (config.time_frequencies < 1) {
    throw std::invalid_argument("validate_flow_config: time_frequencies must be at least 1");
  }
}

PathSample sample_ot_path(const Vec& x1, double t, const Vec& x0, double sigma_min) {
  if (!(t >= 0.0) || t >= 1.0) {
    throw std::invalid_argument("sample_ot_path: t must lie in [0, 1), got " +
                                std::to_string(t));
  }
  if (!(sigma_min > 0.0) || sigma_min > 1.0) {
    throw std::invalid_argument("sample_ot_path: sigma_min must lie in (0, 1], got " +
                                std::to_string(sigma_min));
  }
  if (x1.size() != x0.size()) {
    throw std::invalid_argument("sample_ot_path: x1 and x0 lengths differ");
  }
  const double shrink = 1.0 - (1.0 - sigma_min) * t;  // std of the path at time t
  PathSample sample;
  sample.t = t;
  sample.x.resize(x1.size());
  sample.target_field.resize(x1.size());
  for (std::size_t i = 0; i < x1.size(); ++i) {
    sample.x[i] = t * x1[i] + shrink * x0[i];
    sample.target_field[i] = (x1[i] - (1.0 - sigma_min) * sample.x[i]) / shrink;
  }
  return sample;
}

Vec time_features(double t, std::size_t frequencies) {
  Vec features;
  features.reserve(2 * frequencies);
  double freq = 2.0 * std::numbers::pi;
  for (std::size_t k = 0; k < frequencies; ++k) {
    features.push_back(std::sin(freq * t));
    features.push_back(std::cos(freq * t));
    freq *= 2.0;
  }
  return features;
}

VectorFieldNet make_vector_field_net(std::size_t data_dim, std::size_t cond_dim,
                                     std::size_t hidden_width, std::size_t time_frequencies,
                                     std::uint64_t seed) {
  VectorFieldNet net;
  net.data_dim = data_dim;
  net.cond_dim = cond_dim;
  net.time_frequencies = time_frequencies;
  const std::size_t input = data_dim + cond_dim + 2 * time_frequencies;
  net.params = make_mlp({input, hidden_width, hidden_width, hidden_width, data_dim},
                        Activation::relu, seed);
  return net;
}

namespace {

Vec assemble_input(const VectorFieldNet& net, const Vec& x, const Vec& condition, double t) {
  if (x.size() != net.data_dim) {
    throw std::invalid_argument("field_eval: state length " + std::to_string(x.size()) +
                                " does not match data_dim " + std::to_string(net.data_dim));
  }
  if (condition.size() != net.cond_dim) {
    throw std::invalid_argument("field_eval: condition length " +
                                std::to_string(condition.size()) + " does not match cond_dim " +
                                std::to_string(net.cond_dim));
  }
  Vec input;
  input.reserve(net.params.input_dim());
  input.insert(input.end(), x.begin(), x.end());
  input.insert(input.end(), condition.begin(), condition.end());
  const Vec tf = time_features(t, net.time_frequencies);
  input.insert(input.end(), tf.begin(), tf.end());
  return input;
}

}  // namespace

Vec field_eval(const VectorFieldNet& net, const Vec& x, const Vec& condition, double t,
               MlpTape* tape) {
  return mlp_forward(net.params, assemble_input(net, x, condition, t), tape);
}

double cfm_loss(const VectorFieldNet& net, const std::vector<Vec>& targets,
                const std::vector<Vec>& conditions, const std::vector<std::uint64_t>& item_seeds,
                double sigma_min, MlpParams* net_grad, std::vector<Vec>* condition_grads) {
  if (targets.empty()) {
    throw std::invalid_argument("cfm_loss: empty batch");
  }
  if (targets.size() != conditions.size() || targets.size() != item_seeds.size()) {
    throw std::invalid_argument("cfm_loss: targets, conditions and item_seeds must align");
  }
  const std::size_t n = targets.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  if (condition_grads != nullptr) {
    condition_grads->assign(n, Vec());
  }
  MlpTape tape;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(splitmix64(item_seeds[i]));
    const double t = rng.uniform();  // [0, 1)
    const Vec x0 = rng.gaussian_vec(targets[i].size());
    const PathSample path = sample_ot_path(targets[i], t, x0, sigma_min);
    const Vec v = mlp_forward(net.params, assemble_input(net, path.x, conditions[i], t),
                              net_grad != nullptr || condition_grads != nullptr ? &tape : nullptr);
    double item_loss = 0.0;
    Vec out_grad(v.size());
    for (std::size_t j = 0; j < v.size(); ++j) {
      const double diff = v[j] - path.target_field[j];
      item_loss += diff * diff;
      out_grad[j] = 2.0 * diff * inv_n;
    }
    if (!std::isfinite(item_loss)) {
      throw std::runtime_error("cfm_loss: non-finite loss at sample " + std::to_string(i));
    }
    total += item_loss;
    if (net_grad != nullptr || condition_grads != nullptr) {
      MlpParams scratch;  // discarded when only condition gradients are wanted
      MlpParams* sink = net_grad;
      if (sink == nullptr) {
        scratch = make_zero_grad(net.params);
        sink = &scratch;
      }
      Vec input_grad = mlp_backward(net.params, tape, out_grad, *sink);
      if (condition_grads != nullptr) {
        (*condition_grads)[i].assign(input_grad.begin() + static_cast<std::ptrdiff_t>(net.data_dim),
                                     input_grad.begin() +
                                         static_cast<std::ptrdiff_t>(net.data_dim + net.cond_dim));
      }
    }
  }
  return total * inv_n;
}

Vec integrate_field(const std::function<Vec(const Vec&, double)>& field, Vec x,
                    const FlowConfig& config) {
  validate_flow_config(config);
  const double dt = 1.0 / static_cast<double>(config.ode_steps);
  for (std::size_t step = 0; step < config.ode_steps; ++step) {
    const double t = static_cast<double>(step) * dt;
    const Vec v = field(x, t);
    if (v.size() != x.size()) {
      throw std::invalid_argument("integrate_field: field output length changed at step " +
                                  std::to_string(step));
    }
    axpy(dt, v, x);
    if (!all_finite(x)) {
      throw std::runtime_error("integrate_field: non-finite state at step " +
                               std::to_string(step));
    }
  }
  return x;
}

SpeakerEmbedding integrate(const VectorFieldNet& net, const Vec& condition, const Vec& x0,
                           const FlowConfig& config) {
  SpeakerEmbedding embedding;
  embedding.values = integrate_field(
      [&](const Vec& x, double t) { return field_eval(net, x, condition, t); }, x0, config);
  embedding.provenance = Provenance::flow_generated;
  return embedding;
}

FlowTrainResult train_flow(VectorFieldNet& net, const std::vector<Vec>& conditions,
                           const std::vector<Vec>& targets, const FlowConfig& flow_config,
                           const FlowTrainConfig& train_config) {
  validate_flow_config(flow_config);
  if (targets.empty() || targets.size() != conditions.size()) {
    throw std::invalid_argument("train_flow: need a non-empty condition/target pairing");
  }
  if (train_config.batch_size < 1 || train_config.epochs < 1) {
    throw std::invalid_argument("train_flow: batch_size and epochs must be positive");
  }
  const std::size_t n = targets.size();
  AdamConfig adam_cfg;
  adam_cfg.learning_rate = train_config.learning_rate;
  AdamState opt(tensor_sizes(net.params), adam_cfg);
  MlpParams grad = make_zero_grad(net.params);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  FlowTrainResult result;

  std::vector<Vec> batch_targets;
  std::vector<Vec> batch_conditions;
  std::vector<std::uint64_t> batch_seeds;
  for (std::size_t epoch = 0; epoch < train_config.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(train_config.seed, 41, epoch));
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < n; start += train_config.batch_size, ++batch_index) {
      const std::size_t stop = std::min(n, start + train_config.batch_size);
      batch_targets.clear();
      batch_conditions.clear();
      batch_seeds.clear();
      for (std::size_t k = start; k < stop; ++k) {
        const std::size_t item = order[k];
        batch_targets.push_back(targets[item]);
        batch_conditions.push_back(conditions[item]);
        batch_seeds.push_back(derive_seed(train_config.seed, 42 + epoch, item));
      }
      zero_grad(grad);
      double batch_loss;
      try {
        batch_loss = cfm_loss(net, batch_targets, batch_conditions, batch_seeds,
                              flow_config.sigma_min, &grad, nullptr);
      } catch (const std::runtime_error& e) {
        throw std::runtime_error("train_flow: aborted at epoch " + std::to_string(epoch) +
                                 " batch " + std::to_string(batch_index) + ": " + e.what());
      }
      epoch_loss += batch_loss * static_cast<double>(stop - start);
      opt.step(param_views(net.params), grad_views(grad));
    }
    result.epoch_losses.push_back(epoch_loss / static_cast<double>(n));
  }
  return result;
}

}  // namespace pfe
