#include "pfe/adam.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace pfe {

AdamState::AdamState(const std::vector<std::size_t>& tensor_sizes, AdamConfig cfg)
    : cfg_(cfg), tensor_sizes_(tensor_sizes) {
  std::size_t total = 0;
  for (std::size_t s : tensor_sizes_) total += s;
  first_moment_.assign(total, 0.0);
  second_moment_.assign(total, 0.0);
}

void AdamState::step(const std::vector<ParamView>& params,
                     const std::vector<ConstParamView>& grads) {
  if (params.size() != tensor_sizes_.size() || grads.size() != tensor_sizes_.size())
    throw std::invalid_argument("adam_step: tensor count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i)
    if (params[i].size != tensor_sizes_[i] || grads[i].size != tensor_sizes_[i])
      throw std::invalid_argument("adam_step: tensor " + std::to_string(i) + " shape mismatch");
  for (std::size_t i = 0; i < grads.size(); ++i)
    for (std::size_t k = 0; k < grads[i].size; ++k)
      if (!std::isfinite(grads[i].data[k]))
        throw std::runtime_error("adam_step: non-finite gradient in tensor " + std::to_string(i));

  ++step_count_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));
  std::size_t offset = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    double* p = params[i].data;
    const double* g = grads[i].data;
    double* m = &first_moment_[offset];
    double* v = &second_moment_[offset];
    for (std::size_t k = 0; k < params[i].size; ++k) {
      m[k] = cfg_.beta1 * m[k] + (1.0 - cfg_.beta1) * g[k];
      v[k] = cfg_.beta2 * v[k] + (1.0 - cfg_.beta2) * g[k] * g[k];
      const double m_hat = m[k] / bc1;
      const double v_hat = v[k] / bc2;
      p[k] -= cfg_.learning_rate *
              (m_hat / (std::sqrt(v_hat) + cfg_.epsilon) + cfg_.weight_decay * p[k]);
    }
    offset += params[i].size;
  }
}

std::vector<ParamView> param_views(MlpParams& params) {
  std::vector<ParamView> views;
  for (MlpLayer& layer : params.layers) {
    views.push_back({layer.weight.data.data(), layer.weight.data.size()});
    views.push_back({layer.bias.data(), layer.bias.size()});
  }
  return views;
}

std::vector<ConstParamView> grad_views(const MlpParams& grad) {
  std::vector<ConstParamView> views;
  for (const MlpLayer& layer : grad.layers) {
    views.emplace_back(layer.weight.data.data(), layer.weight.data.size());
    views.emplace_back(layer.bias.data(), layer.bias.size());
  }
  return views;
}

std::vector<std::size_t> tensor_sizes(const MlpParams& params) {
  std::vector<std::size_t> sizes;
  for (const MlpLayer& layer : params.layers) {
    sizes.push_back(layer.weight.data.size());
    sizes.push_back(layer.bias.size());
  }
  return sizes;
}

}  // namespace pfe
