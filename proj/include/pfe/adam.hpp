#pragma once

// Adam optimizer over flat parameter views. Moment buffers mirror the
// concatenated parameter layout; networks and adapters expose their tensors
// through param_views so one optimizer instance can drive any mix of them.

#include <cstddef>
#include <vector>

#include "pfe/mlp.hpp"

namespace pfe {

struct ParamView {
  double* data = nullptr;
  std::size_t size = 0;
};

struct ConstParamView {
  const double* data = nullptr;
  std::size_t size = 0;

  ConstParamView() = default;
  ConstParamView(const double* d, std::size_t s) : data(d), size(s) {}
  ConstParamView(const ParamView& v) : data(v.data), size(v.size) {}
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;  // decoupled: p -= lr * weight_decay * p each step
};

class AdamState {
 public:
  AdamState() = default;
  AdamState(const std::vector<std::size_t>& tensor_sizes, AdamConfig cfg);

  /// One bias-corrected Adam update in place. Throws on shape mismatch or
  /// non-finite gradient entries (training divergence signal).
  void step(const std::vector<ParamView>& params, const std::vector<ConstParamView>& grads);

  long long step_count() const { return step_count_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  std::vector<std::size_t> tensor_sizes_;
  Vec first_moment_;
  Vec second_moment_;
  long long step_count_ = 0;
};

std::vector<ParamView> param_views(MlpParams& params);
std::vector<ConstParamView> grad_views(const MlpParams& grad);
std::vector<std::size_t> tensor_sizes(const MlpParams& params);

}  // namespace pfe
