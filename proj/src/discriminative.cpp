#include "pfe/discriminative.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "pfe/adam.hpp"
#include "pfe/rng.hpp"

namespace pfe {

namespace {

void check_pair(const Vec& predicted, const Vec& target) {
  if (predicted.empty() || target.empty()) {
    throw std::invalid_argument("disc_loss: zero-length embedding");
  }
  if (predicted.size() != target.size()) {
    throw std::invalid_argument("disc_loss: predicted length " +
                                std::to_string(predicted.size()) + " vs target length " +
                                std::to_string(target.size()));
  }
  if (norm(target) == 0.0) {
    throw std::invalid_argument("disc_loss: target has zero norm");
  }
}

}  // namespace

double disc_loss(const Vec& predicted, const Vec& target, DiscWarnings* warnings) {
  check_pair(predicted, target);
  const double l2 = squared_distance(predicted, target);
  const double np = norm(predicted);
  double cosine_term;
  if (np == 0.0) {
    cosine_term = 1.0;
    if (warnings != nullptr) ++warnings->zero_norm_predictions;
  } else {
    cosine_term = 1.0 - dot(predicted, target) / (np * norm(target));
  }
  return l2 + cosine_term;
}

double disc_loss_grad(const Vec& predicted, const Vec& target, Vec& gradient_out,
                      DiscWarnings* warnings) {
  check_pair(predicted, target);
  if (gradient_out.size() != predicted.size()) {
    throw std::invalid_argument("disc_loss_grad: gradient buffer has wrong length");
  }
  const double l2 = squared_distance(predicted, target);
  const double np = norm(predicted);
  const double nt = norm(target);
  double cosine_term;
  if (np == 0.0) {
    // Cosine undefined at the origin; only the L2 part contributes gradient.
    cosine_term = 1.0;
    if (warnings != nullptr) ++warnings->zero_norm_predictions;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
      gradient_out[i] += 2.0 * (predicted[i] - target[i]);
    }
  } else {
    const double cosine = dot(predicted, target) / (np * nt);
    cosine_term = 1.0 - cosine;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
      const double dcos = target[i] / (np * nt) - cosine * predicted[i] / (np * np);
      gradient_out[i] += 2.0 * (predicted[i] - target[i]) - dcos;
    }
  }
  return l2 + cosine_term;
}

ProjectionNet make_projection_net(std::size_t cond_dim, std::size_t embedding_dim,
                                  std::size_t hidden_width, std::uint64_t seed) {
  ProjectionNet net;
  net.params = make_mlp({cond_dim, hidden_width, hidden_width, hidden_width, embedding_dim},
                        Activation::relu, seed);
  return net;
}

DiscTrainResult train_discriminative(const FrozenEncoder& encoder, LoraAdapter& adapter,
                                     ProjectionNet& net, const std::vector<Prompt>& prompts,
                                     const std::vector<Vec>& targets,
                                     const DiscTrainConfig& config) {
  if (prompts.empty() || prompts.size() != targets.size()) {
    throw std::invalid_argument("train_discriminative: need a non-empty prompt/target pairing");
  }
  if (config.batch_size < 1 || config.epochs < 1) {
    throw std::invalid_argument("train_discriminative: batch_size and epochs must be positive");
  }
  const std::size_t n = prompts.size();
  const bool train_adapter = config.use_lora && !config.freeze_adapter;

  // Phrase featurization never changes during training, so cache it. The
  // frozen affine part is also constant; only the adapter term moves.
  std::vector<Vec> means(n);
  std::vector<Vec> frozen_part(n);
  for (std::size_t i = 0; i < n; ++i) {
    means[i] = encoder.mean_features(prompts[i]);
    frozen_part[i] = matvec(encoder.weight(), means[i]);
    for (std::size_t j = 0; j < frozen_part[i].size(); ++j) {
      frozen_part[i][j] += encoder.bias()[j];
    }
  }

  auto sizes = tensor_sizes(net.params);
  if (train_adapter) {
    for (std::size_t s : tensor_sizes(adapter)) sizes.push_back(s);
  }
  AdamConfig adam_cfg;
  adam_cfg.learning_rate = config.learning_rate;
  adam_cfg.weight_decay = config.weight_decay;
  AdamState opt(sizes, adam_cfg);

  MlpParams net_grad = make_zero_grad(net.params);
  LoraGrad adapter_grad = make_zero_grad(adapter);
  const double lora_scale = adapter.alpha / static_cast<double>(adapter.rank);

  DiscTrainResult result;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  MlpTape tape;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(config.seed, 31, epoch));
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < n; start += config.batch_size, ++batch_index) {
      const std::size_t stop = std::min(n, start + config.batch_size);
      const double inv_batch = 1.0 / static_cast<double>(stop - start);
      zero_grad(net_grad);
      if (train_adapter) zero_grad(adapter_grad);
      double batch_loss = 0.0;
      for (std::size_t k = start; k < stop; ++k) {
        const std::size_t item = order[k];
        Vec cond = frozen_part[item];
        if (config.use_lora) {
          const Vec am = matvec(adapter.a, means[item]);
          const Vec bam = matvec(adapter.b, am);
          axpy(lora_scale, bam, cond);
        }
        const Vec out = mlp_forward(net.params, cond, &tape);
        Vec out_grad(out.size(), 0.0);
        batch_loss += disc_loss_grad(out, targets[item], out_grad, &result.warnings);
        for (auto& g : out_grad) g *= inv_batch;
        Vec cond_grad = mlp_backward(net.params, tape, out_grad, net_grad);
        if (train_adapter) {
          lora_backward(adapter, means[item], cond_grad, adapter_grad);
        }
      }
      batch_loss *= inv_batch;
      if (!std::isfinite(batch_loss)) {
        throw std::runtime_error("train_discriminative: non-finite loss at epoch " +
                                 std::to_string(epoch) + " batch " +
                                 std::to_string(batch_index));
      }
      epoch_loss += batch_loss * static_cast<double>(stop - start);

      auto params = param_views(net.params);
      auto grads = grad_views(net_grad);
      if (train_adapter) {
        for (auto v : param_views(adapter)) params.push_back(v);
        for (auto v : grad_views(adapter_grad)) grads.push_back(v);
      }
      opt.step(params, grads);
    }
    result.epoch_losses.push_back(epoch_loss / static_cast<double>(n));
  }
  return result;
}

SpeakerEmbedding predict(const FrozenEncoder& encoder, const LoraAdapter& adapter,
                         const ProjectionNet& net, const Prompt& prompt) {
  const Vec cond = lora_encode(encoder, adapter, prompt);
  SpeakerEmbedding embedding;
  embedding.values = mlp_forward(net.params, cond, nullptr);
  embedding.provenance = Provenance::discriminative;
  return embedding;
}

}  // namespace pfe
