#pragma once

#include <cstdint>
#include <vector>

#include "pfe/embedding.hpp"
#include "pfe/encoder.hpp"
#include "pfe/matrix.hpp"
#include "pfe/mlp.hpp"
#include "pfe/schema.hpp"

namespace pfe {

struct DiscWarnings {
  std::size_t zero_norm_predictions = 0;
};

// Combined regression objective: |predicted - target|^2 + (1 - cos(predicted,
// target)). A zero-norm prediction makes the cosine undefined; that case
// scores the cosine term as 1 (similarity zero), contributes no cosine
// gradient, and bumps the warning counter.
double disc_loss(const Vec& predicted, const Vec& target, DiscWarnings* warnings = nullptr);

// Same value; also accumulates d(loss)/d(predicted) into gradient_out.
double disc_loss_grad(const Vec& predicted, const Vec& target, Vec& gradient_out,
                      DiscWarnings* warnings = nullptr);

// Four affine layers, ReLU between them, mapping a conditioning vector to an
// embedding.
struct ProjectionNet {
  MlpParams params;
};

ProjectionNet make_projection_net(std::size_t cond_dim, std::size_t embedding_dim,
                                  std::size_t hidden_width, std::uint64_t seed);

struct DiscTrainConfig {
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  std::size_t epochs = 200;
  double weight_decay = 0.0;  // decoupled decay; counters overfit to draw noise
  bool use_lora = true;       // false: adapter is never read or written
  bool freeze_adapter = false;  // true: adapter used forward but not trained
  std::uint64_t seed = 1;
};

struct DiscTrainResult {
  Vec epoch_losses;
  DiscWarnings warnings;
};

// Minibatch Adam over the projection net, and over the adapter when
// use_lora && !freeze_adapter. Prompts and targets pair up by index. Throws
// on a non-finite batch loss, naming the epoch and batch.
DiscTrainResult train_discriminative(const FrozenEncoder& encoder, LoraAdapter& adapter,
                                     ProjectionNet& net, const std::vector<Prompt>& prompts,
                                     const std::vector<Vec>& targets,
                                     const DiscTrainConfig& config);

// Deterministic embedding for one prompt through the adapted encoder and the
// projection net.
SpeakerEmbedding predict(const FrozenEncoder& encoder, const LoraAdapter& adapter,
                         const ProjectionNet& net, const Prompt& prompt);

}  // namespace pfe
