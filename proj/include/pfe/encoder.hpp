#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "pfe/adam.hpp"
#include "pfe/matrix.hpp"
#include "pfe/schema.hpp"

namespace pfe {

// A deterministic stand-in for a pretrained text encoder. Phrases that belong
// to a schema question embed as the question's stem vector plus the answer
// weight times an intensity axis, mirroring how text encoders place graded
// wordings along a shared direction; any other phrase maps to an independent
// random vector. Phrase features are averaged and a frozen affine map
// produces the conditioning vector. frozen_rank caps the rank of the frozen
// map so that some answer directions are invisible until the low-rank adapter
// below re-opens them.
struct EncoderConfig {
  std::uint64_t seed = 7777;
  std::size_t phrase_dim = 256;
  std::size_t cond_dim = 64;
  std::size_t frozen_rank = 18;  // 0 means full rank
};

class FrozenEncoder {
 public:
  explicit FrozenEncoder(EncoderConfig config, const ImpressionSchema* warm = nullptr);

  const EncoderConfig& config() const { return config_; }
  const Matrix& weight() const { return weight_; }
  const Vec& bias() const { return bias_; }

  // Deterministic feature vector for one phrase.
  Vec phrase_vector(const std::string& phrase) const;
  // Mean of phrase vectors; the zero vector for an empty prompt.
  Vec mean_features(const Prompt& prompt) const;
  // Frozen conditioning vector: weight * mean_features + bias.
  Vec encode(const Prompt& prompt) const;

 private:
  EncoderConfig config_;
  Matrix weight_;  // cond_dim x phrase_dim
  Vec bias_;       // cond_dim
  std::unordered_map<std::string, Vec> cache_;
};

// Low-rank additive correction: delta W = (alpha / rank) * B * A with
// A rank x phrase_dim and B cond_dim x rank. B starts at zero so a fresh
// adapter leaves the encoder output untouched.
struct LoraAdapter {
  Matrix a;
  Matrix b;
  std::size_t rank = 0;
  double alpha = 0.0;
};

LoraAdapter make_lora_adapter(std::size_t phrase_dim, std::size_t cond_dim, std::size_t rank,
                              double alpha, std::uint64_t seed);

Matrix lora_delta_weight(const LoraAdapter& adapter);

// encode() plus the adapter correction. If mean_out is non-null the averaged
// phrase features are stored there for use in the backward pass.
Vec lora_encode(const FrozenEncoder& encoder, const LoraAdapter& adapter, const Prompt& prompt,
                Vec* mean_out = nullptr);

struct LoraGrad {
  Matrix a;
  Matrix b;
};

LoraGrad make_zero_grad(const LoraAdapter& adapter);
void zero_grad(LoraGrad& grad);

// Accumulates d(loss)/dA and d(loss)/dB into grad given the averaged phrase
// features of the prompt and the gradient of the loss in the output.
void lora_backward(const LoraAdapter& adapter, const Vec& mean_features,
                   const Vec& output_gradient, LoraGrad& grad);

std::vector<ParamView> param_views(LoraAdapter& adapter);
std::vector<ConstParamView> grad_views(const LoraGrad& grad);
std::vector<std::size_t> tensor_sizes(const LoraAdapter& adapter);

}  // namespace pfe
