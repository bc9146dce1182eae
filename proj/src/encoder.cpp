#include "pfe/encoder.hpp"

#include <cmath>
#include <stdexcept>

#include "pfe/rng.hpp"

namespace pfe {

namespace {

// Distinct seed streams for the three kinds of derived feature vectors.
constexpr std::uint64_t kPhraseStream = 0x9e3779b97f4a7c15ULL;
constexpr std::uint64_t kStemStream = 0xa0761d6478bd642fULL;
constexpr std::uint64_t kAxisStream = 0xe7037ed1a0b428dbULL;

Vec derive_phrase_vector(const EncoderConfig& config, const std::string& phrase) {
  Rng rng(derive_seed(config.seed, fnv1a64(phrase), kPhraseStream));
  return rng.gaussian_vec(config.phrase_dim);
}

Vec derive_question_vector(const EncoderConfig& config, const std::string& question_id,
                           std::uint64_t stream) {
  Rng rng(derive_seed(config.seed, fnv1a64(question_id), stream));
  return rng.gaussian_vec(config.phrase_dim);
}

// Scales chosen so that a full-schema prompt yields roughly unit-variance
// conditioning coordinates regardless of the rank cap.
Matrix derive_frozen_weight(const EncoderConfig& config) {
  const auto h = config.phrase_dim;
  const auto d = config.cond_dim;
  const double phrase_count = static_cast<double>(ImpressionSchema::kQuestionCount);
  Rng rng(derive_seed(config.seed, 1));
  std::size_t rank = config.frozen_rank;
  if (rank == 0 || rank >= std::min(h, d)) {
    Matrix w(d, h);
    const double scale = std::sqrt(phrase_count / static_cast<double>(h));
    for (auto& x : w.data) x = scale * rng.gaussian();
    return w;
  }
  Matrix u(d, rank);
  Matrix v(rank, h);
  const double u_scale = std::sqrt(phrase_count / static_cast<double>(rank));
  const double v_scale = std::sqrt(1.0 / static_cast<double>(h));
  for (auto& x : u.data) x = u_scale * rng.gaussian();
  for (auto& x : v.data) x = v_scale * rng.gaussian();
  return matmul(u, v);
}

Vec derive_frozen_bias(const EncoderConfig& config) {
  Rng rng(derive_seed(config.seed, 2));
  Vec b(config.cond_dim);
  for (auto& x : b) x = 0.1 * rng.gaussian();
  return b;
}

}  // namespace

FrozenEncoder::FrozenEncoder(EncoderConfig config, const ImpressionSchema* warm)
    : config_(config),
      weight_(derive_frozen_weight(config)),
      bias_(derive_frozen_bias(config)) {
  if (config_.phrase_dim == 0 || config_.cond_dim == 0) {
    throw std::invalid_argument("FrozenEncoder: phrase_dim and cond_dim must be positive");
  }
  if (warm != nullptr) {
    // Schema phrases embed along graded directions: every phrase of a question
    // shares the question's stem vector plus its answer weight times the
    // question's intensity axis, the way real text encoders place "somewhat
    // friendly" between "ordinary" and "very friendly". Text outside the
    // schema falls back to the independent per-phrase hash in phrase_vector().
    for (const auto& q : warm->questions()) {
      const Vec stem = derive_question_vector(config_, q.id, kStemStream);
      const Vec axis = derive_question_vector(config_, q.id, kAxisStream);
      for (const auto& [value, phrase] : q.phrases) {
        const double w = answer_weight(q, value);
        Vec v = stem;
        for (std::size_t i = 0; i < v.size(); ++i) v[i] += w * axis[i];
        cache_.emplace(phrase, std::move(v));
      }
    }
  }
}

Vec FrozenEncoder::phrase_vector(const std::string& phrase) const {
  auto it = cache_.find(phrase);
  if (it != cache_.end()) return it->second;
  return derive_phrase_vector(config_, phrase);
}

Vec FrozenEncoder::mean_features(const Prompt& prompt) const {
  Vec mean(config_.phrase_dim, 0.0);
  if (prompt.phrases.empty()) return mean;
  for (const auto& phrase : prompt.phrases) {
    const Vec v = phrase_vector(phrase);
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += v[i];
  }
  const double inv = 1.0 / static_cast<double>(prompt.phrases.size());
  for (auto& x : mean) x *= inv;
  return mean;
}

Vec FrozenEncoder::encode(const Prompt& prompt) const {
  Vec out = matvec(weight_, mean_features(prompt));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bias_[i];
  return out;
}

LoraAdapter make_lora_adapter(std::size_t phrase_dim, std::size_t cond_dim, std::size_t rank,
                              double alpha, std::uint64_t seed) {
  if (rank == 0) {
    throw std::invalid_argument("make_lora_adapter: rank must be positive");
  }
  LoraAdapter adapter;
  adapter.rank = rank;
  adapter.alpha = alpha;
  adapter.a = Matrix(rank, phrase_dim);
  adapter.b = Matrix(cond_dim, rank);  // zero-filled: fresh adapters are inert
  Rng rng(derive_seed(seed, 3));
  const double a_scale = std::sqrt(1.0 / static_cast<double>(phrase_dim));
  for (auto& x : adapter.a.data) x = a_scale * rng.gaussian();
  return adapter;
}

Matrix lora_delta_weight(const LoraAdapter& adapter) {
  Matrix delta = matmul(adapter.b, adapter.a);
  const double scale = adapter.alpha / static_cast<double>(adapter.rank);
  for (auto& x : delta.data) x *= scale;
  return delta;
}

Vec lora_encode(const FrozenEncoder& encoder, const LoraAdapter& adapter, const Prompt& prompt,
                Vec* mean_out) {
  if (adapter.a.cols != encoder.config().phrase_dim ||
      adapter.b.rows != encoder.config().cond_dim) {
    throw std::invalid_argument("lora_encode: adapter shape does not match encoder");
  }
  const Vec mean = encoder.mean_features(prompt);
  Vec out = matvec(encoder.weight(), mean);
  const Vec am = matvec(adapter.a, mean);
  const Vec bam = matvec(adapter.b, am);
  const double scale = adapter.alpha / static_cast<double>(adapter.rank);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] += encoder.bias()[i] + scale * bam[i];
  }
  if (mean_out != nullptr) *mean_out = mean;
  return out;
}

LoraGrad make_zero_grad(const LoraAdapter& adapter) {
  LoraGrad grad;
  grad.a = Matrix(adapter.a.rows, adapter.a.cols);
  grad.b = Matrix(adapter.b.rows, adapter.b.cols);
  return grad;
}

void zero_grad(LoraGrad& grad) {
  std::fill(grad.a.data.begin(), grad.a.data.end(), 0.0);
  std::fill(grad.b.data.begin(), grad.b.data.end(), 0.0);
}

void lora_backward(const LoraAdapter& adapter, const Vec& mean_features,
                   const Vec& output_gradient, LoraGrad& grad) {
  if (mean_features.size() != adapter.a.cols) {
    throw std::invalid_argument("lora_backward: mean_features length does not match adapter");
  }
  if (output_gradient.size() != adapter.b.rows) {
    throw std::invalid_argument("lora_backward: output_gradient length does not match adapter");
  }
  if (grad.a.rows != adapter.a.rows || grad.a.cols != adapter.a.cols ||
      grad.b.rows != adapter.b.rows || grad.b.cols != adapter.b.cols) {
    throw std::invalid_argument("lora_backward: gradient shape does not match adapter");
  }
  const double scale = adapter.alpha / static_cast<double>(adapter.rank);
  const Vec am = matvec(adapter.a, mean_features);            // rank
  Vec btg(adapter.rank, 0.0);                                 // B^T g
  matvec_transpose_into(adapter.b, output_gradient, btg);
  for (std::size_t i = 0; i < adapter.b.rows; ++i) {
    for (std::size_t j = 0; j < adapter.rank; ++j) {
      grad.b(i, j) += scale * output_gradient[i] * am[j];
    }
  }
  for (std::size_t i = 0; i < adapter.rank; ++i) {
    for (std::size_t j = 0; j < adapter.a.cols; ++j) {
      grad.a(i, j) += scale * btg[i] * mean_features[j];
    }
  }
}

std::vector<ParamView> param_views(LoraAdapter& adapter) {
  return {{adapter.a.data.data(), adapter.a.data.size()},
          {adapter.b.data.data(), adapter.b.data.size()}};
}

std::vector<ConstParamView> grad_views(const LoraGrad& grad) {
  return {{grad.a.data.data(), grad.a.data.size()},
          {grad.b.data.data(), grad.b.data.size()}};
}

std::vector<std::size_t> tensor_sizes(const LoraAdapter& adapter) {
  return {adapter.a.data.size(), adapter.b.data.size()};
}

}  // namespace pfe
