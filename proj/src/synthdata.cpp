#include "pfe/synthdata.hpp"

#include <cmath>
#include <stdexcept>

#include "pfe/rng.hpp"

namespace pfe {

namespace {

constexpr std::uint64_t kEffectsStream = 21;
constexpr std::uint64_t kOffsetsStream = 22;
constexpr std::uint64_t kRecordStream = 23;
constexpr std::uint64_t kEmbeddingStream = 24;

}  // namespace

SynthWorld::SynthWorld(SynthWorldConfig config, const ImpressionSchema& schema)
    : config_(config), schema_(&schema) {
  if (config_.embedding_dim < 2) {
    throw std::invalid_argument("SynthWorld: embedding_dim must be at least 2");
  }
  if (config_.modes_per_condition < 1) {
    throw std::invalid_argument("SynthWorld: modes_per_condition must be at least 1");
  }
  if (config_.noise_scale < 0.0 || config_.mode_separation < 0.0) {
    throw std::invalid_argument("SynthWorld: noise_scale and mode_separation must be >= 0");
  }

  const std::size_t q = schema.questions().size();
  const std::size_t d = config_.embedding_dim;
  effects_ = Matrix(q, d);
  Rng effect_rng(derive_seed(config_.seed, kEffectsStream));
  for (std::size_t row = 0; row < q; ++row) {
    Vec dir = effect_rng.gaussian_vec(d);
    const double len = norm(dir);
    for (std::size_t j = 0; j < d; ++j) {
      effects_(row, j) = config_.effect_scale * dir[j] / len;
    }
  }

  const std::size_t m = config_.modes_per_condition;
  Rng offset_rng(derive_seed(config_.seed, kOffsetsStream));
  std::vector<Vec> raw;
  raw.reserve(m);
  Vec mean(d, 0.0);
  for (std::size_t k = 0; k < m; ++k) {
    raw.push_back(offset_rng.gaussian_vec(d));
    axpy(1.0, raw.back(), mean);
  }
  for (auto& x : mean) x /= static_cast<double>(m);
  double mean_norm = 0.0;
  for (auto& v : raw) {
    for (std::size_t j = 0; j < d; ++j) v[j] -= mean[j];
    mean_norm += norm(v);
  }
  mean_norm /= static_cast<double>(m);
  const double target = 0.5 * config_.mode_separation;
  const double scale = mean_norm > 0.0 ? target / mean_norm : 0.0;
  for (auto& v : raw) {
    for (auto& x : v) x *= scale;
  }
  mode_offsets_ = std::move(raw);
}

Vec SynthWorld::base_embedding(const ImpressionRecord& record) const {
  validate_record(*schema_, record);
  Vec base(config_.embedding_dim, 0.0);
  for (const auto& q : schema_->questions()) {
    auto it = record.answers.find(q.id);
    if (it == record.answers.end()) continue;
    const double w = answer_weight(q, it->second);
    const std::size_t row = schema_->index_of(q.id);
    for (std::size_t j = 0; j < base.size(); ++j) {
      base[j] += w * effects_(row, j);
    }
  }
  return base;
}

Vec SynthWorld::mode_mean(const ImpressionRecord& record, std::size_t mode) const {
  if (mode >= mode_offsets_.size()) {
    throw std::out_of_range("SynthWorld::mode_mean: mode " + std::to_string(mode) +
                            " out of range, world has " + std::to_string(mode_offsets_.size()) +
                            " modes");
  }
  Vec mean = base_embedding(record);
  axpy(1.0, mode_offsets_[mode], mean);
  return mean;
}

SpeakerEmbedding SynthWorld::sample_embedding(const ImpressionRecord& record,
                                              std::uint64_t draw_seed) const {
  Rng rng(derive_seed(config_.seed, kEmbeddingStream, draw_seed));
  const std::size_t mode = rng.index(config_.modes_per_condition);
  Vec values = mode_mean(record, mode);
  for (auto& x : values) x += config_.noise_scale * rng.gaussian();
  return SpeakerEmbedding{std::move(values), Provenance::ground_truth};
}

ImpressionRecord SynthWorld::sample_record(const std::string& speaker_id,
                                           std::uint64_t draw_seed) const {
  Rng rng(derive_seed(config_.seed, kRecordStream, draw_seed));
  ImpressionRecord record;
  record.speaker_id = speaker_id;
  for (const auto& q : schema_->questions()) {
    const int span = q.max_value() - q.min_value() + 1;
    record.answers[q.id] =
        q.min_value() + static_cast<int>(rng.index(static_cast<std::size_t>(span)));
  }
  return record;
}

std::string split_name(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::heldout: return "heldout";
    case Split::eval: return "eval";
  }
  throw std::logic_error("split_name: unreachable");
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "heldout") return Split::heldout;
  if (name == "eval") return Split::eval;
  throw std::invalid_argument("parse_split: unknown split '" + name + "'");
}

std::vector<const CorpusEntry*> SynthCorpus::split_entries(Split split) const {
  std::vector<const CorpusEntry*> out;
  for (const auto& e : entries) {
    if (e.split == split) out.push_back(&e);
  }
  return out;
}

std::vector<Vec> SynthCorpus::split_embeddings(Split split) const {
  std::vector<Vec> out;
  for (const auto& e : entries) {
    if (e.split == split) out.push_back(e.embedding.values);
  }
  return out;
}

SynthCorpus generate_corpus(const SynthWorld& world, const SplitSizes& sizes) {
  if (sizes.train < 1 || sizes.heldout < 1 || sizes.eval < 1) {
    throw std::invalid_argument("generate_corpus: every split needs at least one speaker");
  }
  SynthCorpus corpus;
  corpus.entries.reserve(sizes.train + sizes.heldout + sizes.eval);
  std::uint64_t counter = 0;
  auto add_split = [&](Split split, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) {
      char id[32];
      std::snprintf(id, sizeof(id), "%s_%04zu", split_name(split).c_str(), i);
      CorpusEntry entry;
      entry.split = split;
      entry.record = world.sample_record(id, counter);
      entry.embedding = world.sample_embedding(entry.record, counter);
      corpus.entries.push_back(std::move(entry));
      ++counter;
    }
  };
  add_split(Split::train, sizes.train);
  add_split(Split::heldout, sizes.heldout);
  add_split(Split::eval, sizes.eval);
  return corpus;
}

std::vector<Vec> oracle_conditional_samples(const SynthWorld& world,
                                            const ImpressionRecord& record, std::size_t n,
                                            std::uint64_t seed) {
  const Vec base = world.base_embedding(record);
  Rng rng(derive_seed(world.config().seed, seed, fnv1a64(record.speaker_id)));
  std::vector<Vec> samples;
  samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t mode = rng.index(world.config().modes_per_condition);
    Vec x = base;
    axpy(1.0, world.mode_offsets()[mode], x);
    for (auto& v : x) v += world.config().noise_scale * rng.gaussian();
    samples.push_back(std::move(x));
  }
  return samples;
}

}  // namespace pfe
