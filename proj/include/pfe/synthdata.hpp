#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pfe/embedding.hpp"
#include "pfe/matrix.hpp"
#include "pfe/schema.hpp"

namespace pfe {

// Knobs for the synthetic speaker world. The conditional distribution of a
// ground-truth embedding given an impression record is a mixture of
// modes_per_condition Gaussians whose means are known in closed form, so
// tests can compare trained models against exact oracles.
struct SynthWorldConfig {
  std::uint64_t seed = 20260801;
  std::size_t embedding_dim = 16;
  double noise_scale = 0.1;
  std::size_t modes_per_condition = 2;
  double mode_separation = 4.0;
  double effect_scale = 0.35;
};

class SynthWorld {
 public:
  SynthWorld(SynthWorldConfig config, const ImpressionSchema& schema);

  const SynthWorldConfig& config() const { return config_; }
  const ImpressionSchema& schema() const { return *schema_; }

  // One row per schema question; each row is a direction scaled to
  // effect_scale. Answer weights multiply these rows.
  const Matrix& effects() const { return effects_; }

  // Centered mode offsets (they sum to zero), common scale chosen so the mean
  // offset norm is mode_separation / 2. With one mode the offset is zero.
  const std::vector<Vec>& mode_offsets() const { return mode_offsets_; }

  // Deterministic part of the conditional: sum of answer-weighted effects.
  Vec base_embedding(const ImpressionRecord& record) const;
  // base + the given mode's offset; the conditional mixture's component mean.
  Vec mode_mean(const ImpressionRecord& record, std::size_t mode) const;

  // Draws one ground-truth embedding: seeded mode choice plus Gaussian noise.
  SpeakerEmbedding sample_embedding(const ImpressionRecord& record,
                                    std::uint64_t draw_seed) const;
  // Uniformly random legal answers for every schema question.
  ImpressionRecord sample_record(const std::string& speaker_id, std::uint64_t draw_seed) const;

 private:
  SynthWorldConfig config_;
  const ImpressionSchema* schema_;
  Matrix effects_;
  std::vector<Vec> mode_offsets_;
};

enum class Split { train, heldout, eval };

std::string split_name(Split split);
Split parse_split(const std::string& name);

struct SplitSizes {
  std::size_t train = 500;
  std::size_t heldout = 200;
  std::size_t eval = 30;
};

struct CorpusEntry {
  ImpressionRecord record;
  SpeakerEmbedding embedding;
  Split split = Split::train;
};

struct SynthCorpus {
  std::vector<CorpusEntry> entries;

  std::vector<const CorpusEntry*> split_entries(Split split) const;
  std::vector<Vec> split_embeddings(Split split) const;
};

SynthCorpus generate_corpus(const SynthWorld& world, const SplitSizes& sizes);

// Exact draws from the true conditional mixture for one record, bypassing
// every trained component. This is the acceptance oracle.
std::vector<Vec> oracle_conditional_samples(const SynthWorld& world,
                                            const ImpressionRecord& record, std::size_t n,
                                            std::uint64_t seed);

}  // namespace pfe
