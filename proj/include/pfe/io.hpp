#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pfe/discriminative.hpp"
#include "pfe/encoder.hpp"
#include "pfe/flow.hpp"
#include "pfe/matrix.hpp"

namespace pfe {

enum class SystemKind {
  disc_nolora,
  disc_lora,
  flow_lora,
  disc_plus_flow,
};

std::string system_name(SystemKind kind);
SystemKind parse_system_kind(const std::string& name);
bool system_uses_flow(SystemKind kind);

// Shortest round-trippable decimal for doubles; every number we serialize to
// text goes through this so reruns are byte-identical.
std::string fmt_g(double value);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

struct EmbeddingMeta {
  std::size_t index = 0;
  std::string speaker_id;
  std::string condition_id;
};

struct EmbeddingSet {
  std::size_t dim = 0;
  std::vector<Vec> rows;
  std::vector<EmbeddingMeta> meta;
};

std::string sidecar_path(const std::string& embedding_path);
void write_embedding_set(const std::string& path, const std::vector<Vec>& rows,
                         const std::vector<EmbeddingMeta>& meta);
EmbeddingSet read_embedding_set(const std::string& path);

struct Checkpoint {
  SystemKind system = SystemKind::disc_nolora;
  EncoderConfig encoder;
  std::size_t embedding_dim = 0;

  std::size_t lora_rank = 0;
  double lora_alpha = 0.0;
  std::size_t projection_hidden = 0;
  std::size_t field_hidden = 0;
  std::size_t field_cond_dim = 0;
  FlowConfig flow;

  LoraAdapter adapter;
  ProjectionNet projection;
  VectorFieldNet field;

  bool has_adapter() const { return lora_rank > 0; }
  bool has_projection() const { return projection_hidden > 0; }
  bool has_field() const { return field_hidden > 0; }
};

void write_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(const std::string& path);

}  // namespace pfe
