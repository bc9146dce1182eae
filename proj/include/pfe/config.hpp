#pragma once

#include <cstdint>
#include <string>

#include "pfe/encoder.hpp"
#include "pfe/flow.hpp"
#include "pfe/synthdata.hpp"

namespace pfe {

// Every knob a run needs, in one flat bag. Files use one `key = value` per
// line with `#` comments; unknown keys are errors so typos cannot silently
// fall back to defaults.
struct RunConfig {
  SynthWorldConfig world;
  SplitSizes splits;
  std::string schema_path = "data/impression_schema.json";

  EncoderConfig encoder;
  std::size_t lora_rank = 8;
  double lora_alpha = 8.0;
  std::size_t projection_hidden = 48;
  std::size_t field_hidden = 256;
  FlowConfig flow;

  std::size_t train_batch_size = 16;
  double train_learning_rate = 1e-3;
  std::size_t train_epochs = 120;
  // Epoch budget for the two-stage system's conditioning head. Kept short so
  // the head generalizes instead of memorizing its single draw per speaker,
  // which would teach the downstream flow to act as an identity map.
  std::size_t train_stage1_epochs = 24;
  // Decoupled weight decay for the discriminative heads (standalone and the
  // two-stage conditioning stage). Each speaker contributes one noisy draw,
  // so unregularized heads drift from the conditional mean toward their
  // training draws; decay keeps the fit on the smooth part. Flow-field
  // training is left undecayed: its per-sample noise is the signal it
  // matches, and decay would bias the learned velocities.
  double train_weight_decay = 0.0;
  std::uint64_t train_seed = 1;
};

/// Throws std::invalid_argument naming the offending value when a setting is
/// unusable (zero dims, negative scales, and so on).
void validate_run_config(const RunConfig& config);

/// Parses overrides on top of defaults. Errors name the line number.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);

/// Serializes every key; parse_run_config(dump_run_config(c)) reproduces c.
std::string dump_run_config(const RunConfig& config);

}  // namespace pfe
