#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "pfe/config.hpp"
#include "pfe/io.hpp"
#include "pfe/schema.hpp"
#include "pfe/synthdata.hpp"

namespace pfe {

// Runs fn(0..count-1), splitting the range over PFE_THREADS workers (default
// 1). Each index must write only to its own slot so results do not depend on
// scheduling.
std::size_t thread_budget();
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

struct CorpusManifest {
  std::size_t embedding_dim = 0;
  SplitSizes splits;
  SynthWorldConfig world;
};

std::string manifest_to_json(const CorpusManifest& manifest);
CorpusManifest manifest_from_json(const std::string& text);

std::string manifest_file(const std::string& corpus_dir);
std::string record_file(const std::string& corpus_dir, Split split);
std::string embedding_file(const std::string& corpus_dir, Split split);

/// Writes records JSONL, embedding sets, and manifest.json for all three
/// splits. Refuses to touch an existing directory unless force is set, in
/// which case the directory is replaced wholesale.
void run_gen_corpus(const RunConfig& config, const std::string& out_dir, bool force);

struct LoadedSplit {
  std::vector<ImpressionRecord> records;
  EmbeddingSet embeddings;
};

CorpusManifest load_manifest(const std::string& corpus_dir);
LoadedSplit load_split(const std::string& corpus_dir, Split split);

struct TrainOutcome {
  Checkpoint checkpoint;
  // Epoch numbering continues across stages for the two-stage system.
  std::vector<std::pair<std::size_t, double>> loss_rows;
  std::size_t zero_norm_warnings = 0;
};

/// Trains one of the four systems on the train split. All randomness derives
/// from config.train_seed plus fixed stream tags, so results are reproducible.
TrainOutcome train_system(const RunConfig& config, SystemKind system,
                          const std::string& corpus_dir);

/// train_system plus writing the checkpoint and a `<checkpoint>.loss.csv`
/// epoch,loss log next to it.
TrainOutcome run_train(const RunConfig& config, SystemKind system,
                       const std::string& corpus_dir, const std::string& checkpoint_path);

/// The assembled model with its encoder, ready to answer prompts.
struct ModelBundle {
  Checkpoint checkpoint;
  FrozenEncoder encoder;
  LoraAdapter adapter;  // inert (zero B) when the checkpoint has none

  ModelBundle(Checkpoint loaded, const ImpressionSchema& schema);
};

/// Deterministic discriminative embedding; valid for the disc systems and for
/// the two-stage system's conditioning head.
Vec disc_predict_values(const ModelBundle& bundle, const Prompt& prompt);

/// One flow draw. The noise is seeded, so (bundle, prompt, draw_seed) fixes
/// the output.
Vec flow_sample_values(const ModelBundle& bundle, const Prompt& prompt,
                       std::uint64_t draw_seed);

struct GenerateResult {
  std::size_t rows_written = 0;
  bool clamped_to_one_per_record = false;  // disc system asked for n > 1
};

/// Embeds every record in records_path. Flow systems emit per_record seeded
/// draws each; discriminative systems emit exactly one per record.
GenerateResult run_generate(const RunConfig& config, const std::string& checkpoint_path,
                            const std::string& records_path, std::size_t per_record,
                            std::uint64_t seed, const std::string& out_path);

enum class EvalMode { fad, similarity, ablation };

std::string eval_mode_name(EvalMode mode);
EvalMode parse_eval_mode(const std::string& name);

struct EvaluateRequest {
  EvalMode mode = EvalMode::fad;
  std::string corpus_dir;
  std::string generated_path;   // fad and similarity modes
  std::string checkpoint_path;  // ablation mode regenerates from the model
  std::uint64_t seed = 0;
  std::string out_path;
};

/// fad: one score of the generated set against held-out ground truth.
/// similarity: per-speaker mean cosine between generated and ground truth.
/// ablation: regenerates eval-split embeddings from prompts cut to portions
/// 1/3, 2/3, 1 and reports the mean cosine per portion over three seeds.
void run_evaluate(const RunConfig& config, const EvaluateRequest& request);

}  // namespace pfe
