#include <cstdint>
#include <exception>
#include <iostream>
#include <stdexcept>
#include <string>

#include <CLI11.hpp>

#include "pfe/config.hpp"
#include "pfe/io.hpp"
#include "pfe/pipeline.hpp"

namespace {

int dispatch(const CLI::App& app, CLI::App* gen_corpus, CLI::App* train, CLI::App* generate,
             CLI::App* evaluate);

struct CliState {
  std::string config_path;
  std::string out_path;
  bool force = false;

  std::string system;
  std::string corpus_dir;

  std::string checkpoint_path;
  std::string records_path;
  std::size_t count = 1;
  std::uint64_t seed = 0;

  std::string mode;
  std::string generated_path;
};

CliState state;

void run_gen_corpus_cmd() {
  pfe::run_gen_corpus(pfe::load_run_config(state.config_path), state.out_path, state.force);
}

void run_train_cmd() {
  const pfe::SystemKind system = pfe::parse_system_kind(state.system);
  const pfe::TrainOutcome outcome = pfe::run_train(
      pfe::load_run_config(state.config_path), system, state.corpus_dir, state.out_path);
  if (outcome.zero_norm_warnings > 0) {
    std::cerr << "warning: " << outcome.zero_norm_warnings
              << " zero-norm predictions scored a flat cosine term during training\n";
  }
}

void run_generate_cmd() {
  const pfe::GenerateResult result = pfe::run_generate(
      pfe::load_run_config(state.config_path), state.checkpoint_path, state.records_path,
      state.count, state.seed, state.out_path);
  if (result.clamped_to_one_per_record) {
    std::cerr << "warning: discriminative systems are deterministic; wrote 1 embedding "
                 "per record instead of "
              << state.count << "\n";
  }
}

void run_evaluate_cmd() {
  pfe::EvaluateRequest request;
  request.mode = pfe::parse_eval_mode(state.mode);
  request.corpus_dir = state.corpus_dir;
  request.generated_path = state.generated_path;
  request.checkpoint_path = state.checkpoint_path;
  request.seed = state.seed;
  request.out_path = state.out_path;
  if (request.mode != pfe::EvalMode::ablation && request.generated_path.empty()) {
    throw std::invalid_argument("evaluate: --generated is required for mode '" +
                                state.mode + "'");
  }
  if (request.mode == pfe::EvalMode::ablation && request.checkpoint_path.empty()) {
    throw std::invalid_argument("evaluate: --checkpoint is required for mode 'ablation'");
  }
  pfe::run_evaluate(pfe::load_run_config(state.config_path), request);
}

int dispatch(const CLI::App& app, CLI::App* gen_corpus, CLI::App* train, CLI::App* generate,
             CLI::App* evaluate) {
  (void)app;
  if (gen_corpus->parsed()) run_gen_corpus_cmd();
  else if (train->parsed()) run_train_cmd();
  else if (generate->parsed()) run_generate_cmd();
  else if (evaluate->parsed()) run_evaluate_cmd();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prompt-to-speaker-embedding workbench: synthetic corpora, discriminative "
               "and flow-matching heads, and their evaluation"};
  app.require_subcommand(1);

  CLI::App* gen_corpus =
      app.add_subcommand("gen-corpus", "Generate a synthetic corpus directory");
  gen_corpus->add_option("--config", state.config_path, "Run configuration file")
      ->required();
  gen_corpus->add_option("--out", state.out_path, "Corpus directory to create")->required();
  gen_corpus->add_flag("--force", state.force, "Replace the directory if it exists");

  CLI::App* train = app.add_subcommand("train", "Train one system on a corpus");
  train
      ->add_option("system", state.system,
                   "One of disc_nolora, disc_lora, flow_lora, disc_plus_flow")
      ->required();
  train->add_option("--config", state.config_path, "Run configuration file")->required();
  train->add_option("--corpus", state.corpus_dir, "Corpus directory")->required();
  train->add_option("--out", state.out_path, "Checkpoint file to write")->required();

  CLI::App* generate =
      app.add_subcommand("generate", "Embed impression records with a trained system");
  generate->add_option("--config", state.config_path, "Run configuration file")->required();
  generate->add_option("--checkpoint", state.checkpoint_path, "Trained checkpoint")
      ->required();
  generate->add_option("--records", state.records_path, "Impression records JSONL")
      ->required();
  generate->add_option("--count", state.count,
                       "Samples per record (flow systems; discriminative systems always "
                       "write one)");
  generate->add_option("--seed", state.seed, "Base seed for flow noise draws");
  generate->add_option("--out", state.out_path, "Embedding set file to write")->required();

  CLI::App* evaluate =
      app.add_subcommand("evaluate", "Score generated embeddings against a corpus");
  evaluate->add_option("--config", state.config_path, "Run configuration file")->required();
  evaluate->add_option("--corpus", state.corpus_dir, "Corpus directory")->required();
  evaluate->add_option("--mode", state.mode, "fad, similarity, or ablation")->required();
  evaluate->add_option("--generated", state.generated_path,
                       "Generated embedding set (fad and similarity modes)");
  evaluate->add_option("--checkpoint", state.checkpoint_path,
                       "Checkpoint to regenerate from (ablation mode)");
  evaluate->add_option("--seed", state.seed, "Seed for ablation subsets and draws");
  evaluate->add_option("--out", state.out_path, "Report CSV to write")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    return dispatch(app, gen_corpus, train, generate, evaluate);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
