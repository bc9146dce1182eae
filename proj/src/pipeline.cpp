#include "pfe/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <mutex>
#include <numeric>
#include <set>
#include <stdexcept>
#include <thread>
#include <unordered_map>

#include <json.hpp>

#include "pfe/adam.hpp"
#include "pfe/discriminative.hpp"
#include "pfe/flow.hpp"
#include "pfe/metrics.hpp"
#include "pfe/rng.hpp"

namespace pfe {

namespace {

namespace fs = std::filesystem;

void ensure_parent_dir(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

std::vector<Prompt> full_prompts(const ImpressionSchema& schema,
                                 const std::vector<ImpressionRecord>& records) {
  std::vector<Prompt> prompts;
  prompts.reserve(records.size());
  for (const auto& record : records) prompts.push_back(build_full_prompt(schema, record));
  return prompts;
}

Vec adapted_condition(const LoraAdapter& adapter, const Vec& mean, const Vec& frozen) {
  const Vec am = matvec(adapter.a, mean);
  const Vec delta = matvec(adapter.b, am);
  Vec out = frozen;
  axpy(adapter.alpha / static_cast<double>(adapter.rank), delta, out);
  return out;
}

// Flow training with the adapter in the loop: conditions are recomputed from
// the current adapter every batch and condition gradients flow back into it.
void train_flow_joint(const FrozenEncoder& encoder, LoraAdapter& adapter,
                      VectorFieldNet& field, const std::vector<Prompt>& prompts,
                      const std::vector<Vec>& targets, const FlowConfig& flow_config,
                      const FlowTrainConfig& train_config,
                      std::vector<std::pair<std::size_t, double>>& loss_rows) {
  const std::size_t n = targets.size();
  std::vector<Vec> means(n), frozen(n);
  for (std::size_t i = 0; i < n; ++i) {
    means[i] = encoder.mean_features(prompts[i]);
    frozen[i] = matvec(encoder.weight(), means[i]);
    frozen[i] = vec_add(frozen[i], encoder.bias());
  }

  AdamConfig adam_cfg;
  adam_cfg.learning_rate = train_config.learning_rate;
  std::vector<std::size_t> sizes = tensor_sizes(field.params);
  const std::vector<std::size_t> adapter_sizes = tensor_sizes(adapter);
  sizes.insert(sizes.end(), adapter_sizes.begin(), adapter_sizes.end());
  AdamState opt(sizes, adam_cfg);

  MlpParams field_grad = make_zero_grad(field.params);
  LoraGrad adapter_grad = make_zero_grad(adapter);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<Vec> batch_targets, batch_conditions;
  std::vector<std::uint64_t> batch_seeds;
  std::vector<std::size_t> batch_items;
  std::vector<Vec> condition_grads;

  for (std::size_t epoch = 0; epoch < train_config.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(train_config.seed, 41, epoch));
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < n; start += train_config.batch_size, ++batch_index) {
      const std::size_t stop = std::min(n, start + train_config.batch_size);
      batch_targets.clear();
      batch_conditions.clear();
      batch_seeds.clear();
      batch_items.clear();
      for (std::size_t k = start; k < stop; ++k) {
        const std::size_t item = order[k];
        batch_items.push_back(item);
        batch_targets.push_back(targets[item]);
        batch_conditions.push_back(adapted_condition(adapter, means[item], frozen[item]));
        batch_seeds.push_back(derive_seed(train_config.seed, 42 + epoch, item));
      }
      zero_grad(field_grad);
      zero_grad(adapter_grad);
      double batch_loss;
      try {
        batch_loss = cfm_loss(field, batch_targets, batch_conditions, batch_seeds,
                              flow_config.sigma_min, &field_grad, &condition_grads);
      } catch (const std::runtime_error& e) {
        throw std::runtime_error("train_flow_joint: aborted at epoch " +
                                 std::to_string(epoch) + " batch " +
                                 std::to_string(batch_index) + ": " + e.what());
      }
      for (std::size_t k = 0; k < batch_items.size(); ++k) {
        lora_backward(adapter, means[batch_items[k]], condition_grads[k], adapter_grad);
      }
      epoch_loss += batch_loss * static_cast<double>(stop - start);

      std::vector<ParamView> params = param_views(field.params);
      const std::vector<ParamView> adapter_params = param_views(adapter);
      params.insert(params.end(), adapter_params.begin(), adapter_params.end());
      std::vector<ConstParamView> grads = grad_views(field_grad);
      const std::vector<ConstParamView> adapter_grads = grad_views(adapter_grad);
      grads.insert(grads.end(), adapter_grads.begin(), adapter_grads.end());
      opt.step(params, grads);
    }
    loss_rows.emplace_back(loss_rows.size(), epoch_loss / static_cast<double>(n));
  }
}

}  // namespace

std::size_t thread_budget() {
  const char* raw = std::getenv("PFE_THREADS");
  if (raw == nullptr || raw[0] == '\0') return 1;
  char* end = nullptr;
  const unsigned long long parsed = std::strtoull(raw, &end, 10);
  if (end == raw || *end != '\0' || parsed == 0) {
    throw std::runtime_error("thread_budget: PFE_THREADS must be a positive integer, got '" +
                             std::string(raw) + "'");
  }
  return static_cast<std::size_t>(parsed);
}

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min(thread_budget(), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  auto body = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(body);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

std::string manifest_to_json(const CorpusManifest& manifest) {
  nlohmann::json j;
  j["embedding_dim"] = manifest.embedding_dim;
  j["splits"]["train"] = manifest.splits.train;
  j["splits"]["heldout"] = manifest.splits.heldout;
  j["splits"]["eval"] = manifest.splits.eval;
  j["world"]["seed"] = manifest.world.seed;
  j["world"]["noise_scale"] = manifest.world.noise_scale;
  j["world"]["modes_per_condition"] = manifest.world.modes_per_condition;
  j["world"]["mode_separation"] = manifest.world.mode_separation;
  j["world"]["effect_scale"] = manifest.world.effect_scale;
  return j.dump(2) + "\n";
}

CorpusManifest manifest_from_json(const std::string& text) {
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    CorpusManifest m;
    m.embedding_dim = j.at("embedding_dim").get<std::size_t>();
    m.splits.train = j.at("splits").at("train").get<std::size_t>();
    m.splits.heldout = j.at("splits").at("heldout").get<std::size_t>();
    m.splits.eval = j.at("splits").at("eval").get<std::size_t>();
    m.world.embedding_dim = m.embedding_dim;
    m.world.seed = j.at("world").at("seed").get<std::uint64_t>();
    m.world.noise_scale = j.at("world").at("noise_scale").get<double>();
    m.world.modes_per_condition = j.at("world").at("modes_per_condition").get<std::size_t>();
    m.world.mode_separation = j.at("world").at("mode_separation").get<double>();
    m.world.effect_scale = j.at("world").at("effect_scale").get<double>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("manifest_from_json: " + std::string(e.what()));
  }
}

std::string manifest_file(const std::string& corpus_dir) {
  return (fs::path(corpus_dir) / "manifest.json").string();
}

std::string record_file(const std::string& corpus_dir, Split split) {
  return (fs::path(corpus_dir) / (split_name(split) + ".jsonl")).string();
}

std::string embedding_file(const std::string& corpus_dir, Split split) {
  return (fs::path(corpus_dir) / (split_name(split) + ".emb1")).string();
}

void run_gen_corpus(const RunConfig& config, const std::string& out_dir, bool force) {
  validate_run_config(config);
  const fs::path out(out_dir);
  if (fs::exists(out)) {
    if (!force) {
      throw std::runtime_error("run_gen_corpus: '" + out_dir +
                               "' already exists; pass --force to replace it");
    }
    fs::remove_all(out);
  }
  fs::create_directories(out);

  const ImpressionSchema schema = ImpressionSchema::load(config.schema_path);
  const SynthWorld world(config.world, schema);
  const SynthCorpus corpus = generate_corpus(world, config.splits);

  for (Split split : {Split::train, Split::heldout, Split::eval}) {
    const auto entries = corpus.split_entries(split);
    std::vector<ImpressionRecord> records;
    std::vector<Vec> rows;
    std::vector<EmbeddingMeta> meta;
    records.reserve(entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) {
      records.push_back(entries[i]->record);
      rows.push_back(entries[i]->embedding.values);
      meta.push_back({i, entries[i]->record.speaker_id, entries[i]->record.speaker_id});
    }
    write_records_jsonl(record_file(out_dir, split), records);
    write_embedding_set(embedding_file(out_dir, split), rows, meta);
  }

  CorpusManifest manifest{config.world.embedding_dim, config.splits, config.world};
  write_text_file(manifest_file(out_dir), manifest_to_json(manifest));
}

CorpusManifest load_manifest(const std::string& corpus_dir) {
  return manifest_from_json(read_text_file(manifest_file(corpus_dir)));
}

LoadedSplit load_split(const std::string& corpus_dir, Split split) {
  LoadedSplit loaded;
  loaded.records = read_records_jsonl(record_file(corpus_dir, split));
  loaded.embeddings = read_embedding_set(embedding_file(corpus_dir, split));
  if (loaded.records.size() != loaded.embeddings.rows.size()) {
    throw std::runtime_error("load_split: " + split_name(split) + " has " +
                             std::to_string(loaded.records.size()) + " records but " +
                             std::to_string(loaded.embeddings.rows.size()) + " embeddings");
  }
  for (std::size_t i = 0; i < loaded.records.size(); ++i) {
    if (loaded.embeddings.meta[i].speaker_id != loaded.records[i].speaker_id) {
      throw std::runtime_error("load_split: speaker order mismatch at row " +
                               std::to_string(i));
    }
  }
  return loaded;
}

TrainOutcome train_system(const RunConfig& config, SystemKind system,
                          const std::string& corpus_dir) {
  validate_run_config(config);
  const CorpusManifest manifest = load_manifest(corpus_dir);
  const LoadedSplit train = load_split(corpus_dir, Split::train);
  const std::size_t d = train.embeddings.dim;
  if (d != manifest.embedding_dim) {
    throw std::runtime_error("train_system: manifest dim " +
                             std::to_string(manifest.embedding_dim) +
                             " does not match train split dim " + std::to_string(d));
  }

  const ImpressionSchema schema = ImpressionSchema::load(config.schema_path);
  const FrozenEncoder encoder(config.encoder, &schema);
  const std::vector<Prompt> prompts = full_prompts(schema, train.records);
  const std::vector<Vec>& targets = train.embeddings.rows;

  TrainOutcome outcome;
  Checkpoint& ckpt = outcome.checkpoint;
  ckpt.system = system;
  ckpt.encoder = config.encoder;
  ckpt.embedding_dim = d;
  ckpt.flow = config.flow;

  LoraAdapter adapter =
      make_lora_adapter(config.encoder.phrase_dim, config.encoder.cond_dim, config.lora_rank,
                        config.lora_alpha, derive_seed(config.train_seed, 61));

  const bool wants_disc =
      system == SystemKind::disc_nolora || system == SystemKind::disc_lora ||
      system == SystemKind::disc_plus_flow;
  if (wants_disc) {
    ProjectionNet net = make_projection_net(config.encoder.cond_dim, d,
                                            config.projection_hidden,
                                            derive_seed(config.train_seed, 62));
    DiscTrainConfig disc_cfg;
    disc_cfg.batch_size = config.train_batch_size;
    disc_cfg.learning_rate = config.train_learning_rate;
    // The two-stage conditioning head stops early: trained to convergence it
    // memorizes its single draw per training speaker, and the flow stage then
    // learns to reproduce its condition instead of the conditional density.
    disc_cfg.epochs = system == SystemKind::disc_plus_flow ? config.train_stage1_epochs
                                                           : config.train_epochs;
    disc_cfg.weight_decay = config.train_weight_decay;
    disc_cfg.use_lora = system != SystemKind::disc_nolora;
    disc_cfg.seed = config.train_seed;
    const DiscTrainResult result =
        train_discriminative(encoder, adapter, net, prompts, targets, disc_cfg);
    for (double loss : result.epoch_losses) {
      outcome.loss_rows.emplace_back(outcome.loss_rows.size(), loss);
    }
    outcome.zero_norm_warnings = result.warnings.zero_norm_predictions;
    ckpt.projection_hidden = config.projection_hidden;
    ckpt.projection = net;
    if (disc_cfg.use_lora) {
      ckpt.lora_rank = config.lora_rank;
      ckpt.lora_alpha = config.lora_alpha;
      ckpt.adapter = adapter;
    }
  }

  if (system == SystemKind::flow_lora) {
    VectorFieldNet field =
        make_vector_field_net(d, config.encoder.cond_dim, config.field_hidden,
                              config.flow.time_frequencies,
                              derive_seed(config.train_seed, 63));
    FlowTrainConfig flow_cfg;
    flow_cfg.batch_size = config.train_batch_size;
    flow_cfg.learning_rate = config.train_learning_rate;
    flow_cfg.epochs = config.train_epochs;
    flow_cfg.seed = config.train_seed;
    train_flow_joint(encoder, adapter, field, prompts, targets, config.flow, flow_cfg,
                     outcome.loss_rows);
    ckpt.lora_rank = config.lora_rank;
    ckpt.lora_alpha = config.lora_alpha;
    ckpt.adapter = adapter;
    ckpt.field_hidden = config.field_hidden;
    ckpt.field_cond_dim = config.encoder.cond_dim;
    ckpt.field = field;
  } else if (system == SystemKind::disc_plus_flow) {
    std::vector<Vec> conditions;
    conditions.reserve(prompts.size());
    for (const auto& prompt : prompts) {
      conditions.push_back(predict(encoder, adapter, ckpt.projection, prompt).values);
    }
    VectorFieldNet field = make_vector_field_net(d, d, config.field_hidden,
                                                 config.flow.time_frequencies,
                                                 derive_seed(config.train_seed, 63));
    FlowTrainConfig flow_cfg;
    flow_cfg.batch_size = config.train_batch_size;
    flow_cfg.learning_rate = config.train_learning_rate;
    flow_cfg.epochs = config.train_epochs;
    flow_cfg.seed = config.train_seed;
    const FlowTrainResult result =
        train_flow(field, conditions, targets, config.flow, flow_cfg);
    for (double loss : result.epoch_losses) {
      outcome.loss_rows.emplace_back(outcome.loss_rows.size(), loss);
    }
    ckpt.field_hidden = config.field_hidden;
    ckpt.field_cond_dim = d;
    ckpt.field = field;
  }

  return outcome;
}

TrainOutcome run_train(const RunConfig& config, SystemKind system,
                       const std::string& corpus_dir, const std::string& checkpoint_path) {
  TrainOutcome outcome = train_system(config, system, corpus_dir);
  ensure_parent_dir(checkpoint_path);
  write_checkpoint(checkpoint_path, outcome.checkpoint);
  std::string csv = "epoch,loss\n";
  for (const auto& [epoch, loss] : outcome.loss_rows) {
    csv += std::to_string(epoch);
    csv += ',';
    csv += fmt_g(loss);
    csv += '\n';
  }
  write_text_file(checkpoint_path + ".loss.csv", csv);
  return outcome;
}

ModelBundle::ModelBundle(Checkpoint loaded, const ImpressionSchema& schema)
    : checkpoint(std::move(loaded)),
      encoder(checkpoint.encoder, &schema),
      adapter(checkpoint.has_adapter()
                  ? checkpoint.adapter
                  : make_lora_adapter(checkpoint.encoder.phrase_dim,
                                      checkpoint.encoder.cond_dim, 1, 1.0, 0)) {}

Vec disc_predict_values(const ModelBundle& bundle, const Prompt& prompt) {
  if (!bundle.checkpoint.has_projection()) {
    throw std::runtime_error("disc_predict_values: checkpoint has no discriminative head");
  }
  return predict(bundle.encoder, bundle.adapter, bundle.checkpoint.projection, prompt).values;
}

namespace {

Vec flow_condition(const ModelBundle& bundle, const Prompt& prompt) {
  if (bundle.checkpoint.system == SystemKind::disc_plus_flow) {
    return disc_predict_values(bundle, prompt);
  }
  return lora_encode(bundle.encoder, bundle.adapter, prompt);
}

}  // namespace

Vec flow_sample_values(const ModelBundle& bundle, const Prompt& prompt,
                       std::uint64_t draw_seed) {
  if (!bundle.checkpoint.has_field()) {
    throw std::runtime_error("flow_sample_values: checkpoint has no flow head");
  }
  const Vec condition = flow_condition(bundle, prompt);
  Rng rng(draw_seed);
  const Vec x0 = rng.gaussian_vec(bundle.checkpoint.embedding_dim);
  return integrate(bundle.checkpoint.field, condition, x0, bundle.checkpoint.flow).values;
}

GenerateResult run_generate(const RunConfig& config, const std::string& checkpoint_path,
                            const std::string& records_path, std::size_t per_record,
                            std::uint64_t seed, const std::string& out_path) {
  if (per_record < 1) {
    throw std::invalid_argument("run_generate: per_record must be at least 1");
  }
  const ImpressionSchema schema = ImpressionSchema::load(config.schema_path);
  const ModelBundle bundle(read_checkpoint(checkpoint_path), schema);
  const std::vector<ImpressionRecord> records = read_records_jsonl(records_path);
  if (records.empty()) {
    throw std::runtime_error("run_generate: no records in '" + records_path + "'");
  }
  for (const auto& record : records) validate_record(schema, record);

  std::vector<Prompt> prompts = full_prompts(schema, records);

  GenerateResult result;
  const bool flow = system_uses_flow(bundle.checkpoint.system);
  const std::size_t draws = flow ? per_record : 1;
  result.clamped_to_one_per_record = !flow && per_record > 1;

  std::vector<Vec> rows(records.size() * draws);
  std::vector<EmbeddingMeta> meta(rows.size());
  parallel_for(records.size(), [&](std::size_t r) {
    const std::string& id = records[r].speaker_id;
    for (std::size_t j = 0; j < draws; ++j) {
      const std::size_t k = r * draws + j;
      rows[k] = flow ? flow_sample_values(bundle, prompts[r],
                                          derive_seed(seed, fnv1a64(id), j))
                     : disc_predict_values(bundle, prompts[r]);
      meta[k] = {k, id, id};
    }
  });

  ensure_parent_dir(out_path);
  write_embedding_set(out_path, rows, meta);
  result.rows_written = rows.size();
  return result;
}

std::string eval_mode_name(EvalMode mode) {
  switch (mode) {
    case EvalMode::fad: return "fad";
    case EvalMode::similarity: return "similarity";
    case EvalMode::ablation: return "ablation";
  }
  throw std::invalid_argument("eval_mode_name: unknown mode");
}

EvalMode parse_eval_mode(const std::string& name) {
  if (name == "fad") return EvalMode::fad;
  if (name == "similarity") return EvalMode::similarity;
  if (name == "ablation") return EvalMode::ablation;
  throw std::invalid_argument("parse_eval_mode: unknown mode '" + name +
                              "' (expected fad, similarity, or ablation)");
}

namespace {

void check_dims(const std::string& what, std::size_t got, std::size_t want) {
  if (got != want) {
    throw std::runtime_error("run_evaluate: " + what + " dimension " + std::to_string(got) +
                             " does not match corpus dimension " + std::to_string(want));
  }
}

std::string evaluate_fad(const EvaluateRequest& request) {
  const EmbeddingSet generated = read_embedding_set(request.generated_path);
  const LoadedSplit heldout = load_split(request.corpus_dir, Split::heldout);
  if (generated.rows.empty()) {
    throw std::runtime_error("run_evaluate: generated set is empty");
  }
  check_dims("generated", generated.dim, heldout.embeddings.dim);
  const double score = fad_score(heldout.embeddings.rows, generated.rows);
  std::string csv = "metric,value\n";
  csv += "fad," + fmt_g(score) + "\n";
  csv += "generated_count," + std::to_string(generated.rows.size()) + "\n";
  csv += "background_count," + std::to_string(heldout.embeddings.rows.size()) + "\n";
  return csv;
}

std::string evaluate_similarity(const EvaluateRequest& request) {
  const EmbeddingSet generated = read_embedding_set(request.generated_path);
  if (generated.rows.empty()) {
    throw std::runtime_error("run_evaluate: generated set is empty");
  }

  std::unordered_map<std::string, Vec> truth;
  std::size_t corpus_dim = 0;
  for (Split split : {Split::train, Split::heldout, Split::eval}) {
    const LoadedSplit loaded = load_split(request.corpus_dir, split);
    corpus_dim = loaded.embeddings.dim;
    for (std::size_t i = 0; i < loaded.records.size(); ++i) {
      truth[loaded.records[i].speaker_id] = loaded.embeddings.rows[i];
    }
  }
  check_dims("generated", generated.dim, corpus_dim);

  std::vector<std::string> order;
  std::unordered_map<std::string, std::pair<double, std::size_t>> sums;
  for (std::size_t i = 0; i < generated.rows.size(); ++i) {
    const std::string& id = generated.meta[i].speaker_id;
    const auto found = truth.find(id);
    if (found == truth.end()) {
      throw std::runtime_error("run_evaluate: generated speaker '" + id +
                               "' is not in the corpus");
    }
    auto [it, inserted] = sums.try_emplace(id, 0.0, 0);
    if (inserted) order.push_back(id);
    it->second.first += cosine_similarity(generated.rows[i], found->second);
    it->second.second += 1;
  }

  std::string csv = "speaker_id,mean_cosine\n";
  double total = 0.0;
  for (const auto& id : order) {
    const auto& [sum, count] = sums.at(id);
    const double mean = sum / static_cast<double>(count);
    total += mean;
    csv += id + "," + fmt_g(mean) + "\n";
  }
  csv += "mean," + fmt_g(total / static_cast<double>(order.size())) + "\n";
  return csv;
}

std::string evaluate_ablation(const RunConfig& config, const EvaluateRequest& request) {
  if (request.checkpoint_path.empty()) {
    throw std::runtime_error("run_evaluate: ablation mode needs a checkpoint");
  }
  const ImpressionSchema schema = ImpressionSchema::load(config.schema_path);
  const ModelBundle bundle(read_checkpoint(request.checkpoint_path), schema);
  const LoadedSplit eval = load_split(request.corpus_dir, Split::eval);
  check_dims("checkpoint", bundle.checkpoint.embedding_dim, eval.embeddings.dim);

  const std::vector<double> portions{1.0 / 3.0, 2.0 / 3.0, 1.0};
  const std::size_t reps = 3;
  const std::size_t n = eval.records.size();
  const bool flow = system_uses_flow(bundle.checkpoint.system);

  std::vector<double> similarity(portions.size() * reps * n);
  parallel_for(similarity.size(), [&](std::size_t task) {
    const std::size_t r = task % n;
    const std::size_t rep = (task / n) % reps;
    const std::size_t pi = task / (n * reps);
    const ImpressionRecord& record = eval.records[r];
    const auto include =
        subset_prompt(record, portions[pi], derive_seed(request.seed, 71, rep));
    const Prompt prompt = build_prompt(schema, record, include);
    const Vec values =
        flow ? flow_sample_values(bundle, prompt,
                                  derive_seed(derive_seed(request.seed, 72, rep),
                                              fnv1a64(record.speaker_id), pi))
             : disc_predict_values(bundle, prompt);
    similarity[task] = cosine_similarity(values, eval.embeddings.rows[r]);
  });

  std::string csv = "portion,mean_cosine\n";
  for (std::size_t pi = 0; pi < portions.size(); ++pi) {
    double sum = 0.0;
    for (std::size_t k = 0; k < reps * n; ++k) sum += similarity[pi * reps * n + k];
    csv += fmt_g(portions[pi]) + "," + fmt_g(sum / static_cast<double>(reps * n)) + "\n";
  }
  return csv;
}

}  // namespace

void run_evaluate(const RunConfig& config, const EvaluateRequest& request) {
  std::string csv;
  switch (request.mode) {
    case EvalMode::fad: csv = evaluate_fad(request); break;
    case EvalMode::similarity: csv = evaluate_similarity(request); break;
    case EvalMode::ablation: csv = evaluate_ablation(config, request); break;
  }
  ensure_parent_dir(request.out_path);
  write_text_file(request.out_path, csv);
}

}  // namespace pfe
