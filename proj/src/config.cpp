#include "pfe/config.hpp"

#include <cmath>
#include <filesystem>
#include <sstream>
#include <stdexcept>

#include "pfe/io.hpp"

namespace pfe {

namespace {

std::string trim(const std::string& s) {
  std::size_t begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  std::size_t end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::uint64_t to_u64(const std::string& value) {
  std::size_t consumed = 0;
  if (!value.empty() && value[0] == '-') throw std::invalid_argument("negative");
  const std::uint64_t parsed = std::stoull(value, &consumed);
  if (consumed != value.size()) throw std::invalid_argument("trailing characters");
  return parsed;
}

std::size_t to_size(const std::string& value) {
  return static_cast<std::size_t>(to_u64(value));
}

double to_double(const std::string& value) {
  std::size_t consumed = 0;
  const double parsed = std::stod(value, &consumed);
  if (consumed != value.size()) throw std::invalid_argument("trailing characters");
  if (!std::isfinite(parsed)) throw std::invalid_argument("not finite");
  return parsed;
}

void apply(RunConfig& c, const std::string& key, const std::string& value) {
  if (key == "world.seed") c.world.seed = to_u64(value);
  else if (key == "world.embedding_dim") c.world.embedding_dim = to_size(value);
  else if (key == "world.noise_scale") c.world.noise_scale = to_double(value);
  else if (key == "world.modes_per_condition") c.world.modes_per_condition = to_size(value);
  else if (key == "world.mode_separation") c.world.mode_separation = to_double(value);
  else if (key == "world.effect_scale") c.world.effect_scale = to_double(value);
  else if (key == "splits.train") c.splits.train = to_size(value);
  else if (key == "splits.heldout") c.splits.heldout = to_size(value);
  else if (key == "splits.eval") c.splits.eval = to_size(value);
  else if (key == "schema.path") c.schema_path = value;
  else if (key == "encoder.seed") c.encoder.seed = to_u64(value);
  else if (key == "encoder.phrase_dim") c.encoder.phrase_dim = to_size(value);
  else if (key == "encoder.cond_dim") c.encoder.cond_dim = to_size(value);
  else if (key == "encoder.frozen_rank") c.encoder.frozen_rank = to_size(value);
  else if (key == "lora.rank") c.lora_rank = to_size(value);
  else if (key == "lora.alpha") c.lora_alpha = to_double(value);
  else if (key == "projection.hidden_width") c.projection_hidden = to_size(value);
  else if (key == "flow.sigma_min") c.flow.sigma_min = to_double(value);
  else if (key == "flow.ode_steps") c.flow.ode_steps = to_size(value);
  else if (key == "flow.time_frequencies") c.flow.time_frequencies = to_size(value);
  else if (key == "flow.hidden_width") c.field_hidden = to_size(value);
  else if (key == "train.batch_size") c.train_batch_size = to_size(value);
  else if (key == "train.learning_rate") c.train_learning_rate = to_double(value);
  else if (key == "train.epochs") c.train_epochs = to_size(value);
  else if (key == "train.stage1_epochs") c.train_stage1_epochs = to_size(value);
  else if (key == "train.weight_decay") c.train_weight_decay = to_double(value);
  else if (key == "train.seed") c.train_seed = to_u64(value);
  else throw std::invalid_argument("unknown key '" + key + "'");
}

void require(bool ok, const std::string& message) {
  if (!ok) throw std::invalid_argument("validate_run_config: " + message);
}

}  // namespace

void validate_run_config(const RunConfig& c) {
  require(c.world.embedding_dim >= 1, "world.embedding_dim must be at least 1");
  require(c.world.noise_scale > 0.0, "world.noise_scale must be positive");
  require(c.world.modes_per_condition >= 1, "world.modes_per_condition must be at least 1");
  require(c.world.mode_separation >= 0.0, "world.mode_separation must be nonnegative");
  require(c.world.effect_scale > 0.0, "world.effect_scale must be positive");
  require(c.splits.train >= 1, "splits.train must be at least 1");
  require(c.splits.heldout >= 1, "splits.heldout must be at least 1");
  require(c.splits.eval >= 1, "splits.eval must be at least 1");
  require(!c.schema_path.empty(), "schema.path must not be empty");
  require(c.encoder.phrase_dim >= 1, "encoder.phrase_dim must be at least 1");
  require(c.encoder.cond_dim >= 1, "encoder.cond_dim must be at least 1");
  require(c.lora_rank >= 1, "lora.rank must be at least 1");
  require(c.lora_alpha > 0.0, "lora.alpha must be positive");
  require(c.projection_hidden >= 1, "projection.hidden_width must be at least 1");
  require(c.field_hidden >= 1, "flow.hidden_width must be at least 1");
  require(c.train_batch_size >= 1, "train.batch_size must be at least 1");
  require(c.train_learning_rate > 0.0, "train.learning_rate must be positive");
  require(c.train_epochs >= 1, "train.epochs must be at least 1");
  require(c.train_stage1_epochs >= 1, "train.stage1_epochs must be at least 1");
  require(c.train_weight_decay >= 0.0, "train.weight_decay must be nonnegative");
  try {
    validate_flow_config(c.flow);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(std::string("validate_run_config: ") + e.what());
  }
}

RunConfig parse_run_config(const std::string& text) {
  RunConfig config;
  std::istringstream lines(text);
  std::string raw;
  std::size_t line_number = 0;
  while (std::getline(lines, raw)) {
    ++line_number;
    const std::size_t comment = raw.find('#');
    std::string line = trim(comment == std::string::npos ? raw : raw.substr(0, comment));
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("parse_run_config: line " + std::to_string(line_number) +
                                  ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw std::invalid_argument("parse_run_config: line " + std::to_string(line_number) +
                                  ": expected 'key = value'");
    }
    try {
      apply(config, key, value);
    } catch (const std::exception& e) {
      throw std::invalid_argument("parse_run_config: line " + std::to_string(line_number) +
                                  ": " + e.what());
    }
  }
  validate_run_config(config);
  return config;
}

RunConfig load_run_config(const std::string& path) {
  RunConfig config = parse_run_config(read_text_file(path));
  const std::filesystem::path schema(config.schema_path);
  if (schema.is_relative()) {
    config.schema_path =
        (std::filesystem::path(path).parent_path() / schema).lexically_normal().string();
  }
  return config;
}

std::string dump_run_config(const RunConfig& c) {
  std::ostringstream out;
  out << "# Synthetic world\n";
  out << "world.seed = " << c.world.seed << "\n";
  out << "world.embedding_dim = " << c.world.embedding_dim << "\n";
  out << "world.noise_scale = " << fmt_g(c.world.noise_scale) << "\n";
  out << "world.modes_per_condition = " << c.world.modes_per_condition << "\n";
  out << "world.mode_separation = " << fmt_g(c.world.mode_separation) << "\n";
  out << "world.effect_scale = " << fmt_g(c.world.effect_scale) << "\n";
  out << "splits.train = " << c.splits.train << "\n";
  out << "splits.heldout = " << c.splits.heldout << "\n";
  out << "splits.eval = " << c.splits.eval << "\n";
  out << "schema.path = " << c.schema_path << "\n";
  out << "\n# Prompt encoder\n";
  out << "encoder.seed = " << c.encoder.seed << "\n";
  out << "encoder.phrase_dim = " << c.encoder.phrase_dim << "\n";
  out << "encoder.cond_dim = " << c.encoder.cond_dim << "\n";
  out << "encoder.frozen_rank = " << c.encoder.frozen_rank << "\n";
  out << "lora.rank = " << c.lora_rank << "\n";
  out << "lora.alpha = " << fmt_g(c.lora_alpha) << "\n";
  out << "\n# Heads\n";
  out << "projection.hidden_width = " << c.projection_hidden << "\n";
  out << "flow.sigma_min = " << fmt_g(c.flow.sigma_min) << "\n";
  out << "flow.ode_steps = " << c.flow.ode_steps << "\n";
  out << "flow.time_frequencies = " << c.flow.time_frequencies << "\n";
  out << "flow.hidden_width = " << c.field_hidden << "\n";
  out << "\n# Optimization\n";
  out << "train.batch_size = " << c.train_batch_size << "\n";
  out << "train.learning_rate = " << fmt_g(c.train_learning_rate) << "\n";
  out << "train.epochs = " << c.train_epochs << "\n";
  out << "train.stage1_epochs = " << c.train_stage1_epochs << "\n";
  out << "train.weight_decay = " << fmt_g(c.train_weight_decay) << "\n";
  out << "train.seed = " << c.train_seed << "\n";
  return out.str();
}

}  // namespace pfe
