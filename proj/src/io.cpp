#include "pfe/io.hpp"

#include <bit>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace pfe {

namespace {

constexpr char kEmbeddingMagic[4] = {'E', 'M', 'B', '1'};
constexpr char kCheckpointMagic[4] = {'P', 'F', 'E', '1'};
constexpr std::uint32_t kCheckpointVersion = 1;

constexpr std::uint32_t kSectionAdapter = 1u << 0;
constexpr std::uint32_t kSectionProjection = 1u << 1;
constexpr std::uint32_t kSectionField = 1u << 2;

void put_bytes(std::string& out, std::uint64_t value, int count) {
  for (int i = 0; i < count; ++i) {
    out.push_back(static_cast<char>((value >> (8 * i)) & 0xffu));
  }
}

void put_u32(std::string& out, std::size_t value) {
  if (value > 0xffffffffull) {
    throw std::invalid_argument("put_u32: value does not fit in 32 bits");
  }
  put_bytes(out, value, 4);
}

void put_u64(std::string& out, std::uint64_t value) { put_bytes(out, value, 8); }

void put_f64(std::string& out, double value) {
  put_bytes(out, std::bit_cast<std::uint64_t>(value), 8);
}

class ByteReader {
 public:
  ByteReader(std::string context, const std::string& data)
      : context_(std::move(context)), data_(data) {}

  std::uint64_t take(int count) {
    if (pos_ + static_cast<std::size_t>(count) > data_.size()) {
      throw std::runtime_error(context_ + ": truncated file");
    }
    std::uint64_t value = 0;
    for (int i = 0; i < count; ++i) {
      value |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i]))
               << (8 * i);
    }
    pos_ += static_cast<std::size_t>(count);
    return value;
  }

  std::uint32_t u32() { return static_cast<std::uint32_t>(take(4)); }
  std::uint64_t u64() { return take(8); }
  double f64() { return std::bit_cast<double>(take(8)); }

  void expect_magic(const char (&magic)[4]) {
    if (pos_ + 4 > data_.size()) {
      throw std::runtime_error(context_ + ": truncated file");
    }
    for (int i = 0; i < 4; ++i) {
      if (data_[pos_ + i] != magic[i]) {
        throw std::runtime_error(context_ + ": bad magic");
      }
    }
    pos_ += 4;
  }

  void expect_end() const {
    if (pos_ != data_.size()) {
      throw std::runtime_error(context_ + ": trailing bytes after payload");
    }
  }

 private:
  std::string context_;
  const std::string& data_;
  std::size_t pos_ = 0;
};

void put_mlp(std::string& out, const MlpParams& params) {
  for (const auto& layer : params.layers) {
    for (double v : layer.weight.data) put_f64(out, v);
    for (double v : layer.bias) put_f64(out, v);
  }
}

void take_mlp(ByteReader& reader, MlpParams& params) {
  for (auto& layer : params.layers) {
    for (double& v : layer.weight.data) v = reader.f64();
    for (double& v : layer.bias) v = reader.f64();
  }
}

void check_mlp_dims(const std::string& context, const MlpParams& params,
                    const std::vector<std::size_t>& dims) {
  bool ok = params.layers.size() + 1 == dims.size();
  for (std::size_t i = 0; ok && i < params.layers.size(); ++i) {
    ok = params.layers[i].weight.rows == dims[i + 1] &&
         params.layers[i].weight.cols == dims[i];
  }
  if (!ok) throw std::invalid_argument(context);
}

std::vector<std::size_t> projection_dims(const Checkpoint& c) {
  return {c.encoder.cond_dim, c.projection_hidden, c.projection_hidden,
          c.projection_hidden, c.embedding_dim};
}

std::vector<std::size_t> field_dims(const Checkpoint& c) {
  const std::size_t input =
      c.embedding_dim + c.field_cond_dim + 2 * c.flow.time_frequencies;
  return {input, c.field_hidden, c.field_hidden, c.field_hidden, c.embedding_dim};
}

}  // namespace

std::string system_name(SystemKind kind) {
  switch (kind) {
    case SystemKind::disc_nolora: return "disc_nolora";
    case SystemKind::disc_lora: return "disc_lora";
    case SystemKind::flow_lora: return "flow_lora";
    case SystemKind::disc_plus_flow: return "disc_plus_flow";
  }
  throw std::invalid_argument("system_name: unknown system kind");
}

SystemKind parse_system_kind(const std::string& name) {
  if (name == "disc_nolora") return SystemKind::disc_nolora;
  if (name == "disc_lora") return SystemKind::disc_lora;
  if (name == "flow_lora") return SystemKind::flow_lora;
  if (name == "disc_plus_flow") return SystemKind::disc_plus_flow;
  throw std::invalid_argument(
      "parse_system_kind: unknown system '" + name +
      "' (expected disc_nolora, disc_lora, flow_lora, or disc_plus_flow)");
}

bool system_uses_flow(SystemKind kind) {
  return kind == SystemKind::flow_lora || kind == SystemKind::disc_plus_flow;
}

std::string fmt_g(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.12g", value);
  return buffer;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_text_file: cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("write_text_file: cannot open '" + path + "'");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw std::runtime_error("write_text_file: write failed for '" + path + "'");
}

std::string sidecar_path(const std::string& embedding_path) {
  return embedding_path + ".jsonl";
}

void write_embedding_set(const std::string& path, const std::vector<Vec>& rows,
                         const std::vector<EmbeddingMeta>& meta) {
  if (rows.size() != meta.size()) {
    throw std::invalid_argument("write_embedding_set: rows and meta sizes differ");
  }
  const std::size_t dim = rows.empty() ? 0 : rows.front().size();
  std::string payload;
  payload.append(kEmbeddingMagic, 4);
  put_u32(payload, rows.size());
  put_u32(payload, dim);

  std::string sidecar;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != dim) {
      throw std::invalid_argument("write_embedding_set: inconsistent row dimensions");
    }
    if (meta[i].index != i) {
      throw std::invalid_argument("write_embedding_set: meta index out of order");
    }
    for (double v : rows[i]) put_f64(payload, v);
    nlohmann::json line;
    line["index"] = meta[i].index;
    line["speaker_id"] = meta[i].speaker_id;
    line["condition_id"] = meta[i].condition_id;
    sidecar += line.dump();
    sidecar += '\n';
  }
  write_text_file(path, payload);
  write_text_file(sidecar_path(path), sidecar);
}

EmbeddingSet read_embedding_set(const std::string& path) {
  const std::string payload = read_text_file(path);
  ByteReader reader("read_embedding_set", payload);
  reader.expect_magic(kEmbeddingMagic);
  const std::size_t count = reader.u32();
  const std::size_t dim = reader.u32();

  EmbeddingSet set;
  set.dim = dim;
  set.rows.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Vec row(dim);
    for (double& v : row) v = reader.f64();
    set.rows.push_back(std::move(row));
  }
  reader.expect_end();

  std::istringstream sidecar(read_text_file(sidecar_path(path)));
  std::string line;
  while (std::getline(sidecar, line)) {
    if (line.empty()) continue;
    nlohmann::json parsed;
    try {
      parsed = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error("read_embedding_set: bad sidecar line: " +
                               std::string(e.what()));
    }
    EmbeddingMeta m;
    m.index = parsed.at("index").get<std::size_t>();
    m.speaker_id = parsed.at("speaker_id").get<std::string>();
    m.condition_id = parsed.at("condition_id").get<std::string>();
    if (m.index != set.meta.size()) {
      throw std::runtime_error("read_embedding_set: sidecar indexes out of order");
    }
    set.meta.push_back(std::move(m));
  }
  if (set.meta.size() != set.rows.size()) {
    throw std::runtime_error("read_embedding_set: sidecar row count " +
                             std::to_string(set.meta.size()) +
                             " does not match embedding count " +
                             std::to_string(set.rows.size()));
  }
  return set;
}

void write_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
  std::string payload;
  payload.append(kCheckpointMagic, 4);
  put_u32(payload, kCheckpointVersion);
  put_u32(payload, static_cast<std::size_t>(checkpoint.system));
  put_u64(payload, checkpoint.encoder.seed);
  put_u32(payload, checkpoint.encoder.phrase_dim);
  put_u32(payload, checkpoint.encoder.cond_dim);
  put_u32(payload, checkpoint.encoder.frozen_rank);
  put_u32(payload, checkpoint.embedding_dim);
  put_u32(payload, checkpoint.lora_rank);
  put_f64(payload, checkpoint.lora_alpha);
  put_u32(payload, checkpoint.projection_hidden);
  put_u32(payload, checkpoint.field_hidden);
  put_u32(payload, checkpoint.field_cond_dim);
  put_f64(payload, checkpoint.flow.sigma_min);
  put_u32(payload, checkpoint.flow.ode_steps);
  put_u32(payload, checkpoint.flow.time_frequencies);

  std::uint32_t mask = 0;
  if (checkpoint.has_adapter()) mask |= kSectionAdapter;
  if (checkpoint.has_projection()) mask |= kSectionProjection;
  if (checkpoint.has_field()) mask |= kSectionField;
  put_u32(payload, mask);

  if (checkpoint.has_adapter()) {
    const auto& adapter = checkpoint.adapter;
    if (adapter.a.rows != checkpoint.lora_rank ||
        adapter.a.cols != checkpoint.encoder.phrase_dim ||
        adapter.b.rows != checkpoint.encoder.cond_dim ||
        adapter.b.cols != checkpoint.lora_rank) {
      throw std::invalid_argument("write_checkpoint: adapter dims do not match header");
    }
    for (double v : adapter.a.data) put_f64(payload, v);
    for (double v : adapter.b.data) put_f64(payload, v);
  }
  if (checkpoint.has_projection()) {
    check_mlp_dims("write_checkpoint: projection dims do not match header",
                   checkpoint.projection.params, projection_dims(checkpoint));
    put_mlp(payload, checkpoint.projection.params);
  }
  if (checkpoint.has_field()) {
    if (checkpoint.field.data_dim != checkpoint.embedding_dim ||
        checkpoint.field.cond_dim != checkpoint.field_cond_dim ||
        checkpoint.field.time_frequencies != checkpoint.flow.time_frequencies) {
      throw std::invalid_argument("write_checkpoint: field header fields inconsistent");
    }
    check_mlp_dims("write_checkpoint: field dims do not match header",
                   checkpoint.field.params, field_dims(checkpoint));
    put_mlp(payload, checkpoint.field.params);
  }
  write_text_file(path, payload);
}

Checkpoint read_checkpoint(const std::string& path) {
  const std::string payload = read_text_file(path);
  ByteReader reader("read_checkpoint", payload);
  reader.expect_magic(kCheckpointMagic);
  const std::uint32_t version = reader.u32();
  if (version != kCheckpointVersion) {
    throw std::runtime_error("read_checkpoint: unsupported version " +
                             std::to_string(version));
  }

  Checkpoint c;
  const std::uint32_t system = reader.u32();
  if (system > static_cast<std::uint32_t>(SystemKind::disc_plus_flow)) {
    throw std::runtime_error("read_checkpoint: unknown system id " +
                             std::to_string(system));
  }
  c.system = static_cast<SystemKind>(system);
  c.encoder.seed = reader.u64();
  c.encoder.phrase_dim = reader.u32();
  c.encoder.cond_dim = reader.u32();
  c.encoder.frozen_rank = reader.u32();
  c.embedding_dim = reader.u32();
  c.lora_rank = reader.u32();
  c.lora_alpha = reader.f64();
  c.projection_hidden = reader.u32();
  c.field_hidden = reader.u32();
  c.field_cond_dim = reader.u32();
  c.flow.sigma_min = reader.f64();
  c.flow.ode_steps = reader.u32();
  c.flow.time_frequencies = reader.u32();

  const std::uint32_t mask = reader.u32();
  const std::uint32_t expected = (c.has_adapter() ? kSectionAdapter : 0u) |
                                 (c.has_projection() ? kSectionProjection : 0u) |
                                 (c.has_field() ? kSectionField : 0u);
  if (mask != expected) {
    throw std::runtime_error("read_checkpoint: section mask does not match dims");
  }

  if (c.has_adapter()) {
    c.adapter.rank = c.lora_rank;
    c.adapter.alpha = c.lora_alpha;
    c.adapter.a = Matrix(c.lora_rank, c.encoder.phrase_dim);
    c.adapter.b = Matrix(c.encoder.cond_dim, c.lora_rank);
    for (double& v : c.adapter.a.data) v = reader.f64();
    for (double& v : c.adapter.b.data) v = reader.f64();
  }
  if (c.has_projection()) {
    c.projection = make_projection_net(c.encoder.cond_dim, c.embedding_dim,
                                       c.projection_hidden, 0);
    take_mlp(reader, c.projection.params);
  }
  if (c.has_field()) {
    c.field = make_vector_field_net(c.embedding_dim, c.field_cond_dim, c.field_hidden,
                                    c.flow.time_frequencies, 0);
    take_mlp(reader, c.field.params);
  }
  reader.expect_end();
  return c;
}

}  // namespace pfe
