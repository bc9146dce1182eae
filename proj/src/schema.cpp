#include "pfe/schema.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "pfe/rng.hpp"

namespace pfe {

using nlohmann::json;

QuestionKind parse_question_kind(const std::string& name) {
  if (name == "binary") return QuestionKind::binary;
  if (name == "five_point") return QuestionKind::five_point;
  throw std::invalid_argument("parse_question_kind: unknown kind '" + name + "'");
}

PromptSlot parse_prompt_slot(const std::string& name) {
  if (name == "voice") return PromptSlot::voice;
  if (name == "delivery") return PromptSlot::delivery;
  throw std::invalid_argument("parse_prompt_slot: unknown slot '" + name + "'");
}

std::string question_kind_name(QuestionKind kind) {
  return kind == QuestionKind::binary ? "binary" : "five_point";
}

std::string prompt_slot_name(PromptSlot slot) {
  return slot == PromptSlot::voice ? "voice" : "delivery";
}

const std::string& ImpressionQuestion::phrase(int value) const {
  auto it = phrases.find(value);
  if (it == phrases.end()) {
    throw std::out_of_range("ImpressionQuestion::phrase: question '" + id +
                            "' has no phrase for answer " + std::to_string(value));
  }
  return it->second;
}

double answer_weight(const ImpressionQuestion& question, int answer) {
  if (answer < question.min_value() || answer > question.max_value()) {
    throw std::out_of_range("answer_weight: answer " + std::to_string(answer) +
                            " outside the legal range of question '" + question.id + "'");
  }
  if (question.kind == QuestionKind::binary) {
    return answer == 0 ? -1.0 : 1.0;
  }
  return static_cast<double>(answer - 3);
}

ImpressionSchema ImpressionSchema::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("ImpressionSchema::load: cannot open '" + path + "'");
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json_text(buf.str());
}

ImpressionSchema ImpressionSchema::from_json_text(const std::string& text) {
  json root = json::parse(text);
  if (!root.is_object() || !root.contains("questions") || !root["questions"].is_array()) {
    throw std::runtime_error("ImpressionSchema: expected an object with a 'questions' array");
  }
  ImpressionSchema schema;
  for (const auto& q : root["questions"]) {
    ImpressionQuestion question;
    question.id = q.at("id").get<std::string>();
    question.kind = parse_question_kind(q.at("kind").get<std::string>());
    question.slot = parse_prompt_slot(q.at("slot").get<std::string>());
    for (const auto& [key, value] : q.at("phrases").items()) {
      question.phrases[std::stoi(key)] = value.get<std::string>();
    }
    if (schema.index_.count(question.id) != 0) {
      throw std::runtime_error("ImpressionSchema: duplicate question id '" + question.id + "'");
    }
    schema.index_[question.id] = schema.questions_.size();
    schema.questions_.push_back(std::move(question));
  }
  schema.validate();
  return schema;
}

void ImpressionSchema::validate() const {
  if (questions_.size() != kQuestionCount) {
    throw std::runtime_error("ImpressionSchema: expected " + std::to_string(kQuestionCount) +
                             " questions, got " + std::to_string(questions_.size()));
  }
  std::set<std::string> seen_phrases;
  for (const auto& q : questions_) {
    if (q.id.empty()) {
      throw std::runtime_error("ImpressionSchema: empty question id");
    }
    for (int v = q.min_value(); v <= q.max_value(); ++v) {
      auto it = q.phrases.find(v);
      if (it == q.phrases.end()) {
        throw std::runtime_error("ImpressionSchema: question '" + q.id +
                                 "' is missing a phrase for answer " + std::to_string(v));
      }
      const std::string& phrase = it->second;
      if (phrase.empty() || phrase.find(',') != std::string::npos) {
        throw std::runtime_error("ImpressionSchema: question '" + q.id +
                                 "' has an empty or comma-containing phrase");
      }
      if (!seen_phrases.insert(phrase).second) {
        throw std::runtime_error("ImpressionSchema: phrase '" + phrase +
                                 "' appears more than once");
      }
    }
    if (q.phrases.size() != static_cast<std::size_t>(q.max_value() - q.min_value() + 1)) {
      throw std::runtime_error("ImpressionSchema: question '" + q.id +
                               "' has phrases outside its answer range");
    }
  }
}

std::size_t ImpressionSchema::index_of(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) {
    throw std::out_of_range("ImpressionSchema::index_of: unknown question id '" + id + "'");
  }
  return it->second;
}

const ImpressionQuestion& ImpressionSchema::question(const std::string& id) const {
  return questions_[index_of(id)];
}

void validate_record(const ImpressionSchema& schema, const ImpressionRecord& record) {
  if (record.speaker_id.empty()) {
    throw std::runtime_error("validate_record: empty speaker_id");
  }
  for (const auto& [id, answer] : record.answers) {
    if (!schema.has(id)) {
      throw std::runtime_error("validate_record: speaker '" + record.speaker_id +
                               "' answers unknown question '" + id + "'");
    }
    const auto& q = schema.question(id);
    if (answer < q.min_value() || answer > q.max_value()) {
      throw std::runtime_error("validate_record: speaker '" + record.speaker_id +
                               "' has out-of-range answer " + std::to_string(answer) +
                               " for question '" + id + "'");
    }
  }
}

std::vector<ImpressionRecord> read_records_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("read_records_jsonl: cannot open '" + path + "'");
  }
  std::vector<ImpressionRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw std::runtime_error("read_records_jsonl: bad JSON at " + path + ":" +
                               std::to_string(line_no) + ": " + e.what());
    }
    ImpressionRecord record;
    record.speaker_id = j.at("speaker_id").get<std::string>();
    for (const auto& [id, answer] : j.at("answers").items()) {
      record.answers[id] = answer.get<int>();
    }
    records.push_back(std::move(record));
  }
  return records;
}

void write_records_jsonl(const std::string& path, const std::vector<ImpressionRecord>& records) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("write_records_jsonl: cannot open '" + path + "' for writing");
  }
  for (const auto& record : records) {
    json j;
    j["speaker_id"] = record.speaker_id;
    j["answers"] = json::object();
    for (const auto& [id, answer] : record.answers) {
      j["answers"][id] = answer;
    }
    out << j.dump() << "\n";
  }
  if (!out) {
    throw std::runtime_error("write_records_jsonl: write to '" + path + "' failed");
  }
}

Prompt build_prompt(const ImpressionSchema& schema, const ImpressionRecord& record,
                    const std::set<std::string>& include) {
  for (const auto& id : include) {
    if (!schema.has(id)) {
      throw std::runtime_error("build_prompt: unknown question id '" + id + "'");
    }
    if (record.answers.count(id) == 0) {
      throw std::runtime_error("build_prompt: question '" + id + "' is not answered by speaker '" +
                               record.speaker_id + "'");
    }
  }
  Prompt prompt;
  std::vector<std::string> voice;
  std::vector<std::string> delivery;
  for (const auto& q : schema.questions()) {
    if (include.count(q.id) == 0) continue;
    const std::string& phrase = q.phrase(record.answers.at(q.id));
    prompt.phrases.push_back(phrase);
    (q.slot == PromptSlot::voice ? voice : delivery).push_back(phrase);
  }
  auto join = [](const std::vector<std::string>& parts) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (i > 0) out += ", ";
      out += parts[i];
    }
    return out;
  };
  prompt.text = "A speaker whose voice is " + join(voice) + " and who speaks " + join(delivery) + ".";
  return prompt;
}

Prompt build_full_prompt(const ImpressionSchema& schema, const ImpressionRecord& record) {
  std::set<std::string> include;
  for (const auto& [id, answer] : record.answers) {
    (void)answer;
    include.insert(id);
  }
  return build_prompt(schema, record, include);
}

std::set<std::string> subset_prompt(const ImpressionRecord& record, double portion,
                                    std::uint64_t seed) {
  if (!(portion > 0.0) || portion > 1.0) {
    throw std::invalid_argument("subset_prompt: portion must be in (0, 1], got " +
                                std::to_string(portion));
  }
  std::vector<std::string> ids;
  ids.reserve(record.answers.size());
  for (const auto& [id, answer] : record.answers) {
    (void)answer;
    ids.push_back(id);
  }
  if (ids.empty()) {
    throw std::invalid_argument("subset_prompt: record '" + record.speaker_id +
                                "' has no answers");
  }
  Rng rng(derive_seed(seed, fnv1a64(record.speaker_id)));
  rng.shuffle(ids);
  const double n = static_cast<double>(ids.size());
  // Small slack keeps exact products like 0.5 * 4 from rounding up to 3.
  auto count = static_cast<std::size_t>(std::ceil(portion * n - 1e-9));
  count = std::max<std::size_t>(1, std::min(count, ids.size()));
  return std::set<std::string>(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(count));
}

}  // namespace pfe
