#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

namespace pfe {

enum class QuestionKind { binary, five_point };
enum class PromptSlot { voice, delivery };

QuestionKind parse_question_kind(const std::string& name);
PromptSlot parse_prompt_slot(const std::string& name);
std::string question_kind_name(QuestionKind kind);
std::string prompt_slot_name(PromptSlot slot);

struct ImpressionQuestion;

// Symmetric answer weights: binary 0/1 -> -1/+1, five-point 1..5 -> -2..+2.
// A one-step five-point change moves graded quantities by exactly one unit.
double answer_weight(const ImpressionQuestion& question, int answer);

struct ImpressionQuestion {
  std::string id;
  QuestionKind kind = QuestionKind::binary;
  PromptSlot slot = PromptSlot::voice;
  std::map<int, std::string> phrases;

  int min_value() const { return kind == QuestionKind::binary ? 0 : 1; }
  int max_value() const { return kind == QuestionKind::binary ? 1 : 5; }
  const std::string& phrase(int value) const;
};

class ImpressionSchema {
 public:
  static constexpr std::size_t kQuestionCount = 26;

  static ImpressionSchema load(const std::string& path);
  static ImpressionSchema from_json_text(const std::string& text);

  const std::vector<ImpressionQuestion>& questions() const { return questions_; }
  bool has(const std::string& id) const { return index_.count(id) != 0; }
  std::size_t index_of(const std::string& id) const;
  const ImpressionQuestion& question(const std::string& id) const;

 private:
  void validate() const;

  std::vector<ImpressionQuestion> questions_;
  std::unordered_map<std::string, std::size_t> index_;
};

// One rated speaker: an identifier plus answers keyed by question id.
struct ImpressionRecord {
  std::string speaker_id;
  std::map<std::string, int> answers;
};

void validate_record(const ImpressionSchema& schema, const ImpressionRecord& record);

std::vector<ImpressionRecord> read_records_jsonl(const std::string& path);
void write_records_jsonl(const std::string& path, const std::vector<ImpressionRecord>& records);

struct Prompt {
  std::vector<std::string> phrases;  // schema order, included questions only
  std::string text;
};

// Renders the included answers into the fixed sentence template. Phrases appear
// in schema order inside their slot, so the rendering is deterministic.
Prompt build_prompt(const ImpressionSchema& schema, const ImpressionRecord& record,
                    const std::set<std::string>& include);

// Convenience: prompt over every answered question.
Prompt build_full_prompt(const ImpressionSchema& schema, const ImpressionRecord& record);

// Picks ceil(portion * answered) question ids deterministically from the seed.
// Subsets drawn with the same seed nest: a smaller portion is a prefix of a
// larger one, which keeps ablation levels comparable.
std::set<std::string> subset_prompt(const ImpressionRecord& record, double portion,
                                    std::uint64_t seed);

}  // namespace pfe
