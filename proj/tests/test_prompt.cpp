#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>

#include <doctest.h>

#include "pfe/rng.hpp"
#include "pfe/schema.hpp"
#include "testutil.hpp"

using namespace pfe;

namespace {

const ImpressionSchema& fixture_schema() {
  static ImpressionSchema schema =
      ImpressionSchema::load(std::string(PFE_DATA_DIR) + "/impression_schema.json");
  return schema;
}

ImpressionRecord full_record(const ImpressionSchema& schema, std::uint64_t seed) {
  Rng rng(seed);
  ImpressionRecord record;
  record.speaker_id = "spk_" + std::to_string(seed);
  for (const auto& q : schema.questions()) {
    record.answers[q.id] =
        q.min_value() + static_cast<int>(rng.index(
                            static_cast<std::size_t>(q.max_value() - q.min_value() + 1)));
  }
  return record;
}

}  // namespace

TEST_CASE("schema fixture has 26 well-formed questions") {
  const auto& schema = fixture_schema();
  CHECK(schema.questions().size() == 26);
  std::size_t voice = 0;
  std::size_t delivery = 0;
  for (const auto& q : schema.questions()) {
    if (q.slot == PromptSlot::voice) ++voice;
    else ++delivery;
    CHECK(q.phrases.size() == static_cast<std::size_t>(q.kind == QuestionKind::binary ? 2 : 5));
  }
  CHECK(voice == 13);
  CHECK(delivery == 13);
  CHECK(schema.question("pitch").phrase(1) == "high-pitched");
  CHECK(schema.question("speed").phrase(2) == "somewhat slowly");
}

TEST_CASE("schema rejects wrong question counts and duplicate phrases") {
  CHECK_THROWS(ImpressionSchema::from_json_text(R"({"questions": []})"));
  CHECK_THROWS(ImpressionSchema::from_json_text(R"(not json)"));
}

TEST_CASE("record validation flags unknown ids and out-of-range answers") {
  const auto& schema = fixture_schema();
  ImpressionRecord record;
  record.speaker_id = "spk";
  record.answers["pitch"] = 1;
  CHECK_NOTHROW(validate_record(schema, record));

  record.answers["no_such_question"] = 1;
  CHECK_THROWS_WITH_AS(validate_record(schema, record),
                       doctest::Contains("unknown question"), std::runtime_error);
  record.answers.erase("no_such_question");

  record.answers["speed"] = 6;
  CHECK_THROWS_WITH_AS(validate_record(schema, record),
                       doctest::Contains("out-of-range"), std::runtime_error);
  record.answers["speed"] = 0;
  CHECK_THROWS(validate_record(schema, record));
  record.answers["pitch"] = 2;
  record.answers.erase("speed");
  CHECK_THROWS(validate_record(schema, record));
}

TEST_CASE("build_prompt renders the two-slot template") {
  const auto& schema = fixture_schema();
  ImpressionRecord record;
  record.speaker_id = "spk";
  record.answers["pitch"] = 1;
  record.answers["speed"] = 2;
  record.answers["warmth"] = 4;

  Prompt p = build_prompt(schema, record, {"pitch", "speed", "warmth"});
  CHECK(p.phrases == std::vector<std::string>{"high-pitched", "somewhat warm", "somewhat slowly"});
  CHECK(p.text == "A speaker whose voice is high-pitched, somewhat warm and who speaks somewhat slowly.");

  SUBCASE("empty include keeps the template skeleton") {
    Prompt empty = build_prompt(schema, record, {});
    CHECK(empty.phrases.empty());
    CHECK(empty.text == "A speaker whose voice is  and who speaks .");
  }

  SUBCASE("include must reference known, answered questions") {
    CHECK_THROWS_WITH_AS(build_prompt(schema, record, {"pitch", "bogus"}),
                         doctest::Contains("unknown question"), std::runtime_error);
    CHECK_THROWS_WITH_AS(build_prompt(schema, record, {"pitch", "loudness"}),
                         doctest::Contains("not answered"), std::runtime_error);
  }
}

TEST_CASE("full prompt lists phrases in schema order") {
  const auto& schema = fixture_schema();
  ImpressionRecord record = full_record(schema, 11);
  Prompt p = build_full_prompt(schema, record);
  REQUIRE(p.phrases.size() == 26);
  std::size_t pos = 0;
  for (const auto& q : schema.questions()) {
    CHECK(p.phrases[pos] == q.phrase(record.answers.at(q.id)));
    ++pos;
  }
}

TEST_CASE("distinct answer sets never collide after rendering") {
  const auto& schema = fixture_schema();
  std::map<std::string, std::multiset<std::string>> seen;
  Rng rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    ImpressionRecord record = full_record(schema, 1000 + static_cast<std::uint64_t>(trial));
    std::set<std::string> include;
    for (const auto& q : schema.questions()) {
      if (rng.uniform() < 0.5) include.insert(q.id);
    }
    Prompt p = build_prompt(schema, record, include);
    std::multiset<std::string> bag(p.phrases.begin(), p.phrases.end());
    auto [it, inserted] = seen.emplace(p.text, bag);
    if (!inserted) CHECK(it->second == bag);
  }
}

TEST_CASE("subset_prompt sizes, determinism and nesting") {
  const auto& schema = fixture_schema();
  ImpressionRecord record = full_record(schema, 5);

  SUBCASE("portion one keeps every answered question") {
    auto all = subset_prompt(record, 1.0, 42);
    CHECK(all.size() == 26);
  }

  SUBCASE("a third of 26 questions rounds up to 9") {
    auto third = subset_prompt(record, 1.0 / 3.0, 42);
    CHECK(third.size() == 9);
  }

  SUBCASE("tiny portions still keep one question") {
    auto one = subset_prompt(record, 1e-6, 42);
    CHECK(one.size() == 1);
  }

  SUBCASE("same seed reproduces the subset, different seeds move it") {
    auto a = subset_prompt(record, 0.5, 42);
    auto b = subset_prompt(record, 0.5, 42);
    CHECK(a == b);
    bool any_difference = false;
    for (std::uint64_t seed = 43; seed < 48; ++seed) {
      if (subset_prompt(record, 0.5, seed) != a) any_difference = true;
    }
    CHECK(any_difference);
  }

  SUBCASE("smaller portions nest inside larger ones at the same seed") {
    auto small = subset_prompt(record, 1.0 / 3.0, 7);
    auto large = subset_prompt(record, 2.0 / 3.0, 7);
    CHECK(std::includes(large.begin(), large.end(), small.begin(), small.end()));
  }

  SUBCASE("portion bounds are enforced") {
    CHECK_THROWS_AS(subset_prompt(record, 0.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(subset_prompt(record, 1.5, 1), std::invalid_argument);
    CHECK_THROWS_AS(subset_prompt(record, -0.2, 1), std::invalid_argument);
  }
}

TEST_CASE("records survive a JSONL round trip") {
  const auto& schema = fixture_schema();
  std::vector<ImpressionRecord> records;
  for (std::uint64_t s = 0; s < 5; ++s) records.push_back(full_record(schema, s));
  records[2].answers.erase("pitch");

  const auto path = std::filesystem::temp_directory_path() / "pfe_records_test.jsonl";
  write_records_jsonl(path.string(), records);
  auto loaded = read_records_jsonl(path.string());
  REQUIRE(loaded.size() == records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    CHECK(loaded[i].speaker_id == records[i].speaker_id);
    CHECK(loaded[i].answers == records[i].answers);
  }
  std::filesystem::remove(path);

  CHECK_THROWS(read_records_jsonl("/no/such/dir/records.jsonl"));
}
