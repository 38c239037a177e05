#include <doctest.h>

#include <algorithm>
#include <random>

#include "simdrift/errors.hpp"
#include "simdrift/records.hpp"
#include "test_support.hpp"

using namespace simdrift;

namespace {
TrialRecord rec(std::string persona, int it, int arm, int trial, std::string q) {
  return TrialRecord{std::move(persona), it, arm, trial, std::move(q), QuestionKind::negative_control, "raw", "A"};
}
}  // namespace

TEST_CASE("records sort by (persona, iteration, arm, trial, question)") {
  std::vector<TrialRecord> rs{rec("b", 0, 0, 0, "q"), rec("a", 1, 0, 0, "q"), rec("a", 0, 1, 0, "q"),
                              rec("a", 0, 0, 1, "q"), rec("a", 0, 0, 0, "z"), rec("a", 0, 0, 0, "q")};
  auto shuffled = rs;
  std::mt19937 g(1);
  std::shuffle(shuffled.begin(), shuffled.end(), g);
  sort_records(shuffled);
  std::reverse(rs.begin(), rs.end());
  CHECK(shuffled == rs);
}

TEST_CASE("jsonl output is independent of input order") {
  std::vector<TrialRecord> rs{rec("b", 0, 0, 0, "q"), rec("a", 0, 1, 2, "q"), rec("a", 0, 0, 0, "q")};
  auto other = rs;
  std::reverse(other.begin(), other.end());
  CHECK(records_to_jsonl(rs) == records_to_jsonl(other));
  const auto back = parse_records_jsonl(records_to_jsonl(rs));
  sort_records(rs);
  CHECK(back == rs);
}

TEST_CASE("record json uses the documented keys") {
  const nlohmann::json j = rec("p", 2, 1, 3, "z1");
  for (const char* key : {"persona", "iteration", "arm", "trial", "question", "kind", "raw", "mapped"}) {
    CHECK(j.contains(key));
  }
  CHECK(j["kind"] == "negative_control");
}

TEST_CASE("malformed jsonl names the line") {
  const std::string text = records_to_jsonl({rec("a", 0, 0, 0, "q")}) + "{not json}\n";
  try {
    parse_records_jsonl(text);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK(parse_records_jsonl("").empty());
}

TEST_CASE("write and read round trip") {
  testing::TempDir dir("records");
  std::vector<TrialRecord> rs{rec("a", 0, 0, 0, "q"), rec("a", 0, 1, 0, "q")};
  write_records_jsonl(dir / "r.jsonl", rs);
  CHECK(read_records_jsonl(dir / "r.jsonl") == rs);
  CHECK_THROWS_AS(read_records_jsonl(dir / "missing.jsonl"), Error);
}

TEST_CASE("question kind strings") {
  for (auto k : {QuestionKind::outcome, QuestionKind::negative_control, QuestionKind::confounder,
                 QuestionKind::retention_check}) {
    CHECK(question_kind_from_string(to_string(k)) == k);
  }
  CHECK_THROWS(question_kind_from_string("nope"));
}
