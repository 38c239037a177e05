#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace simdrift {

enum class QuestionKind { outcome, negative_control, confounder, retention_check };

std::string_view to_string(QuestionKind k) noexcept;
QuestionKind question_kind_from_string(std::string_view s);

/// One answer from one isolated branch. (persona, iteration, arm, trial,
/// question) is unique within a run.
struct TrialRecord {
  std::string persona_id;
  int iteration = 0;
  int arm = 0;
  int trial = 0;
  std::string question_id;
  QuestionKind kind = QuestionKind::outcome;
  std::string raw;
  std::string mapped;

  bool operator==(const TrialRecord&) const = default;
};

/// Lexicographic on (persona, iteration, arm, trial, question).
bool record_key_less(const TrialRecord& a, const TrialRecord& b) noexcept;

void sort_records(std::vector<TrialRecord>& records);

void to_json(nlohmann::json& j, const TrialRecord& r);
void from_json(const nlohmann::json& j, TrialRecord& r);

/// One JSON object per line, sorted by key so output bytes never depend on
/// execution order.
std::string records_to_jsonl(std::vector<TrialRecord> records);
void write_records_jsonl(const std::filesystem::path& path, std::vector<TrialRecord> records);

/// Throws DataError naming the 1-based line of the first malformed entry.
std::vector<TrialRecord> parse_records_jsonl(std::string_view text);
std::vector<TrialRecord> read_records_jsonl(const std::filesystem::path& path);

}  // namespace simdrift
