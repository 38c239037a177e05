#include "simdrift/records.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <tuple>

#include "simdrift/errors.hpp"

namespace simdrift {

std::string_view to_string(QuestionKind k) noexcept {
  switch (k) {
    case QuestionKind::outcome: return "outcome";
    case QuestionKind::negative_control: return "negative_control";
    case QuestionKind::confounder: return "confounder";
    case QuestionKind::retention_check: return "retention_check";
  }
  return "outcome";
}

QuestionKind question_kind_from_string(std::string_view s) {
  for (auto k : {QuestionKind::outcome, QuestionKind::negative_control, QuestionKind::confounder,
                 QuestionKind::retention_check}) {
    if (to_string(k) == s) return k;
  }
  throw DataError("unknown question kind '" + std::string(s) + "'");
}

bool record_key_less(const TrialRecord& a, const TrialRecord& b) noexcept {
  return std::tie(a.persona_id, a.iteration, a.arm, a.trial, a.question_id) <
         std::tie(b.persona_id, b.iteration, b.arm, b.trial, b.question_id);
}

void sort_records(std::vector<TrialRecord>& records) {
  std::sort(records.begin(), records.end(), record_key_less);
}

void to_json(nlohmann::json& j, const TrialRecord& r) {
  j = nlohmann::json{{"persona", r.persona_id}, {"iteration", r.iteration},  {"arm", r.arm},
                     {"trial", r.trial},        {"question", r.question_id}, {"kind", to_string(r.kind)},
                     {"raw", r.raw},            {"mapped", r.mapped}};
}

void from_json(const nlohmann::json& j, TrialRecord& r) {
  j.at("persona").get_to(r.persona_id);
  j.at("iteration").get_to(r.iteration);
  j.at("arm").get_to(r.arm);
  j.at("trial").get_to(r.trial);
  j.at("question").get_to(r.question_id);
  r.kind = question_kind_from_string(j.at("kind").get<std::string>());
  j.at("raw").get_to(r.raw);
  j.at("mapped").get_to(r.mapped);
  if (r.arm != 0 && r.arm != 1) throw DataError("record arm must be 0 or 1");
}

std::string records_to_jsonl(std::vector<TrialRecord> records) {
  sort_records(records);
  std::string out;
  for (const auto& r : records) {
    out += nlohmann::json(r).dump();
    out += '\n';
  }
  return out;
}

void write_records_jsonl(const std::filesystem::path& path, std::vector<TrialRecord> records) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp);
    out << records_to_jsonl(std::move(records));
  }
  std::filesystem::rename(tmp, path);
}

std::vector<TrialRecord> parse_records_jsonl(std::string_view text) {
  std::vector<TrialRecord> out;
  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const auto line = text.substr(pos, end - pos);
    pos = end + 1;
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      out.push_back(nlohmann::json::parse(line).get<TrialRecord>());
    } catch (const nlohmann::json::exception& e) {
      throw DataError("records line " + std::to_string(lineno) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError("records line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<TrialRecord> read_records_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open records file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_records_jsonl(buf.str());
}

}  // namespace simdrift
