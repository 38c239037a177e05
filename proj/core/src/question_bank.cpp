#include <fstream>
#include <set>

#include "simdrift/errors.hpp"
#include "simdrift/population.hpp"

namespace simdrift {

void QuestionBank::validate() const {
  std::set<std::string> ids;
  auto check = [&](const Question& q, const char* role) {
    if (q.id.empty()) throw ConfigError(std::string(role) + " question with empty id");
    if (!ids.insert(q.id).second) throw ConfigError("duplicate question id '" + q.id + "'");
    if (q.text.empty()) throw ConfigError("question '" + q.id + "' has empty text");
    q.schema.validate();
    const bool needs_options = q.format != QuestionFormat::brief;
    if (needs_options != q.schema.categorical()) {
      throw ConfigError("question '" + q.id + "': format " + std::string(to_string(q.format)) +
                        (needs_options ? " needs options" : " takes free text"));
    }
  };
  for (const auto& a : persona_attributes) a.validate();
  check(outcome, "outcome");
  if (!outcome.schema.categorical() || !outcome.schema.encoding) {
    throw ConfigError("outcome question '" + outcome.id + "' must be categorical with an encoding");
  }
  for (const auto& q : negative_controls) {
    check(q, "negative control");
    if (!q.schema.categorical()) {
      throw ConfigError("negative control '" + q.id + "' must be categorical");
    }
  }
  for (std::size_t g = 0; g < confounder_groups.size(); ++g) {
    if (confounder_groups[g].empty()) {
      throw ConfigError("confounder group " + std::to_string(g) + " is empty");
    }
    for (const auto& q : confounder_groups[g]) check(q, "confounder");
  }
}

const Question* QuestionBank::find(std::string_view id) const {
  if (outcome.id == id) return &outcome;
  for (const auto& q : negative_controls) {
    if (q.id == id) return &q;
  }
  for (const auto& g : confounder_groups) {
    for (const auto& q : g) {
      if (q.id == id) return &q;
    }
  }
  return nullptr;
}

const AttributeSchema* QuestionBank::persona_attribute(std::string_view name) const {
  for (const auto& a : persona_attributes) {
    if (a.name == name) return &a;
  }
  return nullptr;
}

QuestionBank load_question_bank(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open question bank " + path.string());
  QuestionBank bank;
  try {
    bank = nlohmann::json::parse(in).get<QuestionBank>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("question bank " + path.string() + ": " + e.what());
  }
  bank.validate();
  return bank;
}

}  // namespace simdrift
