#include "simdrift/population.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "simdrift/distribution.hpp"
#include "simdrift/errors.hpp"

namespace simdrift {
namespace {

bool is_trim_char(unsigned char c) { return std::isspace(c) || std::ispunct(c); }

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string fold(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_trim_char(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && is_trim_char(static_cast<unsigned char>(s[e - 1]))) --e;
  return lower(s.substr(b, e - b));
}

bool word_char(unsigned char c) { return std::isalnum(c) != 0; }

struct Occurrence {
  std::size_t option;
  std::size_t begin;
  std::size_t end;
};

std::string display_name(std::string_view name) {
  std::string out(name);
  if (!out.empty()) out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
  return out;
}

std::string join(const std::vector<std::string>& items, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

}  // namespace

void AttributeSchema::validate() const {
  if (name.empty()) throw ConfigError("attribute schema with empty name");
  if (!categorical()) {
    if (!options.empty()) throw ConfigError("free-text schema '" + name + "' lists options");
    if (encoding) throw ConfigError("free-text schema '" + name + "' has an encoding");
    return;
  }
  if (options.size() < 2) throw ConfigError("categorical schema '" + name + "' needs >= 2 options");
  std::set<std::string> seen;
  for (const auto& o : options) {
    const auto key = fold(o);
    if (key.empty()) throw ConfigError("schema '" + name + "' has a blank option");
    if (key == lower(kUnknown)) {
      throw ConfigError("schema '" + name + "' lists the reserved option \"Unknown\"");
    }
    if (!seen.insert(key).second) {
      throw ConfigError("schema '" + name + "' has duplicate option '" + o + "'");
    }
  }
  if (encoding && encoding->size() != options.size()) {
    throw ConfigError("schema '" + name + "' encoding does not cover every option");
  }
}

std::vector<std::string> AttributeSchema::support_with_unknown() const {
  auto out = options;
  out.emplace_back(kUnknown);
  return out;
}

std::vector<double> AttributeSchema::encoding_or_default() const {
  if (encoding) return *encoding;
  std::vector<double> out(options.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<double>(i + 1);
  return out;
}

const std::string* Persona::find(std::string_view name) const {
  for (const auto& [k, v] : attributes) {
    if (k == name) return &v;
  }
  return nullptr;
}

int AugmentedPersona::last_iteration() const noexcept {
  return groups.empty() ? -1 : groups.back().iteration;
}

std::size_t AugmentedPersona::elicited_count() const noexcept {
  std::size_t n = 0;
  for (const auto& g : groups) n += g.pairs.size();
  return n;
}

std::vector<ElicitedPair> AugmentedPersona::elicited() const {
  std::vector<ElicitedPair> out;
  out.reserve(elicited_count());
  for (const auto& g : groups) out.insert(out.end(), g.pairs.begin(), g.pairs.end());
  return out;
}

const ElicitedPair* AugmentedPersona::find_elicited(std::string_view question_id) const {
  for (const auto& g : groups) {
    for (const auto& qa : g.pairs) {
      if (qa.question_id == question_id) return &qa;
    }
  }
  return nullptr;
}

AugmentedPersona augment_persona(const AugmentedPersona& p, int iteration,
                                 std::vector<ElicitedPair> qa) {
  if (iteration <= p.last_iteration()) {
    throw DataError("augment_persona: iteration " + std::to_string(iteration) +
                    " does not follow " + std::to_string(p.last_iteration()) + " for persona " +
                    p.id());
  }
  std::set<std::string> texts;
  for (const auto& g : p.groups) {
    for (const auto& e : g.pairs) texts.insert(e.question);
  }
  for (const auto& e : qa) {
    if (!texts.insert(e.question).second) {
      throw DataError("augment_persona: duplicate question '" + e.question + "' for persona " +
                      p.id());
    }
  }
  AugmentedPersona out = p;
  out.groups.push_back(ElicitedGroup{iteration, std::move(qa)});
  return out;
}

std::string map_answer(std::string_view raw, const AttributeSchema& schema) {
  if (!schema.categorical()) return std::string(raw);

  const auto folded = fold(raw);
  for (const auto& o : schema.options) {
    if (fold(o) == folded) return o;
  }

  const auto hay = lower(raw);
  std::vector<Occurrence> occ;
  for (std::size_t i = 0; i < schema.options.size(); ++i) {
    const auto needle = fold(schema.options[i]);
    if (needle.empty()) continue;
    for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) {
      const auto end = pos + needle.size();
      const bool left_ok = pos == 0 || !word_char(static_cast<unsigned char>(hay[pos - 1])) ||
                           !word_char(static_cast<unsigned char>(needle.front()));
      const bool right_ok = end == hay.size() ||
                            !word_char(static_cast<unsigned char>(hay[end])) ||
                            !word_char(static_cast<unsigned char>(needle.back()));
      if (left_ok && right_ok) occ.push_back({i, pos, end});
    }
  }

  std::set<std::size_t> hits;
  for (const auto& a : occ) {
    const bool nested = std::any_of(occ.begin(), occ.end(), [&](const Occurrence& b) {
      return b.option != a.option && b.begin <= a.begin && a.end <= b.end &&
             (b.end - b.begin) > (a.end - a.begin);
    });
    if (!nested) hits.insert(a.option);
  }
  if (hits.size() == 1) return schema.options[*hits.begin()];
  return std::string(kUnknown);
}

std::string map_question_answer(std::string_view raw, const Question& question) {
  auto mapped = map_answer(raw, question.schema);
  if (mapped != kUnknown || question.format != QuestionFormat::numbered_scale) return mapped;
  // A bare scale code ("3", "3.", "3 - ...") names the option it labels.
  const auto begin = raw.find_first_not_of(" \t\r\n\"'");
  if (begin == std::string_view::npos) return mapped;
  auto end = begin;
  while (end < raw.size() && std::isdigit(static_cast<unsigned char>(raw[end]))) ++end;
  if (end == begin || (end < raw.size() && std::isalnum(static_cast<unsigned char>(raw[end])))) return mapped;
  const double code = std::stod(std::string(raw.substr(begin, end - begin)));
  const auto codes = question.schema.encoding_or_default();
  for (std::size_t i = 0; i < codes.size(); ++i) {
    if (codes[i] == code) return question.schema.options[i];
  }
  return mapped;
}

std::string render_persona_prompt(const AugmentedPersona& p, ScenarioKind scenario,
                                  std::string_view suffix) {
  std::string out = scenario == ScenarioKind::survey
                        ? "You are acting as the following person: Persona:\n"
                        : "You are acting as the following person:\n";
  for (const auto& [name, value] : p.base.attributes) {
    out += display_name(name);
    out += ": ";
    out += value;
    out += '\n';
  }
  if (p.elicited_count() > 0) {
    out += "Additional information about you:\n";
    for (const auto& g : p.groups) {
      for (const auto& qa : g.pairs) {
        out += qa.question;
        out += ' ';
        out += qa.answer;
        out += '\n';
      }
    }
  }
  if (!suffix.empty()) {
    out += suffix;
    out += '\n';
  }
  return out;
}

bool Question::shares_intervention_turn() const noexcept {
  return format != QuestionFormat::characteristic;
}

std::string render_question(const Question& q) {
  const auto options = join(q.schema.options, ", ");
  switch (q.format) {
    case QuestionFormat::inline_options:
      return "Question: " + q.text + "\nPlease answer ONLY with one of the following options: " +
             options;
    case QuestionFormat::characteristic:
    case QuestionFormat::listed_options:
      return "Question: " + q.text + "\nOptions: " + options +
             "\nPlease answer ONLY with one of the options.";
    case QuestionFormat::brief:
      return "Question: " + q.text + "\nPlease answer in a brief sentence.";
    case QuestionFormat::numbered_scale: {
      std::string out = q.text + " Answer with one of:";
      const auto codes = q.schema.encoding_or_default();
      for (std::size_t i = 0; i < q.schema.options.size(); ++i) {
        auto code = std::to_string(codes[i]);
        if (codes[i] == static_cast<double>(static_cast<long long>(codes[i]))) {
          code = std::to_string(static_cast<long long>(codes[i]));
        }
        out += "\n" + code + ": " + q.schema.options[i];
      }
      return out;
    }
  }
  return q.text;
}

std::string_view to_string(QuestionFormat f) noexcept {
  switch (f) {
    case QuestionFormat::inline_options: return "inline_options";
    case QuestionFormat::characteristic: return "characteristic";
    case QuestionFormat::listed_options: return "listed_options";
    case QuestionFormat::brief: return "brief";
    case QuestionFormat::numbered_scale: return "numbered_scale";
  }
  return "listed_options";
}

QuestionFormat question_format_from_string(std::string_view s) {
  for (auto f : {QuestionFormat::inline_options, QuestionFormat::characteristic,
                 QuestionFormat::listed_options, QuestionFormat::brief,
                 QuestionFormat::numbered_scale}) {
    if (to_string(f) == s) return f;
  }
  throw ConfigError("unknown question format '" + std::string(s) + "'");
}

// JSON ----------------------------------------------------------------------

void to_json(nlohmann::json& j, const AttributeSchema& s) {
  j = nlohmann::json::object();
  j["name"] = s.name;
  if (s.categorical()) {
    j["options"] = s.options;
  } else {
    j["kind"] = "free_text";
  }
  if (s.encoding) j["encoding"] = *s.encoding;
}

void from_json(const nlohmann::json& j, AttributeSchema& s) {
  s = AttributeSchema{};
  j.at("name").get_to(s.name);
  const auto kind = j.value("kind", std::string(j.contains("options") ? "categorical" : "free_text"));
  if (kind == "free_text") {
    s.kind = AttributeKind::free_text;
  } else if (kind == "categorical") {
    s.kind = AttributeKind::categorical;
    j.at("options").get_to(s.options);
  } else {
    throw ConfigError("schema '" + s.name + "': unknown kind '" + kind + "'");
  }
  if (j.contains("encoding")) s.encoding = j.at("encoding").get<std::vector<double>>();
}

void to_json(nlohmann::json& j, const Question& q) {
  j = nlohmann::json::object();
  j["id"] = q.id;
  j["text"] = q.text;
  j["format"] = to_string(q.format);
  if (q.schema.categorical()) {
    j["options"] = q.schema.options;
    if (q.schema.encoding) j["encoding"] = *q.schema.encoding;
  }
}

void from_json(const nlohmann::json& j, Question& q) {
  q = Question{};
  j.at("id").get_to(q.id);
  q.format = question_format_from_string(j.value("format", std::string("listed_options")));
  q.schema.name = q.id;
  if (j.contains("options")) {
    q.schema.kind = AttributeKind::categorical;
    j.at("options").get_to(q.schema.options);
    if (j.contains("encoding")) q.schema.encoding = j.at("encoding").get<std::vector<double>>();
  } else {
    q.schema.kind = AttributeKind::free_text;
  }
  if (j.contains("text")) {
    j.at("text").get_to(q.text);
  } else if (q.format == QuestionFormat::characteristic) {
    q.text = "What is your " + q.id + "?";
  } else {
    throw ConfigError("question '" + q.id + "' has no text");
  }
}

void to_json(nlohmann::json& j, const QuestionBank& b) {
  j = nlohmann::json{{"persona_attributes", b.persona_attributes},
                     {"outcome", b.outcome},
                     {"negative_controls", b.negative_controls},
                     {"confounder_groups", b.confounder_groups}};
}

void from_json(const nlohmann::json& j, QuestionBank& b) {
  b = QuestionBank{};
  if (j.contains("persona_attributes")) j.at("persona_attributes").get_to(b.persona_attributes);
  j.at("outcome").get_to(b.outcome);
  if (b.outcome.schema.categorical() && !b.outcome.schema.encoding) {
    b.outcome.schema.encoding = b.outcome.schema.encoding_or_default();
  }
  if (j.contains("negative_controls")) j.at("negative_controls").get_to(b.negative_controls);
  if (j.contains("confounder_groups")) j.at("confounder_groups").get_to(b.confounder_groups);
}

void to_json(nlohmann::json& j, const Persona& p) {
  auto attrs = nlohmann::json::array();
  for (const auto& [k, v] : p.attributes) attrs.push_back(nlohmann::json::array({k, v}));
  j = nlohmann::json{{"id", p.id}, {"attributes", attrs}};
}

void from_json(const nlohmann::json& j, Persona& p) {
  p = Persona{};
  j.at("id").get_to(p.id);
  for (const auto& kv : j.at("attributes")) {
    p.attributes.emplace_back(kv.at(0).get<std::string>(), kv.at(1).get<std::string>());
  }
}

void to_json(nlohmann::json& j, const AugmentedPersona& p) {
  auto groups = nlohmann::json::array();
  for (const auto& g : p.groups) {
    auto pairs = nlohmann::json::array();
    for (const auto& e : g.pairs) {
      pairs.push_back({{"question_id", e.question_id}, {"question", e.question}, {"answer", e.answer}});
    }
    groups.push_back({{"iteration", g.iteration}, {"pairs", pairs}});
  }
  j = nlohmann::json{{"base", p.base}, {"elicited", groups}};
}

void from_json(const nlohmann::json& j, AugmentedPersona& p) {
  p = AugmentedPersona{};
  j.at("base").get_to(p.base);
  for (const auto& g : j.at("elicited")) {
    ElicitedGroup group;
    g.at("iteration").get_to(group.iteration);
    for (const auto& e : g.at("pairs")) {
      group.pairs.push_back({e.at("question_id").get<std::string>(),
                             e.at("question").get<std::string>(),
                             e.at("answer").get<std::string>()});
    }
    p.groups.push_back(std::move(group));
  }
}

}  // namespace simdrift
