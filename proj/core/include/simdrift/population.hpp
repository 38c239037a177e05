#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace simdrift {

enum class AttributeKind { categorical, free_text };

/// Declares one persona attribute or question answer space.
///
/// Categorical schemas carry at least two options that stay distinct after
/// case-insensitive trimming. The reserved "Unknown" category is never listed;
/// analysis code appends it. When `encoding` is set it holds one real value per
/// option, in option order.
struct AttributeSchema {
  std::string name;
  AttributeKind kind = AttributeKind::categorical;
  std::vector<std::string> options;
  std::optional<std::vector<double>> encoding;

  bool categorical() const noexcept { return kind == AttributeKind::categorical; }

  /// Throws ConfigError describing the first violated invariant.
  void validate() const;

  /// Options followed by "Unknown".
  std::vector<std::string> support_with_unknown() const;

  /// Declared encoding, or 1..k in option order when none is declared.
  std::vector<double> encoding_or_default() const;

  bool operator==(const AttributeSchema&) const = default;
};

struct Persona {
  std::string id;
  std::vector<std::pair<std::string, std::string>> attributes;

  const std::string* find(std::string_view name) const;
  bool operator==(const Persona&) const = default;
};

struct ElicitedPair {
  std::string question_id;
  std::string question;
  std::string answer;
  bool operator==(const ElicitedPair&) const = default;
};

struct ElicitedGroup {
  int iteration = 0;
  std::vector<ElicitedPair> pairs;
  bool operator==(const ElicitedGroup&) const = default;
};

/// A seed persona plus the confounder answers fixed into it so far. Groups
/// are only ever appended, each tagged with the iteration it first applies to.
struct AugmentedPersona {
  Persona base;
  std::vector<ElicitedGroup> groups;

  static AugmentedPersona from(Persona p) { return AugmentedPersona{std::move(p), {}}; }

  const std::string& id() const noexcept { return base.id; }
  /// -1 when nothing has been elicited yet.
  int last_iteration() const noexcept;
  std::size_t elicited_count() const noexcept;
  std::vector<ElicitedPair> elicited() const;
  const ElicitedPair* find_elicited(std::string_view question_id) const;

  bool operator==(const AugmentedPersona&) const = default;
};

/// Returns `p` with `qa` appended under `iteration`. Rejects an iteration that
/// does not strictly follow the last recorded one and any question text that
/// the persona already carries.
AugmentedPersona augment_persona(const AugmentedPersona& p, int iteration,
                                 std::vector<ElicitedPair> qa);

/// Maps a raw reply onto one of the schema's options, or "Unknown".
///
/// 1. exact match after case folding and trimming whitespace/punctuation;
/// 2. exactly one option occurs as a case-insensitive substring, counting
///    only occurrences not nested inside a longer matching option;
/// 3. otherwise "Unknown".
std::string map_answer(std::string_view raw, const AttributeSchema& schema);

enum class ScenarioKind { survey, agent_dialogue };

/// Persona block used as the respondent's system prompt. `suffix` is appended
/// as a final line when non-empty (the agent scenario's "You are looking
/// for ..." line).
std::string render_persona_prompt(const AugmentedPersona& p, ScenarioKind scenario,
                                  std::string_view suffix = {});

/// How a question is phrased to a respondent.
enum class QuestionFormat {
  inline_options,  // "Question: ...\nPlease answer ONLY with one of the following options: a, b"
  characteristic,  // "Question: What is your <name>?\nOptions: ...\nPlease answer ONLY with one of the options."
  listed_options,  // "Question: ...\nOptions: ...\nPlease answer ONLY with one of the options."
  brief,           // "Question: ...\nPlease answer in a brief sentence."
  numbered_scale,  // "... Answer with one of:\n1: ...\n2: ..."
};

struct Question {
  std::string id;
  std::string text;
  QuestionFormat format = QuestionFormat::listed_options;
  AttributeSchema schema;

  /// Survey-style formats are sent in the same user turn as the leading
  /// statement; `characteristic` questions get their own turn.
  bool shares_intervention_turn() const noexcept;
  bool operator==(const Question&) const = default;
};

/// map_answer, plus: for numbered scales, a reply that starts with a bare
/// scale code maps to the option carrying that code.
std::string map_question_answer(std::string_view raw, const Question& question);

/// The prompt text for one question (without any persona or intervention).
std::string render_question(const Question& q);

struct QuestionBank {
  std::vector<AttributeSchema> persona_attributes;
  Question outcome;
  std::vector<Question> negative_controls;
  std::vector<std::vector<Question>> confounder_groups;

  /// Throws ConfigError: outcome must be categorical with an encoding (the
  /// 1..k default is materialized by `from_json`), groups non-empty, ids unique.
  void validate() const;
  const Question* find(std::string_view id) const;
  const AttributeSchema* persona_attribute(std::string_view name) const;

  bool operator==(const QuestionBank&) const = default;
};

QuestionBank load_question_bank(const std::filesystem::path& path);

void to_json(nlohmann::json& j, const AttributeSchema& s);
void from_json(const nlohmann::json& j, AttributeSchema& s);
void to_json(nlohmann::json& j, const Question& q);
void from_json(const nlohmann::json& j, Question& q);
void to_json(nlohmann::json& j, const QuestionBank& b);
void from_json(const nlohmann::json& j, QuestionBank& b);
void to_json(nlohmann::json& j, const Persona& p);
void from_json(const nlohmann::json& j, Persona& p);
void to_json(nlohmann::json& j, const AugmentedPersona& p);
void from_json(const nlohmann::json& j, AugmentedPersona& p);

std::string_view to_string(QuestionFormat f) noexcept;
QuestionFormat question_format_from_string(std::string_view s);

// ---------------------------------------------------------------------------
// Persona sources

/// Header + rows of a delimited text table.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// Reads CSV (or TSV, chosen by `.tsv` extension or a tab in the header line).
/// Supports RFC 4180 quoting.
Table read_table(const std::filesystem::path& path);
Table parse_table(std::string_view text, char delimiter);

struct PersonaSample {
  std::vector<Persona> personas;
  bool with_replacement = false;
};

/// Draws `n` personas from `table` under `seed`, without replacement when the
/// table has at least `n` rows. Only the columns named by `schemas` are kept.
/// Persona ids come from an `id` column when present, else `row<index>`;
/// repeated draws get a `#k` suffix so every persona id stays unique.
PersonaSample sample_personas(const Table& table, const std::vector<AttributeSchema>& schemas,
                              std::size_t n, std::uint64_t seed);

PersonaSample load_personas(const std::filesystem::path& source,
                            const std::vector<AttributeSchema>& schemas, std::size_t n,
                            std::uint64_t seed);

}  // namespace simdrift
