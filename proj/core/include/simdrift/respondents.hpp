#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "simdrift/distribution.hpp"
#include "simdrift/population.hpp"
#include "simdrift/scm.hpp"

namespace simdrift {

struct ChatMessage {
  std::string role;  // "system", "user" or "assistant"
  std::string content;
  bool operator==(const ChatMessage&) const = default;
};

/// The intervention under study. For surveys `interventions[a]` is the
/// leading statement shown before the question in arm a; for agent dialogues
/// it is the agent's system prompt in arm a.
struct Scenario {
  ScenarioKind kind = ScenarioKind::survey;
  std::array<std::string, 2> interventions;
  std::string opening_line;    // agent dialogue: the user's first message
  int turns = 3;               // agent dialogue: agent/user rounds
  std::string persona_suffix;  // appended to the persona prompt
  /// Literal substitutions applied to question text, e.g. {"{title}": "Paris, Texas"}.
  std::map<std::string, std::string> placeholders;

  void validate() const;
  bool operator==(const Scenario&) const = default;
};

void to_json(nlohmann::json& j, const Scenario& s);
void from_json(const nlohmann::json& j, Scenario& s);

/// Identifies one random stream. The derived stream depends on all six
/// fields and nothing else.
struct TrialSeed {
  std::uint64_t master = 0;
  std::string persona_id;
  int iteration = 0;
  int arm = 0;
  int trial = 0;
  std::string question_id;

  std::uint64_t stream() const noexcept;
  TrialSeed with_question(std::string id) const;
  bool operator==(const TrialSeed&) const = default;
};

enum class Speaker { agent, user };

struct DialogueTurn {
  Speaker speaker = Speaker::agent;
  std::string text;
  bool operator==(const DialogueTurn&) const = default;
};

struct Transcript {
  std::string opener;
  std::vector<DialogueTurn> turns;
  bool operator==(const Transcript&) const = default;
};

/// One persona under one arm. `context` holds the rendered persona prompt and
/// intervention (plus the dialogue for agent scenarios); every ask branches
/// from it independently.
struct Session {
  AugmentedPersona persona;
  int arm = 0;
  ScenarioKind kind = ScenarioKind::survey;
  std::vector<ChatMessage> context;
  Transcript transcript;
  TrialSeed seed;
  std::map<std::string, std::string> placeholders;
};

/// Question ids with this prefix re-ask a base persona attribute.
inline constexpr std::string_view kRetentionPrefix = "retention:";

Question retention_question(const AttributeSchema& attribute);
bool is_retention_question(std::string_view question_id) noexcept;

/// Question with scenario placeholders substituted.
Question resolve_question(const Question& q, const std::map<std::string, std::string>& placeholders);

/// Full message list for a single isolated ask: the session context plus
/// this question and nothing else.
std::vector<ChatMessage> branch_messages(const Session& session, const Question& question);

struct PersonaOracle {
  double tvd = 0.0;
  std::vector<double> tvd_per_variable;
  Estimands estimands;
};

/// A simulated user. Implementations must be safe for concurrent calls.
class Respondent {
 public:
  virtual ~Respondent() = default;

  /// One answer on a fresh branch of `session`.
  virtual std::string ask(const Session& session, const Question& question) = 0;

  /// The user's next dialogue message given the conversation so far (from
  /// the user's point of view: system persona prompt, agent turns as "user").
  virtual std::string reply(const std::vector<ChatMessage>& conversation, const TrialSeed& seed) = 0;

  /// Exact answer distribution over the question's options plus "Unknown",
  /// for backends that have one.
  virtual std::optional<DiscreteDistribution> exact_answer(const Session&, const Question&) const {
    return std::nullopt;
  }

  /// Ground-truth drift and effect decomposition for a persona, for backends
  /// that have one.
  virtual std::optional<PersonaOracle> oracle(const AugmentedPersona&, const QuestionBank&) const {
    return std::nullopt;
  }
};

/// The agent side of an agent-dialogue scenario.
class ChatAgent {
 public:
  virtual ~ChatAgent() = default;
  /// `conversation` is from the agent's point of view (system = intervention).
  virtual std::string respond(const std::vector<ChatMessage>& conversation, const TrialSeed& seed) = 0;
};

/// Deterministic filler agent for offline runs; its text never depends on
/// anything but the turn number.
class TemplateAgent final : public ChatAgent {
 public:
  std::string respond(const std::vector<ChatMessage>& conversation, const TrialSeed& seed) override;
};

/// Agent and user converse for `scenario.turns` rounds after the opener.
Transcript run_dialogue(Respondent& user, ChatAgent& agent, const AugmentedPersona& persona, int arm,
                        const Scenario& scenario, const TrialSeed& seed);

/// Builds the branch root for one (persona, arm, trial). Agent scenarios
/// require `agent`.
Session open_session(Respondent& user, ChatAgent* agent, const AugmentedPersona& persona, int arm,
                     const Scenario& scenario, const TrialSeed& seed);

// ---------------------------------------------------------------------------
// SCM-backed respondent

struct ScmRespondentOptions {
  RespondentMode mode = RespondentMode::abductive;
  /// question id -> SCM variable name (the outcome, a negative control or an
  /// elicitable attribute). Questions without an entry are a configuration
  /// error when asked.
  std::map<std::string, std::string> question_map;
};

/// Samples answers from the structural model. Persona attributes are matched
/// to L variables by name; elicited answers are matched to L' variables via
/// the question map, and answers that are not options (e.g. "Unknown") carry
/// no evidence.
class ScmRespondent final : public Respondent {
 public:
  ScmRespondent(ScmSpec spec, ScmRespondentOptions options);

  std::string ask(const Session& session, const Question& question) override;
  std::string reply(const std::vector<ChatMessage>& conversation, const TrialSeed& seed) override;
  std::optional<DiscreteDistribution> exact_answer(const Session& session,
                                                   const Question& question) const override;
  std::optional<PersonaOracle> oracle(const AugmentedPersona& persona,
                                      const QuestionBank& bank) const override;

  const ScmSpec& spec() const noexcept { return spec_; }
  const ScmRespondentOptions& options() const noexcept { return options_; }
  std::size_t l_state(const AugmentedPersona& persona) const;
  Assignment assignment(const AugmentedPersona& persona) const;

  /// Throws ConfigError unless every bank question maps to a variable with
  /// matching options (confounders to L' variables, negative controls to Z).
  void check_bank(const QuestionBank& bank) const;

 private:
  VariableRef resolve(const Question& question) const;

  ScmSpec spec_;
  ScmRespondentOptions options_;
};

/// Question bank mirroring an SCM: outcome Y, one question per Z, and L'
/// variables in declaration order split into groups of `group_size`.
/// Question ids equal variable names.
QuestionBank question_bank_from_scm(const ScmSpec& spec, std::size_t group_size = 2);
std::map<std::string, std::string> identity_question_map(const ScmSpec& spec);

}  // namespace simdrift
