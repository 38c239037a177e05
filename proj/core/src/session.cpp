#include "simdrift/errors.hpp"
#include "simdrift/respondents.hpp"
#include "simdrift/rng.hpp"

namespace simdrift {
namespace {

std::string substitute(std::string text, const std::map<std::string, std::string>& placeholders) {
  for (const auto& [from, to] : placeholders) {
    if (from.empty()) continue;
    for (auto pos = text.find(from); pos != std::string::npos; pos = text.find(from, pos + to.size())) {
      text.replace(pos, from.size(), to);
    }
  }
  return text;
}

std::string_view kind_name(ScenarioKind k) {
  return k == ScenarioKind::survey ? "survey" : "agent_dialogue";
}

}  // namespace

void Scenario::validate() const {
  for (int a = 0; a < 2; ++a) {
    if (interventions[static_cast<std::size_t>(a)].empty()) {
      throw ConfigError("scenario has no intervention text for arm " + std::to_string(a));
    }
  }
  if (kind == ScenarioKind::agent_dialogue) {
    if (turns < 1) throw ConfigError("agent dialogue needs at least one turn");
    if (opening_line.empty()) throw ConfigError("agent dialogue needs an opening user line");
  }
}

void to_json(nlohmann::json& j, const Scenario& s) {
  j = nlohmann::json{{"kind", kind_name(s.kind)},
                     {"interventions", s.interventions},
                     {"placeholders", s.placeholders},
                     {"persona_suffix", s.persona_suffix}};
  if (s.kind == ScenarioKind::agent_dialogue) {
    j["opening_line"] = s.opening_line;
    j["turns"] = s.turns;
  }
}

void from_json(const nlohmann::json& j, Scenario& s) {
  s = Scenario{};
  const auto kind = j.value("kind", std::string("survey"));
  if (kind == "survey") {
    s.kind = ScenarioKind::survey;
  } else if (kind == "agent_dialogue") {
    s.kind = ScenarioKind::agent_dialogue;
  } else {
    throw ConfigError("unknown scenario kind '" + kind + "'");
  }
  const auto iv = j.at("interventions").get<std::vector<std::string>>();
  if (iv.size() != 2) throw ConfigError("scenario needs exactly two interventions (arm 0, arm 1)");
  s.interventions = {iv[0], iv[1]};
  s.opening_line = j.value("opening_line", std::string());
  s.turns = j.value("turns", 3);
  s.persona_suffix = j.value("persona_suffix", std::string());
  if (j.contains("placeholders")) j.at("placeholders").get_to(s.placeholders);
}

std::uint64_t TrialSeed::stream() const noexcept {
  std::uint64_t h = mix64(master);
  h = hash_combine(h, stable_hash(persona_id));
  h = hash_combine(h, static_cast<std::uint64_t>(static_cast<std::int64_t>(iteration)));
  h = hash_combine(h, static_cast<std::uint64_t>(arm));
  h = hash_combine(h, static_cast<std::uint64_t>(static_cast<std::int64_t>(trial)));
  return hash_combine(h, stable_hash(question_id));
}

TrialSeed TrialSeed::with_question(std::string id) const {
  TrialSeed s = *this;
  s.question_id = std::move(id);
  return s;
}

Question retention_question(const AttributeSchema& attribute) {
  Question q;
  q.id = std::string(kRetentionPrefix) + attribute.name;
  q.text = "What is your " + attribute.name + "?";
  q.schema = attribute;
  q.format = attribute.categorical() ? QuestionFormat::characteristic : QuestionFormat::brief;
  return q;
}

bool is_retention_question(std::string_view question_id) noexcept {
  return question_id.substr(0, kRetentionPrefix.size()) == kRetentionPrefix;
}

Question resolve_question(const Question& q, const std::map<std::string, std::string>& placeholders) {
  if (placeholders.empty()) return q;
  Question out = q;
  out.text = substitute(out.text, placeholders);
  return out;
}

std::vector<ChatMessage> branch_messages(const Session& session, const Question& question) {
  auto messages = session.context;
  const auto prompt = render_question(resolve_question(question, session.placeholders));
  if (session.kind == ScenarioKind::survey && question.shares_intervention_turn() &&
      !messages.empty() && messages.back().role == "user") {
    messages.back().content += "\n\n" + prompt;
  } else {
    messages.push_back({"user", prompt});
  }
  return messages;
}

std::string TemplateAgent::respond(const std::vector<ChatMessage>& conversation, const TrialSeed&) {
  std::size_t turn = 0;
  for (const auto& m : conversation) turn += m.role == "assistant" ? 1 : 0;
  return "Here is recommendation message " + std::to_string(turn + 1) + ".";
}

Transcript run_dialogue(Respondent& user, ChatAgent& agent, const AugmentedPersona& persona, int arm,
                        const Scenario& scenario, const TrialSeed& seed) {
  if (scenario.kind != ScenarioKind::agent_dialogue) {
    throw ConfigError("run_dialogue needs an agent-dialogue scenario");
  }
  Transcript t;
  t.opener = scenario.opening_line;
  std::vector<ChatMessage> agent_view{{"system", scenario.interventions.at(static_cast<std::size_t>(arm))},
                                      {"user", scenario.opening_line}};
  std::vector<ChatMessage> user_view{
      {"system", render_persona_prompt(persona, scenario.kind, scenario.persona_suffix)},
      {"assistant", scenario.opening_line}};
  for (int turn = 1; turn <= scenario.turns; ++turn) {
    auto agent_text = agent.respond(agent_view, seed.with_question("dialogue:agent:" + std::to_string(turn)));
    agent_view.push_back({"assistant", agent_text});
    user_view.push_back({"user", agent_text});
    t.turns.push_back({Speaker::agent, std::move(agent_text)});

    auto user_text = user.reply(user_view, seed.with_question("dialogue:user:" + std::to_string(turn)));
    user_view.push_back({"assistant", user_text});
    agent_view.push_back({"user", user_text});
    t.turns.push_back({Speaker::user, std::move(user_text)});
  }
  return t;
}

Session open_session(Respondent& user, ChatAgent* agent, const AugmentedPersona& persona, int arm,
                     const Scenario& scenario, const TrialSeed& seed) {
  if (arm != 0 && arm != 1) throw ConfigError("arm must be 0 or 1");
  Session s;
  s.persona = persona;
  s.arm = arm;
  s.kind = scenario.kind;
  s.seed = seed.with_question("");
  s.placeholders = scenario.placeholders;
  s.context.push_back({"system", render_persona_prompt(persona, scenario.kind, scenario.persona_suffix)});
  if (scenario.kind == ScenarioKind::survey) {
    s.context.push_back({"user", scenario.interventions.at(static_cast<std::size_t>(arm))});
    return s;
  }
  if (agent == nullptr) throw ConfigError("agent-dialogue scenario needs an agent backend");
  s.transcript = run_dialogue(user, *agent, persona, arm, scenario, s.seed);
  s.context.push_back({"assistant", s.transcript.opener});
  for (const auto& turn : s.transcript.turns) {
    s.context.push_back({turn.speaker == Speaker::agent ? "user" : "assistant", turn.text});
  }
  return s;
}

}  // namespace simdrift
