#include <algorithm>

#include "simdrift/errors.hpp"
#include "simdrift/respondents.hpp"
#include "simdrift/rng.hpp"

namespace simdrift {
namespace {

DiscreteDistribution with_unknown(const DiscreteDistribution& d) {
  DiscreteDistribution out = d;
  out.support.emplace_back(kUnknown);
  out.probs.push_back(0.0);
  return out;
}

}  // namespace

ScmRespondent::ScmRespondent(ScmSpec spec, ScmRespondentOptions options)
    : spec_(std::move(spec)), options_(std::move(options)) {
  const auto violations = validate_spec(spec_);
  if (!violations.empty()) {
    throw ConfigError("SCM respondent: invalid spec (" + violations.front().table + " " +
                      violations.front().row + ": " + violations.front().message + ")");
  }
  for (const auto& [qid, var] : options_.question_map) {
    if (!find_variable(spec_, var)) {
      throw ConfigError("question map: '" + qid + "' -> unknown SCM variable '" + var + "'");
    }
  }
}

VariableRef ScmRespondent::resolve(const Question& question) const {
  const auto it = options_.question_map.find(question.id);
  if (it == options_.question_map.end()) {
    throw ConfigError("SCM respondent: question '" + question.id + "' has no mapped variable");
  }
  return *find_variable(spec_, it->second);
}

std::size_t ScmRespondent::l_state(const AugmentedPersona& persona) const {
  std::map<std::string, std::string> values(persona.base.attributes.begin(),
                                            persona.base.attributes.end());
  return l_state_of(spec_, values);
}

Assignment ScmRespondent::assignment(const AugmentedPersona& persona) const {
  Assignment out;
  for (const auto& g : persona.groups) {
    for (const auto& qa : g.pairs) {
      const auto it = options_.question_map.find(qa.question_id);
      if (it == options_.question_map.end()) continue;
      const auto ref = find_variable(spec_, it->second);
      if (!ref || ref->role != VariableRole::confounder) continue;
      const auto opt = spec_.lprime_vars[ref->index].option_index(qa.answer);
      if (opt) out.emplace_back(ref->index, *opt);
    }
  }
  return out;
}

std::string ScmRespondent::ask(const Session& session, const Question& question) {
  if (is_retention_question(question.id)) {
    const auto* v = session.persona.base.find(question.id.substr(kRetentionPrefix.size()));
    if (!v) throw ConfigError("retention check for attribute the persona does not have: " + question.id);
    return *v;
  }
  const auto ref = resolve(question);
  const auto dist = answer_distribution(spec_, l_state(session.persona), session.arm, ref,
                                        assignment(session.persona), options_.mode);
  Rng rng(session.seed.with_question(question.id).stream());
  return dist.support[rng.categorical(dist.probs)];
}

std::string ScmRespondent::reply(const std::vector<ChatMessage>& conversation, const TrialSeed&) {
  std::size_t turn = 0;
  for (const auto& m : conversation) turn += m.role == "user" ? 1 : 0;
  return "Thanks, tell me more (reply " + std::to_string(turn) + ").";
}

std::optional<DiscreteDistribution> ScmRespondent::exact_answer(const Session& session,
                                                                const Question& question) const {
  if (is_retention_question(question.id)) {
    const auto* v = session.persona.base.find(question.id.substr(kRetentionPrefix.size()));
    if (!v || !question.schema.categorical()) return std::nullopt;
    auto support = question.schema.support_with_unknown();
    const auto it = std::find(support.begin(), support.end(), *v);
    return DiscreteDistribution::point_mass(support, static_cast<std::size_t>(it - support.begin()));
  }
  const auto ref = resolve(question);
  return with_unknown(answer_distribution(spec_, l_state(session.persona), session.arm, ref,
                                          assignment(session.persona), options_.mode));
}

std::optional<PersonaOracle> ScmRespondent::oracle(const AugmentedPersona& persona,
                                                   const QuestionBank& bank) const {
  std::vector<std::size_t> z_subset;
  for (const auto& q : bank.negative_controls) {
    const auto ref = resolve(q);
    if (ref.role == VariableRole::negative_control) z_subset.push_back(ref.index);
  }
  const auto l = l_state(persona);
  const auto assigned = assignment(persona);
  PersonaOracle out;
  out.tvd_per_variable = exact_tvd_per_variable(spec_, l, z_subset, assigned, options_.mode);
  for (double v : out.tvd_per_variable) out.tvd += v;
  out.estimands = exact_estimands(spec_, l, assigned, options_.mode);
  return out;
}

void ScmRespondent::check_bank(const QuestionBank& bank) const {
  auto check = [&](const Question& q, VariableRole role, const char* what) {
    const auto ref = resolve(q);
    if (ref.role != role) {
      throw ConfigError("question '" + q.id + "' must map to " + what + " variable");
    }
    const auto& v = variable(spec_, ref);
    if (!q.schema.categorical() || q.schema.options != v.options) {
      throw ConfigError("question '" + q.id + "' options differ from SCM variable '" + v.name + "'");
    }
  };
  check(bank.outcome, VariableRole::outcome, "the outcome");
  for (const auto& q : bank.negative_controls) check(q, VariableRole::negative_control, "a negative-control");
  for (const auto& g : bank.confounder_groups) {
    for (const auto& q : g) check(q, VariableRole::confounder, "an elicitable");
  }
  for (const auto& a : bank.persona_attributes) {
    const bool is_l = std::any_of(spec_.l_vars.begin(), spec_.l_vars.end(),
                                  [&](const Variable& v) { return v.name == a.name; });
    if (!is_l) throw ConfigError("persona attribute '" + a.name + "' is not an SCM L variable");
  }
}

QuestionBank question_bank_from_scm(const ScmSpec& spec, std::size_t group_size) {
  if (group_size == 0) throw ConfigError("group size must be positive");
  auto make = [](const Variable& v, QuestionFormat format) {
    Question q;
    q.id = v.name;
    q.text = "What is your " + v.name + "?";
    q.format = format;
    q.schema = AttributeSchema{v.name, AttributeKind::categorical, v.options, v.encoding};
    return q;
  };
  QuestionBank bank;
  for (const auto& v : spec.l_vars) {
    bank.persona_attributes.push_back(AttributeSchema{v.name, AttributeKind::categorical, v.options, std::nullopt});
  }
  bank.outcome = make(spec.y_var, QuestionFormat::inline_options);
  bank.outcome.schema.encoding = spec.y_var.encoding_or_default();
  for (const auto& z : spec.z_vars) bank.negative_controls.push_back(make(z, QuestionFormat::characteristic));
  for (std::size_t k = 0; k < spec.lprime_vars.size(); ++k) {
    if (k % group_size == 0) bank.confounder_groups.emplace_back();
    bank.confounder_groups.back().push_back(make(spec.lprime_vars[k], QuestionFormat::characteristic));
  }
  return bank;
}

std::map<std::string, std::string> identity_question_map(const ScmSpec& spec) {
  std::map<std::string, std::string> out;
  out[spec.y_var.name] = spec.y_var.name;
  for (const auto& z : spec.z_vars) out[z.name] = z.name;
  for (const auto& lp : spec.lprime_vars) out[lp.name] = lp.name;
  return out;
}

}  // namespace simdrift
