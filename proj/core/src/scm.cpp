#include "simdrift/scm.hpp"

#include <cmath>
#include <numeric>
#include <set>

#include "simdrift/errors.hpp"

namespace simdrift {
namespace {

constexpr double kRowTol = 1e-12;

std::size_t joint_states(const std::vector<Variable>& vars) {
  std::size_t n = 1;
  for (const auto& v : vars) n *= v.card();
  return n;
}

std::vector<std::size_t> decompose(std::size_t index, const std::vector<Variable>& vars) {
  std::vector<std::size_t> out(vars.size());
  for (std::size_t i = vars.size(); i-- > 0;) {
    out[i] = index % vars[i].card();
    index /= vars[i].card();
  }
  return out;
}

std::string state_label(const std::vector<Variable>& vars, std::size_t index) {
  if (vars.size() == 1) return vars[0].options.at(index);
  const auto parts = decompose(index, vars);
  std::string out;
  for (std::size_t i = 0; i < vars.size(); ++i) {
    if (i) out += ',';
    out += vars[i].name + "=" + vars[i].options.at(parts[i]);
  }
  return out;
}

void check_row(std::vector<Violation>& out, const std::string& table, const std::string& row,
               const std::vector<double>& probs, std::size_t expected) {
  if (probs.size() != expected) {
    out.push_back({table, row,
                   "row has " + std::to_string(probs.size()) + " entries, expected " +
                       std::to_string(expected)});
    return;
  }
  double sum = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      out.push_back({table, row, "negative or non-finite probability"});
      return;
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > kRowTol) {
    out.push_back({table, row, "row sums to " + std::to_string(sum)});
  }
}

void check_xl_table(std::vector<Violation>& out, const std::string& table, const CptXL& t,
                    std::size_t nl, std::size_t nx, std::size_t card) {
  if (t.size() != nl) {
    out.push_back({table, "", "expected " + std::to_string(nl) + " L rows"});
    return;
  }
  for (std::size_t l = 0; l < nl; ++l) {
    if (t[l].size() != nx) {
      out.push_back({table, "l=" + std::to_string(l), "expected " + std::to_string(nx) + " X rows"});
      continue;
    }
    for (std::size_t x = 0; x < nx; ++x) {
      check_row(out, table, "l=" + std::to_string(l) + ",x=" + std::to_string(x), t[l][x], card);
    }
  }
}

void check_variable(std::vector<Violation>& out, const Variable& v, std::set<std::string>& names) {
  if (v.name.empty()) out.push_back({"variables", "", "variable with empty name"});
  if (!names.insert(v.name).second) out.push_back({"variables", v.name, "duplicate variable name"});
  if (v.options.size() < 1) out.push_back({"variables", v.name, "no options"});
  std::set<std::string> opts(v.options.begin(), v.options.end());
  if (opts.size() != v.options.size()) out.push_back({"variables", v.name, "duplicate options"});
  if (v.encoding && v.encoding->size() != v.options.size()) {
    out.push_back({"variables", v.name, "encoding does not cover every option"});
  }
}

std::vector<std::string> names_of(const std::vector<Variable>& vars) {
  std::vector<std::string> out;
  for (const auto& v : vars) out.push_back(v.name);
  return out;
}

double expected_y(const ScmSpec& spec, int a, std::size_t l, std::size_t x,
                  const std::vector<double>& codes) {
  const auto& row = spec.y_given_axl[static_cast<std::size_t>(a)][l][x];
  double e = 0.0;
  for (std::size_t y = 0; y < row.size(); ++y) e += row[y] * codes[y];
  return e;
}

}  // namespace

std::vector<double> Variable::encoding_or_default() const {
  if (encoding) return *encoding;
  std::vector<double> out(options.size());
  std::iota(out.begin(), out.end(), 1.0);
  return out;
}

std::optional<std::size_t> Variable::option_index(std::string_view option) const {
  for (std::size_t i = 0; i < options.size(); ++i) {
    if (options[i] == option) return i;
  }
  return std::nullopt;
}

std::string_view to_string(RespondentMode m) noexcept {
  return m == RespondentMode::abductive ? "abductive" : "randomized";
}

RespondentMode respondent_mode_from_string(std::string_view s) {
  if (s == "abductive") return RespondentMode::abductive;
  if (s == "randomized") return RespondentMode::randomized;
  throw ConfigError("unknown respondent mode '" + std::string(s) + "'");
}

std::size_t ScmSpec::l_states() const noexcept { return joint_states(l_vars); }
std::size_t ScmSpec::x_states() const noexcept { return joint_states(x_vars); }
std::string ScmSpec::x_label(std::size_t x) const { return state_label(x_vars, x); }
std::vector<std::size_t> ScmSpec::x_components(std::size_t x) const {
  return decompose(x, x_vars);
}

std::vector<Violation> validate_spec(const ScmSpec& spec, std::size_t state_cap) {
  std::vector<Violation> out;
  std::set<std::string> names;
  for (const auto* group : {&spec.l_vars, &spec.x_vars, &spec.z_vars, &spec.lprime_vars}) {
    for (const auto& v : *group) check_variable(out, v, names);
  }
  check_variable(out, spec.y_var, names);
  if (spec.a_name.empty() || !names.insert(spec.a_name).second) {
    out.push_back({"variables", spec.a_name, "treatment name empty or clashes with a variable"});
  }
  if (spec.x_vars.empty()) out.push_back({"variables", "x_vars", "at least one latent variable required"});
  if (spec.y_var.card() < 2) out.push_back({"variables", spec.y_var.name, "outcome needs >= 2 options"});
  if (!out.empty()) return out;

  const auto nl = spec.l_states();
  const auto nx = spec.x_states();
  if (static_cast<double>(nl) * static_cast<double>(nx) > static_cast<double>(state_cap)) {
    out.push_back({"state_space", "", "|L| x |X| = " + std::to_string(nl * nx) +
                                          " exceeds cap " + std::to_string(state_cap)});
    return out;
  }

  const auto l_names = names_of(spec.l_vars);
  auto lx_names = l_names;
  for (const auto& n : names_of(spec.x_vars)) lx_names.push_back(n);
  auto alx_names = std::vector<std::string>{spec.a_name};
  alx_names.insert(alx_names.end(), lx_names.begin(), lx_names.end());
  auto expected_parents = [&](const std::string& table) -> const std::vector<std::string>& {
    if (table == "x_given_l") return l_names;
    if (table == "y_given_axl") return alx_names;
    return lx_names;
  };
  for (const auto& [table, parents] : spec.declared_parents) {
    for (const auto& p : parents) {
      if (!names.count(p)) out.push_back({table, "", "undeclared parent '" + p + "'"});
    }
    if (parents != expected_parents(table)) {
      out.push_back({table, "", "parent list does not match the fixed graph structure"});
    }
  }

  if (spec.x_given_l.size() != nl) {
    out.push_back({"x_given_l", "", "expected " + std::to_string(nl) + " rows"});
  } else {
    for (std::size_t l = 0; l < nl; ++l) {
      check_row(out, "x_given_l", "l=" + std::to_string(l), spec.x_given_l[l], nx);
    }
  }
  if (spec.a1_given_xl.size() != nl) {
    out.push_back({"a_given_xl", "", "expected " + std::to_string(nl) + " rows"});
  } else {
    for (std::size_t l = 0; l < nl; ++l) {
      const auto& row = spec.a1_given_xl[l];
      if (row.size() != nx) {
        out.push_back({"a_given_xl", "l=" + std::to_string(l), "expected one entry per X state"});
        continue;
      }
      for (std::size_t x = 0; x < nx; ++x) {
        if (!(row[x] >= 0.0 && row[x] <= 1.0)) {
          out.push_back({"a_given_xl", "l=" + std::to_string(l) + ",x=" + std::to_string(x),
                         "P(A=1) outside [0,1]"});
        }
      }
    }
  }
  for (int a = 0; a < 2; ++a) {
    check_xl_table(out, "y_given_axl[a=" + std::to_string(a) + "]",
                   spec.y_given_axl[static_cast<std::size_t>(a)], nl, nx, spec.y_var.card());
  }
  if (spec.z_given_xl.size() != spec.z_vars.size()) {
    out.push_back({"z_given_xl", "", "one table per negative control required"});
  } else {
    for (std::size_t j = 0; j < spec.z_vars.size(); ++j) {
      check_xl_table(out, "z_given_xl[" + spec.z_vars[j].name + "]", spec.z_given_xl[j], nl, nx,
                     spec.z_vars[j].card());
    }
  }
  if (spec.lprime_given_xl.size() != spec.lprime_vars.size()) {
    out.push_back({"lprime_given_xl", "", "one table per elicitable attribute required"});
  } else {
    for (std::size_t k = 0; k < spec.lprime_vars.size(); ++k) {
      check_xl_table(out, "lprime_given_xl[" + spec.lprime_vars[k].name + "]",
                     spec.lprime_given_xl[k], nl, nx, spec.lprime_vars[k].card());
    }
  }
  return out;
}

std::size_t l_state_of(const ScmSpec& spec, const std::map<std::string, std::string>& values) {
  std::size_t index = 0;
  for (const auto& v : spec.l_vars) {
    const auto it = values.find(v.name);
    if (it == values.end()) throw DataError("persona lacks SCM attribute '" + v.name + "'");
    const auto opt = v.option_index(it->second);
    if (!opt) throw DataError("'" + it->second + "' is not an option of '" + v.name + "'");
    index = index * v.card() + *opt;
  }
  return index;
}

Assignment assignment_of(const ScmSpec& spec, const std::map<std::string, std::string>& assigned) {
  Assignment out;
  for (const auto& [name, value] : assigned) {
    std::optional<std::size_t> k;
    for (std::size_t i = 0; i < spec.lprime_vars.size(); ++i) {
      if (spec.lprime_vars[i].name == name) k = i;
    }
    if (!k) throw DataError("'" + name + "' is not an elicitable attribute of the SCM");
    const auto opt = spec.lprime_vars[*k].option_index(value);
    if (!opt) throw DataError("'" + value + "' is not an option of '" + name + "'");
    out.emplace_back(*k, *opt);
  }
  return out;
}

std::vector<double> latent_posterior(const ScmSpec& spec, std::size_t l, std::optional<int> arm,
                                     const Assignment& assigned, RespondentMode mode) {
  const auto nx = spec.x_states();
  std::vector<double> q(nx);
  double total = 0.0;
  for (std::size_t x = 0; x < nx; ++x) {
    double w = spec.x_given_l[l][x];
    if (mode == RespondentMode::abductive && arm) {
      const double p1 = spec.a1_given_xl[l][x];
      w *= *arm == 1 ? p1 : 1.0 - p1;
    }
    for (const auto& [k, opt] : assigned) w *= spec.lprime_given_xl[k][l][x][opt];
    q[x] = w;
    total += w;
  }
  if (!(total > 0.0)) {
    throw DegenerateEvidenceError("evidence has zero probability for L state " + std::to_string(l));
  }
  for (auto& v : q) v /= total;
  return q;
}

DiscreteDistribution latent_posterior_distribution(const ScmSpec& spec, std::size_t l,
                                                   std::optional<int> arm,
                                                   const Assignment& assigned, RespondentMode mode) {
  DiscreteDistribution d;
  d.probs = latent_posterior(spec, l, arm, assigned, mode);
  for (std::size_t x = 0; x < d.probs.size(); ++x) d.support.push_back(spec.x_label(x));
  return d;
}

std::optional<VariableRef> find_variable(const ScmSpec& spec, std::string_view name) {
  if (spec.y_var.name == name) return VariableRef{VariableRole::outcome, 0};
  for (std::size_t j = 0; j < spec.z_vars.size(); ++j) {
    if (spec.z_vars[j].name == name) return VariableRef{VariableRole::negative_control, j};
  }
  for (std::size_t k = 0; k < spec.lprime_vars.size(); ++k) {
    if (spec.lprime_vars[k].name == name) return VariableRef{VariableRole::confounder, k};
  }
  return std::nullopt;
}

const Variable& variable(const ScmSpec& spec, VariableRef ref) {
  switch (ref.role) {
    case VariableRole::outcome: return spec.y_var;
    case VariableRole::negative_control: return spec.z_vars.at(ref.index);
    case VariableRole::confounder: return spec.lprime_vars.at(ref.index);
  }
  return spec.y_var;
}

DiscreteDistribution answer_distribution(const ScmSpec& spec, std::size_t l, int arm,
                                         VariableRef var, const Assignment& assigned,
                                         RespondentMode mode) {
  const auto q = latent_posterior(spec, l, arm, assigned, mode);
  const auto& v = variable(spec, var);
  DiscreteDistribution d{v.options, std::vector<double>(v.card(), 0.0)};
  for (std::size_t x = 0; x < q.size(); ++x) {
    if (q[x] == 0.0) continue;
    const std::vector<double>* row = nullptr;
    switch (var.role) {
      case VariableRole::outcome: row = &spec.y_given_axl[static_cast<std::size_t>(arm)][l][x]; break;
      case VariableRole::negative_control: row = &spec.z_given_xl[var.index][l][x]; break;
      case VariableRole::confounder: row = &spec.lprime_given_xl[var.index][l][x]; break;
    }
    for (std::size_t c = 0; c < d.probs.size(); ++c) d.probs[c] += (*row)[c] * q[x];
  }
  return d;
}

double exact_mu(const ScmSpec& spec, std::size_t l, int a, int a_cond, const Assignment& assigned,
                RespondentMode mode) {
  const auto q = latent_posterior(spec, l, a_cond, assigned, mode);
  const auto codes = spec.y_var.encoding_or_default();
  double mu = 0.0;
  for (std::size_t x = 0; x < q.size(); ++x) mu += expected_y(spec, a, l, x, codes) * q[x];
  return mu;
}

Estimands exact_estimands(const ScmSpec& spec, std::size_t l, const Assignment& assigned,
                          RespondentMode mode) {
  Estimands e;
  e.mu11 = exact_mu(spec, l, 1, 1, assigned, mode);
  e.mu10 = exact_mu(spec, l, 1, 0, assigned, mode);
  e.mu01 = exact_mu(spec, l, 0, 1, assigned, mode);
  e.mu00 = exact_mu(spec, l, 0, 0, assigned, mode);
  e.tau_obs = e.mu11 - e.mu00;
  e.att = e.mu11 - e.mu01;
  e.atc = e.mu10 - e.mu00;
  e.sbt = e.mu11 - e.mu10;
  e.sbc = e.mu01 - e.mu00;
  e.sb = 0.5 * (e.sbt + e.sbc);
  e.tau_ate_mix = 0.5 * (e.att + e.atc);

  const auto prior = latent_posterior(spec, l, std::nullopt, assigned, RespondentMode::randomized);
  const auto codes = spec.y_var.encoding_or_default();
  for (std::size_t x = 0; x < prior.size(); ++x) {
    e.tau_ate_prior += (expected_y(spec, 1, l, x, codes) - expected_y(spec, 0, l, x, codes)) * prior[x];
  }
  return e;
}

std::vector<double> exact_tvd_per_variable(const ScmSpec& spec, std::size_t l,
                                           const std::vector<std::size_t>& z_subset,
                                           const Assignment& assigned, RespondentMode mode) {
  std::vector<double> out;
  out.reserve(z_subset.size());
  for (const auto j : z_subset) {
    if (j >= spec.z_vars.size()) throw DataError("negative control index out of range");
    const VariableRef ref{VariableRole::negative_control, j};
    out.push_back(tvd(answer_distribution(spec, l, 1, ref, assigned, mode),
                      answer_distribution(spec, l, 0, ref, assigned, mode)));
  }
  return out;
}

double exact_tvd(const ScmSpec& spec, std::size_t l, const std::vector<std::size_t>& z_subset,
                 const Assignment& assigned, RespondentMode mode) {
  const auto per = exact_tvd_per_variable(spec, l, z_subset, assigned, mode);
  return std::accumulate(per.begin(), per.end(), 0.0);
}

double implied_treatment_rate(const ScmSpec& spec, std::size_t l, const Assignment& assigned) {
  const auto q = latent_posterior(spec, l, std::nullopt, assigned, RespondentMode::randomized);
  double rate = 0.0;
  for (std::size_t x = 0; x < q.size(); ++x) rate += spec.a1_given_xl[l][x] * q[x];
  return rate;
}

}  // namespace simdrift
