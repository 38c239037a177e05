#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "simdrift/distribution.hpp"

namespace simdrift {

struct Variable {
  std::string name;
  std::vector<std::string> options;
  std::optional<std::vector<double>> encoding;

  std::size_t card() const noexcept { return options.size(); }
  std::vector<double> encoding_or_default() const;
  std::optional<std::size_t> option_index(std::string_view option) const;
  bool operator==(const Variable&) const = default;
};

/// [parent state][child category], or [l][x][category] for (X, L)-parented tables.
using CptRows = std::vector<std::vector<double>>;
using CptXL = std::vector<CptRows>;

/// Whether the simulated respondent lets the treatment context inform its
/// inferred latent traits (abductive) or keeps the latent prior fixed
/// (randomized).
enum class RespondentMode { abductive, randomized };

std::string_view to_string(RespondentMode m) noexcept;
RespondentMode respondent_mode_from_string(std::string_view s);

/// Discrete structural causal model with graph L -> X -> A -> Y, where Y also
/// depends on (X, L) and every negative control Z_j and elicitable attribute
/// L'_k is a child of (X, L) only.
///
/// Joint states of `l_vars` and of `x_vars` are indexed in mixed radix with the
/// first declared variable most significant. All tables are indexed
/// [l][x][...]; the treatment table stores P(A=1 | x, l) and the outcome table
/// is indexed [a][l][x][y].
struct ScmSpec {
  std::string name;
  std::vector<Variable> l_vars;
  std::vector<Variable> x_vars;
  std::string a_name = "A";
  Variable y_var;
  std::vector<Variable> z_vars;
  std::vector<Variable> lprime_vars;

  CptRows x_given_l;
  CptRows a1_given_xl;
  std::array<CptXL, 2> y_given_axl;
  std::vector<CptXL> z_given_xl;
  std::vector<CptXL> lprime_given_xl;

  /// Parent lists as written in a serialized document, keyed by table name.
  /// Empty for programmatically built specs. Checked by validate_spec.
  std::map<std::string, std::vector<std::string>> declared_parents;

  std::size_t l_states() const noexcept;
  std::size_t x_states() const noexcept;

  /// Label of a joint latent state, e.g. "athlete" or "x1=a,x2=b".
  std::string x_label(std::size_t x) const;
  std::vector<std::size_t> x_components(std::size_t x) const;

  bool operator==(const ScmSpec&) const = default;
};

struct Violation {
  std::string table;
  std::string row;
  std::string message;
};

inline constexpr std::size_t kDefaultStateCap = 1'000'000;

/// Checks every structural and normalization invariant; never throws.
std::vector<Violation> validate_spec(const ScmSpec& spec, std::size_t state_cap = kDefaultStateCap);

/// Elicited L' values, as (lprime index, option index) pairs.
using Assignment = std::vector<std::pair<std::size_t, std::size_t>>;

/// Joint L state from persona attribute values keyed by L variable name.
/// Throws DataError when a variable is missing or a value is not an option.
std::size_t l_state_of(const ScmSpec& spec, const std::map<std::string, std::string>& values);

/// Throws DataError for unknown L' names or options.
Assignment assignment_of(const ScmSpec& spec, const std::map<std::string, std::string>& assigned);

/// q(x) proportional to P(x|l) * [P(A=arm|x,l) if abductive and arm given]
/// * prod_k P(L'_k = assigned_k | x, l). Throws DegenerateEvidenceError when
/// the evidence has zero probability.
std::vector<double> latent_posterior(const ScmSpec& spec, std::size_t l, std::optional<int> arm,
                                     const Assignment& assigned, RespondentMode mode);

DiscreteDistribution latent_posterior_distribution(const ScmSpec& spec, std::size_t l,
                                                   std::optional<int> arm,
                                                   const Assignment& assigned, RespondentMode mode);

enum class VariableRole { outcome, negative_control, confounder };

struct VariableRef {
  VariableRole role = VariableRole::outcome;
  std::size_t index = 0;
  bool operator==(const VariableRef&) const = default;
};

/// Looks up Y, a Z or an L' by name.
std::optional<VariableRef> find_variable(const ScmSpec& spec, std::string_view name);
const Variable& variable(const ScmSpec& spec, VariableRef ref);

/// sum_x P(variable | arm, x, l) q(x), with q from latent_posterior.
DiscreteDistribution answer_distribution(const ScmSpec& spec, std::size_t l, int arm,
                                         VariableRef var, const Assignment& assigned,
                                         RespondentMode mode);

/// sum_x E[Y | A=a, x, l] P(x | A=a_cond, l, assigned). The posterior is the
/// abductive one unless `mode` is randomized, in which case a_cond is ignored.
double exact_mu(const ScmSpec& spec, std::size_t l, int a, int a_cond, const Assignment& assigned,
                RespondentMode mode = RespondentMode::abductive);

struct Estimands {
  double mu11 = 0, mu10 = 0, mu01 = 0, mu00 = 0;
  double tau_obs = 0;
  double tau_ate_prior = 0;
  double tau_ate_mix = 0;
  double att = 0, atc = 0;
  double sbt = 0, sbc = 0, sb = 0;
};

Estimands exact_estimands(const ScmSpec& spec, std::size_t l, const Assignment& assigned,
                          RespondentMode mode = RespondentMode::abductive);

/// 0.5 * sum over the listed Z variables and their categories of
/// |P(Z | A=1, .) - P(Z | A=0, .)|.
double exact_tvd(const ScmSpec& spec, std::size_t l, const std::vector<std::size_t>& z_subset,
                 const Assignment& assigned, RespondentMode mode);

std::vector<double> exact_tvd_per_variable(const ScmSpec& spec, std::size_t l,
                                           const std::vector<std::size_t>& z_subset,
                                           const Assignment& assigned, RespondentMode mode);

/// sum_x P(A=1 | x, l) P(x | l, assigned).
double implied_treatment_rate(const ScmSpec& spec, std::size_t l, const Assignment& assigned = {});

struct RandomSpecDims {
  std::size_t n_l = 1;
  std::size_t n_x = 2;
  std::size_t card = 2;
  std::size_t n_z = 2;
  std::size_t n_lprime = 2;
};

/// Random world with symmetric Dirichlet(1) CPT rows. When `balanced`, the
/// treatment table is shifted per L state so the implied P(A=1 | l) is 1/2
/// while every entry stays inside (0, 1); infeasible draws are redrawn up to
/// a retry bound, then ConfigError.
ScmSpec generate_random_spec(std::uint64_t seed, const RandomSpecDims& dims, bool balanced);

nlohmann::json scm_to_json(const ScmSpec& spec);
/// Parses without validating.
ScmSpec scm_from_json(const nlohmann::json& j);
/// Every exact quantity for one persona as a flat JSON object: estimands,
/// pooled and per-variable TVD over all Z, implied treatment rate and the
/// latent posteriors per arm. L variables missing from `persona` take their
/// first option; the values used are echoed back.
nlohmann::json oracle_report(const ScmSpec& spec, const std::map<std::string, std::string>& persona,
                             const std::map<std::string, std::string>& assigned, RespondentMode mode);

/// Parses and validates; violations are reported in the ConfigError message.
ScmSpec load_scm(const std::filesystem::path& path);

}  // namespace simdrift
