#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "simdrift/distribution.hpp"
#include "simdrift/population.hpp"
#include "simdrift/records.hpp"

namespace simdrift {

/// Read-only grouping of records by (iteration, persona, arm, question).
/// Holds pointers into the record vector, which must outlive it.
class RecordIndex {
 public:
  explicit RecordIndex(std::span<const TrialRecord> records);

  /// Records of one cell in trial order; empty span when there are none.
  std::span<const TrialRecord* const> cell(int iteration, std::string_view persona, int arm,
                                           std::string_view question) const;

  std::vector<std::string> personas(int iteration) const;
  std::vector<int> iterations() const;
  std::vector<const TrialRecord*> records(int iteration) const;

 private:
  using Key = std::tuple<int, std::string, int, std::string>;
  std::map<Key, std::vector<const TrialRecord*>> cells_;
  std::map<int, std::vector<const TrialRecord*>> by_iteration_;
};

/// Category frequencies over the schema's options plus "Unknown". Mapped
/// answers outside the options count as Unknown.
DiscreteDistribution empirical_distribution(std::span<const TrialRecord* const> records,
                                            const AttributeSchema& schema);

/// Throws EmptyCellError naming the cell when it has no records.
DiscreteDistribution empirical_distribution(const RecordIndex& index, int iteration,
                                            std::string_view persona, int arm, const Question& question);

struct ArmPair {
  DiscreteDistribution arm0;
  DiscreteDistribution arm1;
};

/// Everything the per-iteration statistics need from one persona: the arm
/// distributions of each negative control and the per-arm outcome means.
struct PersonaCells {
  std::string persona_id;
  std::vector<ArmPair> negative_controls;
  std::array<std::optional<double>, 2> outcome_mean;  // nullopt: every outcome was Unknown
  std::array<double, 2> outcome_unknown{};            // count (or mass) of Unknown outcomes
  std::array<double, 2> outcome_total{};

  /// Pooled TVD: half the per-category gaps summed over all variables.
  double tvd() const;
  std::vector<double> tvd_per_variable() const;
};

/// Mean encoded outcome excluding Unknown; nullopt when nothing is left.
std::optional<double> mean_outcome(const DiscreteDistribution& d, const AttributeSchema& outcome);

PersonaCells empirical_cells(const RecordIndex& index, int iteration, std::string_view persona,
                             const QuestionBank& bank);

double persona_tvd(const RecordIndex& index, std::string_view persona, int iteration,
                   std::span<const Question> negative_controls);

/// Unweighted mean over personas.
double mean_tvd(std::span<const PersonaCells> cells);

struct EffectEstimate {
  double value = 0.0;
  std::size_t personas_used = 0;
  std::size_t personas_excluded = 0;  // all-Unknown outcomes in some arm
  double unknown_outcomes = 0.0;
};

/// Mean over personas of arm-1 outcome means minus the same for arm 0, with
/// equal persona weights. Personas lacking a mean in either arm are excluded
/// and counted.
EffectEstimate observed_effect(std::span<const PersonaCells> cells);
EffectEstimate observed_effect(std::span<const PersonaCells> cells, std::span<const std::size_t> sample);

EffectEstimate observed_effect(const RecordIndex& index, int iteration, const Question& outcome);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool operator==(const Interval&) const = default;
};

/// Percentile bootstrap over clusters: each resample draws `clusters`
/// indices with replacement and hands them to `statistic`. Deterministic
/// under `seed`. Throws DataError for fewer than 2 clusters or B < 100.
Interval bootstrap_ci(const std::function<double(std::span<const std::size_t>)>& statistic,
                      std::size_t clusters, int resamples, double level, std::uint64_t seed);

/// No-drift TVD floor: for each persona and arm, the pooled TVD between two
/// random halves of that arm's trials, rescaled to the full-arm sample size
/// by sqrt((2/T) / (1/n1 + 1/n2)); averaged over arms and `splits` random
/// splits, then over personas. Throws DataError with fewer than 2 trials in a cell.
double null_tvd_reference(const RecordIndex& index, int iteration, std::span<const std::string> personas,
                          std::span<const Question> negative_controls, std::uint64_t seed, int splits = 20);

/// Distribution pooled over both arms and all personas.
DiscreteDistribution marginal_nc_distribution(const RecordIndex& index, int iteration,
                                              const Question& question);

/// Distribution of one arm pooled over all personas.
DiscreteDistribution arm_nc_distribution(const RecordIndex& index, int iteration, const Question& question,
                                         int arm);

/// Fraction of retention-check records whose mapped answer equals the
/// persona's specified value; nullopt when there are none.
std::optional<double> retention_rate(const RecordIndex& index, int iteration,
                                     std::span<const AugmentedPersona> personas);

// ---------------------------------------------------------------------------
// Iteration reports

struct NcDistributions {
  std::string question_id;
  DiscreteDistribution arm0;
  DiscreteDistribution arm1;
  DiscreteDistribution marginal;
  double mean_tvd = 0.0;
};

struct ExactSummary {
  double mean_tvd = 0.0;
  double tau_obs = 0.0;
  double tau_ate_mix = 0.0;
  double tau_ate_prior = 0.0;
  double sb = 0.0;
};

struct RecordCounts {
  std::size_t total = 0;
  std::size_t outcome = 0;
  std::size_t negative_control = 0;
  std::size_t confounder = 0;
  std::size_t retention_check = 0;
  double unknown_outcomes = 0.0;
  std::size_t excluded_personas = 0;
};

struct IterationReport {
  std::string run_id;
  int iteration = 0;
  std::string estimation = "empirical";
  std::vector<std::pair<std::string, double>> persona_tvd;
  double mean_tvd = 0.0;
  std::optional<Interval> mean_tvd_ci;
  /// Mean over personas of the per-variable average TVD (the non-pooled reading).
  double mean_tvd_variable_average = 0.0;
  double observed_effect = 0.0;
  std::optional<Interval> effect_ci;
  std::optional<double> null_tvd;
  std::vector<NcDistributions> negative_controls;
  std::optional<double> retention_rate;
  RecordCounts counts;
  std::optional<ExactSummary> exact;
};

struct ReportSettings {
  int bootstrap_resamples = 1000;
  double level = 0.95;
  std::uint64_t seed = 0;
  int null_splits = 20;
};

/// Assembles one iteration's report. `cells` are the per-persona inputs of the
/// headline statistics (empirical or exact); distributions, counts and the
/// null reference always come from the records.
IterationReport build_report(const RecordIndex& index, int iteration, const QuestionBank& bank,
                             std::span<const AugmentedPersona> personas, std::span<const PersonaCells> cells,
                             const ReportSettings& settings);

nlohmann::json report_to_json(const IterationReport& report);
IterationReport report_from_json(const nlohmann::json& j);

}  // namespace simdrift
