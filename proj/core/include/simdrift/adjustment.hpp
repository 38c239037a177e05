#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "simdrift/estimators.hpp"
#include "simdrift/population.hpp"
#include "simdrift/records.hpp"
#include "simdrift/respondents.hpp"
#include "simdrift/rng.hpp"

namespace simdrift {

/// Where the headline per-persona statistics come from. `exact` feeds the
/// respondent's exact answer distributions (when it has them) through the
/// same estimators instead of sampled answers.
enum class EstimationMode { empirical, exact };

std::string_view to_string(EstimationMode m) noexcept;
EstimationMode estimation_mode_from_string(std::string_view s);

struct AdjustConfig {
  int trials = 30;                   // T per persona per arm
  double epsilon = 0.05;             // stop once mean TVD <= epsilon
  int max_iterations = 0;            // 0: schedule length + 1
  std::uint64_t selection_seed = 0;  // drives the choice of elicited cell
  bool retention_checks = false;     // re-ask categorical persona attributes
  bool per_persona_gating = false;   // elicit only for personas above epsilon
  EstimationMode estimation = EstimationMode::empirical;
  int workers = 1;  // concurrent (persona, arm, trial) cells

  /// Throws ConfigError. `schedule_length` is the number of confounder groups.
  void validate(std::size_t schedule_length) const;
  int effective_max_iterations(std::size_t schedule_length) const;

  bool operator==(const AdjustConfig&) const = default;
};

void to_json(nlohmann::json& j, const AdjustConfig& c);
void from_json(const nlohmann::json& j, AdjustConfig& c);

/// Everything fixed for the duration of a run.
struct Experiment {
  Respondent* respondent = nullptr;
  ChatAgent* agent = nullptr;  // agent-dialogue scenarios only
  Scenario scenario;
  QuestionBank bank;
  AdjustConfig adjust;
  ReportSettings report;
  std::uint64_t seed = 0;  // master seed of every trial stream
  std::string run_id;
};

enum class StopReason { threshold_met, max_iterations, schedule_exhausted };

std::string_view to_string(StopReason r) noexcept;
StopReason stop_reason_from_string(std::string_view s);

struct RunState {
  std::string run_id;
  int iteration = 0;  // completed iterations
  std::vector<AugmentedPersona> personas;
  std::vector<IterationReport> reports;
  std::vector<TrialRecord> records;
  std::optional<StopReason> stop_reason;

  bool done() const noexcept { return stop_reason.has_value(); }
};

/// Checkpoint JSON (records live in records.jsonl beside it).
nlohmann::json checkpoint_to_json(const RunState& state);
RunState checkpoint_from_json(const nlohmann::json& j);

/// The confounder group a persona would be asked next, or nullptr when its
/// schedule is exhausted.
const std::vector<Question>* next_group(const QuestionBank& bank, const AugmentedPersona& persona);

/// Per-iteration simulation output. An ask that failed at the backend is
/// recorded with an empty raw answer mapped to "Unknown"; a cell in which
/// every ask failed is listed in `failed_cells`.
struct IterationRecords {
  std::vector<TrialRecord> records;
  std::size_t failed_asks = 0;
  std::vector<std::string> failed_cells;
};

/// For every persona, arm and trial: opens a fresh session and, each on its
/// own branch, asks the outcome, every negative control, the persona's next
/// confounder group (unless this is the last allowed iteration) and, when
/// enabled, retention checks.
IterationRecords simulate_iteration(const Experiment& exp, const RunState& state);

/// Elicited answer sets indexed [arm][trial]; each holds one answer per
/// question of the group.
struct Elicitations {
  std::array<std::vector<std::vector<ElicitedPair>>, 2> cells;
};

/// Asks `group` on fresh sessions for every (trial, arm) of `persona`.
/// Uses the same streams as simulate_iteration, so both agree answer for answer.
Elicitations elicit_confounders(const Experiment& exp, const AugmentedPersona& persona,
                                const std::vector<Question>& group, int iteration);

/// The group's answers from one iteration's records.
Elicitations elicitations_from_records(const RecordIndex& index, int iteration, const AugmentedPersona& persona,
                                       const std::vector<Question>& group, int trials);

/// Draws one of the 2T (trial, arm) cells uniformly and returns its full
/// answer set. Throws DataError when empty or when arm counts differ.
std::vector<ElicitedPair> select_confounder_assignment(const Elicitations& elicitations, Rng& rng);

/// Per-persona inputs of the headline statistics for one iteration.
std::vector<PersonaCells> persona_cells(const Experiment& exp, const RecordIndex& index, int iteration,
                                        const std::vector<AugmentedPersona>& personas);

/// Report for one iteration, including the oracle block when the respondent has one.
IterationReport analyze_iteration(const Experiment& exp, const RecordIndex& index, int iteration,
                                  const std::vector<AugmentedPersona>& personas);

/// Runs (or resumes) the adjustment loop until it stops. With `out_dir`, writes
/// records.jsonl, report_<k>.json and checkpoint.json after every iteration
/// and summary.json at the end; an existing checkpoint there is resumed.
std::vector<IterationReport> run_experiment(const Experiment& exp, RunState& state,
                                            const std::optional<std::filesystem::path>& out_dir = std::nullopt);

/// Recomputes every report of a finished run from its records, replaying the
/// same selections. `initial` are the personas before any elicitation.
std::vector<IterationReport> reports_from_records(const Experiment& exp, std::vector<AugmentedPersona> initial,
                                                  const std::vector<TrialRecord>& records);

nlohmann::json summary_json(const RunState& state);

/// Writes `text` to `path` via a temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view text);

}  // namespace simdrift
