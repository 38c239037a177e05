#include "simdrift/adjustment.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "simdrift/errors.hpp"

namespace simdrift {
namespace {

struct Ask {
  const Question* question;
  QuestionKind kind;
};

std::string cell_label(const std::string& persona, int arm, int trial) {
  return persona + "/arm" + std::to_string(arm) + "/trial" + std::to_string(trial);
}

std::vector<Question> retention_questions(const QuestionBank& bank, const AugmentedPersona& persona) {
  std::vector<Question> out;
  for (const auto& a : bank.persona_attributes) {
    if (a.categorical() && persona.base.find(a.name) != nullptr) out.push_back(retention_question(a));
  }
  return out;
}

/// Asks every question of one (persona, arm, trial) cell on isolated branches.
std::vector<TrialRecord> run_cell(const Experiment& exp, const AugmentedPersona& persona, int iteration, int arm,
                                  int trial, bool ask_group, std::size_t& failed, bool& all_failed) {
  const TrialSeed seed{exp.seed, persona.id(), iteration, arm, trial, ""};
  std::vector<Ask> asks{{&exp.bank.outcome, QuestionKind::outcome}};
  for (const auto& q : exp.bank.negative_controls) asks.push_back({&q, QuestionKind::negative_control});
  if (ask_group) {
    if (const auto* group = next_group(exp.bank, persona)) {
      for (const auto& q : *group) asks.push_back({&q, QuestionKind::confounder});
    }
  }
  std::vector<Question> retention;
  if (exp.adjust.retention_checks) retention = retention_questions(exp.bank, persona);
  for (const auto& q : retention) asks.push_back({&q, QuestionKind::retention_check});

  std::optional<Session> session;
  try {
    session = open_session(*exp.respondent, exp.agent, persona, arm, exp.scenario, seed);
  } catch (const BackendError&) {
    session.reset();
  }
  std::vector<TrialRecord> out;
  std::size_t failures = 0;
  for (const auto& ask : asks) {
    TrialRecord r{persona.id(), iteration, arm, trial, ask.question->id, ask.kind, "", std::string(kUnknown)};
    if (session) {
      try {
        r.raw = exp.respondent->ask(*session, *ask.question);
        r.mapped = map_question_answer(r.raw, *ask.question);
      } catch (const BackendError&) {
        ++failures;
      }
    } else {
      ++failures;
    }
    out.push_back(std::move(r));
  }
  failed += failures;
  all_failed = failures == asks.size();
  return out;
}

/// Runs `task(i)` for i in [0, n) on up to `workers` threads; rethrows the
/// first exception.
template <typename F>
void parallel_for(std::size_t n, int workers, F&& task) {
  const auto threads = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, workers)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          task(i);
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::uint64_t selection_stream(const Experiment& exp, const AugmentedPersona& persona, int iteration) {
  std::uint64_t h = mix64(exp.adjust.selection_seed);
  h = hash_combine(h, stable_hash(persona.id()));
  return hash_combine(h, static_cast<std::uint64_t>(iteration));
}

/// Applies the stop rule to iteration `k`'s report; when the loop goes on,
/// elicits, selects and augments in place.
std::optional<StopReason> decide_and_augment(const Experiment& exp, const RecordIndex& index, int k,
                                             const IterationReport& report,
                                             std::vector<AugmentedPersona>& personas) {
  const int max_iterations = exp.adjust.effective_max_iterations(exp.bank.confounder_groups.size());
  if (report.mean_tvd <= exp.adjust.epsilon) return StopReason::threshold_met;
  if (k + 1 >= max_iterations) return StopReason::max_iterations;
  std::vector<std::size_t> chosen;
  for (std::size_t i = 0; i < personas.size(); ++i) {
    if (next_group(exp.bank, personas[i]) == nullptr) continue;
    if (exp.adjust.per_persona_gating && report.persona_tvd.at(i).second <= exp.adjust.epsilon) continue;
    chosen.push_back(i);
  }
  if (chosen.empty()) return StopReason::schedule_exhausted;
  for (std::size_t i : chosen) {
    auto& persona = personas[i];
    const auto& group = *next_group(exp.bank, persona);
    const auto elicited = elicitations_from_records(index, k, persona, group, exp.adjust.trials);
    Rng rng(selection_stream(exp, persona, k));
    auto pairs = select_confounder_assignment(elicited, rng);
    for (std::size_t q = 0; q < pairs.size(); ++q) {
      pairs[q].question = resolve_question(group[q], exp.scenario.placeholders).text;
    }
    persona = augment_persona(persona, k + 1, std::move(pairs));
  }
  return std::nullopt;
}

std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string_view to_string(EstimationMode m) noexcept {
  return m == EstimationMode::exact ? "exact" : "empirical";
}

EstimationMode estimation_mode_from_string(std::string_view s) {
  if (s == "empirical") return EstimationMode::empirical;
  if (s == "exact") return EstimationMode::exact;
  throw ConfigError("unknown estimation mode '" + std::string(s) + "' (expected empirical or exact)");
}

std::string_view to_string(StopReason r) noexcept {
  switch (r) {
    case StopReason::threshold_met: return "threshold_met";
    case StopReason::max_iterations: return "max_iterations";
    case StopReason::schedule_exhausted: return "schedule_exhausted";
  }
  return "";
}

StopReason stop_reason_from_string(std::string_view s) {
  if (s == "threshold_met") return StopReason::threshold_met;
  if (s == "max_iterations") return StopReason::max_iterations;
  if (s == "schedule_exhausted") return StopReason::schedule_exhausted;
  throw DataError("unknown stop reason '" + std::string(s) + "'");
}

void AdjustConfig::validate(std::size_t schedule_length) const {
  if (trials < 1) throw ConfigError("trials must be at least 1");
  if (!(epsilon >= 0.0)) throw ConfigError("epsilon must be non-negative");
  if (schedule_length == 0) throw ConfigError("confounder schedule is empty");
  if (max_iterations < 0) throw ConfigError("max_iterations must be non-negative (0 selects the default)");
  if (max_iterations > static_cast<int>(schedule_length) + 1) {
    throw ConfigError("max_iterations " + std::to_string(max_iterations) + " exceeds schedule length + 1 (" +
                      std::to_string(schedule_length + 1) + ")");
  }
  if (workers < 1) throw ConfigError("workers must be at least 1");
}

int AdjustConfig::effective_max_iterations(std::size_t schedule_length) const {
  return max_iterations > 0 ? max_iterations : static_cast<int>(schedule_length) + 1;
}

void to_json(nlohmann::json& j, const AdjustConfig& c) {
  j = nlohmann::json{{"trials", c.trials},
                     {"epsilon", c.epsilon},
                     {"max_iterations", c.max_iterations},
                     {"selection_seed", c.selection_seed},
                     {"retention_checks", c.retention_checks},
                     {"per_persona_gating", c.per_persona_gating},
                     {"estimation", to_string(c.estimation)},
                     {"workers", c.workers}};
}

void from_json(const nlohmann::json& j, AdjustConfig& c) {
  c = AdjustConfig{};
  c.trials = j.value("trials", c.trials);
  c.epsilon = j.value("epsilon", c.epsilon);
  c.max_iterations = j.value("max_iterations", c.max_iterations);
  c.selection_seed = j.value("selection_seed", c.selection_seed);
  c.retention_checks = j.value("retention_checks", c.retention_checks);
  c.per_persona_gating = j.value("per_persona_gating", c.per_persona_gating);
  c.estimation = estimation_mode_from_string(j.value("estimation", std::string("empirical")));
  c.workers = j.value("workers", c.workers);
}

nlohmann::json checkpoint_to_json(const RunState& state) {
  nlohmann::json reports = nlohmann::json::array();
  for (const auto& r : state.reports) reports.push_back(report_to_json(r));
  return {{"run_id", state.run_id},
          {"iteration", state.iteration},
          {"personas", state.personas},
          {"reports", reports},
          {"stop_reason", state.stop_reason ? nlohmann::json(to_string(*state.stop_reason)) : nlohmann::json(nullptr)}};
}

RunState checkpoint_from_json(const nlohmann::json& j) {
  try {
    RunState s;
    s.run_id = j.at("run_id").get<std::string>();
    s.iteration = j.at("iteration").get<int>();
    j.at("personas").get_to(s.personas);
    for (const auto& r : j.at("reports")) s.reports.push_back(report_from_json(r));
    if (!j.at("stop_reason").is_null()) {
      s.stop_reason = stop_reason_from_string(j.at("stop_reason").get<std::string>());
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  }
}

const std::vector<Question>* next_group(const QuestionBank& bank, const AugmentedPersona& persona) {
  const auto k = persona.groups.size();
  return k < bank.confounder_groups.size() ? &bank.confounder_groups[k] : nullptr;
}

IterationRecords simulate_iteration(const Experiment& exp, const RunState& state) {
  if (exp.respondent == nullptr) throw ConfigError("experiment has no respondent");
  const int k = state.iteration;
  const bool ask_group = k + 1 < exp.adjust.effective_max_iterations(exp.bank.confounder_groups.size());
  const auto trials = static_cast<std::size_t>(exp.adjust.trials);
  const std::size_t n = state.personas.size() * 2 * trials;
  std::vector<std::vector<TrialRecord>> per_cell(n);
  std::vector<std::size_t> failed(n, 0);
  std::vector<char> cell_failed(n, 0);
  parallel_for(n, exp.adjust.workers, [&](std::size_t c) {
    const auto& persona = state.personas[c / (2 * trials)];
    const int arm = static_cast<int>((c / trials) % 2);
    const int trial = static_cast<int>(c % trials);
    bool all_failed = false;
    per_cell[c] = run_cell(exp, persona, k, arm, trial, ask_group, failed[c], all_failed);
    cell_failed[c] = all_failed ? 1 : 0;
  });
  IterationRecords out;
  for (std::size_t c = 0; c < n; ++c) {
    out.failed_asks += failed[c];
    if (cell_failed[c]) {
      out.failed_cells.push_back(cell_label(state.personas[c / (2 * trials)].id(),
                                            static_cast<int>((c / trials) % 2), static_cast<int>(c % trials)));
    }
    for (auto& r : per_cell[c]) out.records.push_back(std::move(r));
  }
  sort_records(out.records);
  return out;
}

Elicitations elicit_confounders(const Experiment& exp, const AugmentedPersona& persona,
                                const std::vector<Question>& group, int iteration) {
  Elicitations out;
  for (int a = 0; a < 2; ++a) {
    for (int t = 0; t < exp.adjust.trials; ++t) {
      const TrialSeed seed{exp.seed, persona.id(), iteration, a, t, ""};
      const auto session = open_session(*exp.respondent, exp.agent, persona, a, exp.scenario, seed);
      std::vector<ElicitedPair> pairs;
      for (const auto& q : group) {
        const auto raw = exp.respondent->ask(session, q);
        pairs.push_back({q.id, q.text, map_question_answer(raw, q)});
      }
      out.cells[static_cast<std::size_t>(a)].push_back(std::move(pairs));
    }
  }
  return out;
}

Elicitations elicitations_from_records(const RecordIndex& index, int iteration, const AugmentedPersona& persona,
                                       const std::vector<Question>& group, int trials) {
  Elicitations out;
  for (int a = 0; a < 2; ++a) {
    auto& arm = out.cells[static_cast<std::size_t>(a)];
    arm.assign(static_cast<std::size_t>(trials), {});
    for (const auto& q : group) {
      const auto cell = index.cell(iteration, persona.id(), a, q.id);
      if (cell.size() != static_cast<std::size_t>(trials)) {
        throw DataError("expected " + std::to_string(trials) + " elicitations of '" + q.id + "' for persona '" +
                        persona.id() + "' arm " + std::to_string(a) + " in iteration " +
                        std::to_string(iteration) + ", found " + std::to_string(cell.size()));
      }
      for (const auto* r : cell) {
        if (r->trial < 0 || r->trial >= trials) throw DataError("trial index out of range in records");
        arm[static_cast<std::size_t>(r->trial)].push_back({q.id, q.text, r->mapped});
      }
    }
  }
  return out;
}

std::vector<ElicitedPair> select_confounder_assignment(const Elicitations& elicitations, Rng& rng) {
  const auto n1 = elicitations.cells[1].size();
  const auto n0 = elicitations.cells[0].size();
  if (n0 != n1) {
    throw DataError("unequal elicitation counts per arm (" + std::to_string(n0) + " vs " + std::to_string(n1) +
                    ") would skew the arm mixture");
  }
  if (n0 == 0) throw DataError("no elicitations to select from");
  const auto c = rng.below(2 * n0);
  return elicitations.cells[c / n0][c % n0];
}

std::vector<PersonaCells> persona_cells(const Experiment& exp, const RecordIndex& index, int iteration,
                                        const std::vector<AugmentedPersona>& personas) {
  std::vector<PersonaCells> out;
  out.reserve(personas.size());
  if (exp.adjust.estimation == EstimationMode::empirical) {
    for (const auto& p : personas) out.push_back(empirical_cells(index, iteration, p.id(), exp.bank));
    return out;
  }
  const auto exact = [&](const Session& s, const Question& q) {
    auto d = exp.respondent->exact_answer(s, q);
    if (!d) throw ConfigError("exact estimation needs a backend with exact answer distributions");
    return *d;
  };
  for (const auto& p : personas) {
    PersonaCells cells;
    cells.persona_id = p.id();
    std::array<std::optional<Session>, 2> sessions;
    for (int a = 0; a < 2; ++a) {
      sessions[static_cast<std::size_t>(a)] =
          open_session(*exp.respondent, exp.agent, p, a, exp.scenario, TrialSeed{exp.seed, p.id(), iteration, a, 0, ""});
    }
    for (const auto& q : exp.bank.negative_controls) {
      cells.negative_controls.push_back({exact(*sessions[0], q), exact(*sessions[1], q)});
    }
    for (std::size_t a = 0; a < 2; ++a) {
      const auto d = exact(*sessions[a], exp.bank.outcome);
      cells.outcome_mean[a] = mean_outcome(d, exp.bank.outcome.schema);
      cells.outcome_total[a] = 1.0;
      cells.outcome_unknown[a] = d.prob(kUnknown);
    }
    out.push_back(std::move(cells));
  }
  return out;
}

IterationReport analyze_iteration(const Experiment& exp, const RecordIndex& index, int iteration,
                                  const std::vector<AugmentedPersona>& personas) {
  const auto cells = persona_cells(exp, index, iteration, personas);
  auto report = build_report(index, iteration, exp.bank, personas, cells, exp.report);
  report.run_id = exp.run_id;
  report.estimation = std::string(to_string(exp.adjust.estimation));

  ExactSummary sum;
  bool have_oracle = !personas.empty();
  for (const auto& p : personas) {
    const auto o = exp.respondent->oracle(p, exp.bank);
    if (!o) {
      have_oracle = false;
      break;
    }
    sum.mean_tvd += o->tvd;
    sum.tau_obs += o->estimands.tau_obs;
    sum.tau_ate_mix += o->estimands.tau_ate_mix;
    sum.tau_ate_prior += o->estimands.tau_ate_prior;
    sum.sb += o->estimands.sb;
  }
  if (have_oracle) {
    const auto n = static_cast<double>(personas.size());
    report.exact = ExactSummary{sum.mean_tvd / n, sum.tau_obs / n, sum.tau_ate_mix / n, sum.tau_ate_prior / n,
                                sum.sb / n};
  }
  return report;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view text) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp);
    out << text;
    if (!out) throw DataError("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

nlohmann::json summary_json(const RunState& state) {
  nlohmann::json iterations = nlohmann::json::array();
  for (const auto& r : state.reports) {
    nlohmann::json it{{"iteration", r.iteration},
                      {"mean_tvd", r.mean_tvd},
                      {"observed_effect", r.observed_effect},
                      {"null_tvd", r.null_tvd ? nlohmann::json(*r.null_tvd) : nlohmann::json(nullptr)}};
    if (r.exact) it["exact_mean_tvd"] = r.exact->mean_tvd;
    iterations.push_back(std::move(it));
  }
  std::size_t elicited = 0;
  for (const auto& p : state.personas) elicited += p.elicited_count();
  return {{"run_id", state.run_id},
          {"stop_reason", state.stop_reason ? nlohmann::json(to_string(*state.stop_reason)) : nlohmann::json(nullptr)},
          {"iterations", state.iteration},
          {"personas", state.personas.size()},
          {"records", state.records.size()},
          {"elicited_answers", elicited},
          {"per_iteration", iterations}};
}

std::vector<IterationReport> run_experiment(const Experiment& exp, RunState& state,
                                            const std::optional<std::filesystem::path>& out_dir) {
  exp.adjust.validate(exp.bank.confounder_groups.size());
  if (exp.respondent == nullptr) throw ConfigError("experiment has no respondent");
  if (out_dir) {
    std::filesystem::create_directories(*out_dir);
    const auto checkpoint = *out_dir / "checkpoint.json";
    if (std::filesystem::exists(checkpoint)) {
      auto resumed = checkpoint_from_json(nlohmann::json::parse(read_file(checkpoint)));
      if (resumed.run_id != exp.run_id) {
        throw ConfigError("output directory " + out_dir->string() + " holds a different run (" + resumed.run_id +
                          ")");
      }
      resumed.records = read_records_jsonl(*out_dir / "records.jsonl");
      state = std::move(resumed);
    }
  }
  if (state.personas.empty()) throw ConfigError("no personas to simulate");
  state.run_id = exp.run_id;

  while (!state.done()) {
    const int k = state.iteration;
    auto sim = simulate_iteration(exp, state);
    if (!sim.failed_cells.empty()) {
      if (out_dir) {
        auto partial = state.records;
        partial.insert(partial.end(), sim.records.begin(), sim.records.end());
        write_records_jsonl(*out_dir / "partial_records.jsonl", std::move(partial));
        write_file_atomic(*out_dir / "partial_manifest.json",
                          dump({{"run_id", exp.run_id},
                                {"iteration", k},
                                {"failed_asks", sim.failed_asks},
                                {"failed_cells", sim.failed_cells},
                                {"records", "partial_records.jsonl"}}));
      }
      throw BackendError("iteration " + std::to_string(k) + ": every ask failed in " +
                             std::to_string(sim.failed_cells.size()) + " cell(s), first " + sim.failed_cells.front(),
                         sim.failed_cells);
    }
    // Reports only ever look at this iteration's records.
    const RecordIndex index(sim.records);
    auto report = analyze_iteration(exp, index, k, state.personas);
    state.stop_reason = decide_and_augment(exp, index, k, report, state.personas);
    state.records.insert(state.records.end(), sim.records.begin(), sim.records.end());
    sort_records(state.records);
    state.reports.push_back(report);
    state.iteration = k + 1;
    if (out_dir) {
      write_records_jsonl(*out_dir / "records.jsonl", state.records);
      write_file_atomic(*out_dir / ("report_" + std::to_string(k) + ".json"), dump(report_to_json(report)));
      write_file_atomic(*out_dir / "checkpoint.json", dump(checkpoint_to_json(state)));
    }
  }
  if (out_dir) write_file_atomic(*out_dir / "summary.json", dump(summary_json(state)));
  return state.reports;
}

std::vector<IterationReport> reports_from_records(const Experiment& exp, std::vector<AugmentedPersona> initial,
                                                  const std::vector<TrialRecord>& records) {
  if (records.empty()) throw DataError("no records to report on");
  const RecordIndex all(records);
  std::vector<IterationReport> out;
  auto personas = std::move(initial);
  for (int k : all.iterations()) {
    if (k != static_cast<int>(out.size())) {
      throw DataError("records skip iteration " + std::to_string(out.size()));
    }
    std::vector<TrialRecord> slice;
    for (const auto* r : all.records(k)) slice.push_back(*r);
    const RecordIndex index(slice);
    auto report = analyze_iteration(exp, index, k, personas);
    const auto stop = decide_and_augment(exp, index, k, report, personas);
    out.push_back(std::move(report));
    if (stop) break;
  }
  return out;
}

}  // namespace simdrift
