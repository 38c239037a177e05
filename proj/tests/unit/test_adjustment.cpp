#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

#include "simdrift/adjustment.hpp"
#include "simdrift/config.hpp"
#include "simdrift/errors.hpp"
#include "test_support.hpp"

using namespace simdrift;

namespace {

ExperimentConfig toy_config(std::size_t n = 6, int trials = 10) {
  auto c = load_config(testing::asset("configs/toy_drift_v1.json"));
  c.personas.n = n;
  c.adjust.trials = trials;
  c.bootstrap_resamples = 200;
  return c;
}

ExperimentConfig drift3_config(std::size_t n = 8, int trials = 10) {
  auto c = load_config(testing::asset("configs/drift3.json"));
  c.personas.n = n;
  c.adjust.trials = trials;
  c.adjust.epsilon = 0.0;
  c.bootstrap_resamples = 200;
  return c;
}

RunState fresh_state(const Runtime& rt) {
  RunState s;
  s.run_id = rt.experiment.run_id;
  s.personas = rt.personas;
  return s;
}

/// Personas as they stood at the start of iteration `k`.
std::vector<AugmentedPersona> personas_at(const std::vector<AugmentedPersona>& final_personas, int k) {
  auto out = final_personas;
  for (auto& p : out) {
    std::erase_if(p.groups, [&](const ElicitedGroup& g) { return g.iteration > k; });
  }
  return out;
}

std::vector<TrialRecord> iteration_records(const std::vector<TrialRecord>& rs, int k) {
  std::vector<TrialRecord> out;
  for (const auto& r : rs) {
    if (r.iteration == k) out.push_back(r);
  }
  return out;
}

/// Respondent that fails every ask after `healthy` calls.
class FlakyRespondent : public Respondent {
 public:
  FlakyRespondent(Respondent& inner, std::size_t healthy) : inner_(inner), healthy_(healthy) {}
  std::string ask(const Session& s, const Question& q) override {
    if (calls_++ >= healthy_) throw BackendError("backend down");
    return inner_.ask(s, q);
  }
  std::string reply(const std::vector<ChatMessage>& c, const TrialSeed& t) override { return inner_.reply(c, t); }
  std::optional<DiscreteDistribution> exact_answer(const Session& s, const Question& q) const override {
    return inner_.exact_answer(s, q);
  }
  std::optional<PersonaOracle> oracle(const AugmentedPersona& p, const QuestionBank& b) const override {
    return inner_.oracle(p, b);
  }

 private:
  Respondent& inner_;
  std::size_t healthy_;
  std::atomic<std::size_t> calls_{0};
};

/// Records every message list it is asked with.
class RecordingRespondent : public Respondent {
 public:
  explicit RecordingRespondent(Respondent& inner) : inner_(inner) {}
  std::string ask(const Session& s, const Question& q) override {
    std::lock_guard lock(mu_);
    asked.push_back(branch_messages(s, q));
    return inner_.ask(s, q);
  }
  std::string reply(const std::vector<ChatMessage>& c, const TrialSeed& t) override { return inner_.reply(c, t); }
  std::vector<std::vector<ChatMessage>> asked;

 private:
  Respondent& inner_;
  std::mutex mu_;
};

}  // namespace

TEST_CASE("adjust config validation") {
  AdjustConfig c;
  CHECK_NOTHROW(c.validate(3));
  CHECK(c.effective_max_iterations(3) == 4);
  c.max_iterations = 2;
  CHECK(c.effective_max_iterations(3) == 2);
  c.max_iterations = 5;
  CHECK_THROWS_AS(c.validate(3), ConfigError);
  c = AdjustConfig{};
  c.trials = 0;
  CHECK_THROWS_AS(c.validate(3), ConfigError);
  c = AdjustConfig{};
  c.epsilon = -0.1;
  CHECK_THROWS_AS(c.validate(3), ConfigError);
  c = AdjustConfig{};
  c.epsilon = 0.0;
  CHECK_NOTHROW(c.validate(3));
  c.workers = 4;
  c.estimation = EstimationMode::exact;
  const nlohmann::json j = c;
  CHECK(j.get<AdjustConfig>() == c);
}

TEST_CASE("record counts follow the protocol") {
  const auto cfg = toy_config(5, 7);
  const auto rt = build_runtime(cfg);
  auto state = fresh_state(rt);
  const auto sim = simulate_iteration(rt.experiment, state);
  // outcome + 1 control + 1 confounder per (persona, arm, trial)
  CHECK(sim.records.size() == 5u * 2 * 7 * 3);
  CHECK(sim.failed_asks == 0);
  std::map<QuestionKind, std::size_t> by_kind;
  for (const auto& r : sim.records) ++by_kind[r.kind];
  CHECK(by_kind[QuestionKind::outcome] == 70);
  CHECK(by_kind[QuestionKind::negative_control] == 70);
  CHECK(by_kind[QuestionKind::confounder] == 70);
  CHECK(std::is_sorted(sim.records.begin(), sim.records.end(), record_key_less));
}

TEST_CASE("the confounder group is not asked in the last allowed iteration") {
  auto cfg = toy_config(3, 5);
  cfg.adjust.max_iterations = 1;
  const auto rt = build_runtime(cfg);
  auto state = fresh_state(rt);
  const auto sim = simulate_iteration(rt.experiment, state);
  CHECK(std::none_of(sim.records.begin(), sim.records.end(),
                     [](const TrialRecord& r) { return r.kind == QuestionKind::confounder; }));
}

TEST_CASE("elicitation from records agrees with fresh elicitation") {
  const auto cfg = drift3_config(3, 6);
  const auto rt = build_runtime(cfg);
  auto state = fresh_state(rt);
  const auto sim = simulate_iteration(rt.experiment, state);
  const RecordIndex idx(sim.records);
  for (const auto& p : rt.personas) {
    const auto& group = *next_group(rt.experiment.bank, p);
    const auto a = elicitations_from_records(idx, 0, p, group, 6);
    const auto b = elicit_confounders(rt.experiment, p, group, 0);
    CHECK(a.cells == b.cells);
  }
}

TEST_CASE("selection is uniform over the 2T cells and keeps a group together") {
  Elicitations e;
  for (int a = 0; a < 2; ++a) {
    for (int t = 0; t < 3; ++t) {
      const auto tag = std::to_string(a) + std::to_string(t);
      e.cells[static_cast<std::size_t>(a)].push_back({{"q1", "Q1?", "a" + tag}, {"q2", "Q2?", "b" + tag}});
    }
  }
  Rng rng(1);
  std::map<std::string, int> counts;
  const int n = 60000;
  for (int i = 0; i < n; ++i) {
    const auto pick = select_confounder_assignment(e, rng);
    REQUIRE(pick.size() == 2);
    CHECK(pick[0].answer.substr(1) == pick[1].answer.substr(1));
    ++counts[pick[0].answer];
  }
  CHECK(counts.size() == 6);
  for (const auto& [k, v] : counts) CHECK(std::abs(v / static_cast<double>(n) - 1.0 / 6.0) < 4 * std::sqrt(5.0 / 36 / n));

  Elicitations uneven = e;
  uneven.cells[1].pop_back();
  CHECK_THROWS_AS(select_confounder_assignment(uneven, rng), DataError);
  CHECK_THROWS_AS(select_confounder_assignment(Elicitations{}, rng), DataError);

  // Unanimous answers are selected with certainty.
  Elicitations same;
  for (auto& arm : same.cells) arm.assign(4, {{"q", "Q?", "fit"}});
  CHECK(select_confounder_assignment(same, rng)[0].answer == "fit");
}

TEST_CASE("a full run grows personas monotonically and stops for the right reason") {
  auto cfg = drift3_config(6, 8);
  const auto rt = build_runtime(cfg);
  auto state = fresh_state(rt);
  const auto reports = run_experiment(rt.experiment, state);
  CHECK(state.stop_reason == StopReason::max_iterations);
  CHECK(state.iteration == 4);
  CHECK(reports.size() == 4);
  for (std::size_t i = 0; i < state.personas.size(); ++i) {
    const auto& p = state.personas[i];
    CHECK(p.base == rt.personas[i].base);
    REQUIRE(p.groups.size() == 3);
    for (int g = 0; g < 3; ++g) CHECK(p.groups[static_cast<std::size_t>(g)].iteration == g + 1);
  }
  for (const auto& r : reports) {
    REQUIRE(r.exact.has_value());
    CHECK(r.counts.outcome == 6u * 2 * 8);
  }
  CHECK(reports.back().exact->mean_tvd < 1e-9);
  CHECK(reports.back().counts.confounder == 0);
  const auto s = summary_json(state);
  CHECK(s["stop_reason"] == "max_iterations");
  CHECK(s["elicited_answers"] == 6 * 6);
}

TEST_CASE("stop rules") {
  SUBCASE("threshold met on the first iteration") {
    auto cfg = toy_config(4, 6);
    cfg.adjust.epsilon = 1.0;
    const auto rt = build_runtime(cfg);
    auto state = fresh_state(rt);
    run_experiment(rt.experiment, state);
    CHECK(state.stop_reason == StopReason::threshold_met);
    CHECK(state.iteration == 1);
    for (const auto& p : state.personas) CHECK(p.groups.empty());
  }
  SUBCASE("schedule exhausted when nobody has a group left") {
    auto cfg = toy_config(4, 6);
    cfg.adjust.epsilon = 0.0;
    const auto rt = build_runtime(cfg);
    auto state = fresh_state(rt);
    for (auto& p : state.personas) p = augment_persona(p, 0, {{"fitness", "fitness", "fit"}});
    run_experiment(rt.experiment, state);
    CHECK(state.stop_reason == StopReason::schedule_exhausted);
    CHECK(state.iteration == 1);
  }
  SUBCASE("iteration budget") {
    auto cfg = toy_config(4, 6);
    cfg.adjust.epsilon = 0.0;
    cfg.adjust.max_iterations = 1;
    const auto rt = build_runtime(cfg);
    auto state = fresh_state(rt);
    run_experiment(rt.experiment, state);
    CHECK(state.stop_reason == StopReason::max_iterations);
    CHECK(state.iteration == 1);
  }
}

TEST_CASE("a thirteen-group schedule runs to exhaustion with epsilon zero") {
  auto bank = load_question_bank(testing::asset("banks/opinionqa.json"));
  testing::UniformRespondent user;
  Experiment exp;
  exp.respondent = &user;
  exp.scenario.interventions = {"Zero.", "One."};
  exp.bank = bank;
  exp.adjust.trials = 4;
  exp.adjust.epsilon = 0.0;
  exp.report.bootstrap_resamples = 100;
  exp.seed = 3;
  exp.run_id = "schedule";
  RunState state;
  for (const auto& p : load_personas(testing::asset("personas/survey.csv"), bank.persona_attributes, 3, 1).personas) {
    state.personas.push_back(AugmentedPersona::from(p));
  }
  run_experiment(exp, state);
  CHECK(state.iteration == 14);
  CHECK(state.stop_reason == StopReason::max_iterations);
  for (const auto& p : state.personas) CHECK(p.groups.size() == 13);
}

TEST_CASE("iteration outputs depend only on the augmented personas") {
  const auto cfg = drift3_config(5, 6);
  const auto rt = build_runtime(cfg);
  auto state = fresh_state(rt);
  const auto reports = run_experiment(rt.experiment, state);
  REQUIRE(state.iteration >= 3);
  for (int k = 1; k < state.iteration; ++k) {
    CAPTURE(k);
    // Discard every earlier record and transcript; rebuild iteration k alone.
    RunState fresh;
    fresh.run_id = state.run_id;
    fresh.iteration = k;
    fresh.personas = personas_at(state.personas, k);
    const auto sim = simulate_iteration(rt.experiment, fresh);
    CHECK(sim.records == iteration_records(state.records, k));
    const RecordIndex idx(sim.records);
    const auto report = analyze_iteration(rt.experiment, idx, k, fresh.personas);
    CHECK(report_to_json(report) == report_to_json(reports[static_cast<std::size_t>(k)]));
  }
}

TEST_CASE("branches are isolated: question order does not change answers") {
  const auto cfg = drift3_config(4, 5);
  const auto rt = build_runtime(cfg);
  auto permuted = rt.experiment;
  std::reverse(permuted.bank.negative_controls.begin(), permuted.bank.negative_controls.end());
  for (auto& g : permuted.bank.confounder_groups) std::reverse(g.begin(), g.end());
  auto s1 = fresh_state(rt);
  auto s2 = fresh_state(rt);
  CHECK(simulate_iteration(rt.experiment, s1).records == simulate_iteration(permuted, s2).records);

  RecordingRespondent rec(*rt.respondent);
  auto exp = rt.experiment;
  exp.respondent = &rec;
  auto s3 = fresh_state(rt);
  simulate_iteration(exp, s3);
  REQUIRE_FALSE(rec.asked.empty());
  for (const auto& msgs : rec.asked) {
    REQUIRE(msgs.size() >= 2);
    REQUIRE(msgs.size() <= 3);
    std::size_t questions = 0;
    for (const auto& m : msgs) {
      for (std::size_t pos = m.content.find("Question:"); pos != std::string::npos;
           pos = m.content.find("Question:", pos + 1)) {
        ++questions;
      }
    }
    CHECK(questions == 1);
  }
}

TEST_CASE("worker count does not change results") {
  auto cfg = drift3_config(4, 6);
  const auto rt = build_runtime(cfg);
  auto parallel = rt.experiment;
  parallel.adjust.workers = 4;
  auto a = fresh_state(rt);
  auto b = fresh_state(rt);
  run_experiment(rt.experiment, a);
  run_experiment(parallel, b);
  CHECK(a.records == b.records);
  CHECK(a.personas == b.personas);
}

TEST_CASE("reports can be recomputed from records") {
  const auto cfg = drift3_config(4, 6);
  const auto rt = build_runtime(cfg);
  auto state = fresh_state(rt);
  const auto reports = run_experiment(rt.experiment, state);
  const auto again = reports_from_records(rt.experiment, rt.personas, state.records);
  REQUIRE(again.size() == reports.size());
  for (std::size_t i = 0; i < reports.size(); ++i) CHECK(report_to_json(again[i]) == report_to_json(reports[i]));
  CHECK_THROWS_AS(reports_from_records(rt.experiment, rt.personas, {}), DataError);
}

TEST_CASE("exact estimation matches the oracle at iteration zero") {
  auto cfg = drift3_config(5, 4);
  cfg.adjust.estimation = EstimationMode::exact;
  cfg.adjust.max_iterations = 1;
  const auto rt = build_runtime(cfg);
  auto state = fresh_state(rt);
  const auto reports = run_experiment(rt.experiment, state);
  REQUIRE(reports.size() == 1);
  CHECK(reports[0].estimation == "exact");
  CHECK(std::abs(reports[0].mean_tvd - reports[0].exact->mean_tvd) < 1e-12);
  CHECK(std::abs(reports[0].observed_effect - reports[0].exact->tau_obs) < 1e-12);
}

TEST_CASE("failed asks become Unknown and a fully failed cell aborts with a manifest") {
  const auto cfg = toy_config(2, 3);
  const auto rt = build_runtime(cfg);

  SUBCASE("all asks fail") {
    FlakyRespondent flaky(*rt.respondent, 0);
    auto exp = rt.experiment;
    exp.respondent = &flaky;
    testing::TempDir dir("flaky");
    auto state = fresh_state(rt);
    CHECK_THROWS_AS(run_experiment(exp, state, dir.path()), BackendError);
    CHECK(std::filesystem::exists(dir / "partial_manifest.json"));
    const auto partial = read_records_jsonl(dir / "partial_records.jsonl");
    CHECK(partial.size() == 2u * 2 * 3 * 3);
    for (const auto& r : partial) {
      CHECK(r.raw.empty());
      CHECK(r.mapped == "Unknown");
    }
    CHECK_FALSE(std::filesystem::exists(dir / "checkpoint.json"));
  }
}

TEST_CASE("an interrupted run resumes to the same result") {
  const auto cfg = drift3_config(4, 5);
  const auto rt = build_runtime(cfg);

  testing::TempDir straight("straight");
  auto s1 = fresh_state(rt);
  run_experiment(rt.experiment, s1, straight.path());

  testing::TempDir resumed("resumed");
  // Healthy for exactly two iterations' worth of asks, then down.
  const std::size_t per_iteration = 4u * 2 * 5 * (1 + 3 + 2);
  FlakyRespondent flaky(*rt.respondent, 2 * per_iteration);
  auto broken = rt.experiment;
  broken.respondent = &flaky;
  auto s2 = fresh_state(rt);
  CHECK_THROWS_AS(run_experiment(broken, s2, resumed.path()), BackendError);
  const auto cp = nlohmann::json::parse(testing::slurp(resumed / "checkpoint.json"));
  CHECK(cp["iteration"] == 2);

  auto s3 = fresh_state(rt);
  run_experiment(rt.experiment, s3, resumed.path());
  for (const char* f : {"records.jsonl", "report_0.json", "report_3.json", "checkpoint.json", "summary.json"}) {
    CAPTURE(f);
    CHECK(testing::slurp(straight / f) == testing::slurp(resumed / f));
  }

  auto other = rt.experiment;
  other.run_id = "different";
  auto s4 = fresh_state(rt);
  CHECK_THROWS_AS(run_experiment(other, s4, resumed.path()), ConfigError);
}

TEST_CASE("checkpoint json round trip") {
  RunState s;
  s.run_id = "r";
  s.iteration = 2;
  s.personas = {augment_persona(AugmentedPersona::from(Persona{"p", {{"sex", "Male"}}}), 1, {{"q", "Q?", "A"}})};
  s.stop_reason = StopReason::threshold_met;
  const auto back = checkpoint_from_json(checkpoint_to_json(s));
  CHECK(back.run_id == "r");
  CHECK(back.iteration == 2);
  CHECK(back.personas == s.personas);
  CHECK(back.stop_reason == StopReason::threshold_met);
}
