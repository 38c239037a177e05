#include <algorithm>

#include "simdrift/errors.hpp"
#include "simdrift/estimators.hpp"
#include "simdrift/rng.hpp"

namespace simdrift {
namespace {

/// Percentile intervals need not contain the point estimate; widen them
/// when they do not so every reported interval brackets its estimate.
Interval bracket(Interval ci, double point) {
  return {std::min(ci.lo, point), std::max(ci.hi, point)};
}

nlohmann::json interval_json(const std::optional<Interval>& ci) {
  if (!ci) return nullptr;
  return nlohmann::json::array({ci->lo, ci->hi});
}

std::optional<Interval> interval_from(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return Interval{j.at(0).get<double>(), j.at(1).get<double>()};
}

template <typename T>
nlohmann::json optional_json(const std::optional<T>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace

IterationReport build_report(const RecordIndex& index, int iteration, const QuestionBank& bank,
                             std::span<const AugmentedPersona> personas, std::span<const PersonaCells> cells,
                             const ReportSettings& settings) {
  if (cells.empty()) throw DataError("report for iteration " + std::to_string(iteration) + " has no personas");
  IterationReport r;
  r.iteration = iteration;

  double variable_average = 0.0;
  for (const auto& c : cells) {
    r.persona_tvd.emplace_back(c.persona_id, c.tvd());
    const auto per = c.tvd_per_variable();
    double s = 0.0;
    for (double v : per) s += v;
    variable_average += per.empty() ? 0.0 : s / static_cast<double>(per.size());
  }
  const double n = static_cast<double>(cells.size());
  r.mean_tvd = mean_tvd(cells);
  r.mean_tvd_variable_average = variable_average / n;

  const auto effect = observed_effect(cells);
  r.observed_effect = effect.value;
  r.counts.unknown_outcomes = effect.unknown_outcomes;
  r.counts.excluded_personas = effect.personas_excluded;

  if (cells.size() >= 2) {
    const std::uint64_t base = hash_combine(settings.seed, static_cast<std::uint64_t>(iteration));
    const auto tvd_ci = bootstrap_ci(
        [&](std::span<const std::size_t> sample) {
          double s = 0.0;
          for (std::size_t i : sample) s += cells[i].tvd();
          return s / static_cast<double>(sample.size());
        },
        cells.size(), settings.bootstrap_resamples, settings.level, hash_combine(base, stable_hash("tvd")));
    r.mean_tvd_ci = bracket(tvd_ci, r.mean_tvd);
    const auto effect_ci = bootstrap_ci(
        [&](std::span<const std::size_t> sample) { return observed_effect(cells, sample).value; }, cells.size(),
        settings.bootstrap_resamples, settings.level, hash_combine(base, stable_hash("effect")));
    r.effect_ci = bracket(effect_ci, r.observed_effect);
  }

  std::vector<std::string> ids;
  for (const auto& c : cells) ids.push_back(c.persona_id);
  try {
    r.null_tvd = null_tvd_reference(index, iteration, ids, bank.negative_controls,
                                    hash_combine(settings.seed, stable_hash("null")), settings.null_splits);
  } catch (const DataError&) {
    r.null_tvd = std::nullopt;  // fewer than two trials per cell
  }

  for (std::size_t v = 0; v < bank.negative_controls.size(); ++v) {
    const auto& q = bank.negative_controls[v];
    NcDistributions d;
    d.question_id = q.id;
    d.arm0 = arm_nc_distribution(index, iteration, q, 0);
    d.arm1 = arm_nc_distribution(index, iteration, q, 1);
    d.marginal = marginal_nc_distribution(index, iteration, q);
    double s = 0.0;
    for (const auto& c : cells) s += tvd(c.negative_controls.at(v).arm1, c.negative_controls.at(v).arm0);
    d.mean_tvd = s / n;
    r.negative_controls.push_back(std::move(d));
  }

  r.retention_rate = retention_rate(index, iteration, personas);

  for (const auto* rec : index.records(iteration)) {
    ++r.counts.total;
    switch (rec->kind) {
      case QuestionKind::outcome: ++r.counts.outcome; break;
      case QuestionKind::negative_control: ++r.counts.negative_control; break;
      case QuestionKind::confounder: ++r.counts.confounder; break;
      case QuestionKind::retention_check: ++r.counts.retention_check; break;
    }
  }
  return r;
}

nlohmann::json report_to_json(const IterationReport& r) {
  nlohmann::json personas = nlohmann::json::array();
  for (const auto& [id, v] : r.persona_tvd) personas.push_back({{"persona", id}, {"tvd", v}});
  nlohmann::json ncs = nlohmann::json::array();
  for (const auto& d : r.negative_controls) {
    ncs.push_back({{"question", d.question_id},
                   {"arm0", d.arm0},
                   {"arm1", d.arm1},
                   {"marginal", d.marginal},
                   {"mean_tvd", d.mean_tvd}});
  }
  nlohmann::json j{{"run_id", r.run_id},
                   {"iteration", r.iteration},
                   {"estimation", r.estimation},
                   {"persona_tvd", personas},
                   {"mean_tvd", r.mean_tvd},
                   {"mean_tvd_ci", interval_json(r.mean_tvd_ci)},
                   {"mean_tvd_variable_average", r.mean_tvd_variable_average},
                   {"observed_effect", r.observed_effect},
                   {"effect_ci", interval_json(r.effect_ci)},
                   {"null_tvd", optional_json(r.null_tvd)},
                   {"negative_controls", ncs},
                   {"retention_rate", optional_json(r.retention_rate)},
                   {"counts",
                    {{"total", r.counts.total},
                     {"outcome", r.counts.outcome},
                     {"negative_control", r.counts.negative_control},
                     {"confounder", r.counts.confounder},
                     {"retention_check", r.counts.retention_check},
                     {"unknown_outcomes", r.counts.unknown_outcomes},
                     {"excluded_personas", r.counts.excluded_personas}}}};
  if (r.exact) {
    j["exact"] = {{"mean_tvd", r.exact->mean_tvd},
                  {"tau_obs", r.exact->tau_obs},
                  {"tau_ate_mix", r.exact->tau_ate_mix},
                  {"tau_ate_prior", r.exact->tau_ate_prior},
                  {"sb", r.exact->sb}};
  } else {
    j["exact"] = nullptr;
  }
  return j;
}

IterationReport report_from_json(const nlohmann::json& j) {
  try {
    IterationReport r;
    r.run_id = j.at("run_id").get<std::string>();
    r.iteration = j.at("iteration").get<int>();
    r.estimation = j.at("estimation").get<std::string>();
    for (const auto& p : j.at("persona_tvd")) {
      r.persona_tvd.emplace_back(p.at("persona").get<std::string>(), p.at("tvd").get<double>());
    }
    r.mean_tvd = j.at("mean_tvd").get<double>();
    r.mean_tvd_ci = interval_from(j.at("mean_tvd_ci"));
    r.mean_tvd_variable_average = j.at("mean_tvd_variable_average").get<double>();
    r.observed_effect = j.at("observed_effect").get<double>();
    r.effect_ci = interval_from(j.at("effect_ci"));
    if (!j.at("null_tvd").is_null()) r.null_tvd = j.at("null_tvd").get<double>();
    for (const auto& d : j.at("negative_controls")) {
      NcDistributions nc;
      nc.question_id = d.at("question").get<std::string>();
      d.at("arm0").get_to(nc.arm0);
      d.at("arm1").get_to(nc.arm1);
      d.at("marginal").get_to(nc.marginal);
      nc.mean_tvd = d.at("mean_tvd").get<double>();
      r.negative_controls.push_back(std::move(nc));
    }
    if (!j.at("retention_rate").is_null()) r.retention_rate = j.at("retention_rate").get<double>();
    const auto& c = j.at("counts");
    r.counts.total = c.at("total").get<std::size_t>();
    r.counts.outcome = c.at("outcome").get<std::size_t>();
    r.counts.negative_control = c.at("negative_control").get<std::size_t>();
    r.counts.confounder = c.at("confounder").get<std::size_t>();
    r.counts.retention_check = c.at("retention_check").get<std::size_t>();
    r.counts.unknown_outcomes = c.at("unknown_outcomes").get<double>();
    r.counts.excluded_personas = c.at("excluded_personas").get<std::size_t>();
    if (j.contains("exact") && !j.at("exact").is_null()) {
      const auto& e = j.at("exact");
      r.exact = ExactSummary{e.at("mean_tvd").get<double>(), e.at("tau_obs").get<double>(),
                             e.at("tau_ate_mix").get<double>(), e.at("tau_ate_prior").get<double>(),
                             e.at("sb").get<double>()};
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed iteration report: ") + e.what());
  }
}

}  // namespace simdrift
