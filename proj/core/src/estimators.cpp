#include "simdrift/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "simdrift/errors.hpp"
#include "simdrift/respondents.hpp"
#include "simdrift/rng.hpp"

namespace simdrift {
namespace {

std::string cell_name(int iteration, std::string_view persona, int arm, std::string_view question) {
  return "iteration " + std::to_string(iteration) + ", persona '" + std::string(persona) + "', arm " +
         std::to_string(arm) + ", question '" + std::string(question) + "'";
}

/// Linear-interpolated quantile of sorted values (Hyndman-Fan type 7).
double quantile(const std::vector<double>& sorted, double p) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

RecordIndex::RecordIndex(std::span<const TrialRecord> records) {
  for (const auto& r : records) {
    cells_[Key{r.iteration, r.persona_id, r.arm, r.question_id}].push_back(&r);
    by_iteration_[r.iteration].push_back(&r);
  }
  for (auto& [key, cell] : cells_) {
    std::sort(cell.begin(), cell.end(),
              [](const TrialRecord* a, const TrialRecord* b) { return a->trial < b->trial; });
  }
}

std::span<const TrialRecord* const> RecordIndex::cell(int iteration, std::string_view persona, int arm,
                                                      std::string_view question) const {
  const auto it = cells_.find(Key{iteration, std::string(persona), arm, std::string(question)});
  if (it == cells_.end()) return {};
  return it->second;
}

std::vector<std::string> RecordIndex::personas(int iteration) const {
  std::set<std::string> ids;
  const auto it = by_iteration_.find(iteration);
  if (it != by_iteration_.end()) {
    for (const auto* r : it->second) ids.insert(r->persona_id);
  }
  return {ids.begin(), ids.end()};
}

std::vector<int> RecordIndex::iterations() const {
  std::vector<int> out;
  for (const auto& [k, v] : by_iteration_) out.push_back(k);
  return out;
}

std::vector<const TrialRecord*> RecordIndex::records(int iteration) const {
  const auto it = by_iteration_.find(iteration);
  return it == by_iteration_.end() ? std::vector<const TrialRecord*>{} : it->second;
}

DiscreteDistribution empirical_distribution(std::span<const TrialRecord* const> records,
                                            const AttributeSchema& schema) {
  auto support = schema.support_with_unknown();
  std::vector<double> counts(support.size(), 0.0);
  for (const auto* r : records) {
    const auto it = std::find(support.begin(), support.end() - 1, r->mapped);
    counts[static_cast<std::size_t>(it - support.begin())] += 1.0;
  }
  return DiscreteDistribution::from_counts(std::move(support), counts);
}

DiscreteDistribution empirical_distribution(const RecordIndex& index, int iteration,
                                            std::string_view persona, int arm, const Question& question) {
  const auto cell = index.cell(iteration, persona, arm, question.id);
  if (cell.empty()) {
    throw EmptyCellError("no records for " + cell_name(iteration, persona, arm, question.id));
  }
  return empirical_distribution(cell, question.schema);
}

double PersonaCells::tvd() const {
  double sum = 0.0;
  for (double v : tvd_per_variable()) sum += v;
  return sum;
}

std::vector<double> PersonaCells::tvd_per_variable() const {
  std::vector<double> out;
  out.reserve(negative_controls.size());
  for (const auto& nc : negative_controls) out.push_back(simdrift::tvd(nc.arm1, nc.arm0));
  return out;
}

std::optional<double> mean_outcome(const DiscreteDistribution& d, const AttributeSchema& outcome) {
  const auto enc = outcome.encoding_or_default();
  double mass = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < outcome.options.size(); ++i) {
    const double p = d.prob(outcome.options[i]);
    mass += p;
    total += p * enc[i];
  }
  if (mass <= 0.0) return std::nullopt;
  return total / mass;
}

PersonaCells empirical_cells(const RecordIndex& index, int iteration, std::string_view persona,
                             const QuestionBank& bank) {
  PersonaCells out;
  out.persona_id = std::string(persona);
  for (const auto& q : bank.negative_controls) {
    out.negative_controls.push_back({empirical_distribution(index, iteration, persona, 0, q),
                                     empirical_distribution(index, iteration, persona, 1, q)});
  }
  for (int a = 0; a < 2; ++a) {
    const auto cell = index.cell(iteration, persona, a, bank.outcome.id);
    if (cell.empty()) {
      throw EmptyCellError("no records for " + cell_name(iteration, persona, a, bank.outcome.id));
    }
    const auto d = empirical_distribution(cell, bank.outcome.schema);
    const auto slot = static_cast<std::size_t>(a);
    out.outcome_mean[slot] = mean_outcome(d, bank.outcome.schema);
    out.outcome_total[slot] = static_cast<double>(cell.size());
    out.outcome_unknown[slot] = d.prob(kUnknown) * static_cast<double>(cell.size());
  }
  return out;
}

double persona_tvd(const RecordIndex& index, std::string_view persona, int iteration,
                   std::span<const Question> negative_controls) {
  std::vector<DiscreteDistribution> arm1;
  std::vector<DiscreteDistribution> arm0;
  for (const auto& q : negative_controls) {
    arm1.push_back(empirical_distribution(index, iteration, persona, 1, q));
    arm0.push_back(empirical_distribution(index, iteration, persona, 0, q));
  }
  return pooled_tvd(arm1, arm0);
}

double mean_tvd(std::span<const PersonaCells> cells) {
  if (cells.empty()) throw DataError("mean TVD over zero personas");
  double sum = 0.0;
  for (const auto& c : cells) sum += c.tvd();
  return sum / static_cast<double>(cells.size());
}

EffectEstimate observed_effect(std::span<const PersonaCells> cells, std::span<const std::size_t> sample) {
  EffectEstimate out;
  double sum1 = 0.0;
  double sum0 = 0.0;
  for (std::size_t i : sample) {
    const auto& c = cells[i];
    out.unknown_outcomes += c.outcome_unknown[0] + c.outcome_unknown[1];
    if (!c.outcome_mean[0] || !c.outcome_mean[1]) {
      ++out.personas_excluded;
      continue;
    }
    sum1 += *c.outcome_mean[1];
    sum0 += *c.outcome_mean[0];
    ++out.personas_used;
  }
  if (out.personas_used == 0) {
    throw DataError("observed effect: no persona has a known outcome in both arms");
  }
  const auto n = static_cast<double>(out.personas_used);
  out.value = sum1 / n - sum0 / n;
  return out;
}

EffectEstimate observed_effect(std::span<const PersonaCells> cells) {
  std::vector<std::size_t> all(cells.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return observed_effect(cells, all);
}

EffectEstimate observed_effect(const RecordIndex& index, int iteration, const Question& outcome) {
  QuestionBank bank;
  bank.outcome = outcome;
  std::vector<PersonaCells> cells;
  for (const auto& p : index.personas(iteration)) cells.push_back(empirical_cells(index, iteration, p, bank));
  return observed_effect(cells);
}

Interval bootstrap_ci(const std::function<double(std::span<const std::size_t>)>& statistic,
                      std::size_t clusters, int resamples, double level, std::uint64_t seed) {
  if (clusters < 2) throw DataError("bootstrap needs at least 2 personas, got " + std::to_string(clusters));
  if (resamples < 100) throw ConfigError("bootstrap needs at least 100 resamples");
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("confidence level must lie in (0, 1)");
  Rng rng(mix64(seed));
  std::vector<double> stats;
  stats.reserve(static_cast<std::size_t>(resamples));
  std::vector<std::size_t> sample(clusters);
  for (int b = 0; b < resamples; ++b) {
    for (auto& s : sample) s = rng.below(clusters);
    try {
      stats.push_back(statistic(sample));
    } catch (const DataError&) {
      // A resample with no usable persona carries no information; skip it.
    }
  }
  if (stats.size() < static_cast<std::size_t>(resamples) / 2) {
    throw DataError("bootstrap: too many degenerate resamples");
  }
  std::sort(stats.begin(), stats.end());
  const double alpha = 1.0 - level;
  return {quantile(stats, alpha / 2.0), quantile(stats, 1.0 - alpha / 2.0)};
}

double null_tvd_reference(const RecordIndex& index, int iteration, std::span<const std::string> personas,
                          std::span<const Question> negative_controls, std::uint64_t seed, int splits) {
  if (personas.empty() || negative_controls.empty()) {
    throw DataError("null TVD reference needs personas and negative controls");
  }
  if (splits < 1) throw ConfigError("null TVD reference needs at least one split");
  double total = 0.0;
  for (const auto& persona : personas) {
    double persona_sum = 0.0;
    for (int arm = 0; arm < 2; ++arm) {
      std::vector<std::span<const TrialRecord* const>> cells;
      for (const auto& q : negative_controls) {
        const auto cell = index.cell(iteration, persona, arm, q.id);
        if (cell.size() < 2) {
          throw DataError("null TVD reference needs at least 2 trials in " +
                          cell_name(iteration, persona, arm, q.id));
        }
        cells.push_back(cell);
      }
      Rng rng(hash_combine(hash_combine(seed, stable_hash(persona)), static_cast<std::uint64_t>(arm)));
      for (int s = 0; s < splits; ++s) {
        std::vector<DiscreteDistribution> half_a;
        std::vector<DiscreteDistribution> half_b;
        double scale = 0.0;
        for (std::size_t v = 0; v < cells.size(); ++v) {
          std::vector<const TrialRecord*> shuffled(cells[v].begin(), cells[v].end());
          for (std::size_t i = shuffled.size(); i > 1; --i) std::swap(shuffled[i - 1], shuffled[rng.below(i)]);
          const std::size_t n1 = shuffled.size() / 2;
          const std::size_t n2 = shuffled.size() - n1;
          half_a.push_back(empirical_distribution(std::span(shuffled).first(n1), negative_controls[v].schema));
          half_b.push_back(empirical_distribution(std::span(shuffled).subspan(n1), negative_controls[v].schema));
          const double t = static_cast<double>(shuffled.size());
          scale += std::sqrt((2.0 / t) / (1.0 / static_cast<double>(n1) + 1.0 / static_cast<double>(n2)));
        }
        scale /= static_cast<double>(cells.size());
        persona_sum += scale * pooled_tvd(half_a, half_b);
      }
    }
    total += persona_sum / (2.0 * splits);
  }
  return total / static_cast<double>(personas.size());
}

DiscreteDistribution arm_nc_distribution(const RecordIndex& index, int iteration, const Question& question,
                                         int arm) {
  std::vector<const TrialRecord*> pooled;
  for (const auto* r : index.records(iteration)) {
    if (r->question_id == question.id && r->arm == arm) pooled.push_back(r);
  }
  if (pooled.empty()) {
    throw EmptyCellError("no records for question '" + question.id + "' in arm " + std::to_string(arm) +
                         " of iteration " + std::to_string(iteration));
  }
  return empirical_distribution(pooled, question.schema);
}

DiscreteDistribution marginal_nc_distribution(const RecordIndex& index, int iteration,
                                              const Question& question) {
  std::vector<const TrialRecord*> pooled;
  for (const auto* r : index.records(iteration)) {
    if (r->question_id == question.id) pooled.push_back(r);
  }
  if (pooled.empty()) {
    throw EmptyCellError("no records for question '" + question.id + "' in iteration " +
                         std::to_string(iteration));
  }
  return empirical_distribution(pooled, question.schema);
}

std::optional<double> retention_rate(const RecordIndex& index, int iteration,
                                     std::span<const AugmentedPersona> personas) {
  std::size_t total = 0;
  std::size_t kept = 0;
  for (const auto* r : index.records(iteration)) {
    if (r->kind != QuestionKind::retention_check || !is_retention_question(r->question_id)) continue;
    const auto p = std::find_if(personas.begin(), personas.end(),
                                [&](const AugmentedPersona& a) { return a.id() == r->persona_id; });
    if (p == personas.end()) continue;
    const auto* value = p->base.find(r->question_id.substr(kRetentionPrefix.size()));
    if (value == nullptr) continue;
    ++total;
    kept += r->mapped == *value ? 1 : 0;
  }
  if (total == 0) return std::nullopt;
  return static_cast<double>(kept) / static_cast<double>(total);
}

}  // namespace simdrift
