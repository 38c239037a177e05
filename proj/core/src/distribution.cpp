#include "simdrift/distribution.hpp"

#include <cmath>
#include <numeric>
#include <set>

#include "simdrift/errors.hpp"

namespace simdrift {

DiscreteDistribution DiscreteDistribution::from_counts(std::vector<std::string> support,
                                                       std::span<const double> counts) {
  if (support.size() != counts.size()) {
    throw DataError("from_counts: support and counts differ in length");
  }
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  if (!(total > 0.0)) throw DataError("from_counts: no mass");
  DiscreteDistribution d{std::move(support), {}};
  d.probs.reserve(counts.size());
  for (double c : counts) d.probs.push_back(c / total);
  return d;
}

DiscreteDistribution DiscreteDistribution::point_mass(std::vector<std::string> support,
                                                      std::size_t index) {
  if (index >= support.size()) throw DataError("point_mass: index out of range");
  DiscreteDistribution d{std::move(support), {}};
  d.probs.assign(d.support.size(), 0.0);
  d.probs[index] = 1.0;
  return d;
}

std::size_t DiscreteDistribution::index_of(std::string_view label) const {
  for (std::size_t i = 0; i < support.size(); ++i) {
    if (support[i] == label) return i;
  }
  throw DataError("label '" + std::string(label) + "' not in distribution support");
}

double DiscreteDistribution::prob(std::string_view label) const {
  return probs[index_of(label)];
}

void DiscreteDistribution::validate(double tol) const {
  if (support.size() != probs.size()) throw DataError("distribution: length mismatch");
  if (support.empty()) throw DataError("distribution: empty support");
  std::set<std::string_view> seen;
  for (const auto& s : support) {
    if (!seen.insert(s).second) throw DataError("distribution: duplicate label '" + s + "'");
  }
  double sum = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || p > 1.0 + tol) throw DataError("distribution: probability outside [0,1]");
    sum += p;
  }
  if (std::abs(sum - 1.0) > tol) {
    throw DataError("distribution: probabilities sum to " + std::to_string(sum));
  }
}

double tvd(const DiscreteDistribution& p, const DiscreteDistribution& q) {
  if (p.support != q.support) throw DataError("tvd: supports differ");
  if (p.probs.size() != p.support.size() || q.probs.size() != q.support.size()) {
    throw DataError("tvd: malformed distribution");
  }
  double gap = 0.0;
  for (std::size_t i = 0; i < p.probs.size(); ++i) gap += std::abs(p.probs[i] - q.probs[i]);
  return 0.5 * gap;
}

double pooled_tvd(std::span<const DiscreteDistribution> arm1,
                  std::span<const DiscreteDistribution> arm0) {
  if (arm1.size() != arm0.size()) throw DataError("pooled_tvd: variable counts differ");
  double total = 0.0;
  for (std::size_t v = 0; v < arm1.size(); ++v) total += tvd(arm1[v], arm0[v]);
  return total;
}

void to_json(nlohmann::json& j, const DiscreteDistribution& d) {
  j = nlohmann::json{{"support", d.support}, {"probs", d.probs}};
}

void from_json(const nlohmann::json& j, DiscreteDistribution& d) {
  j.at("support").get_to(d.support);
  j.at("probs").get_to(d.probs);
}

}  // namespace simdrift
