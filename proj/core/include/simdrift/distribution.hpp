#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace simdrift {

/// Reserved category for answers that match none of a schema's options.
inline constexpr std::string_view kUnknown = "Unknown";

/// Normalized probability vector over an ordered categorical support.
struct DiscreteDistribution {
  std::vector<std::string> support;
  std::vector<double> probs;

  static DiscreteDistribution from_counts(std::vector<std::string> support,
                                          std::span<const double> counts);
  static DiscreteDistribution point_mass(std::vector<std::string> support, std::size_t index);

  /// Probability of `label`; throws DataError when the label is not in the support.
  double prob(std::string_view label) const;
  std::size_t index_of(std::string_view label) const;

  /// Throws DataError on negative mass, a sum off by more than `tol`,
  /// duplicate support entries or mismatched lengths.
  void validate(double tol = 1e-12) const;

  bool operator==(const DiscreteDistribution&) const = default;
};

/// Total variation distance, 0.5 * sum_i |p_i - q_i|. The supports must be
/// identical (same labels in the same order); mismatches throw DataError
/// rather than being aligned silently.
double tvd(const DiscreteDistribution& p, const DiscreteDistribution& q);

/// Pooled TVD over several variables: half the sum of per-category gaps
/// across every listed pair.
double pooled_tvd(std::span<const DiscreteDistribution> arm1,
                  std::span<const DiscreteDistribution> arm0);

void to_json(nlohmann::json& j, const DiscreteDistribution& d);
void from_json(const nlohmann::json& j, DiscreteDistribution& d);

}  // namespace simdrift
