#include <doctest.h>

#include <vector>

#include "simdrift/distribution.hpp"
#include "simdrift/errors.hpp"

using namespace simdrift;

namespace {
DiscreteDistribution dist(std::vector<double> p) {
  std::vector<std::string> support;
  for (std::size_t i = 0; i < p.size(); ++i) support.push_back("c" + std::to_string(i));
  return DiscreteDistribution{support, p};
}
}  // namespace

TEST_CASE("tvd of the toy negative control") {
  CHECK(tvd(dist({0.26, 0.74}), dist({0.74, 0.26})) == doctest::Approx(0.48).epsilon(1e-15));
}

TEST_CASE("tvd of identical and disjoint distributions") {
  CHECK(tvd(dist({0.3, 0.7}), dist({0.3, 0.7})) == 0.0);
  CHECK(tvd(dist({1.0, 0.0}), dist({0.0, 1.0})) == 1.0);
}

TEST_CASE("tvd rejects mismatched supports") {
  DiscreteDistribution a{{"x", "y"}, {0.5, 0.5}};
  DiscreteDistribution b{{"y", "x"}, {0.5, 0.5}};
  CHECK_THROWS_AS(tvd(a, b), DataError);
  DiscreteDistribution c{{"x", "y", "z"}, {0.5, 0.5, 0.0}};
  CHECK_THROWS_AS(tvd(a, c), DataError);
}

TEST_CASE("pooled tvd sums per-variable distances") {
  std::vector<DiscreteDistribution> a1{dist({0.5, 0.5}), dist({1.0, 0.0})};
  std::vector<DiscreteDistribution> a0{dist({0.25, 0.75}), dist({0.0, 1.0})};
  CHECK(pooled_tvd(a1, a0) == doctest::Approx(1.25));
  std::vector<DiscreteDistribution> shorter{dist({0.5, 0.5})};
  CHECK_THROWS_AS(pooled_tvd(a1, shorter), DataError);
}

TEST_CASE("from_counts normalizes and rejects empty mass") {
  const std::vector<double> counts{1, 3};
  const auto d = DiscreteDistribution::from_counts({"a", "b"}, counts);
  CHECK(d.prob("a") == 0.25);
  CHECK(d.prob("b") == 0.75);
  CHECK_THROWS_AS(d.prob("c"), DataError);
  const std::vector<double> zero{0, 0};
  CHECK_THROWS_AS(DiscreteDistribution::from_counts({"a", "b"}, zero), DataError);
  const std::vector<double> one{1};
  CHECK_THROWS_AS(DiscreteDistribution::from_counts({"a", "b"}, one), DataError);
}

TEST_CASE("validate catches malformed distributions") {
  CHECK_NOTHROW(dist({0.2, 0.8}).validate());
  CHECK_THROWS_AS(dist({0.2, 0.7}).validate(), DataError);
  CHECK_THROWS_AS(dist({-0.2, 1.2}).validate(), DataError);
  CHECK_THROWS_AS((DiscreteDistribution{{"a", "a"}, {0.5, 0.5}}.validate()), DataError);
  CHECK_THROWS_AS((DiscreteDistribution{{"a"}, {0.5, 0.5}}.validate()), DataError);
}

TEST_CASE("point mass and json round trip") {
  const auto d = DiscreteDistribution::point_mass({"a", "b", "c"}, 1);
  CHECK(d.probs == std::vector<double>{0, 1, 0});
  const nlohmann::json j = d;
  CHECK(j.get<DiscreteDistribution>() == d);
  CHECK_THROWS_AS(DiscreteDistribution::point_mass({"a"}, 1), DataError);
}
