#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "simdrift/rng.hpp"

using namespace simdrift;

TEST_CASE("stable_hash is 64-bit FNV-1a") {
  CHECK(stable_hash("") == 0xcbf29ce484222325ULL);
  CHECK(stable_hash("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(stable_hash("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("hash_combine is order sensitive") {
  CHECK(hash_combine(1, 2) != hash_combine(2, 1));
  CHECK(hash_combine(1, 2) == hash_combine(1, 2));
}

TEST_CASE("Rng is reproducible under a seed") {
  Rng a(42), b(42), c(43);
  std::vector<std::uint64_t> xa, xb, xc;
  for (int i = 0; i < 16; ++i) {
    xa.push_back(a.next());
    xb.push_back(b.next());
    xc.push_back(c.next());
  }
  CHECK(xa == xb);
  CHECK(xa != xc);
}

TEST_CASE("mt19937_64 reference output") {
  // The 10000th output of a default-seeded mt19937_64 is fixed by the standard.
  Rng r(5489);
  std::uint64_t v = 0;
  for (int i = 0; i < 10000; ++i) v = r.next();
  CHECK(v == 9981545732273789042ULL);
}

TEST_CASE("below stays in range and covers it") {
  Rng r(7);
  std::set<std::size_t> seen;
  for (int i = 0; i < 2000; ++i) {
    const auto v = r.below(6);
    REQUIRE(v < 6);
    seen.insert(v);
  }
  CHECK(seen.size() == 6);
}

TEST_CASE("uniform lies in [0, 1) with mean near 1/2") {
  Rng r(11);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(std::abs(sum / n - 0.5) < 4.0 * std::sqrt(1.0 / 12.0 / n));
}

TEST_CASE("categorical frequencies follow the weights") {
  Rng r(3);
  const std::vector<double> p{0.2, 0.0, 0.5, 0.3};
  std::vector<int> counts(4, 0);
  const int n = 50000;
  for (int i = 0; i < n; ++i) ++counts[r.categorical(p)];
  CHECK(counts[1] == 0);
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double se = std::sqrt(p[k] * (1 - p[k]) / n);
    CHECK(std::abs(counts[k] / static_cast<double>(n) - p[k]) <= 4.0 * se + 1e-12);
  }
}

TEST_CASE("normal and exponential moments") {
  Rng r(5);
  const int n = 100000;
  double s = 0, s2 = 0, e = 0;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    s += z;
    s2 += z * z;
    e += r.exponential();
  }
  CHECK(std::abs(s / n) < 0.02);
  CHECK(std::abs(s2 / n - 1.0) < 0.03);
  CHECK(std::abs(e / n - 1.0) < 0.02);
}
