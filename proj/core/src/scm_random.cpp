#include "simdrift/errors.hpp"
#include "simdrift/rng.hpp"
#include "simdrift/scm.hpp"

namespace simdrift {
namespace {

constexpr int kBalanceRetries = 200;
constexpr double kInteriorMargin = 1e-6;

std::vector<double> dirichlet_row(Rng& rng, std::size_t k) {
  std::vector<double> row(k);
  double total = 0.0;
  for (auto& v : row) {
    v = rng.exponential();
    total += v;
  }
  for (auto& v : row) v /= total;
  return row;
}

Variable make_var(std::string name, std::size_t card) {
  Variable v{std::move(name), {}, std::nullopt};
  for (std::size_t i = 0; i < card; ++i) v.options.push_back("v" + std::to_string(i));
  return v;
}

CptXL xl_table(Rng& rng, std::size_t nl, std::size_t nx, std::size_t card) {
  CptXL t(nl, CptRows(nx));
  for (auto& rows : t) {
    for (auto& row : rows) row = dirichlet_row(rng, card);
  }
  return t;
}

}  // namespace

ScmSpec generate_random_spec(std::uint64_t seed, const RandomSpecDims& dims, bool balanced) {
  if (dims.card < 2 || dims.n_x < 1) throw ConfigError("random spec needs card >= 2 and n_x >= 1");
  Rng rng(hash_combine(stable_hash("simdrift.random_spec"), seed));

  ScmSpec spec;
  spec.name = "random-" + std::to_string(seed) + (balanced ? "-balanced" : "");
  for (std::size_t i = 0; i < dims.n_l; ++i) spec.l_vars.push_back(make_var("L" + std::to_string(i), dims.card));
  for (std::size_t i = 0; i < dims.n_x; ++i) spec.x_vars.push_back(make_var("X" + std::to_string(i), dims.card));
  spec.y_var = make_var("Y", dims.card);
  for (std::size_t i = 0; i < dims.n_z; ++i) spec.z_vars.push_back(make_var("Z" + std::to_string(i), dims.card));
  for (std::size_t i = 0; i < dims.n_lprime; ++i) {
    spec.lprime_vars.push_back(make_var("LP" + std::to_string(i), dims.card));
  }

  const auto nl = spec.l_states();
  const auto nx = spec.x_states();
  if (static_cast<double>(nl) * static_cast<double>(nx) > static_cast<double>(kDefaultStateCap)) {
    throw ConfigError("random spec dimensions exceed the state-space cap");
  }

  spec.x_given_l.resize(nl);
  for (auto& row : spec.x_given_l) row = dirichlet_row(rng, nx);

  spec.a1_given_xl.assign(nl, std::vector<double>(nx));
  for (std::size_t l = 0; l < nl; ++l) {
    int attempt = 0;
    for (;; ++attempt) {
      auto& row = spec.a1_given_xl[l];
      for (auto& p : row) p = rng.uniform();
      if (!balanced) break;
      double rate = 0.0;
      for (std::size_t x = 0; x < nx; ++x) rate += row[x] * spec.x_given_l[l][x];
      const double shift = 0.5 - rate;
      bool interior = true;
      for (auto& p : row) {
        p += shift;
        interior = interior && p > kInteriorMargin && p < 1.0 - kInteriorMargin;
      }
      if (interior) break;
      if (attempt + 1 >= kBalanceRetries) {
        throw ConfigError("could not balance treatment table for L state " + std::to_string(l));
      }
    }
  }

  for (auto& slice : spec.y_given_axl) slice = xl_table(rng, nl, nx, spec.y_var.card());
  for (const auto& z : spec.z_vars) spec.z_given_xl.push_back(xl_table(rng, nl, nx, z.card()));
  for (const auto& lp : spec.lprime_vars) {
    spec.lprime_given_xl.push_back(xl_table(rng, nl, nx, lp.card()));
  }
  return spec;
}

}  // namespace simdrift
