#include <doctest.h>

#include <cmath>

#include "brute_force.hpp"
#include "simdrift/errors.hpp"
#include "simdrift/scm.hpp"
#include "test_support.hpp"

using namespace simdrift;

namespace {

const ScmSpec& toy() {
  static const ScmSpec spec = load_scm(testing::asset("scm/toy_drift_v1.json"));
  return spec;
}

Assignment fit() { return assignment_of(toy(), {{"fitness", "fit"}}); }

}  // namespace

// Frozen from tests/oracles/toy_drift_enumeration.py (exact rational arithmetic).
TEST_CASE("toy world exact values") {
  const auto& s = toy();
  CHECK(validate_spec(s).empty());
  const auto q1 = latent_posterior(s, 0, 1, {}, RespondentMode::abductive);
  CHECK(q1[0] == doctest::Approx(0.8).epsilon(1e-14));
  const auto q1fit = latent_posterior(s, 0, 1, fit(), RespondentMode::abductive);
  CHECK(q1fit[0] == doctest::Approx(36.0 / 37.0).epsilon(1e-14));
  const auto q0fit = latent_posterior(s, 0, 0, fit(), RespondentMode::abductive);
  CHECK(q0fit[0] == doctest::Approx(9.0 / 13.0).epsilon(1e-14));

  const VariableRef z{VariableRole::negative_control, 0};
  const auto z1 = answer_distribution(s, 0, 1, z, {}, RespondentMode::abductive);
  const auto z0 = answer_distribution(s, 0, 0, z, {}, RespondentMode::abductive);
  CHECK(std::abs(z1.prob("1") - 0.74) < 1e-12);
  CHECK(std::abs(z0.prob("1") - 0.26) < 1e-12);

  const auto e = exact_estimands(s, 0, {});
  CHECK(std::abs(e.mu11 - 0.82) < 1e-12);
  CHECK(std::abs(e.mu00 - 0.44) < 1e-12);
  CHECK(std::abs(e.mu01 - 0.56) < 1e-12);
  CHECK(std::abs(e.mu10 - 0.58) < 1e-12);
  CHECK(std::abs(e.tau_obs - 0.38) < 1e-12);
  CHECK(std::abs(e.sb - 0.18) < 1e-12);
  CHECK(std::abs(e.tau_ate_mix - 0.20) < 1e-12);
  CHECK(std::abs(e.tau_ate_prior - 0.20) < 1e-12);
  CHECK(std::abs(exact_tvd(s, 0, {0}, {}, RespondentMode::abductive) - 0.48) < 1e-12);
  CHECK(std::abs(exact_tvd(s, 0, {0}, fit(), RespondentMode::abductive) - 108.0 / 481.0) < 1e-12);
  CHECK(std::abs(implied_treatment_rate(s, 0) - 0.5) < 1e-12);
}

TEST_CASE("randomized respondent has no drift") {
  const auto& s = toy();
  CHECK(exact_tvd(s, 0, {0}, {}, RespondentMode::randomized) == doctest::Approx(0.0));
  const auto e = exact_estimands(s, 0, {}, RespondentMode::randomized);
  CHECK(std::abs(e.sb) < 1e-15);
  CHECK(std::abs(e.tau_obs - e.tau_ate_prior) < 1e-15);
}

TEST_CASE("library inference agrees with joint enumeration on random specs") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    CAPTURE(seed);
    const RandomSpecDims dims{2, 2, 2 + seed % 2, 2, 2};
    const auto s = generate_random_spec(seed, dims, seed % 2 == 0);
    REQUIRE(validate_spec(s).empty());
    const std::size_t l = seed % 2;
    const Assignment assigned{{0, seed % dims.card}};
    for (bool randomized : {false, true}) {
      const auto mode = randomized ? RespondentMode::randomized : RespondentMode::abductive;
      for (const auto& a : {Assignment{}, assigned}) {
        for (int arm = 0; arm < 2; ++arm) {
          const auto lib = latent_posterior(s, l, arm, a, mode);
          const auto ref = testing::posterior_x(s, l, arm, a, randomized);
          for (std::size_t x = 0; x < lib.size(); ++x) CHECK(std::abs(lib[x] - ref[x]) < 1e-12);
          const auto zl = answer_distribution(s, l, arm, {VariableRole::negative_control, 1}, a, mode);
          const auto zr = testing::z_given_arm(s, l, 1, arm, a, randomized);
          for (std::size_t c = 0; c < zr.size(); ++c) CHECK(std::abs(zl.probs[c] - zr[c]) < 1e-12);
          for (int acond = 0; acond < 2; ++acond) {
            CHECK(std::abs(exact_mu(s, l, arm, acond, a, mode) - testing::mu(s, l, arm, acond, a, randomized)) <
                  1e-12);
          }
        }
        CHECK(std::abs(exact_tvd(s, l, {0, 1}, a, mode) - testing::tvd_all_z(s, l, a, randomized)) < 1e-12);
      }
    }
  }
}

TEST_CASE("answer distributions range over the variable's options") {
  const auto d = answer_distribution(toy(), 0, 1, {VariableRole::outcome, 0}, {}, RespondentMode::abductive);
  CHECK(d.support == std::vector<std::string>{"0", "1"});
  CHECK_NOTHROW(d.validate(1e-12));
}

TEST_CASE("decomposition identity and balanced prior equality") {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const bool balanced = seed % 2 == 0;
    const auto s = generate_random_spec(seed, RandomSpecDims{}, balanced);
    const auto e = exact_estimands(s, 0, {});
    CHECK(std::abs(e.tau_obs - e.sb - e.tau_ate_mix) <= 1e-12);
    if (balanced) {
      CHECK(std::abs(implied_treatment_rate(s, 0) - 0.5) < 1e-12);
      CHECK(std::abs(e.tau_ate_mix - e.tau_ate_prior) <= 1e-12);
    }
  }
}

TEST_CASE("degenerate evidence is reported") {
  auto s = toy();
  s.lprime_given_xl[0][0] = {{1.0, 0.0}, {1.0, 0.0}};
  CHECK_THROWS_AS(latent_posterior(s, 0, 1, {{0, 1}}, RespondentMode::abductive), DegenerateEvidenceError);
  auto t = toy();
  t.a1_given_xl[0] = {1.0, 1.0};
  CHECK_THROWS_AS(latent_posterior(t, 0, 0, {}, RespondentMode::abductive), DegenerateEvidenceError);
  CHECK_NOTHROW(latent_posterior(t, 0, 0, {}, RespondentMode::randomized));
}

TEST_CASE("validation reports broken tables") {
  auto s = toy();
  s.x_given_l[0] = {0.7, 0.7};
  const auto v = validate_spec(s);
  REQUIRE_FALSE(v.empty());
  CHECK(v.front().table == "x_given_l");

  auto t = toy();
  t.z_given_xl[0][0].pop_back();
  CHECK_FALSE(validate_spec(t).empty());

  auto u = toy();
  u.a1_given_xl[0][0] = 1.5;
  CHECK_FALSE(validate_spec(u).empty());

  auto w = toy();
  w.declared_parents["a_given_xl"] = {"type"};
  CHECK_FALSE(validate_spec(w).empty());

  CHECK_FALSE(validate_spec(toy(), 1).empty());  // state cap
}

TEST_CASE("json round trip and loading errors") {
  const auto j = scm_to_json(toy());
  auto back = scm_from_json(j);
  back.declared_parents = toy().declared_parents;
  CHECK(back == toy());
  try {
    load_scm("/nonexistent/world.json");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("/nonexistent/world.json") != std::string::npos);
  }
  testing::TempDir dir("scm");
  auto bad = j;
  bad["cpts"]["x_given_l"]["table"][0] = {0.9, 0.9};
  testing::spit(dir / "bad.json", bad.dump());
  CHECK_THROWS_AS(load_scm(dir / "bad.json"), ConfigError);
}

TEST_CASE("lookups by name") {
  const auto& s = toy();
  CHECK(l_state_of(s, {{"group", "g1"}}) == 1);
  CHECK_THROWS_AS(l_state_of(s, {}), DataError);
  CHECK_THROWS_AS(l_state_of(s, {{"group", "g9"}}), DataError);
  CHECK_THROWS_AS(assignment_of(s, {{"fitness", "strong"}}), DataError);
  CHECK_THROWS_AS(assignment_of(s, {{"height", "tall"}}), DataError);
  CHECK(find_variable(s, "Y")->role == VariableRole::outcome);
  CHECK(find_variable(s, "Z")->role == VariableRole::negative_control);
  CHECK(find_variable(s, "fitness")->role == VariableRole::confounder);
  CHECK_FALSE(find_variable(s, "nope").has_value());
}

TEST_CASE("mixed radix latent indexing") {
  const auto s = generate_random_spec(3, RandomSpecDims{1, 2, 3, 1, 1}, false);
  CHECK(s.x_states() == 9);
  CHECK(s.x_components(5) == std::vector<std::size_t>{1, 2});
}

TEST_CASE("oracle report fields") {
  const auto r = oracle_report(toy(), {}, {{"fitness", "fit"}}, RespondentMode::abductive);
  CHECK(r["persona"]["group"] == "g0");
  CHECK(std::abs(r["tvd"].get<double>() - 108.0 / 481.0) < 1e-12);
  for (const char* k : {"mu11", "mu10", "mu01", "mu00", "tau_obs", "sb", "tau_ate_mix", "tau_ate_prior",
                        "tvd_per_variable", "treatment_rate", "posterior"}) {
    CHECK(r.contains(k));
  }
}

TEST_CASE("random spec generation is deterministic") {
  CHECK(generate_random_spec(5, {}, true) == generate_random_spec(5, {}, true));
  CHECK_FALSE(generate_random_spec(5, {}, true) == generate_random_spec(6, {}, true));
}

TEST_CASE("drift world satisfies its design") {
  const auto s = load_scm(testing::asset("scm/drift3.json"));
  CHECK(s.x_states() == 8);
  CHECK(s.z_vars.size() == 3);
  CHECK(s.lprime_vars.size() == 6);
  for (std::size_t l = 0; l < s.l_states(); ++l) {
    CHECK(exact_tvd(s, l, {0, 1, 2}, {}, RespondentMode::abductive) > 0.3);
    Assignment full;
    for (std::size_t k = 0; k < s.lprime_vars.size(); k += 2) full.push_back({k, 1});
    CHECK(exact_tvd(s, l, {0, 1, 2}, full, RespondentMode::abductive) < 1e-12);
  }
}
