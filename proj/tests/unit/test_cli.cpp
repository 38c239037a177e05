#include <doctest.h>

#include <sstream>

#include "cli.hpp"
#include "test_support.hpp"

using namespace simdrift;

namespace {

struct Result {
  int code = 0;
  std::string out;
  std::string err;
  nlohmann::json json() const { return nlohmann::json::parse(out); }
  nlohmann::json error() const { return nlohmann::json::parse(err); }
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "simdrift");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int code = cli::main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string asset(const char* p) { return testing::asset(p).string(); }

/// Small variant of the toy config written next to the assets' relative paths.
std::string small_config(const testing::TempDir& dir) {
  auto j = nlohmann::json::parse(testing::slurp(testing::asset("configs/toy_drift_v1.json")));
  j["backend"]["scm"]["spec"] = asset("scm/toy_drift_v1.json");
  j["personas"]["source"] = asset("personas/toy.csv");
  j["personas"]["n"] = 5;
  j["adjust"]["trials"] = 6;
  j["adjust"]["epsilon"] = 0.0;
  j["bootstrap"]["resamples"] = 200;
  const auto path = dir / "config.json";
  testing::spit(path, j.dump(2));
  return path.string();
}

}  // namespace

TEST_CASE("oracle prints the toy world's exact values") {
  const auto r = run({"oracle", "--scm", asset("scm/toy_drift_v1.json")});
  REQUIRE(r.code == 0);
  const auto j = r.json();
  CHECK(std::abs(j["tau_obs"].get<double>() - 0.38) < 1e-9);
  CHECK(std::abs(j["sb"].get<double>() - 0.18) < 1e-9);
  CHECK(std::abs(j["tau_ate_mix"].get<double>() - 0.20) < 1e-9);
  CHECK(std::abs(j["tvd"].get<double>() - 0.48) < 1e-9);
  const auto fit = run({"oracle", "--scm", asset("scm/toy_drift_v1.json"), "--assign", "fitness=fit"}).json();
  CHECK(std::abs(fit["tvd"].get<double>() - 108.0 / 481.0) < 1e-9);
  const auto rnd = run({"oracle", "--scm", asset("scm/toy_drift_v1.json"), "--randomized"}).json();
  CHECK(std::abs(rnd["tvd"].get<double>()) < 1e-12);
  CHECK(rnd["mode"] == "randomized");
}

TEST_CASE("exit codes and error objects") {
  const auto missing = run({"oracle", "--scm", "/nonexistent/world.json"});
  CHECK(missing.code == 2);
  CHECK(missing.error()["message"].get<std::string>().find("/nonexistent/world.json") != std::string::npos);

  CHECK(run({"oracle"}).code == 2);
  CHECK(run({}).code == 2);
  CHECK(run({"oracle", "--scm", asset("scm/toy_drift_v1.json"), "--persona", "group=g7"}).code == 4);
  CHECK(run({"oracle", "--scm", asset("scm/toy_drift_v1.json"), "--assign", "nonsense"}).code == 2);

  testing::TempDir dir("cli_errors");
  const auto cfg = small_config(dir);
  testing::spit(dir / "bad.jsonl", "{\"persona_id\": \"x\"}\n");
  const auto bad = run({"report", "--records", (dir / "bad.jsonl").string(), "--config", cfg});
  CHECK(bad.code == 4);
  CHECK(bad.error()["message"].get<std::string>().find("line 1") != std::string::npos);
  testing::spit(dir / "empty.jsonl", "");
  CHECK(run({"report", "--records", (dir / "empty.jsonl").string(), "--config", cfg}).code == 4);
}

TEST_CASE("run, report and plotdata agree") {
  testing::TempDir dir("cli_run");
  const auto cfg = small_config(dir);
  const auto out = (dir / "out").string();
  const auto r = run({"run", "--config", cfg, "--out", out});
  REQUIRE(r.code == 0);
  const auto summary = r.json();
  CHECK(summary["iterations"] == 2);
  CHECK(summary["stop_reason"] == "max_iterations");
  for (const char* f : {"records.jsonl", "report_0.json", "report_1.json", "checkpoint.json", "summary.json",
                        "run_meta.json"}) {
    CHECK(std::filesystem::exists(dir / ("out/" + std::string(f))));
  }
  // Timestamps only appear in run_meta.json.
  CHECK(testing::slurp(dir / "out/summary.json").find("started") == std::string::npos);

  const auto rep = run({"report", "--records", out + "/records.jsonl", "--config", cfg, "--out", (dir / "re").string()});
  REQUIRE(rep.code == 0);
  CHECK(rep.json().size() == 2);
  CHECK(testing::slurp(dir / "re/report_1.json") == testing::slurp(dir / "out/report_1.json"));
  CHECK(run({"report", "--records", out + "/records.jsonl", "--config", cfg, "--iteration", "1"}).json().size() == 1);
  CHECK(run({"report", "--records", out + "/records.jsonl", "--config", cfg, "--iteration", "5"}).code == 4);

  const auto plot = run({"plotdata", out + "/report_0.json", out + "/report_1.json", "--out", (dir / "plot").string()});
  REQUIRE(plot.code == 0);
  const auto effects = testing::slurp(dir / "plot/effects.csv");
  CHECK(effects.rfind("# run_id: ", 0) == 0);
  CHECK(effects.find("\n0,") != std::string::npos);
  CHECK(effects.find("\n1,") != std::string::npos);
  const auto nc = testing::slurp(dir / "plot/nc_Z.csv");
  CHECK(nc.find("iteration,arm,category,probability") != std::string::npos);
  CHECK(nc.find("0,marginal,Unknown,0") != std::string::npos);

  // Re-running in the same directory resumes the finished run.
  const auto again = run({"run", "--config", cfg, "--out", out});
  CHECK(again.code == 0);
  CHECK(again.json() == summary);
}

TEST_CASE("plotdata refuses reports from different runs") {
  testing::TempDir dir("cli_mixed");
  const auto cfg = small_config(dir);
  REQUIRE(run({"run", "--config", cfg, "--out", (dir / "a").string()}).code == 0);
  REQUIRE(run({"run", "--config", cfg, "--out", (dir / "b").string(), "--seed", "5"}).code == 0);
  const auto mixed =
      run({"plotdata", (dir / "a/report_0.json").string(), (dir / "b/report_1.json").string(), "--out",
           (dir / "plot").string()});
  CHECK(mixed.code == 4);
}

TEST_CASE("resuming with a different config is a configuration error") {
  testing::TempDir dir("cli_resume");
  const auto cfg = small_config(dir);
  const auto out = (dir / "out").string();
  REQUIRE(run({"run", "--config", cfg, "--out", out}).code == 0);
  CHECK(run({"run", "--config", cfg, "--out", out, "--seed", "99"}).code == 2);
}

TEST_CASE("validate") {
  const auto ok = run({"validate", "--config", asset("configs/drift3.json"), "--scm", asset("scm/drift3.json"),
                       "--bank", asset("banks/opinionqa.json")});
  REQUIRE(ok.code == 0);
  CHECK(ok.json()["config"]["confounder_groups"] == 3);
  CHECK(ok.json()["bank"]["confounder_groups"] == 13);
  CHECK(run({"validate"}).code == 2);
}
