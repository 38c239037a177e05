#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "simdrift/adjustment.hpp"
#include "simdrift/config.hpp"
#include "simdrift/errors.hpp"
#include "simdrift/scm.hpp"

namespace simdrift::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> backend;
  std::optional<int> max_iterations;
};

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--seed", o.seed, "Master seed (overrides the config)");
  cmd->add_option("--backend", o.backend, "Respondent backend: scm, llm or replay (overrides the config)");
  cmd->add_option("--max-iterations", o.max_iterations, "Iteration budget (overrides the config)");
}

ExperimentConfig load_with_overrides(const std::string& path, const Overrides& o) {
  auto c = load_config(path);
  if (o.seed) c.seed = *o.seed;
  if (o.backend) c.backend.kind = *o.backend;
  if (o.max_iterations) c.adjust.max_iterations = *o.max_iterations;
  c.validate();
  return c;
}

std::map<std::string, std::string> parse_pairs(const std::vector<std::string>& items, const char* flag) {
  std::map<std::string, std::string> out;
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError(std::string(flag) + " expects name=value, got '" + item + "'");
    }
    out[item.substr(0, eq)] = item.substr(eq + 1);
  }
  return out;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

/// Shortest text that reads back as the same double.
std::string number(double v) { return json(v).dump(); }

std::string file_stem(const std::string& id) {
  std::string out;
  for (unsigned char c : id) out += std::isalnum(c) ? static_cast<char>(c) : '_';
  return out;
}

// ---------------------------------------------------------------------------
// Commands

int cmd_run(const std::string& config_path, const std::optional<std::string>& out_arg, const Overrides& o,
            std::ostream& out) {
  const auto cfg = load_with_overrides(config_path, o);
  const fs::path dir = out_arg ? fs::path(*out_arg) : cfg.resolve(cfg.output_dir);
  auto rt = build_runtime(cfg);
  RunState state;
  state.personas = rt.personas;
  const auto started = utc_now();
  run_experiment(rt.experiment, state, dir);
  // Wall-clock times live only here, never inside the data files.
  write_file_atomic(dir / "run_meta.json",
                    dump({{"run_id", rt.experiment.run_id}, {"started", started}, {"finished", utc_now()}}));
  out << dump(summary_json(state));
  return 0;
}

int cmd_oracle(const std::string& scm_path, const std::vector<std::string>& persona,
               const std::vector<std::string>& assign, const std::string& mode, std::ostream& out) {
  const auto spec = load_scm(scm_path);
  out << dump(oracle_report(spec, parse_pairs(persona, "--persona"), parse_pairs(assign, "--assign"),
                            respondent_mode_from_string(mode)));
  return 0;
}

int cmd_report(const std::string& records_path, const std::string& config_path, const std::optional<int>& iteration,
               const std::optional<std::string>& out_dir, const Overrides& o, std::ostream& out) {
  const auto cfg = load_with_overrides(config_path, o);
  const auto records = read_records_jsonl(records_path);
  if (records.empty()) throw DataError("records file " + records_path + " is empty");
  auto rt = build_runtime(cfg);
  auto reports = reports_from_records(rt.experiment, rt.personas, records);
  if (iteration) {
    std::erase_if(reports, [&](const IterationReport& r) { return r.iteration != *iteration; });
    if (reports.empty()) throw DataError("no records for iteration " + std::to_string(*iteration));
  }
  if (out_dir) {
    fs::create_directories(*out_dir);
    for (const auto& r : reports) {
      write_file_atomic(fs::path(*out_dir) / ("report_" + std::to_string(r.iteration) + ".json"),
                        dump(report_to_json(r)));
    }
  }
  json all = json::array();
  for (const auto& r : reports) all.push_back(report_to_json(r));
  out << dump(all);
  return 0;
}

int cmd_plotdata(const std::vector<std::string>& paths, const std::string& out_dir, std::ostream& out) {
  if (paths.empty()) throw ConfigError("plotdata needs at least one report");
  std::vector<IterationReport> reports;
  for (const auto& p : paths) {
    try {
      reports.push_back(report_from_json(json::parse(read_file(p))));
    } catch (const json::exception& e) {
      throw DataError(p + ": " + e.what());
    }
  }
  for (const auto& r : reports) {
    if (r.run_id != reports.front().run_id) {
      throw DataError("reports come from different runs (" + reports.front().run_id + ", " + r.run_id + ")");
    }
  }
  std::sort(reports.begin(), reports.end(),
            [](const IterationReport& a, const IterationReport& b) { return a.iteration < b.iteration; });
  for (std::size_t i = 1; i < reports.size(); ++i) {
    if (reports[i].iteration == reports[i - 1].iteration) {
      throw DataError("duplicate report for iteration " + std::to_string(reports[i].iteration));
    }
  }
  fs::create_directories(out_dir);
  auto opt = [](const std::optional<double>& v) { return v ? number(*v) : std::string(); };

  std::ostringstream effects;
  effects << "# run_id: " << reports.front().run_id << "\n"
          << "# One row per adjustment iteration. mean_tvd: mean over personas of the pooled negative-control\n"
          << "# TVD between arms; *_lo/*_hi: persona-bootstrap percentile interval (empty with one persona);\n"
          << "# observed_effect: mean arm-1 minus arm-0 outcome; null_tvd: split-half no-drift floor;\n"
          << "# exact_mean_tvd/exact_tau_ate_mix: oracle values when the backend provides them.\n"
          << "iteration,mean_tvd,mean_tvd_lo,mean_tvd_hi,observed_effect,effect_lo,effect_hi,null_tvd,"
             "exact_mean_tvd,exact_tau_ate_mix\n";
  for (const auto& r : reports) {
    effects << r.iteration << ',' << number(r.mean_tvd) << ','
            << (r.mean_tvd_ci ? number(r.mean_tvd_ci->lo) : "") << ','
            << (r.mean_tvd_ci ? number(r.mean_tvd_ci->hi) : "") << ',' << number(r.observed_effect) << ','
            << (r.effect_ci ? number(r.effect_ci->lo) : "") << ',' << (r.effect_ci ? number(r.effect_ci->hi) : "")
            << ',' << opt(r.null_tvd) << ',' << (r.exact ? number(r.exact->mean_tvd) : "") << ','
            << (r.exact ? number(r.exact->tau_ate_mix) : "") << '\n';
  }
  write_file_atomic(fs::path(out_dir) / "effects.csv", effects.str());

  std::map<std::string, std::ostringstream> per_variable;
  std::vector<std::string> written;
  for (const auto& r : reports) {
    for (const auto& nc : r.negative_controls) {
      auto [it, fresh] = per_variable.try_emplace(nc.question_id);
      auto& csv = it->second;
      if (fresh) {
        csv << "# run_id: " << r.run_id << "\n"
            << "# Negative control '" << nc.question_id << "': answer distribution pooled over personas.\n"
            << "# One row per (iteration, arm, category); arm is 0, 1 or marginal (both arms).\n"
            << "iteration,arm,category,probability\n";
      }
      const std::pair<const char*, const DiscreteDistribution*> arms[] = {
          {"0", &nc.arm0}, {"1", &nc.arm1}, {"marginal", &nc.marginal}};
      for (const auto& [arm, dist] : arms) {
        for (std::size_t i = 0; i < dist->support.size(); ++i) {
          csv << r.iteration << ',' << arm << ',' << csv_field(dist->support[i]) << ',' << number(dist->probs[i])
              << '\n';
        }
      }
    }
  }
  for (const auto& [qid, csv] : per_variable) {
    const auto name = "nc_" + file_stem(qid) + ".csv";
    write_file_atomic(fs::path(out_dir) / name, csv.str());
    written.push_back(name);
  }
  out << dump({{"rows", reports.size()}, {"effects", "effects.csv"}, {"negative_controls", written}});
  return 0;
}

int cmd_validate(const std::optional<std::string>& config, const std::optional<std::string>& scm,
                 const std::optional<std::string>& bank, std::ostream& out) {
  if (!config && !scm && !bank) throw ConfigError("validate needs --config, --scm or --bank");
  json result{{"ok", true}};
  if (config) {
    const auto cfg = load_config(*config);
    const auto rt = build_runtime(cfg);
    result["config"] = {{"path", *config},
                        {"run_id", rt.experiment.run_id},
                        {"personas", rt.personas.size()},
                        {"negative_controls", rt.experiment.bank.negative_controls.size()},
                        {"confounder_groups", rt.experiment.bank.confounder_groups.size()}};
  }
  if (scm) {
    const auto spec = load_scm(*scm);
    result["scm"] = {{"path", *scm}, {"name", spec.name}, {"latent_states", spec.x_states()}};
  }
  if (bank) {
    const auto b = load_question_bank(*bank);
    b.validate();
    result["bank"] = {{"path", *bank},
                      {"negative_controls", b.negative_controls.size()},
                      {"confounder_groups", b.confounder_groups.size()}};
  }
  out << dump(result);
  return 0;
}

int fail(std::ostream& err, const std::string& kind, const std::string& message, int code,
         const std::vector<std::string>& attempts = {}) {
  json j{{"error", kind}, {"message", message}, {"exit_code", code}};
  if (!attempts.empty()) j["attempts"] = attempts;
  err << j.dump() << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Two-arm simulated-user experiments with drift diagnostics and confounder adjustment"};
  app.require_subcommand(1);

  std::string config;
  std::optional<std::string> out_dir;
  Overrides overrides;
  auto* run = app.add_subcommand("run", "Run (or resume) an experiment");
  run->add_option("--config", config, "Experiment config JSON")->required();
  run->add_option("--out", out_dir, "Output directory (default: the config's output_dir)");
  add_overrides(run, overrides);

  std::string scm_path;
  std::vector<std::string> persona;
  std::vector<std::string> assign;
  std::string mode = "abductive";
  auto* oracle = app.add_subcommand("oracle", "Print exact estimands, TVD and posteriors of an SCM");
  oracle->add_option("--scm", scm_path, "SCM JSON")->required();
  oracle->add_option("--persona", persona, "L value as name=value (repeatable)");
  oracle->add_option("--assign", assign, "Elicited L' value as name=value (repeatable)");
  oracle->add_option("--mode", mode, "abductive or randomized");
  oracle->add_flag_callback("--randomized", [&] { mode = "randomized"; }, "Shorthand for --mode randomized");

  std::string records;
  std::optional<int> iteration;
  auto* report = app.add_subcommand("report", "Recompute iteration reports from a records file");
  report->add_option("--records", records, "records.jsonl")->required();
  report->add_option("--config", config, "Experiment config JSON")->required();
  report->add_option("--iteration", iteration, "Only this iteration");
  report->add_option("--out", out_dir, "Also write report_<k>.json files here");
  add_overrides(report, overrides);

  std::vector<std::string> report_paths;
  std::string plot_out = "plotdata";
  auto* plot = app.add_subcommand("plotdata", "Flatten reports into CSV files for plotting");
  plot->add_option("reports", report_paths, "report_<k>.json files")->required();
  plot->add_option("--out", plot_out, "Output directory");

  std::optional<std::string> v_config;
  std::optional<std::string> v_scm;
  std::optional<std::string> v_bank;
  auto* validate = app.add_subcommand("validate", "Validate a config, SCM or question bank");
  validate->add_option("--config", v_config, "Experiment config JSON");
  validate->add_option("--scm", v_scm, "SCM JSON");
  validate->add_option("--bank", v_bank, "Question bank JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    return fail(err, "usage_error", e.what(), 2);
  }

  try {
    if (run->parsed()) return cmd_run(config, out_dir, overrides, out);
    if (oracle->parsed()) return cmd_oracle(scm_path, persona, assign, mode, out);
    if (report->parsed()) return cmd_report(records, config, iteration, out_dir, overrides, out);
    if (plot->parsed()) return cmd_plotdata(report_paths, plot_out, out);
    if (validate->parsed()) return cmd_validate(v_config, v_scm, v_bank, out);
  } catch (const BackendError& e) {
    return fail(err, e.kind(), e.what(), 3, e.attempts());
  } catch (const ConfigError& e) {
    return fail(err, e.kind(), e.what(), 2);
  } catch (const DataError& e) {
    return fail(err, e.kind(), e.what(), 4);
  } catch (const json::exception& e) {
    return fail(err, "data_error", e.what(), 4);
  } catch (const fs::filesystem_error& e) {
    return fail(err, "data_error", e.what(), 4);
  }
  return fail(err, "usage_error", "no command given", 2);
}

}  // namespace simdrift::cli
