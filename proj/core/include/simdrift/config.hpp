#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "simdrift/adjustment.hpp"
#include "simdrift/llm_client.hpp"
#include "simdrift/replay.hpp"
#include "simdrift/scm.hpp"

namespace simdrift {

struct ScmBackendConfig {
  std::string spec;  // path to the SCM JSON
  RespondentMode mode = RespondentMode::abductive;
  /// question id -> SCM variable; empty means question ids equal variable names.
  std::map<std::string, std::string> question_map;
  bool operator==(const ScmBackendConfig&) const = default;
};

struct LlmBackendConfig {
  LlmSettings user;
  std::optional<LlmSettings> agent;  // agent-dialogue scenarios; defaults to `user`
  bool operator==(const LlmBackendConfig&) const = default;
};

struct ReplayBackendConfig {
  std::string store;                // JSONL answer store
  std::string upstream = "none";    // none | scm | llm: answers misses and records them
  bool operator==(const ReplayBackendConfig&) const = default;
};

struct BackendConfig {
  std::string kind = "scm";       // scm | llm | replay
  std::string agent = "template"; // template | llm (agent-dialogue scenarios)
  std::optional<ScmBackendConfig> scm;
  std::optional<LlmBackendConfig> llm;
  std::optional<ReplayBackendConfig> replay;
  bool operator==(const BackendConfig&) const = default;
};

struct PersonaSourceConfig {
  std::string source;  // CSV/TSV with one column per persona attribute
  std::size_t n = 0;
  std::optional<std::uint64_t> seed;  // defaults to the master seed
  bool operator==(const PersonaSourceConfig&) const = default;
};

/// A complete experiment. Relative paths resolve against `base_dir` (the
/// directory of the config file), which is not serialized.
struct ExperimentConfig {
  std::string name;
  std::variant<std::string, Scenario> scenario;  // path or inline object
  BackendConfig backend;
  PersonaSourceConfig personas;
  std::string question_bank;  // path; empty derives the bank from the SCM
  std::size_t scm_group_size = 2;
  AdjustConfig adjust;
  int bootstrap_resamples = 1000;
  double level = 0.95;
  int null_splits = 20;
  std::optional<std::uint64_t> seed;
  std::string output_dir;
  std::filesystem::path base_dir;

  /// Throws ConfigError: missing seed, missing files (named by path),
  /// incomplete backend settings, invalid numeric settings.
  void validate() const;
  std::filesystem::path resolve(const std::string& path) const;

  bool operator==(const ExperimentConfig& o) const;
};

ExperimentConfig parse_config(const nlohmann::json& j, std::filesystem::path base_dir = {});
nlohmann::json config_to_json(const ExperimentConfig& c);
/// Parses and validates.
ExperimentConfig load_config(const std::filesystem::path& path);

/// Stable identifier of (config, seed): independent of output directory and
/// worker count, free of timestamps.
std::string run_id(const ExperimentConfig& c);

/// Loaded, ready-to-run experiment built from a config.
struct Runtime {
  std::shared_ptr<Respondent> respondent;
  std::shared_ptr<ChatAgent> agent;
  std::shared_ptr<ReplayStore> store;
  std::optional<ScmSpec> scm;
  Experiment experiment;
  std::vector<AugmentedPersona> personas;  // before any elicitation
};

Runtime build_runtime(const ExperimentConfig& c);

}  // namespace simdrift
