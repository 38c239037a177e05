#include "simdrift/config.hpp"

#include <fstream>
#include <sstream>

#include "simdrift/errors.hpp"
#include "simdrift/rng.hpp"

namespace simdrift {
namespace {

template <typename T>
T required(const nlohmann::json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + ": missing '" + key + "'");
  return j.at(key).get<T>();
}

void require_file(const ExperimentConfig& c, const std::string& path, const std::string& what) {
  if (path.empty()) throw ConfigError(what + " path is empty");
  const auto p = c.resolve(path);
  if (!std::filesystem::exists(p)) throw ConfigError(what + " not found: " + p.string());
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read scenario " + path.string());
  try {
    return nlohmann::json::parse(in).get<Scenario>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("scenario " + path.string() + ": " + e.what());
  }
}

}  // namespace

std::filesystem::path ExperimentConfig::resolve(const std::string& path) const {
  const std::filesystem::path p(path);
  return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
}

bool ExperimentConfig::operator==(const ExperimentConfig& o) const {
  return config_to_json(*this) == config_to_json(o);
}

void ExperimentConfig::validate() const {
  if (!seed) throw ConfigError("config: 'seed' is mandatory");
  if (const auto* path = std::get_if<std::string>(&scenario)) {
    require_file(*this, *path, "scenario");
  } else {
    std::get<Scenario>(scenario).validate();
  }
  if (personas.n < 1) throw ConfigError("personas: n must be at least 1");
  require_file(*this, personas.source, "persona source");
  if (!question_bank.empty()) {
    require_file(*this, question_bank, "question bank");
  } else if (!backend.scm) {
    throw ConfigError("question_bank is required unless it is derived from an SCM");
  }
  if (scm_group_size < 1) throw ConfigError("scm_group_size must be at least 1");
  if (bootstrap_resamples < 100) throw ConfigError("bootstrap.resamples must be at least 100");
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("bootstrap.level must lie in (0, 1)");
  if (null_splits < 1) throw ConfigError("null_splits must be at least 1");

  auto need_scm = [&] {
    if (!backend.scm) throw ConfigError("backend '" + backend.kind + "' needs an 'scm' block");
    require_file(*this, backend.scm->spec, "SCM spec");
  };
  auto need_llm = [&] {
    if (!backend.llm) throw ConfigError("backend '" + backend.kind + "' needs an 'llm' block");
    backend.llm->user.validate();
    if (backend.llm->agent) backend.llm->agent->validate();
  };
  if (backend.kind == "scm") {
    need_scm();
  } else if (backend.kind == "llm") {
    need_llm();
  } else if (backend.kind == "replay") {
    if (!backend.replay) throw ConfigError("backend 'replay' needs a 'replay' block");
    if (backend.replay->store.empty()) throw ConfigError("replay: 'store' path is empty");
    const auto& up = backend.replay->upstream;
    if (up == "none") {
      require_file(*this, backend.replay->store, "replay store");
    } else if (up == "scm") {
      need_scm();
    } else if (up == "llm") {
      need_llm();
    } else {
      throw ConfigError("replay: unknown upstream '" + up + "' (expected none, scm or llm)");
    }
  } else {
    throw ConfigError("unknown backend '" + backend.kind + "' (expected scm, llm or replay)");
  }
  if (backend.agent != "template" && backend.agent != "llm") {
    throw ConfigError("unknown agent '" + backend.agent + "' (expected template or llm)");
  }
  if (backend.agent == "llm" && !backend.llm) throw ConfigError("agent 'llm' needs an 'llm' block");
  if (adjust.trials < 1) throw ConfigError("adjust.trials must be at least 1");
  if (!(adjust.epsilon >= 0.0)) throw ConfigError("adjust.epsilon must be non-negative");
}

ExperimentConfig parse_config(const nlohmann::json& j, std::filesystem::path base_dir) {
  try {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    ExperimentConfig c;
    c.base_dir = std::move(base_dir);
    c.name = j.value("name", std::string());
    const auto& sc = j.at("scenario");
    if (sc.is_string()) {
      c.scenario = sc.get<std::string>();
    } else {
      c.scenario = sc.get<Scenario>();
    }

    const auto& b = j.at("backend");
    c.backend.kind = required<std::string>(b, "kind", "backend");
    c.backend.agent = b.value("agent", std::string("template"));
    if (b.contains("scm")) {
      const auto& s = b.at("scm");
      ScmBackendConfig scm;
      scm.spec = required<std::string>(s, "spec", "backend.scm");
      scm.mode = respondent_mode_from_string(s.value("mode", std::string("abductive")));
      if (s.contains("question_map")) s.at("question_map").get_to(scm.question_map);
      c.backend.scm = scm;
    }
    if (b.contains("llm")) {
      const auto& l = b.at("llm");
      LlmBackendConfig llm;
      l.at("user").get_to(llm.user);
      if (l.contains("agent")) llm.agent = l.at("agent").get<LlmSettings>();
      c.backend.llm = llm;
    }
    if (b.contains("replay")) {
      const auto& r = b.at("replay");
      ReplayBackendConfig replay;
      replay.store = required<std::string>(r, "store", "backend.replay");
      replay.upstream = r.value("upstream", std::string("none"));
      c.backend.replay = replay;
    }

    const auto& p = j.at("personas");
    c.personas.source = required<std::string>(p, "source", "personas");
    c.personas.n = required<std::size_t>(p, "n", "personas");
    if (p.contains("seed")) c.personas.seed = p.at("seed").get<std::uint64_t>();

    c.question_bank = j.value("question_bank", std::string());
    c.scm_group_size = j.value("scm_group_size", std::size_t{2});
    if (j.contains("adjust")) j.at("adjust").get_to(c.adjust);
    if (j.contains("bootstrap")) {
      const auto& bs = j.at("bootstrap");
      c.bootstrap_resamples = bs.value("resamples", c.bootstrap_resamples);
      c.level = bs.value("level", c.level);
    }
    c.null_splits = j.value("null_splits", c.null_splits);
    if (j.contains("seed") && !j.at("seed").is_null()) c.seed = j.at("seed").get<std::uint64_t>();
    c.output_dir = j.value("output_dir", std::string("out"));
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["name"] = c.name;
  if (const auto* path = std::get_if<std::string>(&c.scenario)) {
    j["scenario"] = *path;
  } else {
    j["scenario"] = std::get<Scenario>(c.scenario);
  }
  nlohmann::json b{{"kind", c.backend.kind}, {"agent", c.backend.agent}};
  if (c.backend.scm) {
    b["scm"] = {{"spec", c.backend.scm->spec},
                {"mode", to_string(c.backend.scm->mode)},
                {"question_map", c.backend.scm->question_map}};
  }
  if (c.backend.llm) {
    b["llm"] = {{"user", c.backend.llm->user}};
    if (c.backend.llm->agent) b["llm"]["agent"] = *c.backend.llm->agent;
  }
  if (c.backend.replay) {
    b["replay"] = {{"store", c.backend.replay->store}, {"upstream", c.backend.replay->upstream}};
  }
  j["backend"] = b;
  j["personas"] = {{"source", c.personas.source}, {"n", c.personas.n}};
  if (c.personas.seed) j["personas"]["seed"] = *c.personas.seed;
  j["question_bank"] = c.question_bank;
  j["scm_group_size"] = c.scm_group_size;
  j["adjust"] = c.adjust;
  j["bootstrap"] = {{"resamples", c.bootstrap_resamples}, {"level", c.level}};
  j["null_splits"] = c.null_splits;
  j["seed"] = c.seed ? nlohmann::json(*c.seed) : nlohmann::json(nullptr);
  j["output_dir"] = c.output_dir;
  return j;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config not found: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  auto c = parse_config(j, path.parent_path());
  c.validate();
  return c;
}

std::string run_id(const ExperimentConfig& c) {
  auto j = config_to_json(c);
  j.erase("output_dir");
  j["adjust"].erase("workers");
  std::ostringstream ss;
  ss << std::hex << stable_hash(j.dump());
  auto hex = ss.str();
  return std::string(16 - hex.size(), '0') + hex;
}

Runtime build_runtime(const ExperimentConfig& c) {
  c.validate();
  Runtime rt;

  std::shared_ptr<ScmRespondent> scm;
  if (c.backend.scm) {
    rt.scm = load_scm(c.resolve(c.backend.scm->spec));
  }
  auto make_scm = [&]() -> std::shared_ptr<Respondent> {
    ScmRespondentOptions opts;
    opts.mode = c.backend.scm->mode;
    opts.question_map = c.backend.scm->question_map.empty() ? identity_question_map(*rt.scm)
                                                            : c.backend.scm->question_map;
    scm = std::make_shared<ScmRespondent>(*rt.scm, opts);
    return scm;
  };
  std::shared_ptr<ChatCompletionsClient> user_client;
  auto make_llm = [&]() -> std::shared_ptr<Respondent> {
    user_client = std::make_shared<ChatCompletionsClient>(c.backend.llm->user);
    return std::make_shared<LlmRespondent>(user_client);
  };

  std::shared_ptr<ChatAgent> agent;
  if (c.backend.agent == "llm") {
    const auto& settings = c.backend.llm->agent ? *c.backend.llm->agent : c.backend.llm->user;
    agent = std::make_shared<LlmAgent>(std::make_shared<ChatCompletionsClient>(settings));
  } else {
    agent = std::make_shared<TemplateAgent>();
  }

  if (c.backend.kind == "scm") {
    rt.respondent = make_scm();
  } else if (c.backend.kind == "llm") {
    rt.respondent = make_llm();
  } else {
    std::shared_ptr<Respondent> upstream;
    if (c.backend.replay->upstream == "scm") upstream = make_scm();
    if (c.backend.replay->upstream == "llm") upstream = make_llm();
    rt.store = std::make_shared<ReplayStore>(c.resolve(c.backend.replay->store));
    rt.respondent = std::make_shared<ReplayRespondent>(rt.store, upstream);
    agent = std::make_shared<ReplayAgent>(rt.store, c.backend.replay->upstream == "none" ? nullptr : agent);
  }
  rt.agent = agent;

  auto& exp = rt.experiment;
  if (const auto* path = std::get_if<std::string>(&c.scenario)) {
    exp.scenario = load_scenario(c.resolve(*path));
  } else {
    exp.scenario = std::get<Scenario>(c.scenario);
  }
  exp.scenario.validate();
  if (!c.question_bank.empty()) {
    exp.bank = load_question_bank(c.resolve(c.question_bank));
  } else {
    exp.bank = question_bank_from_scm(*rt.scm, c.scm_group_size);
  }
  exp.bank.validate();
  if (scm) scm->check_bank(exp.bank);
  exp.respondent = rt.respondent.get();
  exp.agent = exp.scenario.kind == ScenarioKind::agent_dialogue ? rt.agent.get() : nullptr;
  exp.adjust = c.adjust;
  exp.adjust.validate(exp.bank.confounder_groups.size());
  exp.report = ReportSettings{c.bootstrap_resamples, c.level, *c.seed, c.null_splits};
  exp.seed = *c.seed;
  exp.run_id = run_id(c);

  const auto sample = load_personas(c.resolve(c.personas.source), exp.bank.persona_attributes, c.personas.n,
                                    c.personas.seed.value_or(*c.seed));
  for (const auto& p : sample.personas) rt.personas.push_back(AugmentedPersona::from(p));
  return rt;
}

}  // namespace simdrift
