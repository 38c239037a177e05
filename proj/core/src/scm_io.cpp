#include <fstream>

#include "simdrift/errors.hpp"
#include "simdrift/scm.hpp"

namespace simdrift {
namespace {

using nlohmann::json;

json variable_json(const Variable& v) {
  json j{{"name", v.name}, {"options", v.options}};
  if (v.encoding) j["encoding"] = *v.encoding;
  return j;
}

Variable variable_from(const json& j) {
  Variable v;
  j.at("name").get_to(v.name);
  j.at("options").get_to(v.options);
  if (j.contains("encoding")) v.encoding = j.at("encoding").get<std::vector<double>>();
  return v;
}

std::vector<Variable> variables_from(const json& j, const char* key) {
  std::vector<Variable> out;
  if (!j.contains(key)) return out;
  for (const auto& v : j.at(key)) out.push_back(variable_from(v));
  return out;
}

std::vector<std::string> names(const std::vector<Variable>& vars) {
  std::vector<std::string> out;
  for (const auto& v : vars) out.push_back(v.name);
  return out;
}

json table(std::vector<std::string> parents, json body) {
  return json{{"parents", std::move(parents)}, {"table", std::move(body)}};
}

}  // namespace

json scm_to_json(const ScmSpec& spec) {
  json j;
  j["name"] = spec.name;
  for (const auto& [key, vars] : {std::pair{"l_vars", &spec.l_vars}, std::pair{"x_vars", &spec.x_vars},
                                  std::pair{"z_vars", &spec.z_vars},
                                  std::pair{"lprime_vars", &spec.lprime_vars}}) {
    j[key] = json::array();
    for (const auto& v : *vars) j[key].push_back(variable_json(v));
  }
  j["a_var"] = spec.a_name;
  j["y_var"] = variable_json(spec.y_var);

  auto l = names(spec.l_vars);
  auto lx = l;
  for (const auto& n : names(spec.x_vars)) lx.push_back(n);
  auto alx = std::vector<std::string>{spec.a_name};
  alx.insert(alx.end(), lx.begin(), lx.end());

  json cpts;
  cpts["x_given_l"] = table(l, spec.x_given_l);
  cpts["a_given_xl"] = table(lx, spec.a1_given_xl);
  cpts["y_given_axl"] = table(alx, json::array({spec.y_given_axl[0], spec.y_given_axl[1]}));
  cpts["z_given_xl"] = json::object();
  for (std::size_t i = 0; i < spec.z_vars.size() && i < spec.z_given_xl.size(); ++i) {
    cpts["z_given_xl"][spec.z_vars[i].name] = table(lx, spec.z_given_xl[i]);
  }
  cpts["lprime_given_xl"] = json::object();
  for (std::size_t i = 0; i < spec.lprime_vars.size() && i < spec.lprime_given_xl.size(); ++i) {
    cpts["lprime_given_xl"][spec.lprime_vars[i].name] = table(lx, spec.lprime_given_xl[i]);
  }
  j["cpts"] = std::move(cpts);
  return j;
}

ScmSpec scm_from_json(const json& j) {
  ScmSpec spec;
  try {
    spec.name = j.value("name", std::string());
    spec.l_vars = variables_from(j, "l_vars");
    spec.x_vars = variables_from(j, "x_vars");
    spec.z_vars = variables_from(j, "z_vars");
    spec.lprime_vars = variables_from(j, "lprime_vars");
    spec.a_name = j.value("a_var", std::string("A"));
    spec.y_var = variable_from(j.at("y_var"));

    const auto& cpts = j.at("cpts");
    auto read = [&](const json& t, const std::string& key, auto& dest) {
      if (t.contains("parents")) spec.declared_parents[key] = t.at("parents").get<std::vector<std::string>>();
      t.at("table").get_to(dest);
    };
    read(cpts.at("x_given_l"), "x_given_l", spec.x_given_l);
    read(cpts.at("a_given_xl"), "a_given_xl", spec.a1_given_xl);
    std::vector<CptXL> y;
    read(cpts.at("y_given_axl"), "y_given_axl", y);
    if (y.size() != 2) throw ConfigError("y_given_axl must have exactly two treatment slices");
    spec.y_given_axl = {y[0], y[1]};

    auto read_children = [&](const char* key, const std::vector<Variable>& vars, std::vector<CptXL>& dest) {
      const auto& obj = cpts.contains(key) ? cpts.at(key) : json::object();
      for (const auto& [name, _] : obj.items()) {
        bool declared = false;
        for (const auto& v : vars) declared = declared || v.name == name;
        if (!declared) throw ConfigError(std::string(key) + ": table for undeclared variable '" + name + "'");
      }
      for (const auto& v : vars) {
        if (!obj.contains(v.name)) throw ConfigError(std::string(key) + ": missing table for '" + v.name + "'");
        CptXL t;
        read(obj.at(v.name), std::string(key) + "[" + v.name + "]", t);
        dest.push_back(std::move(t));
      }
    };
    read_children("z_given_xl", spec.z_vars, spec.z_given_xl);
    read_children("lprime_given_xl", spec.lprime_vars, spec.lprime_given_xl);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("SCM document: ") + e.what());
  }
  return spec;
}

json oracle_report(const ScmSpec& spec, const std::map<std::string, std::string>& persona,
                   const std::map<std::string, std::string>& assigned, RespondentMode mode) {
  std::map<std::string, std::string> values;
  for (const auto& v : spec.l_vars) {
    const auto it = persona.find(v.name);
    values[v.name] = it != persona.end() ? it->second : v.options.front();
  }
  for (const auto& [name, _] : persona) {
    if (!values.count(name)) throw DataError("persona value for unknown L variable '" + name + "'");
  }
  const auto l = l_state_of(spec, values);
  const auto assignment = assignment_of(spec, assigned);
  std::vector<std::size_t> all_z(spec.z_vars.size());
  for (std::size_t i = 0; i < all_z.size(); ++i) all_z[i] = i;
  const auto e = exact_estimands(spec, l, assignment, mode);
  const auto per = exact_tvd_per_variable(spec, l, all_z, assignment, mode);
  json per_json = json::object();
  double tvd = 0.0;
  for (std::size_t i = 0; i < per.size(); ++i) {
    per_json[spec.z_vars[i].name] = per[i];
    tvd += per[i];
  }
  return json{{"spec", spec.name},
              {"mode", to_string(mode)},
              {"persona", values},
              {"assigned", assigned},
              {"mu11", e.mu11},
              {"mu10", e.mu10},
              {"mu01", e.mu01},
              {"mu00", e.mu00},
              {"tau_obs", e.tau_obs},
              {"att", e.att},
              {"atc", e.atc},
              {"sbt", e.sbt},
              {"sbc", e.sbc},
              {"sb", e.sb},
              {"tau_ate_mix", e.tau_ate_mix},
              {"tau_ate_prior", e.tau_ate_prior},
              {"tvd", tvd},
              {"tvd_per_variable", per_json},
              {"treatment_rate", implied_treatment_rate(spec, l, assignment)},
              {"posterior",
               {{"prior", latent_posterior_distribution(spec, l, std::nullopt, assignment, mode)},
                {"arm0", latent_posterior_distribution(spec, l, 0, assignment, mode)},
                {"arm1", latent_posterior_distribution(spec, l, 1, assignment, mode)}}}};
}

ScmSpec load_scm(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open SCM file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("SCM file " + path.string() + ": " + e.what());
  }
  auto spec = scm_from_json(j);
  const auto violations = validate_spec(spec);
  if (!violations.empty()) {
    std::string msg = "SCM file " + path.string() + " is invalid:";
    for (const auto& v : violations) msg += "\n  " + v.table + " " + v.row + ": " + v.message;
    throw ConfigError(msg);
  }
  return spec;
}

}  // namespace simdrift
