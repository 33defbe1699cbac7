#include "dynbn/scenario_io.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "dynbn/errors.hpp"

namespace dynbn::io {

using nlohmann::json;

namespace {

void require_keys(const json& obj, const std::set<std::string>& allowed,
                  const std::set<std::string>& required, const std::string& where) {
  if (!obj.is_object()) throw ScenarioError(where + ": expected a JSON object");
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key))
      throw ScenarioError(where + ": unknown key '" + key + "'");
  for (const auto& key : required)
    if (!obj.contains(key)) throw ScenarioError(where + ": missing key '" + key + "'");
}

double as_number(const json& v, const std::string& where) {
  if (!v.is_number()) throw ScenarioError(where + ": expected a number");
  return v.get<double>();
}

Eigen::VectorXd as_vector(const json& v, const std::string& where) {
  if (v.is_number()) {
    Eigen::VectorXd out(1);
    out[0] = v.get<double>();
    return out;
  }
  if (!v.is_array() || v.empty()) throw ScenarioError(where + ": expected a number array");
  Eigen::VectorXd out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = as_number(v[i], where);
  return out;
}

Eigen::MatrixXd as_matrix(const json& v, const std::string& where) {
  if (v.is_number()) {
    Eigen::MatrixXd out(1, 1);
    out(0, 0) = v.get<double>();
    return out;
  }
  if (!v.is_array() || v.empty()) throw ScenarioError(where + ": expected a matrix");
  const std::size_t rows = v.size();
  std::size_t cols = 0;
  Eigen::MatrixXd out;
  for (std::size_t i = 0; i < rows; ++i) {
    const Eigen::VectorXd row = as_vector(v[i], where);
    if (i == 0) {
      cols = row.size();
      out.resize(rows, cols);
    } else if (static_cast<std::size_t>(row.size()) != cols) {
      throw ScenarioError(where + ": ragged matrix rows");
    }
    out.row(i) = row.transpose();
  }
  return out;
}

dglm::Family family_from_string(const std::string& name, const std::string& where) {
  if (name == "normal") return dglm::Family::Normal;
  if (name == "poisson") return dglm::Family::Poisson;
  if (name == "lognormal") return dglm::Family::LogNormal;
  throw ScenarioError(where + ": unknown family '" + name + "'");
}

filter::ScenarioStep step_from_json(const json& js, int index) {
  const std::string where = "step " + std::to_string(index + 1);
  require_keys(js, {"variables", "edges", "conditionals", "observations", "frontier"},
               {"variables"}, where);

  filter::ScenarioStep step;
  for (const auto& vj : js.at("variables")) {
    require_keys(vj, {"id", "dim"}, {"id"}, where + " variable");
    graph::Variable var;
    var.id = vj.at("id").get<std::string>();
    var.dim = vj.contains("dim") ? vj.at("dim").get<int>() : 1;
    step.dag.variables.push_back(std::move(var));
  }
  if (js.contains("edges"))
    for (const auto& ej : js.at("edges")) {
      if (!ej.is_array() || ej.size() != 2)
        throw ScenarioError(where + ": each edge must be a [parent, child] pair");
      step.dag.edges.emplace_back(ej[0].get<std::string>(), ej[1].get<std::string>());
    }
  if (js.contains("conditionals"))
    for (const auto& cj : js.at("conditionals")) {
      require_keys(cj, {"child", "parents", "coeffs", "intercept", "noise_cov"},
                   {"child", "intercept", "noise_cov"}, where + " conditional");
      filter::LinearGaussianConditional cond;
      cond.child = cj.at("child").get<std::string>();
      if (cj.contains("parents"))
        for (const auto& pj : cj.at("parents")) cond.parents.push_back(pj.get<std::string>());
      cond.intercept = as_vector(cj.at("intercept"), where + " intercept");
      cond.noise_cov = as_matrix(cj.at("noise_cov"), where + " noise_cov");
      if (cj.contains("coeffs") && !(cj.at("coeffs").is_array() && cj.at("coeffs").empty())) {
        cond.coeffs = as_matrix(cj.at("coeffs"), where + " coeffs");
      } else {
        cond.coeffs.resize(cond.intercept.size(), 0);
      }
      if (cond.parents.empty() && cond.coeffs.size() != 0)
        throw ScenarioError(where + ": conditional for '" + cond.child +
                            "' has coefficients but no parents");
      step.conditionals.push_back(std::move(cond));
    }
  if (js.contains("observations"))
    for (const auto& oj : js.at("observations")) {
      require_keys(oj, {"clique_hint", "family", "F", "y"}, {"family", "F", "y"},
                   where + " observation");
      filter::Observation obs;
      const json& fj = oj.at("family");
      require_keys(fj, {"type", "V"}, {"type"}, where + " family");
      obs.family = family_from_string(fj.at("type").get<std::string>(), where);
      if (fj.contains("V")) obs.V = as_number(fj.at("V"), where + " V");
      else if (obs.family != dglm::Family::Poisson)
        throw ScenarioError(where + ": family '" + dglm::family_name(obs.family) +
                            "' requires V");
      if (!oj.at("F").is_object())
        throw ScenarioError(where + ": F must map variable ids to coefficients");
      for (const auto& [var, coeff] : oj.at("F").items())
        obs.design[var] = as_vector(coeff, where + " F[" + var + "]");
      obs.y = as_number(oj.at("y"), where + " y");
      if (oj.contains("clique_hint")) obs.clique_hint = oj.at("clique_hint").get<int>();
      step.observations.push_back(std::move(obs));
    }
  if (js.contains("frontier"))
    for (const auto& fj : js.at("frontier")) step.frontier.push_back(fj.get<std::string>());
  return step;
}

json step_to_json(const filter::ScenarioStep& step) {
  json js;
  js["variables"] = json::array();
  for (const auto& v : step.dag.variables)
    js["variables"].push_back({{"id", v.id}, {"dim", v.dim}});
  js["edges"] = json::array();
  for (const auto& [p, c] : step.dag.edges) js["edges"].push_back({p, c});
  js["conditionals"] = json::array();
  for (const auto& cond : step.conditionals) {
    json cj;
    cj["child"] = cond.child;
    cj["parents"] = cond.parents;
    json coeffs = json::array();
    if (cond.coeffs.cols() > 0)
      for (int i = 0; i < cond.coeffs.rows(); ++i) {
        json row = json::array();
        for (int j = 0; j < cond.coeffs.cols(); ++j) row.push_back(cond.coeffs(i, j));
        coeffs.push_back(row);
      }
    cj["coeffs"] = coeffs;
    cj["intercept"] = std::vector<double>(cond.intercept.begin(), cond.intercept.end());
    json noise = json::array();
    for (int i = 0; i < cond.noise_cov.rows(); ++i) {
      json row = json::array();
      for (int j = 0; j < cond.noise_cov.cols(); ++j) row.push_back(cond.noise_cov(i, j));
      noise.push_back(row);
    }
    cj["noise_cov"] = noise;
    js["conditionals"].push_back(std::move(cj));
  }
  js["observations"] = json::array();
  for (const auto& obs : step.observations) {
    json oj;
    oj["family"]["type"] = dglm::family_name(obs.family);
    if (obs.family != dglm::Family::Poisson) oj["family"]["V"] = obs.V;
    json design = json::object();
    for (const auto& [var, coeffs] : obs.design)
      design[var] = std::vector<double>(coeffs.begin(), coeffs.end());
    oj["F"] = std::move(design);
    oj["y"] = obs.y;
    if (obs.clique_hint) oj["clique_hint"] = *obs.clique_hint;
    js["observations"].push_back(std::move(oj));
  }
  js["frontier"] = step.frontier;
  return js;
}

}  // namespace

filter::Scenario scenario_from_json_text(const std::string& text) {
  json js;
  try {
    js = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ScenarioError(std::string("scenario is not valid JSON: ") + e.what());
  }
  require_keys(js, {"version", "steps"}, {"version", "steps"}, "scenario");
  filter::Scenario scenario;
  scenario.version = js.at("version").get<int>();
  if (!js.at("steps").is_array() || js.at("steps").empty())
    throw ScenarioError("scenario: steps must be a nonempty array");
  for (std::size_t i = 0; i < js.at("steps").size(); ++i)
    scenario.steps.push_back(step_from_json(js.at("steps")[i], static_cast<int>(i)));
  return scenario;
}

std::string scenario_to_json_text(const filter::Scenario& scenario) {
  json js;
  js["version"] = scenario.version;
  js["steps"] = json::array();
  for (const auto& step : scenario.steps) js["steps"].push_back(step_to_json(step));
  return js.dump(2) + "\n";
}

filter::Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open scenario file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return scenario_from_json_text(buf.str());
}

void save_scenario(const filter::Scenario& scenario, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ScenarioError("cannot write scenario file '" + path + "'");
  out << scenario_to_json_text(scenario);
}

bool scenarios_equal(const filter::Scenario& a, const filter::Scenario& b) {
  // Canonical JSON text doubles as a structural fingerprint.
  return scenario_to_json_text(a) == scenario_to_json_text(b);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace dynbn::io
