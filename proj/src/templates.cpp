#include "dynbn/templates.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "dynbn/errors.hpp"
#include "dynbn/rng.hpp"

namespace dynbn::templates {

namespace {

std::string numbered(const char* stem, int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%02d", stem, i);
  return buf;
}

filter::LinearGaussianConditional root_prior(const std::string& id, double mean,
                                             double variance) {
  filter::LinearGaussianConditional c;
  c.child = id;
  c.coeffs.resize(1, 0);
  c.intercept = Eigen::VectorXd::Constant(1, mean);
  c.noise_cov = Eigen::MatrixXd::Constant(1, 1, variance);
  return c;
}

filter::LinearGaussianConditional scalar_conditional(const std::string& child,
                                                     const std::string& parent, double slope,
                                                     double intercept, double noise_var) {
  filter::LinearGaussianConditional c;
  c.child = child;
  c.parents = {parent};
  c.coeffs = Eigen::MatrixXd::Constant(1, 1, slope);
  c.intercept = Eigen::VectorXd::Constant(1, intercept);
  c.noise_cov = Eigen::MatrixXd::Constant(1, 1, noise_var);
  return c;
}

filter::Observation scalar_observation(dglm::Family family, const std::string& var,
                                       double coeff, double y, double V) {
  filter::Observation obs;
  obs.family = family;
  obs.V = V;
  obs.design[var] = Eigen::VectorXd::Constant(1, coeff);
  obs.y = y;
  return obs;
}

}  // namespace

filter::Scenario kalman_chain(std::uint64_t seed) {
  Rng rng(seed ^ 0x6b616c6d616eULL);
  const int steps = 10;
  const double m0 = rng.uniform(-2.0, 2.0);
  const double p0 = rng.uniform(0.5, 2.0);

  filter::Scenario scenario;
  double truth = rng.normal(m0, std::sqrt(p0));
  for (int t = 1; t <= steps; ++t) {
    filter::ScenarioStep step;
    const std::string cur = numbered("theta", t);
    if (t == 1) {
      step.dag.variables.push_back({cur, 1});
      step.conditionals.push_back(root_prior(cur, m0, p0));
    } else {
      const std::string prev = numbered("theta", t - 1);
      step.dag.variables.push_back({prev, 1});
      step.dag.variables.push_back({cur, 1});
      step.dag.edges.emplace_back(prev, cur);
      const double phi = rng.uniform(0.8, 1.1);
      const double drift = rng.uniform(-0.5, 0.5);
      const double q = rng.uniform(0.1, 1.0);
      step.conditionals.push_back(scalar_conditional(cur, prev, phi, drift, q));
      truth = phi * truth + drift + rng.normal(0.0, std::sqrt(q));
    }
    const double f = rng.uniform(0.5, 1.5);
    const double v = rng.uniform(0.3, 1.5);
    const double y = f * truth + rng.normal(0.0, std::sqrt(v));
    step.observations.push_back(scalar_observation(dglm::Family::Normal, cur, f, y, v));
    step.frontier = {cur};
    scenario.steps.push_back(std::move(step));
  }
  return scenario;
}

filter::Scenario dispersal_chain(std::uint64_t seed) {
  Rng rng(seed ^ 0x64697370ULL);
  const int steps = 10;
  const double m0 = rng.uniform(20.0, 30.0);
  const double p0 = rng.uniform(4.0, 9.0);
  const double drift = rng.uniform(-0.5, 1.5);

  filter::Scenario scenario;
  double truth = std::max(5.0, rng.normal(m0, std::sqrt(p0)));
  for (int t = 1; t <= steps; ++t) {
    filter::ScenarioStep step;
    const std::string cur = numbered("puff", t);
    if (t == 1) {
      step.dag.variables.push_back({cur, 1});
      step.conditionals.push_back(root_prior(cur, m0, p0));
    } else {
      const std::string prev = numbered("puff", t - 1);
      step.dag.variables.push_back({prev, 1});
      step.dag.variables.push_back({cur, 1});
      step.dag.edges.emplace_back(prev, cur);
      const double q = rng.uniform(2.0, 5.0);
      step.conditionals.push_back(scalar_conditional(cur, prev, 1.0, drift, q));
      truth = std::max(5.0, truth + drift + rng.normal(0.0, std::sqrt(q)));
    }
    const double y = static_cast<double>(rng.poisson(truth));
    filter::Observation obs;
    obs.family = dglm::Family::Poisson;
    obs.design[cur] = Eigen::VectorXd::Constant(1, 1.0);
    obs.y = y;
    step.observations.push_back(std::move(obs));
    step.frontier = {cur};
    scenario.steps.push_back(std::move(step));
  }
  return scenario;
}

filter::Scenario growth(std::uint64_t seed) {
  Rng rng(seed ^ 0x67726f77ULL);
  const int steps = 6;

  filter::Scenario scenario;
  for (int t = 1; t <= steps; ++t) {
    filter::ScenarioStep step;
    const std::string hub = numbered("hub", t);
    const std::string leaf = numbered("leaf", t);
    if (t == 1) {
      step.dag.variables.push_back({hub, 1});
      step.conditionals.push_back(root_prior(hub, rng.uniform(-1.0, 1.0), rng.uniform(0.5, 2.0)));
    } else {
      const std::string prev = numbered("hub", t - 1);
      step.dag.variables.push_back({prev, 1});
      step.dag.variables.push_back({hub, 1});
      step.dag.edges.emplace_back(prev, hub);
      step.conditionals.push_back(scalar_conditional(hub, prev, rng.uniform(0.7, 1.2),
                                                     rng.uniform(-0.5, 0.5),
                                                     rng.uniform(0.3, 1.0)));
    }
    step.dag.variables.push_back({leaf, 1});
    step.dag.edges.emplace_back(hub, leaf);
    step.conditionals.push_back(scalar_conditional(leaf, hub, rng.uniform(0.5, 1.5),
                                                   rng.uniform(-1.0, 1.0),
                                                   rng.uniform(0.3, 1.0)));
    step.observations.push_back(scalar_observation(
        dglm::Family::Normal, leaf, rng.uniform(0.5, 1.5), rng.uniform(-3.0, 3.0),
        rng.uniform(0.3, 1.5)));
    if (rng.bernoulli(0.5))
      step.observations.push_back(scalar_observation(
          dglm::Family::Normal, hub, rng.uniform(0.5, 1.5), rng.uniform(-3.0, 3.0),
          rng.uniform(0.3, 1.5)));
    step.frontier = {hub};
    scenario.steps.push_back(std::move(step));
  }
  return scenario;
}

filter::Scenario random_gaussian(std::uint64_t seed, int max_vars, int max_steps) {
  Rng rng(seed ^ 0x72616e64ULL);
  const int n_steps = rng.uniform_int(1, std::max(1, max_steps));

  filter::Scenario scenario;
  int var_counter = 0;
  std::vector<std::string> prev_frontier;

  for (int t = 0; t < n_steps; ++t) {
    filter::ScenarioStep step;
    for (const auto& id : prev_frontier) step.dag.variables.push_back({id, 1});

    const int budget = max_vars - var_counter;
    if (budget <= 0 && prev_frontier.empty()) break;
    const int want = t == 0 ? rng.uniform_int(2, 4) : rng.uniform_int(1, 3);
    const int fresh = std::max(t == 0 ? 1 : 0, std::min(want, budget));

    std::vector<std::string> eligible_parents = prev_frontier;
    for (int k = 0; k < fresh; ++k) {
      const std::string id = numbered("x", ++var_counter);
      step.dag.variables.push_back({id, 1});
      filter::LinearGaussianConditional cond;
      cond.child = id;
      for (const auto& p : eligible_parents)
        if (rng.bernoulli(0.45)) cond.parents.push_back(p);
      cond.coeffs.resize(1, static_cast<int>(cond.parents.size()));
      for (int j = 0; j < cond.coeffs.cols(); ++j) {
        const double mag = rng.uniform(0.3, 1.2);
        cond.coeffs(0, j) = rng.bernoulli(0.5) ? mag : -mag;
      }
      cond.intercept = Eigen::VectorXd::Constant(1, rng.uniform(-2.0, 2.0));
      cond.noise_cov = Eigen::MatrixXd::Constant(1, 1, rng.uniform(0.3, 2.0));
      for (const auto& p : cond.parents) step.dag.edges.emplace_back(p, id);
      step.conditionals.push_back(std::move(cond));
      eligible_parents.push_back(id);
    }

    // Designs and the frontier must live inside single cliques, so draw them
    // from the realized tree.
    std::vector<std::vector<std::string>> extra;
    if (prev_frontier.size() > 1) extra.push_back(prev_frontier);
    const graph::JunctionTree tree = graph::build_junction_tree(step.dag, extra);

    const int n_obs = rng.uniform_int(0, 3);
    for (int k = 0; k < n_obs; ++k) {
      const auto& clique =
          tree.cliques[rng.uniform_int(0, static_cast<int>(tree.cliques.size()) - 1)];
      filter::Observation obs;
      obs.family = dglm::Family::Normal;
      obs.V = rng.uniform(0.3, 2.0);
      obs.y = rng.uniform(-5.0, 5.0);
      for (const auto& member : clique.members)
        if (rng.bernoulli(0.6)) {
          const double mag = rng.uniform(0.3, 1.5);
          obs.design[member] = Eigen::VectorXd::Constant(1, rng.bernoulli(0.5) ? mag : -mag);
        }
      if (obs.design.empty()) {
        const double mag = rng.uniform(0.3, 1.5);
        obs.design[clique.members[0]] = Eigen::VectorXd::Constant(1, mag);
      }
      step.observations.push_back(std::move(obs));
    }

    if (t + 1 < n_steps) {
      const auto& clique =
          tree.cliques[rng.uniform_int(0, static_cast<int>(tree.cliques.size()) - 1)];
      std::vector<std::string> frontier;
      for (const auto& member : clique.members)
        if (rng.bernoulli(0.7)) frontier.push_back(member);
      if (frontier.empty()) frontier.push_back(clique.members[0]);
      step.frontier = frontier;
    }
    prev_frontier = step.frontier;
    scenario.steps.push_back(std::move(step));
  }
  return scenario;
}

filter::Scenario by_name(const std::string& name, std::uint64_t seed) {
  if (name == "kalman-chain") return kalman_chain(seed);
  if (name == "dispersal-chain") return dispersal_chain(seed);
  if (name == "growth") return growth(seed);
  throw ScenarioError("unknown template '" + name + "'");
}

}  // namespace dynbn::templates
