#include "dynbn/filter.hpp"

#include <doctest.h>

#include "dynbn/errors.hpp"
#include "dynbn/oracle.hpp"
#include "dynbn/rng.hpp"
#include "dynbn/templates.hpp"
#include "test_support.hpp"

using namespace dynbn;

namespace {

filter::LinearGaussianConditional scalar_root(const std::string& id, double mean, double var) {
  filter::LinearGaussianConditional c;
  c.child = id;
  c.coeffs.resize(1, 0);
  c.intercept = Eigen::VectorXd::Constant(1, mean);
  c.noise_cov = Eigen::MatrixXd::Constant(1, 1, var);
  return c;
}

filter::LinearGaussianConditional scalar_child(const std::string& id, const std::string& parent,
                                               double slope, double icept, double var) {
  filter::LinearGaussianConditional c;
  c.child = id;
  c.parents = {parent};
  c.coeffs = Eigen::MatrixXd::Constant(1, 1, slope);
  c.intercept = Eigen::VectorXd::Constant(1, icept);
  c.noise_cov = Eigen::MatrixXd::Constant(1, 1, var);
  return c;
}

}  // namespace

TEST_CASE("init_step single variable") {
  filter::ScenarioStep step;
  step.dag.variables = {{"x", 1}};
  step.conditionals = {scalar_root("x", 0.0, 1.0)};
  const auto tb = filter::init_step(step, std::nullopt);
  REQUIRE(tb.beliefs.size() == 1);
  CHECK(tb.beliefs[0].mean[0] == doctest::Approx(0.0));
  CHECK(tb.beliefs[0].cov(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("init_step composes a linear-Gaussian chain") {
  filter::ScenarioStep step;
  step.dag.variables = {{"x", 1}, {"y", 1}};
  step.dag.edges = {{"x", "y"}};
  step.conditionals = {scalar_root("x", 0.0, 1.0), scalar_child("y", "x", 2.0, 0.0, 1.0)};
  const auto tb = filter::init_step(step, std::nullopt);
  REQUIRE(tb.beliefs.size() == 1);  // one clique {x, y}
  const auto [mu, cov] = tb.beliefs[0].marginal({"x", "y"});
  CHECK(mu[0] == doctest::Approx(0.0));
  CHECK(mu[1] == doctest::Approx(0.0));
  CHECK(cov(0, 0) == doctest::Approx(1.0));
  CHECK(cov(0, 1) == doctest::Approx(2.0));
  CHECK(cov(1, 1) == doctest::Approx(5.0));
}

TEST_CASE("init_step clique marginals match the dense joint on random specs") {
  Rng rng(909);
  for (int trial = 0; trial < 25; ++trial) {
    const auto scenario = templates::random_gaussian(5000 + trial, 6, 1);
    const auto& step = scenario.steps[0];
    const auto ds = test_support::dense_compose(step, std::nullopt);
    const auto tb = filter::init_step(step, std::nullopt);
    for (const auto& belief : tb.beliefs)
      for (std::size_t i = 0; i < belief.clique.members.size(); ++i) {
        const int gi = ds.offset.at(belief.clique.members[i]);
        CHECK(belief.mean[i] == doctest::Approx(ds.mean[gi]).epsilon(1e-10));
        for (std::size_t j = 0; j < belief.clique.members.size(); ++j)
          CHECK(belief.cov(i, j) ==
                doctest::Approx(ds.cov(gi, ds.offset.at(belief.clique.members[j])))
                    .epsilon(1e-10));
      }
  }
}

TEST_CASE("assimilate with Normal observations equals dense conditioning") {
  Rng rng(808);
  for (int trial = 0; trial < 25; ++trial) {
    const auto scenario = templates::random_gaussian(7000 + trial, 8, 1);
    const auto& step = scenario.steps[0];
    if (step.observations.empty()) continue;
    const auto tb = filter::init_step(step, std::nullopt);
    const auto [posterior, records] = filter::assimilate(tb, step.observations);

    const auto ds = test_support::dense_compose(step, std::nullopt);
    std::vector<Eigen::VectorXd> rows;
    std::vector<double> ys, vs;
    for (const auto& obs : step.observations) {
      Eigen::VectorXd f = Eigen::VectorXd::Zero(ds.mean.size());
      for (const auto& [var, coeffs] : obs.design) f[ds.offset.at(var)] = coeffs[0];
      rows.push_back(f);
      ys.push_back(obs.y);
      vs.push_back(obs.V);
    }
    const auto [dense_mean, dense_cov] = oracle::dense_condition(ds.mean, ds.cov, rows, ys, vs);
    for (const auto& belief : posterior.beliefs)
      for (std::size_t i = 0; i < belief.clique.members.size(); ++i) {
        const int gi = ds.offset.at(belief.clique.members[i]);
        CHECK(belief.mean[i] == doctest::Approx(dense_mean[gi]).epsilon(1e-8));
        for (std::size_t j = 0; j < belief.clique.members.size(); ++j)
          CHECK(belief.cov(i, j) ==
                doctest::Approx(dense_cov(gi, ds.offset.at(belief.clique.members[j])))
                    .epsilon(1e-8));
      }
  }
}

TEST_CASE("assimilate with no observations is the identity") {
  Rng rng(404);
  const auto scenario = templates::random_gaussian(123, 6, 1);
  auto step = scenario.steps[0];
  step.observations.clear();
  const auto tb = filter::init_step(step, std::nullopt);
  const auto [posterior, records] = filter::assimilate(tb, step.observations);
  CHECK(records.empty());
  for (std::size_t c = 0; c < tb.beliefs.size(); ++c)
    CHECK((posterior.beliefs[c].mean - tb.beliefs[c].mean).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("assimilate applies the Poisson table row") {
  filter::ScenarioStep step;
  step.dag.variables = {{"x", 1}};
  step.conditionals = {scalar_root("x", 4.0, 4.0)};
  filter::Observation obs;
  obs.family = dglm::Family::Poisson;
  obs.design["x"] = Eigen::VectorXd::Ones(1);
  obs.y = 6.0;
  step.observations = {obs};

  const auto tb = filter::init_step(step, std::nullopt);
  const auto [posterior, records] = filter::assimilate(tb, step.observations);
  REQUIRE(records.size() == 1);
  CHECK(records[0].prior.m == doctest::Approx(4.0));
  CHECK(records[0].prior.w2 == doctest::Approx(4.0));
  CHECK(records[0].posterior.m == doctest::Approx(5.0));
  CHECK(records[0].posterior.w2 == doctest::Approx(2.5));
  CHECK(posterior.beliefs[0].mean[0] == doctest::Approx(5.0));
  CHECK(posterior.beliefs[0].cov(0, 0) == doctest::Approx(2.5));
  REQUIRE(records[0].diagnostics.has_value());
  CHECK(records[0].diagnostics->dH_lambda > 0.0);
  CHECK(records[0].diagnostics->dH_lambda < 0.2);
  CHECK(records[0].diagnostics->error_bound.has_value());
}

TEST_CASE("domain errors abort or skip according to policy") {
  filter::ScenarioStep step;
  step.dag.variables = {{"x", 1}};
  step.conditionals = {scalar_root("x", -2.0, 1.0)};  // negative lambda prior mean
  filter::Observation obs;
  obs.family = dglm::Family::Poisson;
  obs.design["x"] = Eigen::VectorXd::Ones(1);
  obs.y = 3.0;
  step.observations = {obs};
  const auto tb = filter::init_step(step, std::nullopt);

  CHECK_THROWS_AS(filter::assimilate(tb, step.observations), ModelMismatchError);

  filter::RunOptions permissive;
  permissive.error_policy = filter::ErrorPolicy::SkipAndFlag;
  const auto [posterior, records] = filter::assimilate(tb, step.observations, permissive);
  REQUIRE(records.size() == 1);
  CHECK(records[0].skipped);
  CHECK(posterior.beliefs[0].mean[0] == doctest::Approx(-2.0));
}

TEST_CASE("evolve carries a full-clique frontier unchanged") {
  filter::ScenarioStep first;
  first.dag.variables = {{"x", 1}, {"y", 1}};
  first.dag.edges = {{"x", "y"}};
  first.conditionals = {scalar_root("x", 1.0, 2.0), scalar_child("y", "x", 0.5, 0.0, 1.0)};
  first.frontier = {"x", "y"};
  const auto tb = filter::init_step(first, std::nullopt);

  filter::ScenarioStep next;
  next.dag.variables = {{"x", 1}, {"y", 1}};
  const auto tb2 = filter::evolve(tb, first.frontier, next);
  REQUIRE(tb2.beliefs.size() == 1);
  const auto [mu1, cov1] = tb.beliefs[0].marginal({"x", "y"});
  const auto [mu2, cov2] = tb2.beliefs[0].marginal({"x", "y"});
  CHECK((mu1 - mu2).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((cov1 - cov2).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("evolve implements random-walk prediction") {
  filter::ScenarioStep first;
  first.dag.variables = {{"t1", 1}};
  first.conditionals = {scalar_root("t1", 1.5, 0.8)};
  first.frontier = {"t1"};
  const auto tb = filter::init_step(first, std::nullopt);

  filter::ScenarioStep next;
  next.dag.variables = {{"t1", 1}, {"t2", 1}};
  next.dag.edges = {{"t1", "t2"}};
  next.conditionals = {scalar_child("t2", "t1", 1.0, 0.0, 0.3)};
  const auto tb2 = filter::evolve(tb, first.frontier, next);
  const int clique = tb2.tree.containing_clique({"t2"});
  const auto [mu, cov] = tb2.beliefs[clique].marginal({"t2"});
  CHECK(mu[0] == doctest::Approx(1.5));
  CHECK(cov(0, 0) == doctest::Approx(0.8 + 0.3));
}

TEST_CASE("multi-step Gaussian scenarios match a dense two-step oracle") {
  Rng rng(606);
  for (int trial = 0; trial < 15; ++trial) {
    const auto scenario = templates::random_gaussian(9000 + trial, 8, 2);
    if (scenario.steps.size() < 2) continue;
    const auto traj = filter::run(scenario, {.diagnostics = false});

    // Dense oracle: compose step 1, condition on its observations, carry the
    // frontier, compose step 2, condition, compare final step marginals.
    auto ds = test_support::dense_compose(scenario.steps[0], std::nullopt);
    std::optional<filter::FrontierPrior> carried;
    for (std::size_t s = 0; s < scenario.steps.size(); ++s) {
      if (s > 0) ds = test_support::dense_compose(scenario.steps[s], carried);
      std::vector<Eigen::VectorXd> rows;
      std::vector<double> ys, vs;
      for (const auto& obs : scenario.steps[s].observations) {
        Eigen::VectorXd f = Eigen::VectorXd::Zero(ds.mean.size());
        for (const auto& [var, coeffs] : obs.design) f[ds.offset.at(var)] = coeffs[0];
        rows.push_back(f);
        ys.push_back(obs.y);
        vs.push_back(obs.V);
      }
      std::tie(ds.mean, ds.cov) = oracle::dense_condition(ds.mean, ds.cov, rows, ys, vs);

      for (const auto& belief : traj.steps[s].posterior.beliefs)
        for (std::size_t i = 0; i < belief.clique.members.size(); ++i) {
          const int gi = ds.offset.at(belief.clique.members[i]);
          CHECK(belief.mean[i] == doctest::Approx(ds.mean[gi]).epsilon(1e-8));
          for (std::size_t j = 0; j < belief.clique.members.size(); ++j)
            CHECK(belief.cov(i, j) ==
                  doctest::Approx(ds.cov(gi, ds.offset.at(belief.clique.members[j])))
                      .epsilon(1e-8));
        }

      if (s + 1 < scenario.steps.size()) {
        filter::FrontierPrior next;
        next.variables = scenario.steps[s].frontier;
        const int fdim = static_cast<int>(next.variables.size());
        next.mean.resize(fdim);
        next.cov.resize(fdim, fdim);
        for (int i = 0; i < fdim; ++i) {
          next.mean[i] = ds.mean[ds.offset.at(next.variables[i])];
          for (int j = 0; j < fdim; ++j)
            next.cov(i, j) = ds.cov(ds.offset.at(next.variables[i]),
                                    ds.offset.at(next.variables[j]));
        }
        carried = std::move(next);
      }
    }
  }
}

TEST_CASE("a no-op step leaves the final posterior unchanged") {
  const auto base = templates::random_gaussian(42, 6, 2);
  if (base.steps.size() < 2) return;

  // Insert a pass-through step: all of step 1's frontier carried straight on.
  filter::Scenario padded = base;
  filter::ScenarioStep noop;
  for (const auto& id : base.steps[0].frontier) noop.dag.variables.push_back({id, 1});
  noop.frontier = base.steps[0].frontier;
  padded.steps.insert(padded.steps.begin() + 1, noop);

  const auto t1 = filter::run(base, {.diagnostics = false});
  const auto t2 = filter::run(padded, {.diagnostics = false});
  const auto& last1 = t1.steps.back().posterior;
  const auto& last2 = t2.steps.back().posterior;
  REQUIRE(last1.beliefs.size() == last2.beliefs.size());
  for (std::size_t c = 0; c < last1.beliefs.size(); ++c) {
    CHECK((last1.beliefs[c].mean - last2.beliefs[c].mean).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK((last1.beliefs[c].cov - last2.beliefs[c].cov).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("pure prediction keeps variances nondecreasing") {
  filter::Scenario scenario;
  for (int t = 1; t <= 5; ++t) {
    filter::ScenarioStep step;
    const std::string cur = "s" + std::to_string(t);
    if (t == 1) {
      step.dag.variables = {{cur, 1}};
      step.conditionals = {scalar_root(cur, 0.0, 1.0)};
    } else {
      const std::string prev = "s" + std::to_string(t - 1);
      step.dag.variables = {{prev, 1}, {cur, 1}};
      step.dag.edges = {{prev, cur}};
      step.conditionals = {scalar_child(cur, prev, 1.0, 0.0, 0.5)};
    }
    step.frontier = {cur};
    scenario.steps.push_back(std::move(step));
  }
  const auto traj = filter::run(scenario, {.diagnostics = false});
  double prev_var = 0.0;
  for (std::size_t s = 0; s < traj.steps.size(); ++s) {
    const std::string cur = "s" + std::to_string(s + 1);
    const int clique = traj.steps[s].posterior.tree.containing_clique({cur});
    const auto [mu, cov] = traj.steps[s].posterior.beliefs[clique].marginal({cur});
    CHECK(cov(0, 0) >= prev_var);
    prev_var = cov(0, 0);
  }
}

TEST_CASE("scenario validation rejects bad frontiers and designs") {
  SUBCASE("frontier split across cliques") {
    filter::Scenario scenario;
    filter::ScenarioStep step;
    step.dag.variables = {{"a", 1}, {"b", 1}, {"c", 1}};
    step.dag.edges = {{"a", "b"}, {"b", "c"}};
    step.conditionals = {scalar_root("a", 0, 1), scalar_child("b", "a", 1, 0, 1),
                         scalar_child("c", "b", 1, 0, 1)};
    step.frontier = {"a", "c"};  // cliques are {a,b} and {b,c}
    scenario.steps = {step, step};
    scenario.steps[1].conditionals.clear();
    scenario.steps[1].dag.edges.clear();
    scenario.steps[1].dag.variables = {{"a", 1}, {"c", 1}};
    scenario.steps[1].frontier = {};
    CHECK_THROWS_AS(filter::validate_scenario(scenario), ScenarioError);
  }
  SUBCASE("design split across cliques") {
    filter::Scenario scenario;
    filter::ScenarioStep step;
    step.dag.variables = {{"a", 1}, {"b", 1}, {"c", 1}};
    step.dag.edges = {{"a", "b"}, {"b", "c"}};
    step.conditionals = {scalar_root("a", 0, 1), scalar_child("b", "a", 1, 0, 1),
                         scalar_child("c", "b", 1, 0, 1)};
    filter::Observation obs;
    obs.design["a"] = Eigen::VectorXd::Ones(1);
    obs.design["c"] = Eigen::VectorXd::Ones(1);
    obs.y = 0.0;
    step.observations = {obs};
    scenario.steps = {step};
    CHECK_THROWS_AS(filter::validate_scenario(scenario), ScenarioError);
  }
  SUBCASE("edges must match conditionals") {
    filter::Scenario scenario;
    filter::ScenarioStep step;
    step.dag.variables = {{"a", 1}, {"b", 1}};
    step.dag.edges = {{"a", "b"}};
    step.conditionals = {scalar_root("a", 0, 1), scalar_root("b", 0, 1)};
    scenario.steps = {step};
    CHECK_THROWS_AS(filter::validate_scenario(scenario), ScenarioError);
  }
}

TEST_CASE("vector-valued variables flow through init and assimilate") {
  filter::ScenarioStep step;
  step.dag.variables = {{"pos", 2}, {"z", 1}};
  step.dag.edges = {{"pos", "z"}};

  filter::LinearGaussianConditional root;
  root.child = "pos";
  root.coeffs.resize(2, 0);
  root.intercept = Eigen::VectorXd::Zero(2);
  root.noise_cov = Eigen::MatrixXd::Identity(2, 2);
  root.noise_cov(0, 1) = root.noise_cov(1, 0) = 0.3;

  filter::LinearGaussianConditional child;
  child.child = "z";
  child.parents = {"pos"};
  child.coeffs = Eigen::MatrixXd(1, 2);
  child.coeffs << 1.0, -0.5;
  child.intercept = Eigen::VectorXd::Constant(1, 0.2);
  child.noise_cov = Eigen::MatrixXd::Constant(1, 1, 0.4);
  step.conditionals = {root, child};

  filter::Observation obs;
  obs.family = dglm::Family::Normal;
  obs.V = 0.5;
  obs.design["pos"] = (Eigen::VectorXd(2) << 1.0, 1.0).finished();
  obs.design["z"] = Eigen::VectorXd::Constant(1, 2.0);
  obs.y = 1.0;
  step.observations = {obs};

  const auto tb = filter::init_step(step, std::nullopt);
  REQUIRE(tb.beliefs.size() == 1);
  CHECK(tb.beliefs[0].dim() == 3);
  const auto [posterior, records] = filter::assimilate(tb, step.observations);
  REQUIRE(records.size() == 1);

  // Dense check over the stacked 3-dimensional state.
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(3);
  mu[2] = 0.2;
  Eigen::MatrixXd cov(3, 3);
  cov << 1.0, 0.3, 1.0 - 0.5 * 0.3,   //
      0.3, 1.0, 0.3 - 0.5,            //
      1.0 - 0.5 * 0.3, 0.3 - 0.5,
      (child.coeffs * root.noise_cov * child.coeffs.transpose())(0, 0) + 0.4;
  Eigen::VectorXd f(3);
  f << 1.0, 1.0, 2.0;
  const auto [dense_mean, dense_cov] = oracle::dense_condition(mu, cov, {f}, {1.0}, {0.5});
  const auto [pm, pc] = posterior.beliefs[0].marginal({"pos", "z"});
  CHECK((pm - dense_mean).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK((pc - dense_cov).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("determinism: identical scenarios give identical trajectories") {
  const auto scenario = templates::dispersal_chain(99);
  const auto t1 = filter::run(scenario, {.diagnostics = false});
  const auto t2 = filter::run(scenario, {.diagnostics = false});
  REQUIRE(t1.steps.size() == t2.steps.size());
  for (std::size_t s = 0; s < t1.steps.size(); ++s)
    for (std::size_t c = 0; c < t1.steps[s].posterior.beliefs.size(); ++c) {
      CHECK((t1.steps[s].posterior.beliefs[c].mean.array() ==
             t2.steps[s].posterior.beliefs[c].mean.array())
                .all());
      CHECK((t1.steps[s].posterior.beliefs[c].cov.array() ==
             t2.steps[s].posterior.beliefs[c].cov.array())
                .all());
    }
}
