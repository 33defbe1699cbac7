#include "dynbn/gauss.hpp"

#include <doctest.h>

#include "dynbn/errors.hpp"
#include "dynbn/dglm.hpp"
#include "dynbn/filter.hpp"
#include "dynbn/oracle.hpp"
#include "dynbn/rng.hpp"
#include "test_support.hpp"

using namespace dynbn;

namespace {

gauss::CliqueBelief make_belief(const std::vector<std::string>& members,
                                const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
  gauss::CliqueBelief b;
  b.clique.members = members;
  b.dims.assign(members.size(), 1);
  b.mean = mean;
  b.cov = cov;
  return b;
}

// Scalar chain x1 -> x2 -> ... with unit slopes and given noise variances.
filter::ScenarioStep chain_step(int n, Rng& rng) {
  filter::ScenarioStep step;
  for (int i = 1; i <= n; ++i) {
    const std::string id = "x" + std::to_string(i);
    step.dag.variables.push_back({id, 1});
    filter::LinearGaussianConditional c;
    c.child = id;
    if (i > 1) {
      const std::string prev = "x" + std::to_string(i - 1);
      c.parents = {prev};
      c.coeffs = Eigen::MatrixXd::Constant(1, 1, rng.uniform(0.5, 1.5));
      step.dag.edges.emplace_back(prev, id);
    } else {
      c.coeffs.resize(1, 0);
    }
    c.intercept = Eigen::VectorXd::Constant(1, rng.uniform(-1.0, 1.0));
    c.noise_cov = Eigen::MatrixXd::Constant(1, 1, rng.uniform(0.4, 1.5));
    step.conditionals.push_back(std::move(c));
  }
  return step;
}

}  // namespace

TEST_CASE("lambda_prior computes F'mu and F'SF") {
  Eigen::VectorXd mu(2);
  mu << 1, 2;
  Eigen::MatrixXd cov(2, 2);
  cov << 2, 1, 1, 3;
  const auto belief = make_belief({"a", "b"}, mu, cov);
  gauss::DesignVector design;
  design.coeffs = Eigen::VectorXd::Ones(2);
  const auto lambda = gauss::lambda_prior(belief, design);
  CHECK(lambda.m == doctest::Approx(3.0));
  CHECK(lambda.w2 == doctest::Approx(7.0));

  SUBCASE("unit design extracts a coordinate") {
    design.coeffs << 1, 0;
    const auto l = gauss::lambda_prior(belief, design);
    CHECK(l.m == doctest::Approx(1.0));
    CHECK(l.w2 == doctest::Approx(2.0));
  }
  SUBCASE("design scaling is bilinear") {
    design.coeffs << 3, 3;
    const auto l = gauss::lambda_prior(belief, design);
    CHECK(l.m == doctest::Approx(9.0));
    CHECK(l.w2 == doctest::Approx(63.0));
  }
  SUBCASE("zero design is degenerate") {
    design.coeffs << 0, 0;
    CHECK_THROWS_AS(gauss::lambda_prior(belief, design), DegenerateDesignError);
  }
}

TEST_CASE("condition_on_lambda matches joint conditioning") {
  SUBCASE("one-dimensional clique is the lambda itself") {
    const auto belief = make_belief({"a"}, Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Ones(1, 1));
    gauss::DesignVector design;
    design.coeffs = Eigen::VectorXd::Ones(1);
    const auto out = gauss::condition_on_lambda(belief, design, {1.0, 0.5});
    CHECK(out.mean[0] == doctest::Approx(1.0));
    CHECK(out.cov(0, 0) == doctest::Approx(0.5));
  }
  SUBCASE("posterior equal to prior is a fixpoint") {
    Eigen::MatrixXd cov(2, 2);
    cov << 2, 1, 1, 3;
    Eigen::VectorXd mu(2);
    mu << 1, 2;
    const auto belief = make_belief({"a", "b"}, mu, cov);
    gauss::DesignVector design;
    design.coeffs = Eigen::VectorXd::Ones(2);
    const auto prior = gauss::lambda_prior(belief, design);
    const auto out = gauss::condition_on_lambda(belief, design, prior);
    CHECK((out.mean - mu).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
    CHECK((out.cov - cov).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
  }
  SUBCASE("coordinate design updates only that block") {
    const auto belief =
        make_belief({"a", "b"}, Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2));
    gauss::DesignVector design;
    design.coeffs = Eigen::VectorXd::Zero(2);
    design.coeffs[0] = 1.0;
    const auto out = gauss::condition_on_lambda(belief, design, {2.0, 0.5});
    CHECK(out.mean[0] == doctest::Approx(2.0));
    CHECK(out.mean[1] == doctest::Approx(0.0));
    CHECK(out.cov(0, 0) == doctest::Approx(0.5));
    CHECK(out.cov(1, 1) == doctest::Approx(1.0));
    CHECK(out.cov(0, 1) == doctest::Approx(0.0));
  }
}

TEST_CASE("absorb replaces the separator marginal and shifts the rest") {
  // Target V = {S, Z}; source U = {S, X} carries an updated S marginal.
  Eigen::VectorXd mu_v(2);
  mu_v << 0, 0;
  Eigen::MatrixXd cov_v(2, 2);
  cov_v << 1.0, 0.5, 0.5, 1.0;  // S first (sorted member order)
  const auto target = make_belief({"S", "Z"}, mu_v, cov_v);

  Eigen::VectorXd mu_u(2);
  mu_u << 1.0, 0.0;
  Eigen::MatrixXd cov_u(2, 2);
  cov_u << 0.5, 0.0, 0.0, 1.0;
  const auto source = make_belief({"S", "X"}, mu_u, cov_u);

  const auto out = gauss::absorb(target, source, {"S"});
  CHECK(out.mean[0] == doctest::Approx(1.0));
  CHECK(out.mean[1] == doctest::Approx(0.5));
  CHECK(out.cov(0, 0) == doctest::Approx(0.5));
  CHECK(out.cov(1, 1) == doctest::Approx(0.875));
  CHECK(out.cov(0, 1) == doctest::Approx(0.25));

  SUBCASE("matching separator marginals leave the target unchanged") {
    const auto same = gauss::absorb(target, target, {"S"});
    CHECK((same.mean - target.mean).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((same.cov - target.cov).cwiseAbs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("absorb equals dense conditioning on random two-clique trees") {
  Rng rng(2121);
  for (int trial = 0; trial < 30; ++trial) {
    filter::ScenarioStep step = chain_step(3, rng);  // cliques {x1,x2}, {x2,x3}
    const auto ds = test_support::dense_compose(step, std::nullopt);
    const auto tb = filter::init_step(step, std::nullopt);
    REQUIRE(tb.beliefs.size() == 2);

    // Observe lambda = f' (x1, x2) on the first clique.
    gauss::DesignVector design;
    design.coeffs = Eigen::VectorXd(2);
    design.coeffs << rng.uniform(0.4, 1.2), rng.uniform(0.4, 1.2);
    const gauss::LambdaBelief post{rng.uniform(-2.0, 2.0), rng.uniform(0.2, 1.0)};
    const auto updated = gauss::condition_on_lambda(tb.beliefs[0], design, post);

    const auto absorbed = gauss::absorb(tb.beliefs[1], updated, tb.tree.separators[1]);

    Eigen::VectorXd f = Eigen::VectorXd::Zero(3);
    f[ds.offset.at(tb.beliefs[0].clique.members[0])] = design.coeffs[0];
    f[ds.offset.at(tb.beliefs[0].clique.members[1])] = design.coeffs[1];
    const auto [dense_mean, dense_cov] =
        oracle::dense_lambda_condition(ds.mean, ds.cov, f, post.m, post.w2);

    for (std::size_t i = 0; i < 2; ++i) {
      const int gi = ds.offset.at(absorbed.clique.members[i]);
      CHECK(absorbed.mean[i] == doctest::Approx(dense_mean[gi]).epsilon(1e-9));
      for (std::size_t j = 0; j < 2; ++j) {
        const int gj = ds.offset.at(absorbed.clique.members[j]);
        CHECK(absorbed.cov(i, j) == doctest::Approx(dense_cov(gi, gj)).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("collect_distribute calibrates a three-clique chain") {
  Rng rng(3131);
  for (int trial = 0; trial < 20; ++trial) {
    filter::ScenarioStep step = chain_step(4, rng);  // cliques {x1,x2},{x2,x3},{x3,x4}
    const auto ds = test_support::dense_compose(step, std::nullopt);
    auto tb = filter::init_step(step, std::nullopt);
    REQUIRE(tb.beliefs.size() == 3);

    // Evidence in the last leaf clique.
    gauss::DesignVector design;
    design.coeffs = Eigen::VectorXd(2);
    design.coeffs << rng.uniform(0.4, 1.2), rng.uniform(0.4, 1.2);
    const gauss::LambdaBelief post{rng.uniform(-2.0, 2.0), rng.uniform(0.2, 1.0)};
    tb.beliefs[2] = gauss::condition_on_lambda(tb.beliefs[2], design, post);

    Eigen::VectorXd f = Eigen::VectorXd::Zero(4);
    f[ds.offset.at(tb.beliefs[2].clique.members[0])] = design.coeffs[0];
    f[ds.offset.at(tb.beliefs[2].clique.members[1])] = design.coeffs[1];
    const auto [dense_mean, dense_cov] =
        oracle::dense_lambda_condition(ds.mean, ds.cov, f, post.m, post.w2);

    const auto check_against_dense = [&](const gauss::TreeBelief& calibrated) {
      for (const auto& belief : calibrated.beliefs)
        for (std::size_t i = 0; i < belief.clique.members.size(); ++i) {
          const int gi = ds.offset.at(belief.clique.members[i]);
          CHECK(belief.mean[i] == doctest::Approx(dense_mean[gi]).epsilon(1e-9));
          for (std::size_t j = 0; j < belief.clique.members.size(); ++j) {
            const int gj = ds.offset.at(belief.clique.members[j]);
            CHECK(belief.cov(i, j) == doctest::Approx(dense_cov(gi, gj)).epsilon(1e-9));
          }
        }
    };
    const auto from_root0 = gauss::collect_distribute(tb, {2}, 0);
    check_against_dense(from_root0);

    // Root invariance.
    const auto from_root2 = gauss::collect_distribute(tb, {2}, 2);
    for (std::size_t c = 0; c < from_root0.beliefs.size(); ++c) {
      CHECK((from_root0.beliefs[c].mean - from_root2.beliefs[c].mean).cwiseAbs().maxCoeff() <
            1e-9);
      CHECK((from_root0.beliefs[c].cov - from_root2.beliefs[c].cov).cwiseAbs().maxCoeff() <
            1e-9);
    }

    // Calibration: separator marginals agree from both endpoints.
    for (std::size_t i = 0; i < from_root0.separators.size(); ++i) {
      if (from_root0.separators[i].members.empty()) continue;
      const auto [mu_child, cov_child] =
          from_root0.beliefs[i].marginal(from_root0.separators[i].members);
      const auto [mu_parent, cov_parent] =
          from_root0.beliefs[from_root0.tree.parent_index[i]].marginal(
              from_root0.separators[i].members);
      CHECK((mu_child - mu_parent).cwiseAbs().maxCoeff() < 1e-9);
      CHECK((cov_child - cov_parent).cwiseAbs().maxCoeff() < 1e-9);
    }

    // The calibrated clique/separator decomposition reproduces the dense
    // posterior density pointwise.
    for (int k = 0; k < 5; ++k) {
      Eigen::VectorXd x(4);
      for (int i = 0; i < 4; ++i) x[i] = rng.uniform(-4.0, 4.0);
      CHECK(gauss::joint_log_density(from_root0, x) ==
            doctest::Approx(gauss::logpdf_mvn(x, dense_mean, dense_cov)).epsilon(1e-8));
    }
  }
}

TEST_CASE("collect_distribute handles simultaneous evidence in two branches") {
  // Star tree: hub h with leaves a, b, c gives cliques {a,h}, {b,h}, {c,h}
  // hanging off the shared separator {h}.  Evidence lands in two different
  // leaf cliques at once.
  Rng rng(6161);
  for (int trial = 0; trial < 20; ++trial) {
    filter::ScenarioStep step;
    step.dag.variables = {{"h", 1}, {"a", 1}, {"b", 1}, {"c", 1}};
    filter::LinearGaussianConditional root;
    root.child = "h";
    root.coeffs.resize(1, 0);
    root.intercept = Eigen::VectorXd::Constant(1, rng.uniform(-1.0, 1.0));
    root.noise_cov = Eigen::MatrixXd::Constant(1, 1, rng.uniform(0.5, 2.0));
    step.conditionals.push_back(root);
    for (const char* leaf : {"a", "b", "c"}) {
      filter::LinearGaussianConditional c;
      c.child = leaf;
      c.parents = {"h"};
      c.coeffs = Eigen::MatrixXd::Constant(1, 1, rng.uniform(0.5, 1.5));
      c.intercept = Eigen::VectorXd::Constant(1, rng.uniform(-1.0, 1.0));
      c.noise_cov = Eigen::MatrixXd::Constant(1, 1, rng.uniform(0.4, 1.5));
      step.dag.edges.emplace_back("h", leaf);
      step.conditionals.push_back(std::move(c));
    }
    const auto ds = test_support::dense_compose(step, std::nullopt);
    auto tb = filter::init_step(step, std::nullopt);
    REQUIRE(tb.beliefs.size() == 3);

    // Gaussian evidence on clique {a,h} and clique {c,h}, entered as
    // partial marginals computed from the prior tree.
    std::vector<Eigen::VectorXd> rows;
    std::vector<double> ys, vs;
    std::vector<int> updated;
    for (const std::string leaf : {"a", "c"}) {
      const int ci = tb.tree.containing_clique({leaf});
      gauss::DesignVector design;
      design.coeffs = Eigen::VectorXd(2);
      design.coeffs << rng.uniform(0.4, 1.2), rng.uniform(0.4, 1.2);
      const double y = rng.uniform(-2.0, 2.0), v = rng.uniform(0.3, 1.5);
      const auto prior = gauss::lambda_prior(tb.beliefs[ci], design);
      const auto post = dglm::update_normal(prior.m, prior.w2, y, v);
      tb.beliefs[ci] =
          gauss::condition_on_lambda(tb.beliefs[ci], design, {post.m_star, post.w2_star});
      updated.push_back(ci);

      Eigen::VectorXd f = Eigen::VectorXd::Zero(4);
      for (int k = 0; k < 2; ++k)
        f[ds.offset.at(tb.beliefs[ci].clique.members[k])] = design.coeffs[k];
      rows.push_back(f);
      ys.push_back(y);
      vs.push_back(v);
    }
    const auto [dense_mean, dense_cov] = oracle::dense_condition(ds.mean, ds.cov, rows, ys, vs);

    const auto calibrated = gauss::collect_distribute(tb, updated, 0);
    for (const auto& belief : calibrated.beliefs)
      for (std::size_t i = 0; i < belief.clique.members.size(); ++i) {
        const int gi = ds.offset.at(belief.clique.members[i]);
        CHECK(belief.mean[i] == doctest::Approx(dense_mean[gi]).epsilon(1e-9));
        for (std::size_t j = 0; j < belief.clique.members.size(); ++j)
          CHECK(belief.cov(i, j) ==
                doctest::Approx(dense_cov(gi, ds.offset.at(belief.clique.members[j])))
                    .epsilon(1e-9));
      }
  }
}

TEST_CASE("collect_distribute with no updates is the identity") {
  Rng rng(555);
  filter::ScenarioStep step = chain_step(4, rng);
  const auto tb = filter::init_step(step, std::nullopt);
  const auto out = gauss::collect_distribute(tb, {}, 0);
  for (std::size_t c = 0; c < tb.beliefs.size(); ++c) {
    CHECK((out.beliefs[c].mean - tb.beliefs[c].mean).cwiseAbs().maxCoeff() == 0.0);
    CHECK((out.beliefs[c].cov - tb.beliefs[c].cov).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("joint_log_density equals the clique density on a single-clique tree") {
  Rng rng(77);
  filter::ScenarioStep step = chain_step(2, rng);  // one clique {x1, x2}
  const auto tb = filter::init_step(step, std::nullopt);
  REQUIRE(tb.beliefs.size() == 1);
  for (int i = 0; i < 10; ++i) {
    Eigen::VectorXd x(2);
    x << rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0);
    CHECK(gauss::joint_log_density(tb, x) ==
          doctest::Approx(gauss::logpdf_mvn(x, tb.beliefs[0].mean, tb.beliefs[0].cov))
              .epsilon(1e-12));
  }
}

TEST_CASE("joint_log_density matches the dense joint on a chain") {
  Rng rng(88);
  filter::ScenarioStep step = chain_step(3, rng);
  const auto ds = test_support::dense_compose(step, std::nullopt);
  const auto tb = filter::init_step(step, std::nullopt);
  for (int i = 0; i < 100; ++i) {
    Eigen::VectorXd x(3);
    x << rng.uniform(-4.0, 4.0), rng.uniform(-4.0, 4.0), rng.uniform(-4.0, 4.0);
    CHECK(gauss::joint_log_density(tb, x) ==
          doctest::Approx(gauss::logpdf_mvn(x, ds.mean, ds.cov)).epsilon(1e-8));
  }
}

TEST_CASE("joint density integrates to one on a 2-D grid") {
  Rng rng(99);
  filter::ScenarioStep step = chain_step(2, rng);
  const auto tb = filter::init_step(step, std::nullopt);
  const double s1 = std::sqrt(tb.beliefs[0].cov(0, 0)), s2 = std::sqrt(tb.beliefs[0].cov(1, 1));
  const double lo1 = tb.beliefs[0].mean[0] - 8 * s1, hi1 = tb.beliefs[0].mean[0] + 8 * s1;
  const double lo2 = tb.beliefs[0].mean[1] - 8 * s2, hi2 = tb.beliefs[0].mean[1] + 8 * s2;
  const int n = 400;
  const double h1 = (hi1 - lo1) / n, h2 = (hi2 - lo2) / n;
  double mass = 0.0;
  Eigen::VectorXd x(2);
  for (int i = 0; i <= n; ++i)
    for (int j = 0; j <= n; ++j) {
      x << lo1 + i * h1, lo2 + j * h2;
      const double w = ((i == 0 || i == n) ? 0.5 : 1.0) * ((j == 0 || j == n) ? 0.5 : 1.0);
      mass += w * std::exp(gauss::joint_log_density(tb, x));
    }
  CHECK(mass * h1 * h2 == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("covariances stay symmetric and PSD through updates") {
  Rng rng(4242);
  for (int trial = 0; trial < 20; ++trial) {
    filter::ScenarioStep step = chain_step(4, rng);
    auto tb = filter::init_step(step, std::nullopt);
    gauss::DesignVector design;
    design.coeffs = Eigen::VectorXd(2);
    design.coeffs << 1.0, 0.5;
    tb.beliefs[1] = gauss::condition_on_lambda(tb.beliefs[1], design,
                                               {rng.uniform(-1.0, 1.0), rng.uniform(0.1, 0.8)});
    const auto out = gauss::collect_distribute(tb, {1}, 0);
    for (const auto& belief : out.beliefs) {
      CHECK((belief.cov - belief.cov.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
      CHECK_NOTHROW(belief.validate());
    }
  }
}
