#include "dynbn/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "dynbn/divergence.hpp"
#include "dynbn/errors.hpp"
#include "dynbn/filter.hpp"
#include "dynbn/oracle.hpp"
#include "dynbn/rng.hpp"
#include "dynbn/templates.hpp"

namespace dynbn::verify {

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

double elapsed_s(const std::chrono::steady_clock::time_point& start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// ---------------------------------------------------------------------------
// Dense multi-step oracle: compose the joint over every variable the scenario
// ever declares, then condition on observation batches with dense linear
// algebra.  Shares no code with the tree propagation it cross-checks.

struct StackedJoint {
  std::vector<std::string> order;
  std::map<std::string, int> offset;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  // Observation rows grouped by step.
  std::vector<std::vector<Eigen::VectorXd>> rows;
  std::vector<std::vector<double>> values;
  std::vector<std::vector<double>> variances;
};

StackedJoint stack_scenario(const filter::Scenario& scenario) {
  StackedJoint sj;
  int total = 0;
  for (const auto& step : scenario.steps)
    for (const auto& v : step.dag.variables)
      if (!sj.offset.count(v.id)) {
        sj.offset[v.id] = total;
        sj.order.push_back(v.id);
        total += v.dim;
      }
  sj.mean.setZero(total);
  sj.cov.setZero(total, total);

  std::set<std::string> placed;
  for (const auto& step : scenario.steps) {
    std::vector<const filter::LinearGaussianConditional*> pending;
    for (const auto& c : step.conditionals) pending.push_back(&c);
    while (!pending.empty()) {
      bool progress = false;
      for (auto it = pending.begin(); it != pending.end();) {
        bool ready = true;
        for (const auto& p : (*it)->parents)
          if (!placed.count(p)) ready = false;
        if (!ready) {
          ++it;
          continue;
        }
        const auto* c = *it;
        const int ci = sj.offset.at(c->child);
        double mu = c->intercept[0];
        for (std::size_t k = 0; k < c->parents.size(); ++k)
          mu += c->coeffs(0, k) * sj.mean[sj.offset.at(c->parents[k])];
        sj.mean[ci] = mu;
        // Cross covariance row: sum of parent rows, scaled.
        Eigen::VectorXd row = Eigen::VectorXd::Zero(total);
        for (std::size_t k = 0; k < c->parents.size(); ++k)
          row += c->coeffs(0, k) * sj.cov.row(sj.offset.at(c->parents[k])).transpose();
        double own = c->noise_cov(0, 0);
        for (std::size_t k = 0; k < c->parents.size(); ++k)
          for (std::size_t l = 0; l < c->parents.size(); ++l)
            own += c->coeffs(0, k) * c->coeffs(0, l) *
                   sj.cov(sj.offset.at(c->parents[k]), sj.offset.at(c->parents[l]));
        sj.cov.row(ci) = row.transpose();
        sj.cov.col(ci) = row;
        sj.cov(ci, ci) = own;
        placed.insert(c->child);
        it = pending.erase(it);
        progress = true;
      }
      if (!progress) throw Error("stacked oracle: unresolved conditionals");
    }
    sj.rows.emplace_back();
    sj.values.emplace_back();
    sj.variances.emplace_back();
    for (const auto& obs : step.observations) {
      Eigen::VectorXd row = Eigen::VectorXd::Zero(total);
      for (const auto& [var, coeffs] : obs.design) row[sj.offset.at(var)] = coeffs[0];
      sj.rows.back().push_back(std::move(row));
      sj.values.back().push_back(obs.y);
      sj.variances.back().push_back(obs.V);
    }
  }
  return sj;
}

// ---------------------------------------------------------------------------
// Small direct 2-D Gaussian evaluator for the tensor quadrature oracle.

struct Mvn2 {
  Eigen::Vector2d mu;
  Eigen::Matrix2d inv;
  double lognorm;

  Mvn2(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
    mu = mean;
    const double det = cov(0, 0) * cov(1, 1) - cov(0, 1) * cov(1, 0);
    inv << cov(1, 1), -cov(0, 1), -cov(1, 0), cov(0, 0);
    inv /= det;
    lognorm = -std::log(2.0 * M_PI) - 0.5 * std::log(det);
  }
  double log_pdf(double x, double y) const {
    const double dx = x - mu[0], dy = y - mu[1];
    const double q = dx * (inv(0, 0) * dx + inv(0, 1) * dy) +
                     dy * (inv(1, 0) * dx + inv(1, 1) * dy);
    return lognorm - 0.5 * q;
  }
};

// Tensor-product Simpson estimate of the Bhattacharyya affinity of two
// bivariate normals, refined by doubling.
double hellinger_2d_quadrature(const Eigen::VectorXd& mu1, const Eigen::MatrixXd& s1,
                               const Eigen::VectorXd& mu2, const Eigen::MatrixXd& s2) {
  const Mvn2 f(mu1, s1), g(mu2, s2);
  double lo_x = std::min(mu1[0] - 8.0 * std::sqrt(s1(0, 0)), mu2[0] - 8.0 * std::sqrt(s2(0, 0)));
  double hi_x = std::max(mu1[0] + 8.0 * std::sqrt(s1(0, 0)), mu2[0] + 8.0 * std::sqrt(s2(0, 0)));
  double lo_y = std::min(mu1[1] - 8.0 * std::sqrt(s1(1, 1)), mu2[1] - 8.0 * std::sqrt(s2(1, 1)));
  double hi_y = std::max(mu1[1] + 8.0 * std::sqrt(s1(1, 1)), mu2[1] + 8.0 * std::sqrt(s2(1, 1)));

  const auto estimate = [&](int n) {
    const double hx = (hi_x - lo_x) / n, hy = (hi_y - lo_y) / n;
    double total = 0.0;
    for (int i = 0; i <= n; ++i) {
      const double wx = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
      const double x = lo_x + i * hx;
      double rowsum = 0.0;
      for (int j = 0; j <= n; ++j) {
        const double wy = (j == 0 || j == n) ? 1.0 : (j % 2 ? 4.0 : 2.0);
        const double y = lo_y + j * hy;
        rowsum += wy * std::exp(0.5 * (f.log_pdf(x, y) + g.log_pdf(x, y)));
      }
      total += wx * rowsum;
    }
    return total * hx * hy / 9.0;
  };
  int n = 128;
  double prev = estimate(n);
  while (n < 4096) {
    n *= 2;
    const double cur = estimate(n);
    if (std::abs(cur - prev) < 1e-9) return std::sqrt(std::max(0.0, 1.0 - cur));
    prev = cur;
  }
  return std::sqrt(std::max(0.0, 1.0 - prev));
}

Eigen::MatrixXd random_spd2(Rng& rng) {
  Eigen::Matrix2d a;
  a << rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
      rng.uniform(-1.0, 1.0);
  Eigen::Matrix2d s = a * a.transpose();
  s.diagonal().array() += rng.uniform(0.3, 1.5);
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------

PropertyResult gaussian_exactness() {
  const auto start = std::chrono::steady_clock::now();
  PropertyResult res{"gaussian-exactness", true, ""};
  double worst = 0.0;
  int checked = 0;

  for (int trial = 0; trial < 200; ++trial) {
    const filter::Scenario scenario = templates::random_gaussian(1000 + trial);
    const filter::Trajectory traj = filter::run(scenario, {.diagnostics = false});
    const StackedJoint sj = stack_scenario(scenario);

    std::vector<Eigen::VectorXd> rows;
    std::vector<double> values, variances;
    for (std::size_t s = 0; s < scenario.steps.size(); ++s) {
      rows.insert(rows.end(), sj.rows[s].begin(), sj.rows[s].end());
      values.insert(values.end(), sj.values[s].begin(), sj.values[s].end());
      variances.insert(variances.end(), sj.variances[s].begin(), sj.variances[s].end());
      const auto [dense_mean, dense_cov] =
          oracle::dense_condition(sj.mean, sj.cov, rows, values, variances);

      for (const auto& belief : traj.steps[s].posterior.beliefs) {
        for (std::size_t i = 0; i < belief.clique.members.size(); ++i) {
          const int gi = sj.offset.at(belief.clique.members[i]);
          const auto [oi, li] = belief.block_of(belief.clique.members[i]);
          worst = std::max(worst, std::abs(belief.mean[oi] - dense_mean[gi]));
          for (std::size_t j = 0; j < belief.clique.members.size(); ++j) {
            const int gj = sj.offset.at(belief.clique.members[j]);
            const auto [oj, lj] = belief.block_of(belief.clique.members[j]);
            worst = std::max(worst, std::abs(belief.cov(oi, oj) - dense_cov(gi, gj)));
          }
          ++checked;
        }
      }
    }
  }
  const double secs = elapsed_s(start);
  res.pass = worst <= 1e-8 && secs < 10.0;
  res.detail = "max |tree - dense| = " + fmt(worst) + " over 200 scenarios (" +
               fmt(secs) + " s)";
  return res;
}

PropertyResult dglm_conjugacy() {
  const auto start = std::chrono::steady_clock::now();
  PropertyResult res{"dglm-conjugacy", true, ""};
  const double grid[] = {0.5, 1.0, 2.0, 4.0, 8.0, 16.0};
  double worst_pois = 0.0, worst_logn = 0.0;

  for (double m : grid)
    for (double w2 : grid) {
      const auto [alpha, beta] = dglm::moment_match_gamma(m, w2);
      for (int y = 0; y <= 20; ++y) {
        const dglm::DglmPosterior post = dglm::update_poisson(m, w2, y);
        const double conj_mean = (alpha + y) / (beta + 1.0);
        const double conj_var = (alpha + y) / ((beta + 1.0) * (beta + 1.0));
        worst_pois = std::max(worst_pois, std::abs(post.m_star - conj_mean) / conj_mean);
        worst_pois = std::max(worst_pois, std::abs(post.w2_star - conj_var) / conj_var);
      }
      // Log-space conjugate oracle for the log-normal row.
      const auto [a, b] = dglm::moment_match_lognormal(m, w2);
      for (double y : {0.5, 1.0, 2.0, 5.0, 12.0, 20.0})
        for (double V : {0.25, 1.0, 4.0}) {
          const dglm::DglmPosterior post = dglm::update_lognormal(m, w2, y, V);
          const double var_post = 1.0 / (1.0 / b + 1.0 / V);
          const double mean_post = var_post * (a / b + std::log(y) / V);
          const double oracle_mean = std::exp(mean_post + 0.5 * var_post);
          const double oracle_var = std::expm1(var_post) * oracle_mean * oracle_mean;
          worst_logn = std::max(worst_logn, std::abs(post.m_star - oracle_mean) / oracle_mean);
          worst_logn = std::max(worst_logn, std::abs(post.w2_star - oracle_var) / oracle_var);
        }
    }
  const double secs = elapsed_s(start);
  res.pass = worst_pois <= 1e-12 && worst_logn <= 1e-10 && secs < 1.0;
  res.detail = "poisson rel err " + fmt(worst_pois) + ", lognormal rel err " +
               fmt(worst_logn) + " (" + fmt(secs) + " s)";
  return res;
}

PropertyResult hellinger_closed_forms() {
  PropertyResult res{"hellinger-closed-forms", true, ""};
  Rng rng(4242);
  double worst_1d = 0.0, worst_2d = 0.0, worst_axiom = 0.0, worst_sandwich = 0.0;

  for (int trial = 0; trial < 100; ++trial) {
    const double mu1 = rng.uniform(-3.0, 3.0), mu2 = rng.uniform(-3.0, 3.0);
    const double s1 = rng.uniform(0.2, 3.0), s2 = rng.uniform(0.2, 3.0);
    const double closed = divergence::hellinger_normal_normal(mu1, s1, mu2, s2);
    const auto f = divergence::Density1D::normal(mu1, s1);
    const auto h = divergence::Density1D::normal(mu2, s2);
    const double quad = divergence::quadrature_hellinger(f, h).value;
    worst_1d = std::max(worst_1d, std::abs(closed - quad));

    // Metric axioms on the same draws.
    worst_axiom = std::max(worst_axiom, divergence::hellinger_normal_normal(mu1, s1, mu1, s1));
    worst_axiom = std::max(
        worst_axiom, std::abs(closed - divergence::hellinger_normal_normal(mu2, s2, mu1, s1)));
    const double mu3 = rng.uniform(-3.0, 3.0), s3 = rng.uniform(0.2, 3.0);
    const double d13 = divergence::hellinger_normal_normal(mu1, s1, mu3, s3);
    const double d32 = divergence::hellinger_normal_normal(mu3, s3, mu2, s2);
    worst_axiom = std::max(worst_axiom, closed - (d13 + d32));

    // Variation sandwich via quadrature.
    const double dv = divergence::variation_quadrature(f, h).value;
    worst_sandwich = std::max(worst_sandwich, closed * closed - dv);
    worst_sandwich = std::max(worst_sandwich, dv - std::sqrt(2.0) * closed);

    // Multivariate closed form against tensor quadrature.
    Eigen::VectorXd m1(2), m2(2);
    m1 << rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0);
    m2 << rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0);
    const Eigen::MatrixXd c1 = random_spd2(rng), c2 = random_spd2(rng);
    const double mv_closed = divergence::hellinger_mvn(m1, c1, m2, c2);
    const double mv_quad = hellinger_2d_quadrature(m1, c1, m2, c2);
    worst_2d = std::max(worst_2d, std::abs(mv_closed - mv_quad));
  }
  res.pass = worst_1d <= 1e-6 && worst_2d <= 1e-6 && worst_axiom <= 1e-9 &&
             worst_sandwich <= 1e-9;
  res.detail = "1d |closed-quad| " + fmt(worst_1d) + ", 2d " + fmt(worst_2d) +
               ", axiom slack " + fmt(worst_axiom) + ", sandwich slack " + fmt(worst_sandwich);
  return res;
}

PropertyResult marginalization_laws() {
  PropertyResult res{"marginalization-laws", true, ""};
  Rng rng(515151);
  std::vector<divergence::JointPair> pairs;

  for (int i = 0; i < 50; ++i) {
    divergence::JointPair pair;
    pair.shared_conditional = true;
    const double slope = rng.uniform(-1.5, 1.5), icept = rng.uniform(-1.0, 1.0);
    const double noise = rng.uniform(0.2, 2.0);
    divergence::compose_linear_conditional(rng.uniform(-2.0, 2.0), rng.uniform(0.3, 2.0),
                                           slope, icept, noise, &pair.mu1, &pair.sigma1);
    divergence::compose_linear_conditional(rng.uniform(-2.0, 2.0), rng.uniform(0.3, 2.0),
                                           slope, icept, noise, &pair.mu2, &pair.sigma2);
    pairs.push_back(std::move(pair));
  }
  for (int i = 0; i < 100; ++i) {
    divergence::JointPair pair;
    pair.mu1.resize(2);
    pair.mu2.resize(2);
    pair.mu1 << rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0);
    pair.mu2 << rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0);
    pair.sigma1 = random_spd2(rng);
    pair.sigma2 = random_spd2(rng);
    pairs.push_back(std::move(pair));
  }

  const divergence::MarginalizationReport rep = divergence::marginalization_checks(pairs);
  double worst_eq = 0.0, worst_mono = 0.0;
  for (std::size_t i = 0; i < rep.checks.size(); ++i) {
    const auto& c = rep.checks[i];
    if (pairs[i].shared_conditional)
      worst_eq = std::max(worst_eq, std::abs(c.dh_joint - c.dh_margin));
    worst_mono = std::max(worst_mono, c.dh_margin - c.dh_joint);
  }
  res.pass = rep.all_ok;
  res.detail = "equality gap " + fmt(worst_eq) + " (50 shared), monotonicity slack " +
               fmt(worst_mono) + " (150 pairs)";
  return res;
}

PropertyResult normal_gamma_audit() {
  PropertyResult res{"normal-gamma-closed-form-audit", true, ""};
  const double alphas[] = {1.0, 5.0, 25.0, 100.0, 400.0};
  std::ostringstream detail;
  double prev = 2.0;
  bool ok = true;
  for (double alpha : alphas) {
    // mu^2/s^2 = alpha with mu = alpha, s^2 = alpha.
    const divergence::NormalGammaHellinger h = divergence::hellinger_normal_gamma(alpha, alpha);
    ok = ok && std::isfinite(h.quadrature) && h.quadrature < prev && h.quadrature_converged;
    if (alpha >= 100.0) ok = ok && h.quadrature < 0.05;
    detail << "a=" << alpha << " quad=" << fmt(h.quadrature)
           << " formula_dev=" << fmt(std::abs(h.formula - h.quadrature)) << "; ";
    prev = h.quadrature;
  }
  res.pass = ok;
  res.detail = detail.str();
  return res;
}

PropertyResult bound_behavior() {
  PropertyResult res{"bound-behavior", true, ""};
  std::ostringstream detail;
  bool ok = true;
  for (long y : {20L, 25L, 50L}) {
    const double m = static_cast<double>(y);
    const divergence::ErrorBoundReport rep = divergence::error_bound(m, m, y);
    ok = ok && rep.quadrature_dH < 0.05;
    if (rep.bound_applicable) ok = ok && rep.quadrature_dH <= rep.bound;
    detail << "y=" << y << " dH=" << fmt(rep.quadrature_dH)
           << (rep.quadrature_dH <= 0.01 ? " (within 0.01)" : " (above 0.01)")
           << " bound=" << (rep.bound_applicable ? fmt(rep.bound) : std::string("n/a"))
           << "; ";
  }
  res.pass = ok;
  res.detail = detail.str();
  return res;
}

PropertyResult small_count_degradation() {
  PropertyResult res{"small-count-degradation", true, ""};
  const double ref = divergence::error_bound(25.0, 25.0, 25L).quadrature_dH;
  const double low0 = divergence::error_bound(1.0, 1.0, 0L).quadrature_dH;
  const double low1 = divergence::error_bound(1.0, 1.0, 1L).quadrature_dH;
  res.pass = low0 > ref && low1 > ref;
  res.detail = "dH(1,1,y=0)=" + fmt(low0) + ", dH(1,1,y=1)=" + fmt(low1) +
               " vs dH(25,25,25)=" + fmt(ref);
  return res;
}

PropertyResult kalman_reduction() {
  PropertyResult res{"kalman-reduction", true, ""};
  double worst = 0.0;
  for (std::uint64_t seed : {3ULL, 11ULL, 2024ULL}) {
    const filter::Scenario scenario = templates::kalman_chain(seed);
    const filter::Trajectory traj = filter::run(scenario, {.diagnostics = false});

    // Textbook scalar recursion over the parameters read back from the file.
    double m = scenario.steps[0].conditionals[0].intercept[0];
    double p = scenario.steps[0].conditionals[0].noise_cov(0, 0);
    for (std::size_t t = 0; t < scenario.steps.size(); ++t) {
      const auto& step = scenario.steps[t];
      const std::string cur = step.frontier[0];
      if (t > 0) {
        const auto& cond = step.conditionals[0];
        m = cond.coeffs(0, 0) * m + cond.intercept[0];
        p = cond.coeffs(0, 0) * cond.coeffs(0, 0) * p + cond.noise_cov(0, 0);
      }
      const auto& obs = step.observations[0];
      const double f = obs.design.at(cur)[0];
      const double innovation_var = f * f * p + obs.V;
      const double gain = p * f / innovation_var;
      m += gain * (obs.y - f * m);
      p *= 1.0 - gain * f;

      const auto& posterior = traj.steps[t].posterior;
      const int clique = posterior.tree.containing_clique({cur});
      const auto [mu, sigma] = posterior.beliefs[clique].marginal({cur});
      worst = std::max(worst, std::abs(mu[0] - m));
      worst = std::max(worst, std::abs(sigma(0, 0) - p));
    }
  }
  res.pass = worst <= 1e-10;
  res.detail = "max |filter - kalman| = " + fmt(worst) + " over 3 seeded chains";
  return res;
}

PropertyResult dispersal_fixture() {
  const auto start = std::chrono::steady_clock::now();
  PropertyResult res{"dispersal-fixture", true, ""};
  const filter::Scenario scenario = templates::dispersal_chain(7);
  const filter::Trajectory traj = filter::run(scenario);
  const double secs = elapsed_s(start);

  bool ok = traj.steps.size() == scenario.steps.size() && secs < 5.0;
  double worst_cal = 0.0;
  int diag_count = 0;
  for (const auto& step : traj.steps) {
    // Calibration: both endpoints of every separator agree on its marginal.
    const auto& tb = step.posterior;
    for (std::size_t i = 0; i < tb.separators.size(); ++i) {
      if (tb.separators[i].members.empty()) continue;
      const auto [mu_c, cov_c] = tb.beliefs[i].marginal(tb.separators[i].members);
      const auto [mu_p, cov_p] =
          tb.beliefs[tb.tree.parent_index[i]].marginal(tb.separators[i].members);
      worst_cal = std::max(worst_cal, (mu_c - mu_p).cwiseAbs().maxCoeff());
      worst_cal = std::max(worst_cal, (cov_c - cov_p).cwiseAbs().maxCoeff());
    }
    for (const auto& belief : tb.beliefs) belief.validate();  // PSD + symmetry
    for (const auto& rec : step.observations) {
      ok = ok && !rec.skipped && rec.diagnostics.has_value();
      if (!rec.diagnostics) continue;
      ++diag_count;
      const auto& d = *rec.diagnostics;
      ok = ok && d.dH_lambda >= 0.0 && d.dH_lambda <= 1.0;
      ok = ok && d.dV_lower <= d.dV_upper + 1e-12;
      ok = ok && d.dV_lower >= d.dH_lambda * d.dH_lambda - 1e-9;
      ok = ok && d.error_bound.has_value();
      if (d.error_bound && d.error_bound->bound_applicable)
        ok = ok && d.error_bound->quadrature_dH <= d.error_bound->bound;
    }
  }
  ok = ok && worst_cal <= 1e-9 && diag_count == 10;
  res.pass = ok;
  res.detail = "10 steps, " + std::to_string(diag_count) + " diagnostics, calibration gap " +
               fmt(worst_cal) + " (" + fmt(secs) + " s)";
  return res;
}

// ---------------------------------------------------------------------------

namespace {

const std::map<std::string, std::vector<PropertyResult (*)()>>& suite_table() {
  static const std::map<std::string, std::vector<PropertyResult (*)()>> table = {
      {"gaussian-exactness", {&gaussian_exactness, &kalman_reduction}},
      {"dglm-conjugacy", {&dglm_conjugacy}},
      {"hellinger", {&hellinger_closed_forms, &marginalization_laws}},
      {"bounds", {&normal_gamma_audit, &bound_behavior, &small_count_degradation}},
      {"dispersal", {&dispersal_fixture}},
  };
  return table;
}

}  // namespace

std::vector<std::string> suite_names() {
  std::vector<std::string> names;
  for (const auto& [name, fns] : suite_table()) names.push_back(name);
  return names;
}

int run_suite(const std::string& name, std::ostream& out) {
  const auto it = suite_table().find(name);
  if (it == suite_table().end()) {
    out << "unknown suite '" << name << "'; available:";
    for (const auto& n : suite_names()) out << " " << n;
    out << "\n";
    return 2;
  }
  bool all = true;
  for (const auto& fn : it->second) {
    const PropertyResult r = fn();
    out << (r.pass ? "PASS" : "FAIL") << " " << r.name << " — " << r.detail << "\n";
    all = all && r.pass;
  }
  return all ? 0 : 1;
}

}  // namespace dynbn::verify
