#include "dynbn/oracle.hpp"

#include <algorithm>
#include <cmath>

#include "dynbn/errors.hpp"
#include "dynbn/gauss.hpp"

namespace dynbn::oracle {

std::pair<Eigen::VectorXd, Eigen::MatrixXd> dense_condition(
    const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
    const std::vector<Eigen::VectorXd>& design_rows, const std::vector<double>& observed,
    const std::vector<double>& noise_variances) {
  const int k = static_cast<int>(design_rows.size());
  if (observed.size() != design_rows.size() || noise_variances.size() != design_rows.size())
    throw Error("dense_condition: observation batch sizes disagree");
  if (k == 0) return {mean, cov};

  Eigen::MatrixXd design(k, mean.size());
  Eigen::VectorXd y(k), v(k);
  for (int i = 0; i < k; ++i) {
    if (design_rows[i].size() != mean.size())
      throw Error("dense_condition: design row dimension mismatch");
    design.row(i) = design_rows[i].transpose();
    y[i] = observed[i];
    v[i] = noise_variances[i];
  }
  Eigen::MatrixXd innovation_cov = design * cov * design.transpose();
  innovation_cov.diagonal() += v;
  Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (innovation_cov + innovation_cov.transpose()));
  if (llt.info() != Eigen::Success)
    throw ConditioningError("dense_condition: singular innovation covariance");

  const Eigen::MatrixXd cross = cov * design.transpose();       // n x k
  const Eigen::MatrixXd gain = llt.solve(cross.transpose()).transpose();  // n x k
  const Eigen::VectorXd post_mean = mean + gain * (y - design * mean);
  const Eigen::MatrixXd post_cov =
      gauss::symmetrized(cov - gain * innovation_cov * gain.transpose());
  return {post_mean, post_cov};
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> dense_lambda_condition(
    const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, const Eigen::VectorXd& f,
    double m_star, double w2_star) {
  if (f.size() != mean.size()) throw Error("dense_lambda_condition: dimension mismatch");
  const double s = f.dot(cov * f);
  if (s <= 1e-12)
    throw DegenerateDesignError("dense_lambda_condition: design carries no variance");
  const Eigen::VectorXd gain = (cov * f) / s;
  const Eigen::VectorXd post_mean = mean + gain * (m_star - f.dot(mean));
  const Eigen::MatrixXd post_cov =
      gauss::symmetrized(cov + (w2_star - s) * (gain * gain.transpose()));
  return {post_mean, post_cov};
}

namespace {

double log_likelihood(dglm::Family family, double y, double V, double lambda) {
  switch (family) {
    case dglm::Family::Poisson:
      if (lambda <= 0.0) return -std::numeric_limits<double>::infinity();
      return y * std::log(lambda) - lambda - std::lgamma(y + 1.0);
    case dglm::Family::LogNormal: {
      if (lambda <= 0.0) return -std::numeric_limits<double>::infinity();
      const double d = std::log(y) - std::log(lambda);
      return -0.5 * d * d / V;  // constant in lambda dropped
    }
    case dglm::Family::Normal:
      break;
  }
  throw DomainError("grid_posterior_lambda supports Poisson and LogNormal families");
}

struct Moments {
  double mass = 0.0, mean = 0.0, variance = 0.0;
};

// Simpson moments of the unnormalized posterior on n+1 points.
template <typename F>
Moments simpson_moments(const F& logq, double lo, double hi, int n,
                        Eigen::VectorXd* grid = nullptr, Eigen::VectorXd* density = nullptr) {
  const double h = (hi - lo) / n;
  double s0 = 0.0, s1 = 0.0, s2 = 0.0;
  if (grid != nullptr) {
    grid->resize(n + 1);
    density->resize(n + 1);
  }
  for (int i = 0; i <= n; ++i) {
    const double x = lo + i * h;
    const double lq = logq(x);
    const double q = std::isfinite(lq) ? std::exp(lq) : 0.0;
    const double wgt = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    s0 += wgt * q;
    s1 += wgt * q * x;
    s2 += wgt * q * x * x;
    if (grid != nullptr) {
      (*grid)[i] = x;
      (*density)[i] = q;
    }
  }
  Moments m;
  m.mass = s0 * h / 3.0;
  if (m.mass > 0.0) {
    m.mean = s1 / s0;
    m.variance = s2 / s0 - m.mean * m.mean;
  }
  return m;
}

}  // namespace

GridPosterior grid_posterior_lambda(double prior_m, double prior_w2, dglm::Family family,
                                    double y, double V, const GridSpec& spec) {
  if (!(prior_w2 > 0.0)) throw DomainError("prior variance must be positive");
  if (family == dglm::Family::LogNormal && !(V > 0.0))
    throw DomainError("log-scale variance must be positive");
  if (family == dglm::Family::Poisson && !(y >= 0.0))
    throw DomainError("Poisson count must be nonnegative");
  if (family == dglm::Family::LogNormal && !(y > 0.0))
    throw DomainError("log-normal observation must be positive");

  const double w = std::sqrt(prior_w2);
  const auto logq = [&](double lambda) {
    if (lambda <= 0.0) return -std::numeric_limits<double>::infinity();
    const double lp = -0.5 * (lambda - prior_m) * (lambda - prior_m) / prior_w2;
    return lp + log_likelihood(family, y, V, lambda);
  };

  // Starting window: intersect prior and likelihood coverage; fall back to
  // the hull when they do not overlap.
  double p_lo = std::max(0.0, prior_m - 10.0 * w), p_hi = prior_m + 10.0 * w;
  double l_lo = 0.0, l_hi = 0.0;
  if (family == dglm::Family::Poisson) {
    const double sd = std::sqrt(y + 1.0);
    l_lo = std::max(0.0, y - 14.0 * sd - 5.0);
    l_hi = y + 14.0 * sd + 40.0;
  } else {
    const double s = std::sqrt(V);
    l_lo = y * std::exp(-12.0 * s);
    l_hi = y * std::exp(12.0 * s);
  }
  double lo = std::max(p_lo, l_lo), hi = std::min(p_hi, l_hi);
  if (!(hi > lo)) {
    lo = std::max(0.0, std::min(p_lo, l_lo));
    hi = std::max(p_hi, l_hi);
  }
  if (lo == 0.0) lo = std::min(1e-12, hi * 1e-15);

  // Widen until the posterior is negligible at both edges.
  constexpr double kEdgeTol = 1e-13;
  double edge_lo = 0.0, edge_hi = 0.0;
  for (int attempt = 0; attempt < 12; ++attempt) {
    const int scan = 4096;
    double max_lq = -std::numeric_limits<double>::infinity();
    for (int i = 0; i <= scan; ++i)
      max_lq = std::max(max_lq, logq(lo + (hi - lo) * i / scan));
    edge_lo = std::exp(std::min(logq(lo) - max_lq, 0.0));
    edge_hi = std::exp(std::min(logq(hi) - max_lq, 0.0));
    const bool lo_bad = edge_lo > kEdgeTol && lo > 1e-12;
    const bool hi_bad = edge_hi > kEdgeTol;
    if (!lo_bad && !hi_bad) break;
    const double width = hi - lo;
    if (lo_bad) lo = std::max(std::min(1e-12, hi * 1e-15), lo - 0.75 * width);
    if (hi_bad) hi += 0.75 * width;
  }
  if (edge_hi > 1e-7 || (edge_lo > 1e-7 && lo > 1e-12))
    throw AccuracyError("grid_posterior_lambda: posterior mass not covered by grid");

  GridPosterior out;
  int n = std::max(64, spec.initial_points - 1);
  if (n % 2) ++n;
  Moments prev = simpson_moments(logq, lo, hi, n);
  while (2 * n <= spec.max_points) {
    n *= 2;
    const Moments cur = simpson_moments(logq, lo, hi, n);
    const bool mean_ok =
        std::abs(cur.mean - prev.mean) <= spec.moment_tol * std::max(1.0, std::abs(cur.mean));
    const bool var_ok = std::abs(cur.variance - prev.variance) <=
                        spec.moment_tol * std::max(1.0, cur.variance);
    prev = cur;
    if (mean_ok && var_ok) break;
  }
  if (!(prev.mass > 0.0))
    throw AccuracyError("grid_posterior_lambda: zero posterior mass on grid");

  simpson_moments(logq, lo, hi, n, &out.grid, &out.density);
  // Normalize the stored table to unit trapezoid mass.
  double trap = 0.0;
  for (int i = 0; i + 1 <= n; ++i)
    trap += 0.5 * (out.density[i] + out.density[i + 1]) * (out.grid[i + 1] - out.grid[i]);
  out.density /= trap;
  out.mean = prev.mean;
  out.variance = prev.variance;
  out.mass_covered = 1.0 - std::min(1.0, edge_lo + edge_hi);
  out.prior_mass_truncated = 0.5 * std::erfc(prior_m / (w * std::sqrt(2.0)));
  return out;
}

}  // namespace dynbn::oracle
