#include "dynbn/divergence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "dynbn/dglm.hpp"
#include "dynbn/errors.hpp"

namespace dynbn::divergence {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double clamp01(double x) { return std::min(1.0, std::max(0.0, x)); }

// Simpson's rule with n even intervals.
template <typename F>
double simpson(const F& f, double lo, double hi, int n) {
  const double h = (hi - lo) / n;
  double sum = f(lo) + f(hi);
  for (int i = 1; i < n; ++i) sum += f(lo + i * h) * (i % 2 ? 4.0 : 2.0);
  return sum * h / 3.0;
}

template <typename F>
QuadratureResult refine_simpson(const F& f, double lo, double hi,
                                const QuadratureSpec& spec) {
  QuadratureResult res;
  if (!(hi > lo)) return res;  // zero-width range integrates to zero
  int n = std::max(4, spec.initial_intervals);
  double prev = simpson(f, lo, hi, n);
  while (2 * n <= spec.max_intervals) {
    n *= 2;
    const double cur = simpson(f, lo, hi, n);
    if (std::abs(cur - prev) < spec.tol) {
      res.value = cur;
      res.converged = true;
      res.intervals = n;
      return res;
    }
    prev = cur;
  }
  res.value = prev;
  res.converged = false;
  res.intervals = n;
  return res;
}

double support_lo(const Density1D& d) {
  switch (d.kind()) {
    case Density1D::Kind::Normal: return -kInf;
    case Density1D::Kind::Gamma:
    case Density1D::Kind::LogNormal: return 0.0;
    case Density1D::Kind::Tabulated: return d.grid()[0];
  }
  return -kInf;
}

std::pair<double, double> integration_range(const Density1D& f, const Density1D& h,
                                            const QuadratureSpec& spec,
                                            bool intersect_supports) {
  double lo, hi;
  if (spec.lo < spec.hi) {
    lo = spec.lo;
    hi = spec.hi;
  } else {
    const auto [flo, fhi] = f.coverage_interval();
    const auto [hlo, hhi] = h.coverage_interval();
    lo = std::min(flo, hlo);
    hi = std::max(fhi, hhi);
  }
  const double slo = intersect_supports ? std::max(support_lo(f), support_lo(h))
                                        : std::min(support_lo(f), support_lo(h));
  if (std::isfinite(slo)) lo = std::max(lo, slo);
  return {lo, hi};
}

double trapezoid_mass(const Eigen::VectorXd& grid, const Eigen::VectorXd& values) {
  double mass = 0.0;
  for (int i = 0; i + 1 < grid.size(); ++i)
    mass += 0.5 * (values[i] + values[i + 1]) * (grid[i + 1] - grid[i]);
  return mass;
}

// Gaussian squared-density integral: int N(x; mu, s2)^2 dx = 1/(2 s sqrt(pi)).
double l2_norm_normal(double s2) {
  return std::sqrt(1.0 / (2.0 * std::sqrt(s2) * std::sqrt(M_PI)));
}

// int N(x; a, va) N(x; b, vb) dx.
double gaussian_overlap(double a, double va, double b, double vb) {
  const double v = va + vb;
  return std::exp(-0.5 * (a - b) * (a - b) / v) / std::sqrt(2.0 * M_PI * v);
}

}  // namespace

Density1D Density1D::normal(double mu, double s2) {
  if (!(s2 > 0.0)) throw DomainError("normal density requires positive variance");
  Density1D d;
  d.kind_ = Kind::Normal;
  d.p1_ = mu;
  d.p2_ = s2;
  return d;
}

Density1D Density1D::gamma(double alpha, double beta) {
  if (!(alpha > 0.0) || !(beta > 0.0))
    throw DomainError("gamma density requires positive shape and rate");
  Density1D d;
  d.kind_ = Kind::Gamma;
  d.p1_ = alpha;
  d.p2_ = beta;
  return d;
}

Density1D Density1D::lognormal(double log_mean, double log_var) {
  if (!(log_var > 0.0)) throw DomainError("log-normal density requires positive log variance");
  Density1D d;
  d.kind_ = Kind::LogNormal;
  d.p1_ = log_mean;
  d.p2_ = log_var;
  return d;
}

Density1D Density1D::tabulated(Eigen::VectorXd grid, Eigen::VectorXd values) {
  if (grid.size() != values.size() || grid.size() < 2)
    throw DomainError("tabulated density needs matching grid and values, length >= 2");
  for (int i = 0; i + 1 < grid.size(); ++i)
    if (!(grid[i + 1] > grid[i])) throw DomainError("tabulated grid must be strictly increasing");
  if (values.minCoeff() < 0.0) throw DomainError("tabulated density values must be nonnegative");
  const double mass = trapezoid_mass(grid, values);
  if (!(mass > 0.0)) throw DomainError("tabulated density has zero mass");
  Density1D d;
  d.kind_ = Kind::Tabulated;
  d.grid_ = std::move(grid);
  d.values_ = values / mass;
  return d;
}

double Density1D::log_pdf(double x) const {
  switch (kind_) {
    case Kind::Normal:
      return -0.5 * std::log(2.0 * M_PI * p2_) - (x - p1_) * (x - p1_) / (2.0 * p2_);
    case Kind::Gamma: {
      if (x < 0.0) return -kInf;
      if (x == 0.0) {
        if (p1_ > 1.0) return -kInf;
        if (p1_ == 1.0) return std::log(p2_);
        return kInf;  // integrable singularity
      }
      return p1_ * std::log(p2_) - std::lgamma(p1_) + (p1_ - 1.0) * std::log(x) - p2_ * x;
    }
    case Kind::LogNormal: {
      if (x <= 0.0) return -kInf;
      const double lx = std::log(x);
      return -lx - 0.5 * std::log(2.0 * M_PI * p2_) - (lx - p1_) * (lx - p1_) / (2.0 * p2_);
    }
    case Kind::Tabulated: {
      if (x < grid_[0] || x > grid_[grid_.size() - 1]) return -kInf;
      // binary search for the containing cell
      int lo = 0, hi = static_cast<int>(grid_.size()) - 1;
      while (hi - lo > 1) {
        const int mid = (lo + hi) / 2;
        (grid_[mid] <= x ? lo : hi) = mid;
      }
      const double t = (x - grid_[lo]) / (grid_[hi] - grid_[lo]);
      const double v = (1.0 - t) * values_[lo] + t * values_[hi];
      return v > 0.0 ? std::log(v) : -kInf;
    }
  }
  return -kInf;
}

double Density1D::pdf(double x) const {
  const double l = log_pdf(x);
  return std::isfinite(l) ? std::exp(l) : (l > 0.0 ? kInf : 0.0);
}

std::pair<double, double> Density1D::coverage_interval() const {
  switch (kind_) {
    case Kind::Normal: {
      const double s = std::sqrt(p2_);
      return {p1_ - 8.0 * s, p1_ + 8.0 * s};
    }
    case Kind::Gamma: {
      const double mean = p1_ / p2_;
      const double sd = std::sqrt(p1_) / p2_;
      const double lo = p1_ >= 1.0 ? 0.0 : 1e-12;
      return {lo, mean + 20.0 * sd + 40.0 / p2_};
    }
    case Kind::LogNormal: {
      const double s = std::sqrt(p2_);
      return {std::exp(p1_ - 8.0 * s), std::exp(p1_ + 8.0 * s)};
    }
    case Kind::Tabulated:
      return {grid_[0], grid_[grid_.size() - 1]};
  }
  return {0.0, 0.0};
}

double hellinger_normal_normal(double mu1, double s1sq, double mu2, double s2sq) {
  if (!(s1sq > 0.0) || !(s2sq > 0.0))
    throw DomainError("hellinger_normal_normal requires positive variances");
  if (mu1 == mu2 && s1sq == s2sq) return 0.0;
  const double vsum = s1sq + s2sq;
  const double i2 = (2.0 * std::sqrt(s1sq) * std::sqrt(s2sq) / vsum) *
                    std::exp(-0.5 * (mu1 - mu2) * (mu1 - mu2) / vsum);
  const double affinity = std::sqrt(i2);
  return std::sqrt(clamp01(1.0 - affinity));
}

double hellinger_mvn(const Eigen::VectorXd& mu1, const Eigen::MatrixXd& sigma1,
                     const Eigen::VectorXd& mu2, const Eigen::MatrixXd& sigma2) {
  const auto logdet_pd = [](const Eigen::MatrixXd& m, const char* what) {
    Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (m + m.transpose()));
    if (llt.info() != Eigen::Success)
      throw DomainError(std::string(what) + " covariance is not positive definite");
    double ld = 0.0;
    for (int i = 0; i < m.rows(); ++i) ld += 2.0 * std::log(llt.matrixL()(i, i));
    return ld;
  };
  if (mu1.size() != mu2.size() || sigma1.rows() != mu1.size() || sigma2.rows() != mu2.size())
    throw DomainError("hellinger_mvn dimension mismatch");

  const Eigen::MatrixXd mid = 0.5 * (sigma1 + sigma2);
  const double ld1 = logdet_pd(sigma1, "first");
  const double ld2 = logdet_pd(sigma2, "second");
  const double ldm = logdet_pd(mid, "averaged");
  Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (mid + mid.transpose()));
  const Eigen::VectorXd d = mu1 - mu2;
  const Eigen::VectorXd z = llt.matrixL().solve(d);
  const double log_bc = 0.25 * ld1 + 0.25 * ld2 - 0.5 * ldm - 0.125 * z.squaredNorm();
  return std::sqrt(clamp01(1.0 - std::exp(log_bc)));
}

std::pair<double, double> variation_bounds(double dH) {
  if (dH < 0.0 || dH > 1.0) throw DomainError("Hellinger distance must lie in [0,1]");
  return {clamp01(dH * dH), clamp01(std::sqrt(2.0) * dH)};
}

QuadratureResult quadrature_hellinger(const Density1D& f, const Density1D& h,
                                      const QuadratureSpec& spec) {
  // A shared tabulated grid is its own integration rule.  The squared-root
  // difference form 1/2 int (sqrt f - sqrt h)^2 avoids the cancellation of
  // 1 - int sqrt(fh) near zero, so d_H(f, f) is exactly zero.
  if (f.kind() == Density1D::Kind::Tabulated && h.kind() == Density1D::Kind::Tabulated &&
      f.grid().size() == h.grid().size() && (f.grid().array() == h.grid().array()).all()) {
    const Eigen::VectorXd diff =
        (f.values().array().sqrt() - h.values().array().sqrt()).square();
    QuadratureResult res;
    res.value = std::sqrt(clamp01(0.5 * trapezoid_mass(f.grid(), diff)));
    res.intervals = static_cast<int>(f.grid().size()) - 1;
    return res;
  }

  const auto [lo, hi] = integration_range(f, h, spec, /*intersect_supports=*/true);
  const auto integrand = [&](double x) {
    const double l = f.log_pdf(x) + h.log_pdf(x);
    return std::isfinite(l) ? std::exp(0.5 * l) : 0.0;
  };
  QuadratureResult res = refine_simpson(integrand, lo, hi, spec);
  res.value = std::sqrt(clamp01(1.0 - res.value));
  return res;
}

QuadratureResult variation_quadrature(const Density1D& f, const Density1D& h,
                                      const QuadratureSpec& spec) {
  if (f.kind() == Density1D::Kind::Tabulated && h.kind() == Density1D::Kind::Tabulated &&
      f.grid().size() == h.grid().size() && (f.grid().array() == h.grid().array()).all()) {
    const Eigen::VectorXd diff = (f.values() - h.values()).cwiseAbs();
    QuadratureResult res;
    res.value = clamp01(0.5 * trapezoid_mass(f.grid(), diff));
    res.intervals = static_cast<int>(f.grid().size()) - 1;
    return res;
  }

  const auto [lo, hi] = integration_range(f, h, spec, /*intersect_supports=*/false);
  const auto integrand = [&](double x) { return 0.5 * std::abs(f.pdf(x) - h.pdf(x)); };
  QuadratureResult res = refine_simpson(integrand, lo, hi, spec);
  res.value = clamp01(res.value);
  return res;
}

NormalGammaHellinger hellinger_normal_gamma(double mu, double s2) {
  if (!(mu > 0.0)) throw DomainError("hellinger_normal_gamma requires a positive mean");
  if (!(s2 > 0.0)) throw DomainError("hellinger_normal_gamma requires a positive variance");
  const double alpha = mu * mu / s2;
  const double beta = mu / s2;

  // Printed closed form, evaluated literally in log space; the tight
  // exponents are ambiguous in the source, so this value is reported for
  // audit and never trusted over the quadrature.
  const double log_i2 = -0.5 * std::log(2.0 * M_PI) + (alpha - 1.0) * std::log(2.0) +
                        std::log(alpha) / (2.0 * alpha) +
                        2.0 * std::lgamma(0.25 * (alpha + 1.0)) - std::lgamma(alpha) +
                        1.0 / (2.0 * alpha);
  NormalGammaHellinger out;
  const double affinity = std::exp(0.5 * log_i2);
  out.formula = std::sqrt(clamp01(1.0 - affinity));

  const QuadratureResult q =
      quadrature_hellinger(Density1D::normal(mu, s2), Density1D::gamma(alpha, beta));
  out.quadrature = q.value;
  out.quadrature_converged = q.converged;
  return out;
}

namespace {

// Family-independent part of the posterior-distortion report.  `l2` is the
// normalized likelihood with mean/variance and L2 norm supplied by the
// caller; `post` is the moment-matched Gaussian posterior of lambda.  When
// the implied Gaussian likelihood is known in closed form (the Normal
// family, where it is the observation density itself), the caller passes it
// to avoid round-trip arithmetic noise in the vanishing Hellinger terms.
ErrorBoundReport bound_pipeline(double m, double w2, const Density1D& l2,
                                double l2_mean, double l2_var, double c2,
                                const dglm::DglmPosterior& post,
                                const QuadratureSpec& spec,
                                std::optional<std::pair<double, double>> l1_exact = {}) {
  ErrorBoundReport rep;
  rep.posterior_m = post.m_star;
  rep.posterior_w2 = post.w2_star;
  rep.c0 = std::sqrt(1.0 / (2.0 * std::sqrt(w2) * std::sqrt(M_PI)));
  rep.c2 = c2;
  rep.c2_hat = l2_norm_normal(l2_var);

  const Density1D l2hat = Density1D::normal(l2_mean, l2_var);

  // Implied Gaussian likelihood: N(m*, w*^2) / N(m, w^2), defined only when
  // the update sharpened the belief.
  if (l1_exact) {
    rep.l1_defined = true;
    rep.l1_mean = l1_exact->first;
    rep.l1_var = l1_exact->second;
  } else {
    const double prec = 1.0 / post.w2_star - 1.0 / w2;
    rep.l1_defined = prec > 0.0;
    if (rep.l1_defined) {
      rep.l1_var = 1.0 / prec;
      rep.l1_mean = rep.l1_var * (post.m_star / post.w2_star - m / w2);
    }
  }

  // Hellinger terms of eps1.
  if (rep.l1_defined)
    rep.dh_l1_l2hat = hellinger_normal_normal(rep.l1_mean, rep.l1_var, l2_mean, l2_var);
  bool quads_ok = true;
  if (l2.kind() == Density1D::Kind::Normal) {
    rep.dh_l2hat_l2 =
        hellinger_normal_normal(l2.param1(), l2.param2(), l2_mean, l2_var);
    rep.dh_k2_sq = 0.0;
  } else {
    const QuadratureResult dq = quadrature_hellinger(l2, l2hat, spec);
    rep.dh_l2hat_l2 = dq.value;
    quads_ok = quads_ok && dq.converged;

    // Shape term of eps2: 1 - int(L2 L2hat)/(c2 c2hat).
    const auto cross = [&](double x) {
      const double l = l2.log_pdf(x) + l2hat.log_pdf(x);
      return std::isfinite(l) ? std::exp(l) : 0.0;
    };
    const auto [lo, hi] = integration_range(l2, l2hat, spec, true);
    const QuadratureResult cq = refine_simpson(cross, lo, hi, spec);
    quads_ok = quads_ok && cq.converged;
    rep.dh_k2_sq = clamp01(1.0 - cq.value / (rep.c2 * rep.c2_hat));
  }

  const double int_p0_l2hat = gaussian_overlap(m, w2, l2_mean, l2_var);
  double int_p0_l1 = 0.0;
  if (rep.l1_defined) {
    int_p0_l1 = gaussian_overlap(m, w2, rep.l1_mean, rep.l1_var);
    const double int_p0sq_l1 =
        (1.0 / (2.0 * std::sqrt(w2) * std::sqrt(M_PI))) *
        gaussian_overlap(m, 0.5 * w2, rep.l1_mean, rep.l1_var);
    const double int_p0sq_l1sq =
        (1.0 / (4.0 * M_PI * std::sqrt(w2) * std::sqrt(rep.l1_var))) *
        gaussian_overlap(m, 0.5 * w2, rep.l1_mean, 0.5 * rep.l1_var);
    rep.tau = std::sqrt(2.0 * int_p0sq_l1) / int_p0_l1;
    rep.tau_alt = std::sqrt(int_p0sq_l1sq) / int_p0_l1;
    rep.eps1 = std::sqrt(2.0) * rep.tau * (rep.dh_l1_l2hat + rep.dh_l2hat_l2);
  }
  rep.eps2 = rep.c0 * std::sqrt((rep.c2 - rep.c2_hat) * (rep.c2 - rep.c2_hat) +
                                2.0 * rep.c2 * rep.c2_hat * rep.dh_k2_sq);

  if (rep.l1_defined && int_p0_l1 > 0.0) {
    const double bracket = (int_p0_l2hat + rep.eps2) / int_p0_l1;
    rep.bound_raw = 1.0 - (1.0 - rep.eps1) / std::sqrt(bracket);
    rep.bound_applicable =
        quads_ok && rep.bound_raw >= 0.0 && rep.bound_raw <= 1.0;
    rep.bound = std::sqrt(clamp01(rep.bound_raw));
  }

  // Directly integrated distance between the true posterior p0*L2 and the
  // Gaussian N(m*, w*^2).
  if (l2.kind() == Density1D::Kind::Normal) {
    const double exact_prec = 1.0 / w2 + 1.0 / l2.param2();
    const double exact_var = 1.0 / exact_prec;
    const double exact_mean = exact_var * (m / w2 + l2.param1() / l2.param2());
    rep.quadrature_dH =
        hellinger_normal_normal(exact_mean, exact_var, post.m_star, post.w2_star);
  } else {
    const Density1D p0 = Density1D::normal(m, w2);
    const auto [plo, phi] = p0.coverage_interval();
    const auto [llo, lhi] = l2.coverage_interval();
    const double lo = std::max(0.0, std::min(plo, llo));
    const double hi = std::max(phi, lhi);
    const auto unnorm = [&](double x) {
      const double l = p0.log_pdf(x) + l2.log_pdf(x);
      return std::isfinite(l) ? std::exp(l) : 0.0;
    };
    const QuadratureResult zq = refine_simpson(unnorm, lo, hi, spec);
    const double z = zq.value;
    const Density1D approx = Density1D::normal(post.m_star, post.w2_star);
    const auto bc = [&](double x) {
      const double l = p0.log_pdf(x) + l2.log_pdf(x) - std::log(z) + approx.log_pdf(x);
      return std::isfinite(l) ? std::exp(0.5 * l) : 0.0;
    };
    const QuadratureResult bq = refine_simpson(bc, lo, hi, spec);
    rep.quadrature_dH = std::sqrt(clamp01(1.0 - bq.value));
    rep.quadrature_converged = zq.converged && bq.converged;
  }
  return rep;
}

}  // namespace

ErrorBoundReport error_bound(double prior_m, double prior_w2, long y,
                             const QuadratureSpec& spec) {
  if (!(prior_m > 0.0)) throw DomainError("error_bound requires a positive prior mean");
  if (!(prior_w2 > 0.0)) throw DomainError("error_bound requires a positive prior variance");
  if (y < 0) throw DomainError("Poisson count must be nonnegative");

  // Normalized Poisson likelihood in lambda is Gamma(y+1, 1).
  const double shape = static_cast<double>(y) + 1.0;
  const Density1D l2 = Density1D::gamma(shape, 1.0);
  const double c2 = std::exp(0.5 * (std::lgamma(2.0 * y + 1.0) - 2.0 * std::lgamma(shape) -
                                    (2.0 * y + 1.0) * std::log(2.0)));
  const dglm::DglmPosterior post =
      dglm::update_poisson(prior_m, prior_w2, static_cast<double>(y));
  return bound_pipeline(prior_m, prior_w2, l2, shape, shape, c2, post, spec);
}

ErrorBoundReport error_bound_normal(double prior_m, double prior_w2, double y, double V,
                                    const QuadratureSpec& spec) {
  if (!(prior_w2 > 0.0)) throw DomainError("error_bound requires a positive prior variance");
  if (!(V > 0.0)) throw DomainError("observation variance must be positive");
  const Density1D l2 = Density1D::normal(y, V);
  const dglm::DglmPosterior post = dglm::update_normal(prior_m, prior_w2, y, V);
  // The Gaussian likelihood the update applies is the observation density
  // itself, so L1 = L2_hat = L2 and every Hellinger term vanishes exactly.
  return bound_pipeline(prior_m, prior_w2, l2, y, V, l2_norm_normal(V), post, spec,
                        std::make_pair(y, V));
}

void compose_linear_conditional(double margin_mu, double margin_s2, double slope,
                                double intercept, double noise_var,
                                Eigen::VectorXd* mu, Eigen::MatrixXd* sigma) {
  mu->resize(2);
  sigma->resize(2, 2);
  (*mu)[0] = margin_mu;
  (*mu)[1] = slope * margin_mu + intercept;
  (*sigma)(0, 0) = margin_s2;
  (*sigma)(0, 1) = (*sigma)(1, 0) = slope * margin_s2;
  (*sigma)(1, 1) = slope * slope * margin_s2 + noise_var;
}

MarginalizationReport marginalization_checks(const std::vector<JointPair>& pairs) {
  MarginalizationReport rep;
  for (const auto& pair : pairs) {
    MarginalizationCheck check;
    check.dh_joint = hellinger_mvn(pair.mu1, pair.sigma1, pair.mu2, pair.sigma2);
    check.dh_margin = hellinger_normal_normal(pair.mu1[0], pair.sigma1(0, 0),
                                              pair.mu2[0], pair.sigma2(0, 0));
    if (pair.shared_conditional)
      check.equality_ok = std::abs(check.dh_joint - check.dh_margin) < 1e-6;
    check.monotonicity_ok = check.dh_joint >= check.dh_margin - 1e-9;
    rep.all_ok = rep.all_ok && check.equality_ok && check.monotonicity_ok;
    rep.checks.push_back(check);
  }
  return rep;
}

}  // namespace dynbn::divergence
