#ifndef DYNBN_DIVERGENCE_HPP
#define DYNBN_DIVERGENCE_HPP

#include <Eigen/Dense>
#include <utility>
#include <vector>

namespace dynbn::divergence {

/// One-dimensional density with enough structure for closed forms where they
/// exist and log-space evaluation everywhere else.
class Density1D {
 public:
  enum class Kind { Normal, Gamma, LogNormal, Tabulated };

  static Density1D normal(double mu, double s2);
  static Density1D gamma(double alpha, double beta);          // rate form
  static Density1D lognormal(double log_mean, double log_var);
  /// Values are renormalized to unit trapezoid mass; the grid must be
  /// strictly increasing and the values nonnegative.
  static Density1D tabulated(Eigen::VectorXd grid, Eigen::VectorXd values);

  Kind kind() const { return kind_; }
  double log_pdf(double x) const;  // -inf outside the support
  double pdf(double x) const;
  /// Interval carrying at least 1 - 1e-8 of the mass.
  std::pair<double, double> coverage_interval() const;

  double param1() const { return p1_; }  // mu / alpha / log-mean
  double param2() const { return p2_; }  // s2 / beta / log-var
  const Eigen::VectorXd& grid() const { return grid_; }
  const Eigen::VectorXd& values() const { return values_; }

 private:
  Density1D() = default;
  Kind kind_ = Kind::Normal;
  double p1_ = 0.0, p2_ = 1.0;
  Eigen::VectorXd grid_, values_;
};

/// Controls the composite-Simpson refinement used by the quadrature
/// distances: interval count doubles from `initial_intervals` until the
/// estimate moves by less than `tol` or `max_intervals` is reached.
struct QuadratureSpec {
  int initial_intervals = 1024;
  int max_intervals = 1 << 21;
  double tol = 1e-9;
  double lo = 0.0, hi = 0.0;  // explicit range when lo < hi
};

struct QuadratureResult {
  double value = 0.0;
  bool converged = true;  // false carries an accuracy warning to the caller
  int intervals = 0;
};

/// Hellinger distance between two normals from the closed-form affinity
///   I^2 = 2 s1 s2/(s1^2+s2^2) * exp(-(mu1-mu2)^2 / (2(s1^2+s2^2))),
/// d_H = sqrt(1 - I).
double hellinger_normal_normal(double mu1, double s1sq, double mu2, double s2sq);

/// Multivariate Gaussian Hellinger distance via the Bhattacharyya
/// coefficient; reduces to the 1-D closed form for scalars.
double hellinger_mvn(const Eigen::VectorXd& mu1, const Eigen::MatrixXd& sigma1,
                     const Eigen::VectorXd& mu2, const Eigen::MatrixXd& sigma2);

/// Printed closed form for a normal against its moment-matched gamma,
/// evaluated verbatim in log space, next to the quadrature value.  The
/// quadrature side is authoritative; the closed form is reported for audit.
struct NormalGammaHellinger {
  double formula = 0.0;
  double quadrature = 0.0;
  bool quadrature_converged = true;
};
NormalGammaHellinger hellinger_normal_gamma(double mu, double s2);

/// Sandwich (dH^2, sqrt(2) dH) for the variation distance, clamped to [0,1].
std::pair<double, double> variation_bounds(double dH);

QuadratureResult quadrature_hellinger(const Density1D& f, const Density1D& h,
                                      const QuadratureSpec& spec = {});

QuadratureResult variation_quadrature(const Density1D& f, const Density1D& h,
                                      const QuadratureSpec& spec = {});

/// Components of the posterior-distortion bound for one count observation:
/// the Gaussian prior p0 on lambda, the normalized true likelihood L2, its
/// moment-matched Gaussian L2_hat and the Gaussian likelihood L1 implied by
/// the moment-matched posterior.  `bound` limits the Hellinger distance
/// between the true and approximate posteriors when `bound_applicable`;
/// `quadrature_dH` is the directly integrated distance reported beside it.
struct ErrorBoundReport {
  double eps1 = 0.0;
  double eps2 = 0.0;
  double tau = 0.0;
  double tau_alt = 0.0;  // square-integrated alternative reading of tau
  double c0 = 0.0;
  double c2 = 0.0;
  double c2_hat = 0.0;
  double dh_l1_l2hat = 0.0;
  double dh_l2hat_l2 = 0.0;
  double dh_k2_sq = 0.0;  // shape term inside eps2
  double bound = 0.0;     // on d_H, in [0,1]
  double bound_raw = 0.0; // displayed right-hand side, bounds d_H^2
  bool bound_applicable = false;
  bool l1_defined = false;
  double l1_mean = 0.0, l1_var = 0.0;
  double quadrature_dH = 0.0;
  bool quadrature_converged = true;
  double posterior_m = 0.0, posterior_w2 = 0.0;  // moment-matched posterior
};

/// Poisson count y against Normal(prior_m, prior_w2) on lambda.
ErrorBoundReport error_bound(double prior_m, double prior_w2, long y,
                             const QuadratureSpec& spec = {});

/// Degenerate Gaussian-likelihood variant: L2 is Normal(y, V), so L1, L2_hat
/// and L2 coincide and every Hellinger component vanishes.
ErrorBoundReport error_bound_normal(double prior_m, double prior_w2, double y, double V,
                                    const QuadratureSpec& spec = {});

/// One bivariate Gaussian pair for the marginalization laws.  When
/// shared_conditional is set the pair was built from differing first margins
/// composed with one common linear-Gaussian conditional, so the joint and
/// margin distances must agree; the monotonicity inequality applies always.
struct JointPair {
  Eigen::VectorXd mu1, mu2;
  Eigen::MatrixXd sigma1, sigma2;
  bool shared_conditional = false;
};

struct MarginalizationCheck {
  double dh_joint = 0.0;
  double dh_margin = 0.0;  // first-coordinate margin
  bool equality_ok = true;      // only meaningful for shared-conditional pairs
  bool monotonicity_ok = true;  // dh_joint >= dh_margin - 1e-9
};

struct MarginalizationReport {
  std::vector<MarginalizationCheck> checks;
  bool all_ok = true;
};

MarginalizationReport marginalization_checks(const std::vector<JointPair>& pairs);

/// Joint over (X1, X2) with X2 | X1 ~ N(slope*X1 + intercept, noise_var);
/// used to build shared-conditional pairs.
void compose_linear_conditional(double margin_mu, double margin_s2, double slope,
                                double intercept, double noise_var,
                                Eigen::VectorXd* mu, Eigen::MatrixXd* sigma);

}  // namespace dynbn::divergence

#endif  // DYNBN_DIVERGENCE_HPP
