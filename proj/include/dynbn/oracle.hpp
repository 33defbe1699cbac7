#ifndef DYNBN_ORACLE_HPP
#define DYNBN_ORACLE_HPP

#include <Eigen/Dense>
#include <utility>

#include "dynbn/dglm.hpp"

namespace dynbn::oracle {

/// Tabulated 1-D posterior with quadrature moments.
struct GridPosterior {
  Eigen::VectorXd grid;     // strictly increasing
  Eigen::VectorXd density;  // normalized to unit trapezoid mass
  double mean = 0.0;
  double variance = 0.0;
  double mass_covered = 1.0;
  /// Prior probability of the region killed by the likelihood support
  /// (lambda <= 0 for count and positive-only observation families).
  double prior_mass_truncated = 0.0;
};

/// Exact conditioning of a dense joint Gaussian on a batch of linear-Gaussian
/// observations y_k = f_k' theta + noise, noise ~ N(0, V_k).
std::pair<Eigen::VectorXd, Eigen::MatrixXd> dense_condition(
    const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
    const std::vector<Eigen::VectorXd>& design_rows, const std::vector<double>& observed,
    const std::vector<double>& noise_variances);

/// Dense analogue of the clique-level lambda conditioning: impose the
/// Gaussian posterior (m*, w*^2) on lambda = f' theta over the full joint.
std::pair<Eigen::VectorXd, Eigen::MatrixXd> dense_lambda_condition(
    const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, const Eigen::VectorXd& f,
    double m_star, double w2_star);

struct GridSpec {
  int initial_points = 4097;
  int max_points = 1 << 21;
  double moment_tol = 1e-8;
};

/// Ground-truth lambda posterior on a grid: pointwise prior times likelihood,
/// normalized, with moments refined by grid doubling.  Families: Poisson
/// (V unused) and LogNormal with log-scale variance V.  The grid covers the
/// positive axis only; the prior mass on lambda <= 0 is annihilated by the
/// likelihood and reported as prior_mass_truncated.
GridPosterior grid_posterior_lambda(double prior_m, double prior_w2, dglm::Family family,
                                    double y, double V = 1.0, const GridSpec& spec = {});

}  // namespace dynbn::oracle

#endif  // DYNBN_ORACLE_HPP
