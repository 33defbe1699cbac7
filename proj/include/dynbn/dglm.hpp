#ifndef DYNBN_DGLM_HPP
#define DYNBN_DGLM_HPP

#include <string>
#include <utility>

#include "dynbn/gauss.hpp"

namespace dynbn::dglm {

enum class Family { Normal, Poisson, LogNormal };

std::string family_name(Family f);

/// Sampling model for one observation: an identity link from the Gaussian
/// linear combination lambda to the sampling parameter, plus the family of
/// Y given that parameter.  V is the Normal observation variance or the
/// log-scale variance of the LogNormal family; unused for Poisson.
struct ObservationModel {
  Family family = Family::Normal;
  double V = 1.0;
  std::string link = "identity";  // extension point; only identity updates exist
  int clique_index = 0;
  gauss::DesignVector design;
};

/// Moment-matched posterior for lambda after one observation.
struct DglmPosterior {
  double m_star = 0.0;
  double w2_star = 0.0;
  double gain = 0.0;  // adaptive coefficient A in [0, 1]
};

/// Exact conjugate Normal update:
///   A = w^2/(w^2+V),  m* = (1-A)m + Ay,  w*^2 = AV.
DglmPosterior update_normal(double m, double w2, double y, double V);

/// Gamma(alpha, beta) with mean m and variance w^2:
///   alpha = m^2/w^2, beta = m/w^2.  Requires m > 0.
std::pair<double, double> moment_match_gamma(double m, double w2);

/// Poisson count through the moment-matched Gamma:
///   A = w^2/(w^2+m),  m* = (1-A)m + Ay,  w*^2 = A m*.
/// Equals the Gamma(alpha+y, beta+1) posterior mean and variance exactly.
DglmPosterior update_poisson(double m, double w2, double y);

/// Log-normal with mean m and variance w^2: returns (a, b) with
///   b = log(1 + w^2/m^2), a = log(m) - b/2.
std::pair<double, double> moment_match_lognormal(double m, double w2);

/// Log-normal observation with log-scale variance V:
///   A = [log(m^2+w^2) - log m^2] / [log(m^2+w^2) - log m^2 + V],
///   m* = m^(1-A) y^A,  w*^2 = (e^{AV} - 1) m*^2.
DglmPosterior update_lognormal(double m, double w2, double y, double V);

/// Dispatch on the model family; rejects non-identity links.
DglmPosterior update(const ObservationModel& model, double m, double w2, double y);

}  // namespace dynbn::dglm

#endif  // DYNBN_DGLM_HPP
