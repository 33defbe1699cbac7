#include "dynbn/dglm.hpp"

#include <cmath>

#include "dynbn/errors.hpp"

namespace dynbn::dglm {

std::string family_name(Family f) {
  switch (f) {
    case Family::Normal: return "normal";
    case Family::Poisson: return "poisson";
    case Family::LogNormal: return "lognormal";
  }
  return "unknown";
}

namespace {

void require_positive(double v, const char* what) {
  if (!(v > 0.0)) throw DomainError(std::string(what) + " must be positive");
}

}  // namespace

DglmPosterior update_normal(double m, double w2, double y, double V) {
  require_positive(w2, "prior variance w2");
  require_positive(V, "observation variance V");
  const double a = w2 / (w2 + V);
  return {(1.0 - a) * m + a * y, a * V, a};
}

std::pair<double, double> moment_match_gamma(double m, double w2) {
  require_positive(w2, "prior variance w2");
  if (!(m > 0.0))
    throw DomainError("Gamma moment match requires a positive mean");
  return {m * m / w2, m / w2};
}

DglmPosterior update_poisson(double m, double w2, double y) {
  moment_match_gamma(m, w2);  // domain gate
  if (!(y >= 0.0))
    throw DomainError("Poisson count must be nonnegative");
  const double a = w2 / (w2 + m);
  const double m_star = (1.0 - a) * m + a * y;
  return {m_star, a * m_star, a};
}

std::pair<double, double> moment_match_lognormal(double m, double w2) {
  require_positive(w2, "prior variance w2");
  if (!(m > 0.0))
    throw DomainError("log-normal moment match requires a positive mean");
  const double b = std::log1p(w2 / (m * m));
  return {std::log(m) - 0.5 * b, b};
}

DglmPosterior update_lognormal(double m, double w2, double y, double V) {
  moment_match_lognormal(m, w2);  // domain gate
  require_positive(V, "log-scale variance V");
  if (!(y > 0.0))
    throw DomainError("log-normal observation must be positive");
  const double b = std::log1p(w2 / (m * m));  // log(m^2+w^2) - log(m^2)
  const double a = b / (b + V);
  const double m_star = std::pow(m, 1.0 - a) * std::pow(y, a);
  const double w2_star = std::expm1(a * V) * m_star * m_star;
  return {m_star, w2_star, a};
}

DglmPosterior update(const ObservationModel& model, double m, double w2, double y) {
  if (model.link != "identity")
    throw DomainError("link '" + model.link + "' is not implemented (identity only)");
  switch (model.family) {
    case Family::Normal: return update_normal(m, w2, y, model.V);
    case Family::Poisson: return update_poisson(m, w2, y);
    case Family::LogNormal: return update_lognormal(m, w2, y, model.V);
  }
  throw DomainError("unknown observation family");
}

}  // namespace dynbn::dglm
