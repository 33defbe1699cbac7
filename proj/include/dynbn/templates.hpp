#ifndef DYNBN_TEMPLATES_HPP
#define DYNBN_TEMPLATES_HPP

#include <cstdint>
#include <string>

#include "dynbn/filter.hpp"

namespace dynbn::templates {

/// Ten-step scalar random walk with Normal observations; reduces to a
/// textbook Kalman filter.
filter::Scenario kalman_chain(std::uint64_t seed);

/// Ten-step chain of puff-mass states observed through Poisson sensor
/// counts; each step carries the newest puff forward, so the junction trees
/// are two-variable chains.
filter::Scenario dispersal_chain(std::uint64_t seed);

/// Growing network: each step appends a fresh hub conditioned on the carried
/// frontier plus a leaf clique, with Normal observations on the new clique.
filter::Scenario growth(std::uint64_t seed);

/// Random Gaussian-only scenario used by the exactness suites: at most
/// `max_vars` scalar variables across at most `max_steps` steps, Normal
/// observations only.
filter::Scenario random_gaussian(std::uint64_t seed, int max_vars = 10, int max_steps = 3);

/// Dispatch by name: kalman-chain | dispersal-chain | growth.
filter::Scenario by_name(const std::string& name, std::uint64_t seed);

}  // namespace dynbn::templates

#endif  // DYNBN_TEMPLATES_HPP
