#ifndef DYNBN_SCENARIO_IO_HPP
#define DYNBN_SCENARIO_IO_HPP

#include <string>

#include "dynbn/filter.hpp"

namespace dynbn::io {

/// Strict JSON scenario codec.  Unknown keys are rejected so that typos fail
/// loudly instead of silently changing the model.
filter::Scenario scenario_from_json_text(const std::string& text);
std::string scenario_to_json_text(const filter::Scenario& scenario);

filter::Scenario load_scenario(const std::string& path);
void save_scenario(const filter::Scenario& scenario, const std::string& path);

/// Structural equality, used by the round-trip checks.
bool scenarios_equal(const filter::Scenario& a, const filter::Scenario& b);

/// Round-trip-safe decimal rendering (17 significant digits).
std::string format_double(double v);

}  // namespace dynbn::io

#endif  // DYNBN_SCENARIO_IO_HPP
