#ifndef DYNBN_VERIFY_HPP
#define DYNBN_VERIFY_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace dynbn::verify {

struct PropertyResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

// One function per acceptance property.  Each is self-contained and
// deterministic; failures carry the offending numbers in `detail`.

PropertyResult gaussian_exactness();      // tree filtering == dense conditioning
PropertyResult dglm_conjugacy();          // Table-row identities on a grid
PropertyResult hellinger_closed_forms();  // closed forms vs quadrature + axioms
PropertyResult marginalization_laws();    // joint/margin equality and monotonicity
PropertyResult normal_gamma_audit();      // printed closed form vs quadrature trend
PropertyResult bound_behavior();          // posterior distortion bound at moderate counts
PropertyResult small_count_degradation(); // distortion grows at small counts
PropertyResult kalman_reduction();        // chain template == scalar Kalman recursion
PropertyResult dispersal_fixture();       // seeded Poisson chain end to end

/// Named suite runner: gaussian-exactness | dglm-conjugacy | hellinger |
/// bounds | dispersal.  Prints one pass/fail line per property; returns 0
/// when every property passes, 1 otherwise, 2 for an unknown suite name.
int run_suite(const std::string& name, std::ostream& out);

std::vector<std::string> suite_names();

}  // namespace dynbn::verify

#endif  // DYNBN_VERIFY_HPP
