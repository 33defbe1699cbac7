// Acceptance suite: one line per criterion, nonzero exit on any failure.
#include <cstdio>
#include <iostream>
#include <vector>

#include "dynbn/verify.hpp"

int main() {
  using dynbn::verify::PropertyResult;
  struct Criterion {
    int number;
    const char* title;
    PropertyResult (*fn)();
  };
  const std::vector<Criterion> criteria = {
      {1, "Gaussian exactness vs dense conditioning", &dynbn::verify::gaussian_exactness},
      {2, "DGLM conjugacy identities", &dynbn::verify::dglm_conjugacy},
      {3, "Hellinger closed forms vs quadrature", &dynbn::verify::hellinger_closed_forms},
      {4, "Marginalization laws", &dynbn::verify::marginalization_laws},
      {5, "Normal-gamma closed-form audit", &dynbn::verify::normal_gamma_audit},
      {6, "Posterior distortion bound behavior", &dynbn::verify::bound_behavior},
      {7, "Small-count degradation", &dynbn::verify::small_count_degradation},
      {8, "Kalman-chain reduction", &dynbn::verify::kalman_reduction},
      {9, "Dispersal-chain fixture", &dynbn::verify::dispersal_fixture},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    const PropertyResult r = c.fn();
    std::printf("%s criterion %d: %s — %s\n", r.pass ? "PASS" : "FAIL", c.number, c.title,
                r.detail.c_str());
    std::fflush(stdout);
    if (!r.pass) ++failures;
  }
  if (failures > 0) std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
