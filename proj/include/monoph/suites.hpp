#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "monoph/integrator.hpp"
#include "monoph/ocp.hpp"

namespace monoph {

struct CheckResult {
  std::string label;
  double worst = 0.0;  // worst observed value (slack, violation, residual...)
  double tol = 0.0;    // pass threshold on `worst` (sign convention per check)
  bool pass = false;
  int samples = 0;     // sampled-certificate size, 0 for analytic checks
};

struct SuiteResult {
  std::string name;
  std::vector<CheckResult> checks;
  double seconds = 0.0;
  bool pass() const;
};

// Exactness suite: discrete adjointness, skew power neutrality, firm
// nonexpansiveness of the box projection, Moreau decomposition, plant energy
// neutrality.  `break_adjoint` swaps in the unweighted transpose as a
// negative control.
SuiteResult run_structural_suite(const OcpSpec& spec, std::uint64_t seed,
                                 bool break_adjoint = false);

// Sampled (relative) monotonicity of the four assembled flows.  Pairwise
// certificates use a linear monotone plant for the unconstrained closed
// loop; the energy-conserving benchmark plant is certified relative to 0.
SuiteResult run_monotonicity_suite(const OcpSpec& spec, std::uint64_t seed);

// Shifted passivity along integrated trajectories plus the two dissipation
// identities (plain and shifted) checked against centered differences of the
// recorded energies within 10x the local error estimate.
SuiteResult run_passivity_suite(const OcpSpec& spec, std::uint64_t seed);

// RK4 order factor, implicit-Euler per-step nonexpansiveness, step-bound and
// decay-rate estimators.
SuiteResult run_integrator_suite(const OcpSpec& spec, std::uint64_t seed);

// Dispatch by name ("structural", "monotonicity", "passivity", "integrator");
// per-suite seeds are derived from the master seed.
std::vector<SuiteResult> run_suites(const std::vector<std::string>& names, const OcpSpec& spec,
                                    std::uint64_t seed, bool break_adjoint = false);

void print_suite(const SuiteResult& suite, std::ostream& os);

// Tolerance for a centered-difference check of channel-vs-energy identities:
// 10x the local error estimated from third differences plus the roundoff
// floor of the differencing itself.
std::vector<double> centered_difference_tolerance(const std::vector<double>& times,
                                                  const std::vector<double>& energy,
                                                  double factor = 10.0);

}  // namespace monoph
