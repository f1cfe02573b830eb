// Evaluate the exponential potentials and their exact one-ball drift on a
// hand-picked gap vector, and check the drift bounds.

#include <cstdio>

#include "ballast/potential.hpp"

int main() {
  const auto spec = ballast::ProcessSpec::greedy(2.0);
  const auto params = ballast::PotentialParams::derive(spec);
  std::printf("alpha = %.6f  epsilon = %.6f\n", params.alpha, params.epsilon);

  std::vector<double> x{4, 2, 1, 0, 0, 0, -1, -1, -1, -1, -1, -1, -1, 0, 0, 0};
  std::sort(x.begin(), x.end(), std::greater<double>());

  const auto rep = ballast::potentials(x, params);
  std::printf("phi = %.8f  psi = %.8f  gamma = %.8f\n", rep.phi, rep.psi, rep.gamma);

  const auto verdict = ballast::check_drift_lemmas(x, spec, params);
  std::printf("drift(phi) = %.3e (growth cap %s)\n", verdict.drift_phi,
              verdict.phi_growth_ok ? "ok" : "VIOLATED");
  std::printf("drift(psi) = %.3e (growth cap %s)\n", verdict.drift_psi,
              verdict.psi_growth_ok ? "ok" : "VIOLATED");
  std::printf("decrease conditions: phi %s, psi %s\n",
              verdict.phi_decrease_applicable ? (verdict.phi_decrease_ok ? "pass" : "FAIL")
                                              : "skipped",
              verdict.psi_decrease_applicable ? (verdict.psi_decrease_ok ? "pass" : "FAIL")
                                              : "skipped");
  return verdict.all_passed() ? 0 : 1;
}
