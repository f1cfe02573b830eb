// Minimal usage: throw m balls with two choices and print how the gap
// stabilizes while one-choice diverges.

#include <cstdio>

#include "ballast/process.hpp"

int main() {
  const int n = 1024;
  const int trials = 20;
  for (double d : {1.0, 2.0}) {
    const auto spec = d == 1.0 ? ballast::ProcessSpec::one_choice()
                               : ballast::ProcessSpec::greedy(d);
    std::printf("d = %.0f\n", d);
    for (std::int64_t m : {1 << 14, 1 << 17, 1 << 20}) {
      double mean = 0.0;
      for (int t = 0; t < trials; ++t) {
        auto rng = ballast::make_trial_rng(42, static_cast<std::uint64_t>(t));
        mean += ballast::gap(ballast::run(spec, n, m, rng));
      }
      std::printf("  m = %8lld  mean gap = %.3f\n", static_cast<long long>(m),
                  mean / trials);
    }
  }
  return 0;
}
