#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include <boost/math/distributions/beta.hpp>

#include "ballast/load_state.hpp"
#include "ballast/process.hpp"

namespace ballast {

// One gap observation: (checkpoint in balls, trial, gap, optional Gamma/n).
struct GapSample {
  std::int64_t balls = 0;
  int trial = 0;
  double gap = 0.0;
  double gamma_over_n = -1.0;  // < 0 when not recorded
};

// nu_i = fraction of bins at normalized load >= i, for integer levels
// i = 0 .. floor(gap). Monotone nonincreasing by construction.
inline std::vector<double> nu_fractions(const LoadState& s) {
  const double avg = average_load(s);
  const int levels = static_cast<int>(std::floor(std::max(0.0, gap(s)))) + 1;
  std::vector<double> nu(static_cast<std::size_t>(levels), 0.0);
  for (double load : s.loads) {
    const double h = load - avg;
    if (h < 0.0) continue;
    const int top = std::min(levels - 1, static_cast<int>(std::floor(h)));
    for (int i = 0; i <= top; ++i) nu[static_cast<std::size_t>(i)] += 1.0;
  }
  for (auto& v : nu) v /= static_cast<double>(s.n());
  return nu;
}

// Layered-induction schedule: beta_{i_L} = 1 / (8 L^{3/(d-1)}),
// beta_{i+1} = max(2 L beta_i^d, 2 c' ln n / n), stopping at
// i_H = i_L + ceil(ln ln n / ln d) where the floor has taken over.
struct BetaSchedule {
  double L = 0.0;
  int ell = 0;
  double c_prime = 0.0;
  int n = 0;
  double d = 2.0;
  int i_L = 0;
  int i_H = 0;
  double floor_value = 0.0;
  std::vector<double> beta;  // beta[i_L .. i_H], index k = i - i_L

  double at(int i) const { return beta.at(static_cast<std::size_t>(i - i_L)); }

  // For d = 2 the unfloored recurrence solves to
  //   log beta_{i_L + k} = log(2L) * (-3 * 2^k + (2^k - 1)).
  double closed_form_log(int k) const {
    const double p2k = std::pow(2.0, k);
    return std::log(2.0 * L) * (-3.0 * p2k + (p2k - 1.0));
  }
};

inline BetaSchedule beta_schedule(double L, int ell, double c_prime, int n, double d) {
  if (!(d > 1.0)) throw std::invalid_argument("beta_schedule: d must be > 1");
  if (!(ell >= 1) || !(L >= ell)) {
    throw std::invalid_argument("beta_schedule: need L >= ell >= 1");
  }
  if (!(L <= std::pow(static_cast<double>(n), 0.25))) {
    throw std::invalid_argument("beta_schedule: need L <= n^(1/4)");
  }
  if (!(c_prime > 0.0)) throw std::invalid_argument("beta_schedule: c' must be positive");
  BetaSchedule b;
  b.L = L;
  b.ell = ell;
  b.c_prime = c_prime;
  b.n = n;
  b.d = d;
  b.i_L = ell;
  const int steps = static_cast<int>(std::ceil(std::log(std::log(static_cast<double>(n))) /
                                               std::log(d)));
  b.i_H = b.i_L + std::max(1, steps);
  b.floor_value = 2.0 * c_prime * std::log(static_cast<double>(n)) / n;
  double cur = 1.0 / (8.0 * std::pow(L, 3.0 / (d - 1.0)));
  b.beta.push_back(cur);
  for (int i = b.i_L; i < b.i_H; ++i) {
    cur = std::max(2.0 * L * std::pow(cur, d), b.floor_value);
    b.beta.push_back(cur);
  }
  b.beta.back() = b.floor_value;  // snap: the recurrence has reached it by i_H
  return b;
}

// Two-phase run for the layered-induction bookkeeping. Phase one runs t chain
// steps (the existing balls are "black"); phase two throws nL fresh "red"
// balls. A red ball's height is the level it occupies at placement,
// re-normalized against the final average t + L; mu_i counts red balls at
// height >= i and nu_i is the fraction of bins at final normalized load >= i.
// Conditioned on G(t) < L the identity nu_i * n <= mu_i holds
// deterministically for every i >= 0: every black ball then sits strictly
// below the final average, so each bin counted by nu_i carries a red ball at
// its level (average + i). A violation is an implementation bug, not noise.
struct TwoPhaseResult {
  double gap_at_t = 0.0;
  bool applicable = false;  // G(t) < L
  std::vector<double> nu;        // levels 0..max
  std::vector<std::int64_t> mu;  // same levels
  int violations = 0;
};

inline TwoPhaseResult two_phase_experiment(const ProcessSpec& spec, int n, int t_steps,
                                           int L_steps, RngStream& rng) {
  if (!spec.weights.is_constant_one()) {
    throw std::invalid_argument("two_phase_experiment: requires unit weights");
  }
  if (t_steps < 0 || L_steps < 1) {
    throw std::invalid_argument("two_phase_experiment: need t >= 0, L >= 1");
  }
  LoadState s = LoadState::empty(n);
  for (int step = 0; step < t_steps; ++step) chain_step(s, spec, rng);

  TwoPhaseResult r;
  r.gap_at_t = gap(s);
  r.applicable = r.gap_at_t < static_cast<double>(L_steps);

  // red phase: level occupied at placement = receiving bin's load afterwards
  const std::int64_t red = static_cast<std::int64_t>(n) * L_steps;
  std::vector<std::int64_t> level_count;  // histogram over levels
  for (std::int64_t b = 0; b < red; ++b) {
    const int bin = place_ball(s, spec, rng);
    const auto level = static_cast<std::int64_t>(s.loads[static_cast<std::size_t>(bin)]);
    if (level >= static_cast<std::int64_t>(level_count.size())) {
      level_count.resize(static_cast<std::size_t>(level) + 1, 0);
    }
    ++level_count[static_cast<std::size_t>(level)];
  }

  const std::int64_t final_avg = t_steps + L_steps;  // integer for unit weights
  const auto max_level = static_cast<std::int64_t>(max_load(s));
  const std::int64_t top = std::max<std::int64_t>(0, max_level - final_avg);

  r.nu.assign(static_cast<std::size_t>(top) + 1, 0.0);
  r.mu.assign(static_cast<std::size_t>(top) + 1, 0);
  for (double load : s.loads) {
    const auto h = static_cast<std::int64_t>(load) - final_avg;
    for (std::int64_t i = 0; i <= std::min(h, top); ++i) {
      r.nu[static_cast<std::size_t>(i)] += 1.0;
    }
  }
  for (std::int64_t lvl = final_avg; lvl < static_cast<std::int64_t>(level_count.size());
       ++lvl) {
    const std::int64_t h = lvl - final_avg;  // red balls at height exactly h
    for (std::int64_t i = 0; i <= std::min(h, top); ++i) {
      r.mu[static_cast<std::size_t>(i)] += level_count[static_cast<std::size_t>(lvl)];
    }
  }
  if (r.applicable) {
    for (std::size_t i = 0; i < r.nu.size(); ++i) {
      if (r.nu[i] > static_cast<double>(r.mu[i])) ++r.violations;
    }
  }
  for (auto& v : r.nu) v /= static_cast<double>(n);
  return r;
}

// Pr[G >= k] with a 95% Clopper-Pearson interval.
struct TailEstimate {
  double estimate = 0.0;
  double lower = 0.0;
  double upper = 1.0;
  int successes = 0;
  int samples = 0;
};

inline TailEstimate empirical_tail(const std::vector<double>& gaps, double k);

inline TailEstimate empirical_tail(const std::vector<GapSample>& samples, double k) {
  std::vector<double> gaps;
  gaps.reserve(samples.size());
  for (const auto& s : samples) gaps.push_back(s.gap);
  return empirical_tail(gaps, k);
}

inline TailEstimate empirical_tail(const std::vector<double>& gaps, double k) {
  if (gaps.size() < 100) {
    throw std::invalid_argument("empirical_tail: need at least 100 samples");
  }
  const int n = static_cast<int>(gaps.size());
  int x = 0;
  for (double g : gaps) {
    if (g >= k) ++x;
  }
  TailEstimate t;
  t.successes = x;
  t.samples = n;
  t.estimate = static_cast<double>(x) / n;
  const double a = 0.05;
  if (x > 0) {
    t.lower = boost::math::quantile(boost::math::beta_distribution<double>(x, n - x + 1),
                                    a / 2.0);
  }
  if (x < n) {
    t.upper = boost::math::quantile(boost::math::beta_distribution<double>(x + 1, n - x),
                                    1.0 - a / 2.0);
  }
  return t;
}

// One-sided empirical-CDF dominance with a two-sided DKW band: passes iff
//   F_late(k) <= F_early(k) + 2 sqrt(ln(2/delta) / 2N)   for all k.
struct DominanceVerdict {
  bool pass = false;
  double band = 0.0;
  double worst_excess = 0.0;  // sup_k (F_late - F_early)
  double margin = 0.0;        // band - worst_excess
};

inline DominanceVerdict dominance_test(std::vector<double> early, std::vector<double> late,
                                       double delta = 0.01) {
  if (early.size() != late.size() || early.empty()) {
    throw std::invalid_argument("dominance_test: need equal nonempty sample counts");
  }
  if (!(delta > 0.0) || !(delta < 1.0)) {
    throw std::invalid_argument("dominance_test: delta must be in (0,1)");
  }
  const double n = static_cast<double>(early.size());
  std::sort(early.begin(), early.end());
  std::sort(late.begin(), late.end());
  double worst = -1.0;
  // the supremum of F_late - F_early is attained at sample points of `late`
  // (F_late jumps up) and just below points of `early` (F_early jumps up);
  // scanning both sets of evaluation points covers it
  const auto cdf = [n](const std::vector<double>& v, double k) {
    return static_cast<double>(std::upper_bound(v.begin(), v.end(), k) - v.begin()) / n;
  };
  for (double k : late) worst = std::max(worst, cdf(late, k) - cdf(early, k));
  for (double k : early) worst = std::max(worst, cdf(late, k) - cdf(early, k));
  DominanceVerdict v;
  v.band = 2.0 * std::sqrt(std::log(2.0 / delta) / (2.0 * n));
  v.worst_excess = worst;
  v.margin = v.band - worst;
  v.pass = worst <= v.band;
  return v;
}

// Growth base of the order-d Fibonacci sequence F(k) = sum_{j=1..d} F(k-j),
// obtained by iterating the consecutive-term ratio to 1e-12 stability.
// Lies in [phi, 2) and increases with d.
inline double fibonacci_base(int d) {
  if (d < 2) throw std::invalid_argument("fibonacci_base: d must be >= 2");
  std::vector<double> window(static_cast<std::size_t>(d), 0.0);
  window.back() = 1.0;
  double ratio = 2.0;
  for (int iter = 0; iter < 20000; ++iter) {
    double next = 0.0;
    for (double v : window) next += v;
    const double prev = window.back();
    window.erase(window.begin());
    window.push_back(next);
    const double r = next / prev;
    if (std::abs(r - ratio) < 1e-13 && iter > d) return r;
    ratio = r;
    if (next > 1e300) {  // renormalize to dodge overflow
      for (double& v : window) v /= next;
    }
  }
  return ratio;
}

// Per-group layer counts for Left[d]: fraction (of all n bins) of the k'th
// group's bins at normalized load >= j, indexed i = j*d + k. Nonincreasing
// in j for fixed k.
inline std::vector<double> left_layer_fractions(const LoadState& s, int d) {
  const int n = s.n();
  if (d < 2 || n % d != 0) {
    throw std::invalid_argument("left_layer_fractions: state is not a Left[d] layout");
  }
  const int group_size = n / d;
  const double avg = average_load(s);
  const int levels = static_cast<int>(std::floor(std::max(0.0, gap(s)))) + 1;
  std::vector<double> x(static_cast<std::size_t>(levels * d), 0.0);
  for (int bin = 0; bin < n; ++bin) {
    const int k = bin / group_size;
    const double h = s.loads[static_cast<std::size_t>(bin)] - avg;
    if (h < 0.0) continue;
    const int top = std::min(levels - 1, static_cast<int>(std::floor(h)));
    for (int j = 0; j <= top; ++j) x[static_cast<std::size_t>(j * d + k)] += 1.0;
  }
  for (auto& v : x) v /= static_cast<double>(n);
  return x;
}

// M_s: the smallest weight threshold whose upper tail falls below
// 1 / (s (ln ln n)^5). For discrete distributions this is the smallest
// support point whose strict upper tail meets the target; a target >= 1
// returns the distribution minimum.
inline double weight_quantile_M(const WeightDistribution& dist, double s, int n) {
  if (!(s > 0.0)) throw std::invalid_argument("weight_quantile_M: s must be positive");
  if (n < 16) throw std::invalid_argument("weight_quantile_M: n must be >= 16");
  const double loglog = std::log(std::log(static_cast<double>(n)));
  const double target = 1.0 / (s * std::pow(loglog, 5.0));
  if (target >= 1.0) return dist.min_support();
  if (dist.has_discrete_support()) {
    for (double v : dist.support()) {
      if (dist.tail_gt(v) <= target) return v;
    }
    return dist.support().back();
  }
  // exponential(1): Pr[W >= M] = e^{-M}
  return -std::log(target);
}

}  // namespace ballast
