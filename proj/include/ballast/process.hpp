#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <optional>
#include <unordered_map>
#include <vector>

#include "ballast/load_state.hpp"
#include "ballast/rng.hpp"
#include "ballast/weights.hpp"

namespace ballast {

// Allocation rules.
//
//   OneChoice  - a single uniform bin.
//   Greedy     - a ball lands in one of the i heaviest bins with probability
//                (i/n)^d. Integer d is realized by sampling d uniform bins
//                (with replacement) and taking the least loaded; fractional d
//                by inverse-CDF sampling of the rank directly.
//   Left       - d groups of n/d bins, one uniform sample per group, least
//                loaded wins, ties to the leftmost group.
//
// Ties between equally loaded bins are resolved by one fixed total order:
// a bin is "less loaded" than another iff (load, index) is lexicographically
// smaller. The rank-i heaviest bin is position i counted from the top of
// that order, and the d-sample min uses the same order, which is exactly
// what makes the two Greedy realizations agree bin-by-bin.
enum class Rule { OneChoice, Greedy, Left };

struct ProcessSpec {
  Rule rule = Rule::OneChoice;
  double d = 1.0;
  WeightDistribution weights = WeightDistribution::constant_one();

  static ProcessSpec one_choice(WeightDistribution w = WeightDistribution::constant_one()) {
    return ProcessSpec{Rule::OneChoice, 1.0, std::move(w)};
  }

  static ProcessSpec greedy(double d, WeightDistribution w = WeightDistribution::constant_one()) {
    if (!(d >= 1.0)) throw std::invalid_argument("greedy: d must be >= 1");
    return ProcessSpec{Rule::Greedy, d, std::move(w)};
  }

  static ProcessSpec left(int d, WeightDistribution w = WeightDistribution::constant_one()) {
    if (d < 2) throw std::invalid_argument("left: d must be an integer >= 2");
    return ProcessSpec{Rule::Left, static_cast<double>(d), std::move(w)};
  }

  bool integral_d() const { return d == std::floor(d); }
};

// Pr[the i-th heaviest bin receives] = (i/n)^d - ((i-1)/n)^d, 1-based i.
inline double rank_probability(int i, int n, double d) {
  return std::pow(static_cast<double>(i) / n, d) -
         std::pow(static_cast<double>(i - 1) / n, d);
}

inline std::vector<double> rank_probabilities(int n, double d) {
  std::vector<double> p(static_cast<std::size_t>(n));
  double prev = 0.0;
  for (int i = 1; i <= n; ++i) {
    const double cur = std::pow(static_cast<double>(i) / n, d);
    p[static_cast<std::size_t>(i - 1)] = cur - prev;
    prev = cur;
  }
  return p;
}

// The bias margin of Greedy[d]: the largest e with
//   sum_{i >= 3n/4} p_i >= 1/4 + e   and   sum_{i <= n/4} p_i <= 1/4 - e
// for every n, namely min(3/4 - (3/4)^d, 1/4 - (1/4)^d). Requires d > 1.
inline double bias_epsilon(double d) {
  if (!(d > 1.0)) {
    throw std::invalid_argument("bias_epsilon: requires d > 1 (got d = " +
                                std::to_string(d) + ")");
  }
  const double hi = 0.75 - std::pow(0.75, d);
  const double lo = 0.25 - std::pow(0.25, d);
  return std::min(hi, lo);
}

// Inverse-CDF rank sampler: smallest i with u < (i/n)^d, so that
// ((i-1)/n)^d <= u < (i/n)^d and Pr[rank = i] = p_i.
inline int rank_sample(double d, int n, double u) {
  if (n < 1) throw std::invalid_argument("rank_sample: n must be >= 1");
  if (!(d >= 1.0)) throw std::invalid_argument("rank_sample: d must be >= 1");
  if (!(u >= 0.0) || !(u < 1.0)) throw std::invalid_argument("rank_sample: u must be in [0,1)");
  int i = static_cast<int>(std::ceil(n * std::pow(u, 1.0 / d)));
  i = std::clamp(i, 1, n);
  // pow round-off can land one step off the CDF bracket; nudge into it
  while (i < n && std::pow(static_cast<double>(i) / n, d) <= u) ++i;
  while (i > 1 && std::pow(static_cast<double>(i - 1) / n, d) > u) --i;
  return i;
}

namespace detail {

// less-loaded comparison under the fixed tie order
inline bool lighter(const LoadState& s, int a, int b) {
  const double la = s.loads[static_cast<std::size_t>(a)];
  const double lb = s.loads[static_cast<std::size_t>(b)];
  return la < lb || (la == lb && a < b);
}

}  // namespace detail

// The rank-i most-loaded bin (1-based rank) under the fixed tie order.
// O(n) selection; the long-run drivers below never call this per ball.
inline int rank_to_bin(const LoadState& s, int rank) {
  const int n = s.n();
  if (rank < 1 || rank > n) throw std::invalid_argument("rank_to_bin: rank out of range");
  std::vector<int> idx(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  // heaviest-first = reverse of the (load, index) order
  std::nth_element(idx.begin(), idx.begin() + (rank - 1), idx.end(),
                   [&](int a, int b) { return detail::lighter(s, b, a); });
  return idx[static_cast<std::size_t>(rank - 1)];
}

// Receiver among sampled candidates: least loaded, ties by lowest bin index.
// Same selection the d-sample placement performs incrementally.
inline int dmin_receiver(const LoadState& s, const std::vector<int>& candidates) {
  if (candidates.empty()) throw std::invalid_argument("dmin_receiver: no candidates");
  int best = candidates[0];
  for (std::size_t k = 1; k < candidates.size(); ++k) {
    if (detail::lighter(s, candidates[k], best)) best = candidates[k];
  }
  return best;
}

// Receiver among one candidate per group, groups ordered left to right:
// least loaded, ties to the leftmost group.
inline int left_receiver(const LoadState& s, const std::vector<int>& per_group) {
  if (per_group.empty()) throw std::invalid_argument("left_receiver: no candidates");
  int best = per_group[0];
  for (std::size_t g = 1; g < per_group.size(); ++g) {
    if (s.loads[static_cast<std::size_t>(per_group[g])] <
        s.loads[static_cast<std::size_t>(best)]) {
      best = per_group[g];
    }
  }
  return best;
}

// One ball via the rank characterization (Greedy or OneChoice).
// All placement functions return the receiving bin.
inline int place_ball_rank(LoadState& s, const ProcessSpec& spec, RngStream& rng) {
  if (spec.rule == Rule::Left) {
    throw std::invalid_argument("place_ball_rank: not defined for the Left process");
  }
  const double d = spec.rule == Rule::OneChoice ? 1.0 : spec.d;
  const int rank = rank_sample(d, s.n(), rng.uniform01());
  const int bin = rank_to_bin(s, rank);
  s.add(bin, spec.weights.draw(rng));
  return bin;
}

// One ball via d independent uniform samples, least loaded wins,
// ties by lowest bin index.
inline int place_ball_dmin(LoadState& s, int d, const WeightDistribution& weights,
                           RngStream& rng) {
  if (d < 1) throw std::invalid_argument("place_ball_dmin: d must be >= 1");
  const std::uint64_t n = static_cast<std::uint64_t>(s.n());
  int best = static_cast<int>(rng.uniform_index(n));
  for (int k = 1; k < d; ++k) {
    const int cand = static_cast<int>(rng.uniform_index(n));
    if (detail::lighter(s, cand, best)) best = cand;
  }
  s.add(best, weights.draw(rng));
  return best;
}

// One ball via one uniform sample per group of n/d bins, least loaded wins,
// ties to the leftmost group.
inline int place_ball_left(LoadState& s, int d, const WeightDistribution& weights,
                           RngStream& rng) {
  const int n = s.n();
  if (d < 2) throw std::invalid_argument("place_ball_left: d must be >= 2");
  if (n % d != 0) {
    throw std::invalid_argument("place_ball_left: n must be divisible by d");
  }
  const int group_size = n / d;
  int best = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(group_size)));
  for (int g = 1; g < d; ++g) {
    const int cand = g * group_size +
                     static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(group_size)));
    if (s.loads[static_cast<std::size_t>(cand)] < s.loads[static_cast<std::size_t>(best)]) {
      best = cand;
    }
  }
  s.add(best, weights.draw(rng));
  return best;
}

// Canonical single-ball step. Integer-d Greedy goes through the d-sample
// realization (d index draws per ball); fractional d through the rank
// sampler (one uniform per ball).
inline int place_ball(LoadState& s, const ProcessSpec& spec, RngStream& rng) {
  switch (spec.rule) {
    case Rule::OneChoice:
      return place_ball_dmin(s, 1, spec.weights, rng);
    case Rule::Greedy:
      if (spec.integral_d()) {
        return place_ball_dmin(s, static_cast<int>(spec.d), spec.weights, rng);
      }
      return place_ball_rank(s, spec, rng);
    case Rule::Left:
      return place_ball_left(s, static_cast<int>(spec.d), spec.weights, rng);
  }
  throw std::logic_error("unreachable");
}

// One chain step = n balls.
inline void chain_step(LoadState& s, const ProcessSpec& spec, RngStream& rng) {
  const int n = s.n();
  for (int i = 0; i < n; ++i) place_ball(s, spec, rng);
}

namespace detail {

// Sorted-multiset engine for long fractional-d runs: loads kept nonincreasing
// so the sampled rank maps straight to an array position. Integral weights
// update through a value -> block-start map (each unit step swaps to the
// front of its value block, O(1)); real weights re-insert by binary search.
// Which bin of an equal-load block receives is not tracked -- bins are
// exchangeable under Greedy, so every sorted-vector statistic is identical
// to the exact-tie-order path with the same draws.
class SortedLoadEngine {
 public:
  explicit SortedLoadEngine(int n, bool integral)
      : loads_(static_cast<std::size_t>(n), 0.0), integral_(integral) {
    if (integral_) block_start_[0.0] = 0;
  }

  void place_at_rank(int rank, double w) {
    int pos = rank - 1;
    if (integral_) {
      double v = loads_[static_cast<std::size_t>(pos)];
      const int steps = static_cast<int>(w);
      for (int k = 0; k < steps; ++k) {
        const int b = block_start_.at(v);
        loads_[static_cast<std::size_t>(pos)] = loads_[static_cast<std::size_t>(b)];
        loads_[static_cast<std::size_t>(b)] = v + 1.0;
        if (b + 1 < static_cast<int>(loads_.size()) &&
            loads_[static_cast<std::size_t>(b + 1)] == v) {
          block_start_[v] = b + 1;
        } else {
          block_start_.erase(v);
        }
        block_start_.emplace(v + 1.0, b);  // keeps an existing (smaller) start
        pos = b;
        v += 1.0;
      }
    } else {
      const double nv = loads_[static_cast<std::size_t>(pos)] + w;
      const auto first = loads_.begin();
      const auto q = std::upper_bound(first, first + pos, nv, std::greater<double>());
      std::rotate(q, first + pos, first + pos + 1);
      *q = nv;
    }
  }

  const std::vector<double>& loads() const { return loads_; }

 private:
  std::vector<double> loads_;
  std::unordered_map<double, int> block_start_;
  bool integral_;
};

inline void check_run_overflow(const ProcessSpec& spec, std::int64_t m_balls) {
  const double bound = static_cast<double>(m_balls) * spec.weights.max_draw();
  if (bound >= 9007199254740992.0) {  // 2^53: exact-integer limit of a double
    throw overflow_error("run: m_balls * max weight = " + std::to_string(bound) +
                         " exceeds the exactly representable load range (2^53)");
  }
}

}  // namespace detail

// m_balls placements from the empty state. Deterministic given the stream;
// for fractional d the per-bin labelling is the sorted order (see
// SortedLoadEngine), the load multiset matches the place_ball path exactly.
inline LoadState run(const ProcessSpec& spec, int n, std::int64_t m_balls, RngStream& rng) {
  if (m_balls < 0) throw std::invalid_argument("run: m_balls must be >= 0");
  if (spec.rule == Rule::Left && n % static_cast<int>(spec.d) != 0) {
    throw std::invalid_argument("run: Left[d] requires n divisible by d");
  }
  detail::check_run_overflow(spec, m_balls);
  LoadState s = LoadState::empty(n);
  if (spec.rule == Rule::Greedy && !spec.integral_d()) {
    detail::SortedLoadEngine engine(n, spec.weights.is_integral());
    for (std::int64_t b = 0; b < m_balls; ++b) {
      const int rank = rank_sample(spec.d, n, rng.uniform01());
      const double w = spec.weights.draw(rng);
      engine.place_at_rank(rank, w);
      s.total_weight += w;
      ++s.balls_thrown;
    }
    s.loads = engine.loads();
    return s;
  }
  for (std::int64_t b = 0; b < m_balls; ++b) place_ball(s, spec, rng);
  return s;
}

// Incremental driver used by the experiment harness so that the state at
// checkpoint m is bit-identical to an independent run(spec, n, m) with the
// same stream.
class ProcessRunner {
 public:
  ProcessRunner(ProcessSpec spec, int n, RngStream rng)
      : spec_(std::move(spec)), rng_(rng), state_(LoadState::empty(n)) {
    if (spec_.rule == Rule::Left && n % static_cast<int>(spec_.d) != 0) {
      throw std::invalid_argument("Left[d] requires n divisible by d");
    }
    if (spec_.rule == Rule::Greedy && !spec_.integral_d()) {
      engine_.emplace(n, spec_.weights.is_integral());
    }
  }

  void advance_to(std::int64_t balls) {
    if (balls < state_.balls_thrown) {
      throw std::invalid_argument("ProcessRunner: cannot rewind");
    }
    detail::check_run_overflow(spec_, balls);
    while (state_.balls_thrown < balls) {
      if (engine_) {
        const int rank = rank_sample(spec_.d, state_.n(), rng_.uniform01());
        const double w = spec_.weights.draw(rng_);
        engine_->place_at_rank(rank, w);
        state_.total_weight += w;
        ++state_.balls_thrown;
      } else {
        place_ball(state_, spec_, rng_);
      }
    }
  }

  const LoadState& state() {
    if (engine_) state_.loads = engine_->loads();
    return state_;
  }

  const ProcessSpec& spec() const { return spec_; }

 private:
  ProcessSpec spec_;
  RngStream rng_;
  LoadState state_;
  std::optional<detail::SortedLoadEngine> engine_;
};

}  // namespace ballast
