#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "ballast/load_state.hpp"
#include "ballast/process.hpp"
#include "ballast/rng.hpp"

using namespace ballast;

namespace {

LoadState state_from(std::vector<double> loads) {
  LoadState s;
  s.loads = std::move(loads);
  for (double v : s.loads) s.total_weight += v;
  s.balls_thrown = static_cast<std::int64_t>(s.total_weight);
  return s;
}

std::vector<double> sorted_loads(const LoadState& s) {
  auto v = s.loads;
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

TEST_CASE("rank_sample pinned values") {
  REQUIRE(rank_sample(1.0, 10, 0.73) == 8);
  REQUIRE(rank_sample(2.0, 10, 0.5) == 8);
  REQUIRE(rank_sample(2.0, 4, 0.0) == 1);

  // oracle for the middle case: smallest i with (i/10)^2 > 0.5
  int expect = 1;
  while (std::pow(expect / 10.0, 2.0) <= 0.5) ++expect;
  REQUIRE(expect == 8);
}

TEST_CASE("rank_sample rejects bad parameters") {
  REQUIRE_THROWS_AS(rank_sample(0.5, 10, 0.1), std::invalid_argument);
  REQUIRE_THROWS_AS(rank_sample(2.0, 0, 0.1), std::invalid_argument);
  REQUIRE_THROWS_AS(rank_sample(2.0, 10, 1.0), std::invalid_argument);
  REQUIRE_THROWS_AS(rank_sample(2.0, 10, -0.1), std::invalid_argument);
}

TEST_CASE("rank_sample lands in its CDF bracket") {
  auto rng = make_trial_rng(21, 0);
  for (int iter = 0; iter < 20000; ++iter) {
    const int n = 1 + static_cast<int>(rng.uniform_index(200));
    const double d = 1.0 + 3.0 * rng.uniform01();
    const double u = rng.uniform01();
    const int i = rank_sample(d, n, u);
    REQUIRE(i >= 1);
    REQUIRE(i <= n);
    REQUIRE(std::pow(static_cast<double>(i - 1) / n, d) <= u);
    REQUIRE(u < std::pow(static_cast<double>(i) / n, d));
  }
}

TEST_CASE("rank sampler matches its CDF empirically") {
  // frequency of {rank <= i} within 4 sqrt(p(1-p)/N) of (i/n)^d
  constexpr int kN = 32;
  constexpr int kDraws = 1000000;
  std::uint64_t seed = 40;
  for (double d : {1.0, 1.5, 2.0, 3.0}) {
    auto rng = make_trial_rng(seed++, 0);
    std::vector<int> counts(kN + 1, 0);
    for (int k = 0; k < kDraws; ++k) {
      ++counts[static_cast<std::size_t>(rank_sample(d, kN, rng.uniform01()))];
    }
    int cum = 0;
    for (int i = 1; i <= kN; ++i) {
      cum += counts[static_cast<std::size_t>(i)];
      const double p = std::pow(static_cast<double>(i) / kN, d);
      const double freq = static_cast<double>(cum) / kDraws;
      const double band = 4.0 * std::sqrt(p * (1.0 - p) / kDraws);
      REQUIRE(std::abs(freq - p) <= band + 1e-12);
    }
  }
}

TEST_CASE("rank probabilities are a nondecreasing distribution") {
  for (double d : {1.0, 1.5, 2.0, 3.0}) {
    for (int n : {4, 16, 100, 1024}) {
      const auto p = rank_probabilities(n, d);
      double sum = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i) {
        REQUIRE(p[i] >= 0.0);
        if (i > 0) REQUIRE(p[i] + 1e-15 >= p[i - 1]);
        sum += p[i];
      }
      REQUIRE(sum == Catch::Approx(1.0).epsilon(1e-12));
    }
  }
  // fractional d stays monotone up to n = 2^16
  const auto p = rank_probabilities(1 << 16, 1.5);
  for (std::size_t i = 1; i < p.size(); ++i) REQUIRE(p[i] + 1e-18 >= p[i - 1]);
}

TEST_CASE("bias margins hold for every n") {
  for (double d : {1.5, 2.0, 3.0, 4.0}) {
    const double eps = bias_epsilon(d);
    REQUIRE(eps > 0.0);
    for (int n : {16, 100, 256, 1000}) {
      const auto p = rank_probabilities(n, d);
      double top = 0.0, bottom = 0.0;
      const int hi = (3 * n + 3) / 4;  // ceil(3n/4)
      for (int i = hi; i <= n; ++i) top += p[static_cast<std::size_t>(i - 1)];
      for (int i = 1; i <= n / 4; ++i) bottom += p[static_cast<std::size_t>(i - 1)];
      REQUIRE(top >= 0.25 + eps - 1e-12);
      REQUIRE(bottom <= 0.25 - eps + 1e-12);
    }
  }
  REQUIRE(bias_epsilon(2.0) == 0.1875);
  REQUIRE_THROWS_AS(bias_epsilon(1.0), std::invalid_argument);
}

TEST_CASE("rank_to_bin follows the fixed tie order") {
  const auto s = state_from({2, 1, 1, 0});
  REQUIRE(rank_to_bin(s, 1) == 0);
  // among the tied bins 1 and 2, the higher index counts as heavier
  REQUIRE(rank_to_bin(s, 2) == 2);
  REQUIRE(rank_to_bin(s, 3) == 1);
  REQUIRE(rank_to_bin(s, 4) == 3);
  REQUIRE_THROWS_AS(rank_to_bin(s, 0), std::invalid_argument);
  REQUIRE_THROWS_AS(rank_to_bin(s, 5), std::invalid_argument);
}

TEST_CASE("placing at rank 1 tops up the heaviest bin") {
  auto s = state_from({2, 1, 1, 0});
  const int bin = rank_to_bin(s, 1);
  s.add(bin, 1.0);
  REQUIRE(s.loads == std::vector<double>{3, 1, 1, 0});
  REQUIRE(s.total_weight == 5.0);
}

TEST_CASE("first ball into an empty state makes gap 1 - 1/n") {
  const auto spec = ProcessSpec::greedy(2.0);
  auto rng = make_trial_rng(5, 0);
  auto s = LoadState::empty(4);
  place_ball_rank(s, spec, rng);
  REQUIRE(s.total_weight == 1.0);
  REQUIRE(gap(s) == Catch::Approx(0.75));
}

TEST_CASE("receiving-rank distribution is the p_i vector") {
  const auto p = rank_probabilities(4, 2.0);
  REQUIRE(p[0] == Catch::Approx(1.0 / 16));
  REQUIRE(p[1] == Catch::Approx(3.0 / 16));
  REQUIRE(p[2] == Catch::Approx(5.0 / 16));
  REQUIRE(p[3] == Catch::Approx(7.0 / 16));
}

TEST_CASE("d-sample selection matches the rank distribution exactly (n = 4)") {
  // enumerate all 16 ordered candidate pairs and compare against p_i pushed
  // through the tie order
  const std::vector<std::vector<double>> states = {
      {0, 0, 0, 0}, {1, 1, 0, 0}, {2, 1, 1, 0}, {5, 0, 3, 3}, {1, 2, 3, 4}};
  for (const auto& loads : states) {
    const auto s = state_from(loads);
    std::vector<double> dmin_prob(4, 0.0);
    for (int a = 0; a < 4; ++a) {
      for (int b = 0; b < 4; ++b) {
        dmin_prob[static_cast<std::size_t>(dmin_receiver(s, {a, b}))] += 1.0 / 16.0;
      }
    }
    std::vector<double> rank_prob(4, 0.0);
    const auto p = rank_probabilities(4, 2.0);
    for (int i = 1; i <= 4; ++i) {
      rank_prob[static_cast<std::size_t>(rank_to_bin(s, i))] += p[static_cast<std::size_t>(i - 1)];
    }
    for (int bin = 0; bin < 4; ++bin) {
      INFO("state " << loads[0] << "," << loads[1] << "," << loads[2] << "," << loads[3]
                    << " bin " << bin);
      REQUIRE(dmin_prob[static_cast<std::size_t>(bin)] ==
              Catch::Approx(rank_prob[static_cast<std::size_t>(bin)]).margin(1e-12));
    }
  }
}

TEST_CASE("d-sample placement passes a chi-square test against p (n = 16)") {
  constexpr int kN = 16;
  constexpr int kDraws = 1000000;
  // a fixed random state
  auto seed_rng = make_trial_rng(77, 0);
  auto base = LoadState::empty(kN);
  for (int i = 0; i < 5 * kN; ++i) {
    base.add(static_cast<int>(seed_rng.uniform_index(kN)), 1.0);
  }
  // expected per-bin probability: p through the tie order
  std::vector<double> expected(kN, 0.0);
  const auto p = rank_probabilities(kN, 2.0);
  for (int i = 1; i <= kN; ++i) {
    expected[static_cast<std::size_t>(rank_to_bin(base, i))] += p[static_cast<std::size_t>(i - 1)];
  }
  std::vector<std::int64_t> counts(kN, 0);
  auto rng = make_trial_rng(78, 0);
  const auto w = WeightDistribution::constant_one();
  for (int k = 0; k < kDraws; ++k) {
    LoadState s = base;  // single-ball draws from the same fixed state
    ++counts[static_cast<std::size_t>(place_ball_dmin(s, 2, w, rng))];
  }
  double chi2 = 0.0;
  for (int b = 0; b < kN; ++b) {
    const double e = expected[static_cast<std::size_t>(b)] * kDraws;
    const double diff = static_cast<double>(counts[static_cast<std::size_t>(b)]) - e;
    chi2 += diff * diff / e;
  }
  const double crit =
      boost::math::quantile(boost::math::chi_squared_distribution<double>(kN - 1), 0.999);
  REQUIRE(chi2 < crit);
}

TEST_CASE("left placement: strict minimum wins, ties go left") {
  const auto even = state_from({0, 0, 0, 0});
  // every pair ties on an empty state, so the left group always receives
  int left_wins = 0;
  for (int a = 0; a < 2; ++a) {
    for (int b = 2; b < 4; ++b) {
      const int r = left_receiver(even, {a, b});
      REQUIRE(r == a);
      ++left_wins;
    }
  }
  REQUIRE(left_wins == 4);

  const auto s = state_from({5, 5, 0, 0});
  REQUIRE(left_receiver(s, {0, 3}) == 3);
  const auto t = state_from({0, 7, 3, 0});
  REQUIRE(left_receiver(t, {0, 3}) == 0);  // tie at 0 goes to the left group
}

TEST_CASE("left placement validates divisibility") {
  auto s = LoadState::empty(5);
  auto rng = make_trial_rng(0, 0);
  const auto w = WeightDistribution::constant_one();
  REQUIRE_THROWS_AS(place_ball_left(s, 2, w, rng), std::invalid_argument);
  REQUIRE_THROWS_AS(place_ball_left(s, 1, w, rng), std::invalid_argument);
}

TEST_CASE("left placement lands in the sampled groups") {
  const auto spec = ProcessSpec::left(4);
  auto rng = make_trial_rng(6, 0);
  auto s = run(spec, 16, 1600, rng);
  REQUIRE(s.total_weight == 1600.0);
  // left bias: group loads decrease weakly left to right on average; just
  // check conservation and that all bins were reachable
  for (double v : s.loads) REQUIRE(v > 0.0);
}

TEST_CASE("one-choice run from tiny state: enumerated gap law") {
  // oracle: 4 equally likely placements of 2 balls into 2 bins
  // -> Pr[gap = 0] = 1/2, Pr[gap = 1] = 1/2
  constexpr int kTrials = 40000;
  const auto spec = ProcessSpec::one_choice();
  int gap0 = 0;
  for (int t = 0; t < kTrials; ++t) {
    auto rng = make_trial_rng(300, static_cast<std::uint64_t>(t));
    const auto s = run(spec, 2, 2, rng);
    if (gap(s) == 0.0) ++gap0;
  }
  const double freq = static_cast<double>(gap0) / kTrials;
  const double band = 4.0 * std::sqrt(0.25 / kTrials);
  REQUIRE(std::abs(freq - 0.5) <= band);
}

TEST_CASE("two-choice run from tiny state: enumerated gap law") {
  // oracle over 16 ordered sample pairs: ball 1 always lands in bin 0 (all
  // pairs tie), ball 2 misses bin 0 unless both samples hit it
  // -> Pr[gap = 0] = 12/16 = 3/4
  constexpr int kTrials = 40000;
  const auto spec = ProcessSpec::greedy(2.0);
  int gap0 = 0;
  for (int t = 0; t < kTrials; ++t) {
    auto rng = make_trial_rng(301, static_cast<std::uint64_t>(t));
    const auto s = run(spec, 2, 2, rng);
    if (gap(s) == 0.0) ++gap0;
  }
  const double freq = static_cast<double>(gap0) / kTrials;
  const double band = 4.0 * std::sqrt(0.25 * 0.75 / kTrials) + 0.002;
  REQUIRE(std::abs(freq - 0.75) <= band);
}

TEST_CASE("run with zero balls is the empty state") {
  auto rng = make_trial_rng(1, 0);
  const auto s = run(ProcessSpec::greedy(2.0), 8, 0, rng);
  REQUIRE(s.total_weight == 0.0);
  REQUIRE(gap(s) == 0.0);
  REQUIRE(s.balls_thrown == 0);
}

TEST_CASE("chain_step throws n balls and composes") {
  const auto spec = ProcessSpec::greedy(2.0);
  auto a = make_trial_rng(50, 0);
  auto s1 = LoadState::empty(4);
  chain_step(s1, spec, a);
  REQUIRE(s1.balls_thrown == 4);
  REQUIRE(s1.total_weight == 4.0);
  chain_step(s1, spec, a);

  auto b = make_trial_rng(50, 0);
  auto s2 = LoadState::empty(4);
  for (int i = 0; i < 8; ++i) place_ball(s2, spec, b);
  REQUIRE(s1.loads == s2.loads);
}

TEST_CASE("gap after one chain step stays in the reference window") {
  const auto spec = ProcessSpec::greedy(2.0);
  constexpr int kTrials = 10000;
  for (int t = 0; t < kTrials; ++t) {
    auto rng = make_trial_rng(1234, static_cast<std::uint64_t>(t));
    auto s = LoadState::empty(1024);
    chain_step(s, spec, rng);
    const double g = gap(s);
    REQUIRE(g >= 0.0);
    REQUIRE(g <= 13.0);
  }
}

TEST_CASE("conservation: loads sum to the thrown weight") {
  auto rng = make_trial_rng(60, 0);
  const auto unit = run(ProcessSpec::greedy(2.0), 64, 100000, rng);
  double sum = 0.0;
  for (double v : unit.loads) sum += v;
  REQUIRE(sum == unit.total_weight);  // exact for integral weights

  auto rng2 = make_trial_rng(61, 0);
  const auto spec12 = ProcessSpec::greedy(2.0, WeightDistribution::uniform_two(1.0, 2.0));
  const auto s12 = run(spec12, 64, 100000, rng2);
  double sum12 = 0.0;
  for (double v : s12.loads) sum12 += v;
  REQUIRE(sum12 == s12.total_weight);  // still integral

  auto rng3 = make_trial_rng(62, 0);
  const auto sexp = run(ProcessSpec::greedy(2.0, WeightDistribution::exponential()), 64,
                        100000, rng3);
  double sume = 0.0;
  for (double v : sexp.loads) sume += v;
  REQUIRE(sume == Catch::Approx(sexp.total_weight).epsilon(1e-9));
}

TEST_CASE("identical streams give bit-identical load multisets") {
  for (const auto& spec :
       {ProcessSpec::one_choice(), ProcessSpec::greedy(2.0), ProcessSpec::greedy(1.5),
        ProcessSpec::left(2), ProcessSpec::greedy(2.0, WeightDistribution::exponential())}) {
    auto r1 = make_trial_rng(99, 3);
    auto r2 = make_trial_rng(99, 3);
    const auto a = run(spec, 32, 20000, r1);
    const auto b = run(spec, 32, 20000, r2);
    REQUIRE(sorted_loads(a) == sorted_loads(b));
  }
}

TEST_CASE("fractional-d fast engine matches the exact-order path") {
  for (const auto& weights :
       {WeightDistribution::constant_one(), WeightDistribution::uniform_two(1.0, 2.0),
        WeightDistribution::exponential()}) {
    const auto spec = ProcessSpec::greedy(1.5, weights);
    auto fast_rng = make_trial_rng(123, 0);
    const auto fast = run(spec, 64, 5000, fast_rng);

    auto slow_rng = make_trial_rng(123, 0);
    auto slow = LoadState::empty(64);
    for (int i = 0; i < 5000; ++i) place_ball_rank(slow, spec, slow_rng);

    // both paths add the same weight to the same multiset value each step,
    // so the multisets agree bit-exactly even for real weights
    REQUIRE(sorted_loads(fast) == sorted_loads(slow));
    REQUIRE(fast.total_weight == slow.total_weight);
  }
}

TEST_CASE("integral fractional-d engine is exact") {
  const auto spec = ProcessSpec::greedy(1.5);
  auto fast_rng = make_trial_rng(124, 0);
  const auto fast = run(spec, 32, 20000, fast_rng);
  auto slow_rng = make_trial_rng(124, 0);
  auto slow = LoadState::empty(32);
  for (int i = 0; i < 20000; ++i) place_ball_rank(slow, spec, slow_rng);
  REQUIRE(sorted_loads(fast) == sorted_loads(slow));
}

TEST_CASE("overflow guard rejects absurd run sizes") {
  auto rng = make_trial_rng(0, 0);
  REQUIRE_THROWS_AS(run(ProcessSpec::greedy(2.0), 8, (std::int64_t{1} << 53), rng),
                    overflow_error);
}

TEST_CASE("normalized_sorted pinned examples") {
  REQUIRE(normalized_sorted(state_from({2, 1, 1, 0})) == std::vector<double>{1, 0, 0, -1});
  REQUIRE(normalized_sorted(state_from({3, 3, 3, 3})) == std::vector<double>{0, 0, 0, 0});
  REQUIRE(normalized_sorted(state_from({3, 0, 0, 0})) ==
          std::vector<double>{2.25, -0.75, -0.75, -0.75});
}

TEST_CASE("normalized vector sums to zero on random states") {
  auto rng = make_trial_rng(42, 0);
  for (int iter = 0; iter < 200; ++iter) {
    const auto s = run(ProcessSpec::greedy(2.0, WeightDistribution::exponential()), 37,
                       5000, rng);
    const auto x = normalized_sorted(s);
    double sum = 0.0;
    for (double v : x) sum += v;
    REQUIRE(std::abs(sum) <= 1e-9 * 37);
    REQUIRE(std::is_sorted(x.begin(), x.end(), std::greater<double>()));
    REQUIRE(x.front() == Catch::Approx(gap(s)));
  }
}

TEST_CASE("process spec validation") {
  REQUIRE_THROWS_AS(ProcessSpec::greedy(0.5), std::invalid_argument);
  REQUIRE_THROWS_AS(ProcessSpec::left(1), std::invalid_argument);
  auto rng = make_trial_rng(0, 0);
  REQUIRE_THROWS_AS(run(ProcessSpec::left(3), 16, 10, rng), std::invalid_argument);
}

TEST_CASE("rank placement rejects the Left process") {
  auto s = LoadState::empty(4);
  auto rng = make_trial_rng(0, 0);
  REQUIRE_THROWS_AS(place_ball_rank(s, ProcessSpec::left(2), rng), std::invalid_argument);
}
