#include <catch2/catch_amalgamated.hpp>

#include <set>
#include <vector>

#include "ballast/rng.hpp"

using ballast::make_trial_rng;
using ballast::RngStream;

TEST_CASE("identical (seed, trial) pairs produce identical streams") {
  auto a = make_trial_rng(0xDEADBEEF, 17);
  auto b = make_trial_rng(0xDEADBEEF, 17);
  for (int i = 0; i < 1000; ++i) {
    REQUIRE(a.next_u64() == b.next_u64());
  }
  auto c = make_trial_rng(0xDEADBEEF, 17);
  auto d = make_trial_rng(0xDEADBEEF, 17);
  for (int i = 0; i < 100; ++i) {
    REQUIRE(c.uniform01() == d.uniform01());
    REQUIRE(c.uniform_index(1000) == d.uniform_index(1000));
  }
}

TEST_CASE("distinct trial indices never share prefixes") {
  constexpr int kTrials = 32;
  constexpr int kPrefix = 64;
  std::vector<std::vector<std::uint64_t>> prefixes;
  for (int t = 0; t < kTrials; ++t) {
    auto rng = make_trial_rng(7, static_cast<std::uint64_t>(t));
    std::vector<std::uint64_t> p;
    for (int i = 0; i < kPrefix; ++i) p.push_back(rng.next_u64());
    prefixes.push_back(std::move(p));
  }
  for (int a = 0; a < kTrials; ++a) {
    for (int b = a + 1; b < kTrials; ++b) {
      REQUIRE(prefixes[a] != prefixes[b]);
      // no shared first word either
      REQUIRE(prefixes[a][0] != prefixes[b][0]);
    }
  }
}

TEST_CASE("uniform01 stays in [0, 1)") {
  auto rng = make_trial_rng(3, 0);
  double mn = 1.0, mx = 0.0, sum = 0.0;
  constexpr int kDraws = 200000;
  for (int i = 0; i < kDraws; ++i) {
    const double u = rng.uniform01();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    mn = std::min(mn, u);
    mx = std::max(mx, u);
    sum += u;
  }
  REQUIRE(sum / kDraws == Catch::Approx(0.5).margin(0.005));
  REQUIRE(mn < 0.001);
  REQUIRE(mx > 0.999);
}

TEST_CASE("uniform_index covers its range uniformly") {
  auto rng = make_trial_rng(11, 4);
  constexpr std::uint64_t kN = 7;
  std::vector<int> counts(kN, 0);
  constexpr int kDraws = 70000;
  for (int i = 0; i < kDraws; ++i) {
    const auto v = rng.uniform_index(kN);
    REQUIRE(v < kN);
    ++counts[v];
  }
  for (auto c : counts) {
    REQUIRE(c == Catch::Approx(kDraws / static_cast<double>(kN)).epsilon(0.05));
  }
  REQUIRE_THROWS_AS(rng.uniform_index(0), std::invalid_argument);
}

TEST_CASE("different base seeds diverge") {
  auto a = make_trial_rng(1, 0);
  auto b = make_trial_rng(2, 0);
  REQUIRE(a.next_u64() != b.next_u64());
}
