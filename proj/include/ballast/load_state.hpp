#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

namespace ballast {

// Thrown when a computation would overflow its representation (load growth
// past the exact-integer range of a double, or an exponential term past
// e^700).
class overflow_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raw per-bin loads plus running totals. The normalized sorted gap vector is
// never stored; it is derived on demand so per-ball updates stay O(1) and
// unit-weight loads stay exact integers.
struct LoadState {
  std::vector<double> loads;
  double total_weight = 0.0;
  std::int64_t balls_thrown = 0;

  int n() const { return static_cast<int>(loads.size()); }

  static LoadState empty(int n) {
    if (n < 1) throw std::invalid_argument("LoadState: n must be positive");
    LoadState s;
    s.loads.assign(static_cast<std::size_t>(n), 0.0);
    return s;
  }

  void add(int bin, double w) {
    loads[static_cast<std::size_t>(bin)] += w;
    total_weight += w;
    ++balls_thrown;
  }
};

inline double average_load(const LoadState& s) {
  return s.total_weight / static_cast<double>(s.n());
}

inline double max_load(const LoadState& s) {
  return *std::max_element(s.loads.begin(), s.loads.end());
}

// G = max load minus average; 0 for the empty state.
inline double gap(const LoadState& s) {
  return max_load(s) - average_load(s);
}

// x_i = load_(i) - average, sorted nonincreasing; sums to zero.
inline std::vector<double> normalized_sorted(const LoadState& s) {
  const double avg = average_load(s);
  std::vector<double> x(s.loads.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = s.loads[i] - avg;
  std::sort(x.begin(), x.end(), std::greater<double>());
  return x;
}

namespace detail {

// Neumaier compensated sum: the exponential sums in the potentials span many
// orders of magnitude and a plain accumulator loses the small terms.
struct CompensatedSum {
  double sum = 0.0;
  double comp = 0.0;

  void add(double v) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v)) {
      comp += (sum - t) + v;
    } else {
      comp += (v - t) + sum;
    }
    sum = t;
  }

  double value() const { return sum + comp; }
};

}  // namespace detail

}  // namespace ballast
