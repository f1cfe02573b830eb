#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "ballast/rng.hpp"

namespace ballast {

enum class WeightKind { Constant, UniformTwoValues, Exponential, BoundedEmpirical };

// Ball-weight distribution W together with the moment pieces the drift
// machinery needs: M(z) = E[e^{zW}], a radius lambda with M(lambda) finite,
// and S >= 1 bounding M''(z)/2 on |z| < lambda/2.
//
// Draws use inverse-transform sampling from a single uniform, so a ball's
// stream footprint is one draw (zero for constant weights).
class WeightDistribution {
 public:
  static WeightDistribution constant_one() {
    WeightDistribution w;
    w.kind_ = WeightKind::Constant;
    w.values_ = {1.0};
    w.probs_ = {1.0};
    w.lambda_ = 1.0;
    w.finalize();
    return w;
  }

  // Two equally likely values, kept exactly as given (no mean normalization;
  // uniform{1,2} has mean 3/2 and is used that way in the weighted runs).
  static WeightDistribution uniform_two(double lo, double hi) {
    if (!(lo > 0.0) || !(hi > 0.0) || !(lo <= hi)) {
      throw std::invalid_argument("uniform_two: need 0 < lo <= hi");
    }
    WeightDistribution w;
    w.kind_ = WeightKind::UniformTwoValues;
    w.values_ = {lo, hi};
    w.probs_ = {0.5, 0.5};
    w.lambda_ = 1.0;
    w.finalize();
    return w;
  }

  // Exponential with mean 1; mgf 1/(1-z) finite for z < 1, lambda = 1/2.
  static WeightDistribution exponential() {
    WeightDistribution w;
    w.kind_ = WeightKind::Exponential;
    w.lambda_ = 0.5;
    w.finalize();
    return w;
  }

  static WeightDistribution bounded_empirical(std::vector<double> values,
                                              std::vector<double> probs) {
    if (values.empty() || values.size() != probs.size()) {
      throw std::invalid_argument("bounded_empirical: values/probs size mismatch");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (!(values[i] > 0.0) || !std::isfinite(values[i])) {
        throw std::invalid_argument("bounded_empirical: values must be positive finite");
      }
      if (probs[i] < 0.0) throw std::invalid_argument("bounded_empirical: negative probability");
      total += probs[i];
    }
    if (std::abs(total - 1.0) > 1e-9) {
      throw std::invalid_argument("bounded_empirical: probabilities must sum to 1");
    }
    // sort support ascending, merge duplicates
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    WeightDistribution w;
    w.kind_ = WeightKind::BoundedEmpirical;
    for (std::size_t k : order) {
      if (!w.values_.empty() && values[k] == w.values_.back()) {
        w.probs_.back() += probs[k];
      } else {
        w.values_.push_back(values[k]);
        w.probs_.push_back(probs[k]);
      }
    }
    w.lambda_ = 1.0;
    w.finalize();
    return w;
  }

  WeightKind kind() const { return kind_; }

  double mean() const { return mean_; }
  double lambda() const { return lambda_; }
  double mgf_second_derivative_bound() const { return S_; }  // the S >= 1 constant

  bool is_constant_one() const { return kind_ == WeightKind::Constant; }

  // All support points integral (exact conservation in doubles up to 2^53).
  bool is_integral() const { return integral_; }

  // Whether draw() consumes a uniform from the stream.
  bool consumes_draw() const { return kind_ != WeightKind::Constant; }

  // Largest value a single draw can produce. For the exponential this is the
  // image of the largest representable uniform, -ln(2^-53) = 53 ln 2.
  double max_draw() const {
    if (kind_ == WeightKind::Exponential) return 53.0 * 0.6931471805599453;
    return values_.back();
  }

  double min_support() const {
    if (kind_ == WeightKind::Exponential) return 0.0;
    return values_.front();
  }

  double draw(RngStream& rng) const {
    switch (kind_) {
      case WeightKind::Constant:
        return 1.0;
      case WeightKind::UniformTwoValues:
        return rng.uniform01() < 0.5 ? values_[0] : values_[1];
      case WeightKind::Exponential:
        return -std::log1p(-rng.uniform01());
      case WeightKind::BoundedEmpirical: {
        const double u = rng.uniform01();
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < values_.size(); ++i) {
          acc += probs_[i];
          if (u < acc) return values_[i];
        }
        return values_.back();
      }
    }
    throw std::logic_error("unreachable");
  }

  double mgf(double z) const {
    switch (kind_) {
      case WeightKind::Constant:
        return std::exp(z);
      case WeightKind::Exponential:
        if (z >= 1.0) {
          throw std::domain_error("exponential mgf undefined for z >= 1 (z = " +
                                  std::to_string(z) + ")");
        }
        return 1.0 / (1.0 - z);
      default: {
        double acc = 0.0;
        for (std::size_t i = 0; i < values_.size(); ++i) {
          acc += probs_[i] * std::exp(z * values_[i]);
        }
        return acc;
      }
    }
  }

  double mgf_second_derivative(double z) const {
    switch (kind_) {
      case WeightKind::Constant:
        return std::exp(z);
      case WeightKind::Exponential:
        if (z >= 1.0) {
          throw std::domain_error("exponential mgf undefined for z >= 1");
        }
        return 2.0 / std::pow(1.0 - z, 3);
      default: {
        double acc = 0.0;
        for (std::size_t i = 0; i < values_.size(); ++i) {
          acc += probs_[i] * values_[i] * values_[i] * std::exp(z * values_[i]);
        }
        return acc;
      }
    }
  }

  // Pr[W >= x] and Pr[W > x].
  double tail_geq(double x) const {
    if (kind_ == WeightKind::Exponential) {
      return x <= 0.0 ? 1.0 : std::exp(-x);
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (values_[i] >= x) acc += probs_[i];
    }
    return acc;
  }

  double tail_gt(double x) const {
    if (kind_ == WeightKind::Exponential) {
      return x <= 0.0 ? 1.0 : std::exp(-x);
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (values_[i] > x) acc += probs_[i];
    }
    return acc;
  }

  bool has_discrete_support() const { return kind_ != WeightKind::Exponential; }

  const std::vector<double>& support() const { return values_; }

 private:
  void finalize() {
    if (kind_ == WeightKind::Exponential) {
      mean_ = 1.0;
      integral_ = false;
    } else {
      mean_ = 0.0;
      integral_ = true;
      for (std::size_t i = 0; i < values_.size(); ++i) {
        mean_ += probs_[i] * values_[i];
        if (values_[i] != std::floor(values_[i])) integral_ = false;
      }
    }
    // S bounds M''(z)/2 on |z| <= lambda/2; M'' is increasing in z for
    // positive weights, so the sup sits at the right endpoint.
    S_ = std::max(1.0, mgf_second_derivative(lambda_ / 2.0) / 2.0);
  }

  WeightKind kind_ = WeightKind::Constant;
  std::vector<double> values_;
  std::vector<double> probs_;
  double lambda_ = 1.0;
  double S_ = 1.0;
  double mean_ = 1.0;
  bool integral_ = true;
};

}  // namespace ballast
