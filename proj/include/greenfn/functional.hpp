#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <variant>
#include <vector>

#include "greenfn/common.hpp"
#include "greenfn/ode.hpp"
#include "greenfn/quadrature.hpp"
#include "greenfn/two_point.hpp"

namespace greenfn {

/// A continuous linear functional C on C[a, b]: a sum of weighted-integral
/// terms int_lo^hi u(t) v(t) dt and multi-point terms sum_k eps_k u(nu_k).
/// Single-term functionals are the common case; sums stay linear, so
/// composites are supported as a term list.
class LinearFunctional {
 public:
  struct WeightedIntegral {
    ScalarFn weight;
    double lo;
    double hi;
  };

  struct MultiPoint {
    std::vector<double> points;
    std::vector<double> weights;
  };

  using Term = std::variant<WeightedIntegral, MultiPoint>;

  static LinearFunctional weighted_integral(ScalarFn weight, double lo, double hi) {
    if (!(lo <= hi)) throw std::invalid_argument("integral subinterval requires lo <= hi");
    if (!weight) throw std::invalid_argument("integral weight is empty");
    LinearFunctional c;
    c.terms_.push_back(WeightedIntegral{std::move(weight), lo, hi});
    return c;
  }

  static LinearFunctional multi_point(std::vector<double> points,
                                      std::vector<double> weights) {
    if (points.size() != weights.size() || points.empty())
      throw std::invalid_argument("multi-point functional needs matching point/weight lists");
    LinearFunctional c;
    c.terms_.push_back(MultiPoint{std::move(points), std::move(weights)});
    return c;
  }

  LinearFunctional& add_term(Term term) {
    terms_.push_back(std::move(term));
    return *this;
  }

  const std::vector<Term>& terms() const { return terms_; }

  /// C(u) for an arbitrary evaluable u. `extra_splits` are forced quadrature
  /// break points (pass the kink location when u is piecewise smooth).
  double operator()(const std::function<double(double)>& u, double quad_tol = 1e-10,
                    std::span<const double> extra_splits = {}) const {
    double acc = 0.0;
    for (const Term& term : terms_) {
      if (const auto* wi = std::get_if<WeightedIntegral>(&term)) {
        acc += integrate_or_throw(
            [&](double t) { return u(t) * wi->weight(t); }, wi->lo, wi->hi, quad_tol,
            extra_splits);
      } else {
        const auto& mp = std::get<MultiPoint>(term);
        for (std::size_t k = 0; k < mp.points.size(); ++k)
          acc += mp.weights[k] * u(mp.points[k]);
      }
    }
    return acc;
  }

  double operator()(const SolutionTrajectory& u, double quad_tol = 1e-10) const {
    return (*this)([&u](double t) { return u.value(0, t); }, quad_tol);
  }

  /// Support must sit inside the problem interval.
  void validate_support(double a, double b) const {
    for (const Term& term : terms_) {
      if (const auto* wi = std::get_if<WeightedIntegral>(&term)) {
        if (wi->lo < a || wi->hi > b)
          throw std::invalid_argument("integral subinterval not contained in [a, b]");
      } else {
        for (double p : std::get<MultiPoint>(term).points)
          if (p < a || p > b)
            throw std::invalid_argument("multi-point node not contained in [a, b]");
      }
    }
  }

  /// Points where C(g(., s)) can lose smoothness as a function of s:
  /// subinterval endpoints and multi-point nodes. Used to seed quadratures
  /// in s over such slice values.
  std::vector<double> split_points() const {
    std::vector<double> out;
    for (const Term& term : terms_) {
      if (const auto* wi = std::get_if<WeightedIntegral>(&term)) {
        out.push_back(wi->lo);
        out.push_back(wi->hi);
      } else {
        const auto& mp = std::get<MultiPoint>(term);
        out.insert(out.end(), mp.points.begin(), mp.points.end());
      }
    }
    return out;
  }

  /// Hypothesis (c) of the comparison principle: u >= 0 implies C(u) >= 0.
  /// Holds when every multi-point weight is >= 0 and every integral weight
  /// is >= 0 on its subinterval (checked on a sample grid).
  bool nonnegative_weights(int samples = 201) const {
    for (const Term& term : terms_) {
      if (const auto* wi = std::get_if<WeightedIntegral>(&term)) {
        for (double t : linspace(wi->lo, wi->hi, samples))
          if (wi->weight(t) < 0.0) return false;
      } else {
        for (double w : std::get<MultiPoint>(term).weights)
          if (w < 0.0) return false;
      }
    }
    return true;
  }

 private:
  std::vector<Term> terms_;
};

/// C(g(., s)) with the quadrature split at the kink t = s. Multi-point
/// nodes that land exactly on s pick up the kernel's tie-branch value.
inline double functional_of_green_slice(const LinearFunctional& c, const TwoPointGreen& g,
                                        double s, double quad_tol = 1e-10) {
  const double split[1] = {s};
  return c([&](double t) { return g(t, s); }, quad_tol, split);
}

}  // namespace greenfn
