#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "greenfn/common.hpp"

namespace greenfn {

struct QuadratureOutcome {
  double value = 0.0;
  double error_estimate = 0.0;
  int panels = 0;
  bool converged = true;
};

namespace detail {

// Gauss-Kronrod 7-15 nodes and weights on [-1, 1] (QUADPACK dqk15).
// Even-indexed Kronrod nodes coincide with the Gauss-7 nodes.
inline constexpr double kGk15Nodes[8] = {
    0.9914553711208126392068546975263285,
    0.9491079123427585245261896840478513,
    0.8648644233597690727897127886409262,
    0.7415311855993944398638647732807884,
    0.5860872354676911302941448382587296,
    0.4058451513773971669066064120769615,
    0.2077849550078984676006894037732449,
    0.0};

inline constexpr double kGk15KronrodW[8] = {
    0.0229353220105292249637320080589695,
    0.0630920926299785532907006631892042,
    0.1047900103222501838398763225415180,
    0.1406532597155259187451895905102379,
    0.1690047266392679028265834265985503,
    0.1903505780647854099132564024210137,
    0.2044329400752988924141619992346491,
    0.2094821410847278280129991748917143};

inline constexpr double kGk15GaussW[4] = {
    0.1294849661688696932706114326790820,
    0.2797053914892766679014677714237796,
    0.3818300505051189449503697754889751,
    0.4179591836734693877551020408163265};

template <class F>
inline void gk15_panel(const F& f, double lo, double hi, double& k15, double& err) {
  const double mid = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);
  const double f_mid = f(mid);
  double kron = kGk15KronrodW[7] * f_mid;
  double gauss = kGk15GaussW[3] * f_mid;
  for (int i = 0; i < 7; ++i) {
    const double dx = half * kGk15Nodes[i];
    const double pair = f(mid - dx) + f(mid + dx);
    kron += kGk15KronrodW[i] * pair;
    if (i % 2 == 1) gauss += kGk15GaussW[i / 2] * pair;
  }
  k15 = kron * half;
  err = std::abs((kron - gauss) * half);
}

template <class F>
inline void adapt_panel(const F& f, double lo, double hi, double tol, int depth,
                        int max_depth, QuadratureOutcome& out) {
  double v = 0.0, e = 0.0;
  gk15_panel(f, lo, hi, v, e);
  if (e <= tol || depth >= max_depth) {
    out.value += v;
    out.error_estimate += e;
    ++out.panels;
    if (e > tol) out.converged = false;
    return;
  }
  const double mid = 0.5 * (lo + hi);
  adapt_panel(f, lo, mid, 0.5 * tol, depth + 1, max_depth, out);
  adapt_panel(f, mid, hi, 0.5 * tol, depth + 1, max_depth, out);
}

}  // namespace detail

/// Adaptive Gauss-Kronrod 7-15 quadrature of f over [lo, hi] to absolute
/// tolerance abs_tol. `forced_splits` become initial segment boundaries; use
/// them at known kinks so every panel sees a smooth integrand. Deterministic:
/// panels are accumulated left to right.
template <class F>
QuadratureOutcome integrate_adaptive(F&& f, double lo, double hi, double abs_tol,
                                     std::span<const double> forced_splits = {},
                                     int max_depth = 48) {
  QuadratureOutcome out;
  double sign = 1.0;
  if (lo == hi) return out;
  if (lo > hi) {
    std::swap(lo, hi);
    sign = -1.0;
  }

  std::vector<double> cuts;
  cuts.push_back(lo);
  for (double c : forced_splits)
    if (c > lo && c < hi) cuts.push_back(c);
  cuts.push_back(hi);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  const double total = hi - lo;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double seg_tol = abs_tol * (cuts[i + 1] - cuts[i]) / total;
    detail::adapt_panel(f, cuts[i], cuts[i + 1], seg_tol, 0, max_depth, out);
  }
  out.value *= sign;
  return out;
}

/// Like integrate_adaptive but throws QuadratureError when the tolerance was
/// not reached.
template <class F>
double integrate_or_throw(F&& f, double lo, double hi, double abs_tol,
                          std::span<const double> forced_splits = {},
                          int max_depth = 48) {
  QuadratureOutcome out =
      integrate_adaptive(std::forward<F>(f), lo, hi, abs_tol, forced_splits, max_depth);
  if (!out.converged)
    throw QuadratureError(out.error_estimate,
                          "adaptive quadrature did not reach the requested tolerance");
  return out.value;
}

}  // namespace greenfn
