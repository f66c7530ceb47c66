#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "greenfn/common.hpp"

namespace greenfn {

using ScalarFn = std::function<double(double)>;

/// The operator T_n[M]u = u^(n) + a_1(t) u^(n-1) + ... + a_n(t) u + M u
/// on the interval [a, b].
struct LinearOdeProblem {
  int order = 1;
  double a = 0.0;
  double b = 1.0;
  std::vector<ScalarFn> coefficients;  ///< a_1 .. a_n; a_k multiplies u^(n-k)
  double shift = 0.0;                  ///< M

  void validate() const {
    if (order < 1) throw std::invalid_argument("problem order must be >= 1");
    if (!(a < b)) throw std::invalid_argument("interval requires a < b");
    if (static_cast<int>(coefficients.size()) != order)
      throw std::invalid_argument("expected exactly " + std::to_string(order) +
                                  " coefficient functions");
    for (const ScalarFn& c : coefficients)
      if (!c) throw std::invalid_argument("coefficient function is empty");
  }
};

struct OdeOptions {
  double abs_tol = 1e-10;
  double rel_tol = 1e-10;
  int max_steps = 1000000;
};

namespace detail {
struct TrajectoryFactory;
}

/// Piecewise-quartic dense output of an adaptive Dormand-Prince 5(4) run.
/// Immutable after construction; safe for concurrent read-only evaluation.
///
/// A trajectory for a single solution of an order-n problem stores channels
/// 0..n-1 holding u, u', ..., u^(n-1); this is the spec's SolutionTrajectory.
class DenseTrajectory {
 public:
  DenseTrajectory() = default;

  int channels() const { return channels_; }
  double t_begin() const { return t0_; }
  double t_end() const { return t1_; }
  std::size_t step_count() const { return nodes_.empty() ? 0 : nodes_.size() - 1; }

  /// Interpolated value of one state channel.
  double value(int channel, double t) const {
    if (nodes_.empty()) {
      check_point_domain(t);
      return point_[static_cast<std::size_t>(channel)];
    }
    auto [idx, theta, h] = locate(t);
    (void)h;
    const double* c = cont(idx, channel);
    const double th1 = 1.0 - theta;
    return c[0 * channels_] +
           theta * (c[1 * channels_] +
                    th1 * (c[2 * channels_] +
                           theta * (c[3 * channels_] + th1 * c[4 * channels_])));
  }

  /// d/dt of the interpolant of one channel. For channel k of a solution
  /// trajectory this approximates u^(k+1) independently of channel k+1,
  /// which is what residual checks need.
  double derivative(int channel, double t) const {
    if (nodes_.empty())
      throw std::out_of_range("derivative of a zero-length trajectory is undefined");
    auto [idx, theta, h] = locate(t);
    const double* c = cont(idx, channel);
    const double th1 = 1.0 - theta;
    const double d = c[1 * channels_] + (1.0 - 2.0 * theta) * c[2 * channels_] +
                     theta * (2.0 - 3.0 * theta) * c[3 * channels_] +
                     2.0 * theta * th1 * (1.0 - 2.0 * theta) * c[4 * channels_];
    return d / h;
  }

  /// New trajectory on the same mesh whose channel j is
  /// sum_k weights[k] * channel(k * out_channels + j). Exact for dense
  /// output of linear systems integrated on a shared mesh.
  DenseTrajectory linear_combination(std::span<const double> weights,
                                     int out_channels) const {
    const int blocks = static_cast<int>(weights.size());
    if (blocks * out_channels != channels_)
      throw std::invalid_argument("weights/block size mismatch");
    DenseTrajectory out;
    out.channels_ = out_channels;
    out.t0_ = t0_;
    out.t1_ = t1_;
    out.nodes_ = nodes_;
    if (nodes_.empty()) {
      out.point_.assign(static_cast<std::size_t>(out_channels), 0.0);
      for (int k = 0; k < blocks; ++k)
        for (int j = 0; j < out_channels; ++j)
          out.point_[static_cast<std::size_t>(j)] +=
              weights[static_cast<std::size_t>(k)] *
              point_[static_cast<std::size_t>(k * out_channels + j)];
      return out;
    }
    const std::size_t rows = step_count() * 5;
    out.cont_.assign(rows * static_cast<std::size_t>(out_channels), 0.0);
    for (std::size_t r = 0; r < rows; ++r)
      for (int k = 0; k < blocks; ++k) {
        const double w = weights[static_cast<std::size_t>(k)];
        for (int j = 0; j < out_channels; ++j)
          out.cont_[r * static_cast<std::size_t>(out_channels) +
                    static_cast<std::size_t>(j)] +=
              w * cont_[r * static_cast<std::size_t>(channels_) +
                        static_cast<std::size_t>(k * out_channels + j)];
      }
    return out;
  }

  /// Degenerate trajectory over a zero-length domain (a single state).
  static DenseTrajectory single_point(double t, std::vector<double> state) {
    DenseTrajectory out;
    out.channels_ = static_cast<int>(state.size());
    out.t0_ = out.t1_ = t;
    out.point_ = std::move(state);
    return out;
  }

 private:
  friend struct detail::TrajectoryFactory;

  int channels_ = 0;
  double t0_ = 0.0;
  double t1_ = 0.0;
  std::vector<double> nodes_;  ///< accepted step boundaries, size step_count()+1
  std::vector<double> cont_;   ///< [step][coef 0..4][channel]
  std::vector<double> point_;  ///< state for the zero-length case

  const double* cont(std::size_t step, int channel) const {
    return &cont_[(step * 5) * static_cast<std::size_t>(channels_) +
                  static_cast<std::size_t>(channel)];
  }

  double domain_slack() const {
    return 1e-9 * (t1_ - t0_) + 1e-14 * (std::abs(t0_) + std::abs(t1_)) + 1e-300;
  }

  void check_point_domain(double t) const {
    if (std::abs(t - t0_) > domain_slack())
      throw std::out_of_range("evaluation time outside trajectory domain");
  }

  struct Location {
    std::size_t step;
    double theta;
    double h;
  };

  Location locate(double t) const {
    const double slack = domain_slack();
    if (t < t0_ - slack || t > t1_ + slack)
      throw std::out_of_range("evaluation time outside trajectory domain");
    const double tc = std::clamp(t, t0_, t1_);
    auto it = std::upper_bound(nodes_.begin(), nodes_.end(), tc);
    std::size_t idx = static_cast<std::size_t>(std::distance(nodes_.begin(), it));
    idx = std::clamp<std::size_t>(idx, 1, nodes_.size() - 1) - 1;
    const double h = nodes_[idx + 1] - nodes_[idx];
    return {idx, (tc - nodes_[idx]) / h, h};
  }
};

namespace detail {

struct TrajectoryFactory {
  static DenseTrajectory make(int channels, double t0, double t1,
                              std::vector<double> nodes, std::vector<double> cont) {
    DenseTrajectory out;
    out.channels_ = channels;
    out.t0_ = t0;
    out.t1_ = t1;
    out.nodes_ = std::move(nodes);
    out.cont_ = std::move(cont);
    return out;
  }
};

// Dormand-Prince 5(4) tableau with the Hairer-Norsett-Wanner dense-output
// coefficients.
struct Dopri5 {
  static constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0,
                          c5 = 8.0 / 9.0;
  static constexpr double a21 = 1.0 / 5.0;
  static constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
  static constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
  static constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0,
                          a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
  static constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0,
                          a63 = 46732.0 / 5247.0, a64 = 49.0 / 176.0,
                          a65 = -5103.0 / 18656.0;
  static constexpr double b1 = 35.0 / 384.0, b3 = 500.0 / 1113.0, b4 = 125.0 / 192.0,
                          b5 = -2187.0 / 6784.0, b6 = 11.0 / 84.0;
  static constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                          e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
  static constexpr double d1 = -12715105075.0 / 11282082432.0,
                          d3 = 87487479700.0 / 32700410799.0,
                          d4 = -10690763975.0 / 1880347072.0,
                          d5 = 701980252875.0 / 199316789632.0,
                          d6 = -1453857185.0 / 822651844.0,
                          d7 = 69997945.0 / 29380423.0;
};

}  // namespace detail

/// Integrate y' = rhs(t, y) from (t0, y0) to t1 > t0 with dense output on
/// every accepted step. Rhs signature: void(double t, std::span<const double> y,
/// std::span<double> dydt). Throws IntegratorFailure on step-size underflow.
template <class Rhs>
DenseTrajectory integrate_dense(Rhs&& rhs, std::span<const double> y0, double t0,
                                double t1, const OdeOptions& opt = {}) {
  using T = detail::Dopri5;
  const std::size_t m = y0.size();
  const double span = t1 - t0;
  if (span < 0.0) throw std::invalid_argument("integration requires t1 >= t0");
  if (span == 0.0)
    return DenseTrajectory::single_point(t0, std::vector<double>(y0.begin(), y0.end()));

  std::vector<double> nodes{t0};
  std::vector<double> cont;

  std::vector<double> y(y0.begin(), y0.end()), ynew(m), k1(m), k2(m), k3(m), k4(m),
      k5(m), k6(m), k7(m), work(m);
  auto call = [&rhs](double t, const std::vector<double>& yy, std::vector<double>& f) {
    rhs(t, std::span<const double>(yy), std::span<double>(f));
  };

  call(t0, y, k1);

  // Starting step size (Hairer's hinit, simplified for one-way sweeps).
  double h;
  {
    double d0 = 0.0, d1 = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double sc = opt.abs_tol + opt.rel_tol * std::abs(y[i]);
      d0 += (y[i] / sc) * (y[i] / sc);
      d1 += (k1[i] / sc) * (k1[i] / sc);
    }
    d0 = std::sqrt(d0 / static_cast<double>(m));
    d1 = std::sqrt(d1 / static_cast<double>(m));
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 * span : 0.01 * (d0 / d1);
    h0 = std::min(h0, span);
    for (std::size_t i = 0; i < m; ++i) work[i] = y[i] + h0 * k1[i];
    call(t0 + h0, work, k2);
    double d2 = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double sc = opt.abs_tol + opt.rel_tol * std::abs(y[i]);
      d2 += ((k2[i] - k1[i]) / sc) * ((k2[i] - k1[i]) / sc);
    }
    d2 = std::sqrt(d2 / static_cast<double>(m)) / h0;
    const double dm = std::max(d1, d2);
    const double h1 = dm <= 1e-15 ? std::max(1e-6 * span, h0 * 1e-3)
                                  : std::pow(0.01 / dm, 0.2);
    h = std::min({100.0 * h0, h1, span});
  }

  double t = t0;
  const double h_floor = 1e-14 * std::max(span, std::abs(t0) + std::abs(t1));
  double facmax = 10.0;
  int steps = 0;

  while (t < t1) {
    if (++steps > opt.max_steps)
      throw IntegratorFailure(t, "integration exceeded the step budget");
    if (h < h_floor)
      throw IntegratorFailure(t, "step size underflow near t = " + std::to_string(t));
    bool last = false;
    if (t + h >= t1) {
      h = t1 - t;
      last = true;
    }

    for (std::size_t i = 0; i < m; ++i) work[i] = y[i] + h * T::a21 * k1[i];
    call(t + T::c2 * h, work, k2);
    for (std::size_t i = 0; i < m; ++i)
      work[i] = y[i] + h * (T::a31 * k1[i] + T::a32 * k2[i]);
    call(t + T::c3 * h, work, k3);
    for (std::size_t i = 0; i < m; ++i)
      work[i] = y[i] + h * (T::a41 * k1[i] + T::a42 * k2[i] + T::a43 * k3[i]);
    call(t + T::c4 * h, work, k4);
    for (std::size_t i = 0; i < m; ++i)
      work[i] = y[i] + h * (T::a51 * k1[i] + T::a52 * k2[i] + T::a53 * k3[i] +
                            T::a54 * k4[i]);
    call(t + T::c5 * h, work, k5);
    for (std::size_t i = 0; i < m; ++i)
      work[i] = y[i] + h * (T::a61 * k1[i] + T::a62 * k2[i] + T::a63 * k3[i] +
                            T::a64 * k4[i] + T::a65 * k5[i]);
    call(t + h, work, k6);
    for (std::size_t i = 0; i < m; ++i)
      ynew[i] = y[i] + h * (T::b1 * k1[i] + T::b3 * k3[i] + T::b4 * k4[i] +
                            T::b5 * k5[i] + T::b6 * k6[i]);
    call(t + h, ynew, k7);

    double err = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double ei = h * (T::e1 * k1[i] + T::e3 * k3[i] + T::e4 * k4[i] +
                             T::e5 * k5[i] + T::e6 * k6[i] + T::e7 * k7[i]);
      const double sc =
          opt.abs_tol + opt.rel_tol * std::max(std::abs(y[i]), std::abs(ynew[i]));
      err += (ei / sc) * (ei / sc);
    }
    err = std::sqrt(err / static_cast<double>(m));
    if (!std::isfinite(err)) err = 1e10;

    if (err <= 1.0) {
      // accepted: store the dense-output coefficients for this step
      const std::size_t base = cont.size();
      cont.resize(base + 5 * m);
      for (std::size_t i = 0; i < m; ++i) {
        const double ydiff = ynew[i] - y[i];
        const double bspl = h * k1[i] - ydiff;
        cont[base + 0 * m + i] = y[i];
        cont[base + 1 * m + i] = ydiff;
        cont[base + 2 * m + i] = bspl;
        cont[base + 3 * m + i] = ydiff - h * k7[i] - bspl;
        cont[base + 4 * m + i] =
            h * (T::d1 * k1[i] + T::d3 * k3[i] + T::d4 * k4[i] + T::d5 * k5[i] +
                 T::d6 * k6[i] + T::d7 * k7[i]);
      }
      t = last ? t1 : t + h;
      nodes.push_back(t);
      y.swap(ynew);
      k1.swap(k7);  // FSAL
      const double fac =
          err == 0.0 ? facmax
                     : std::min(facmax, std::max(0.2, 0.9 * std::pow(err, -0.2)));
      h *= fac;
      facmax = 10.0;
    } else {
      h *= std::max(0.2, std::min(1.0, 0.9 * std::pow(err, -0.2)));
      facmax = 1.0;
    }
  }
  return detail::TrajectoryFactory::make(static_cast<int>(m), t0, t1, std::move(nodes),
                                         std::move(cont));
}

/// A trajectory of a single solution: channel j holds u^(j), j = 0..n-1.
using SolutionTrajectory = DenseTrajectory;

namespace detail {
// Differentiating the quartic interpolant loses one order of h, so steps
// accepted at the user tolerance would leave derivative queries (residual
// checks) at ~tol^(4/5). The step criterion is tightened by this factor to
// keep them within the advertised tolerance.
inline constexpr double kInterpDerivSafety = 1e-2;
}  // namespace detail

namespace detail {

// Right-hand side of the first-order system equivalent to T_n[M]u = sigma,
// replicated over `blocks` independent solution blocks that share the
// coefficient evaluations. Block k occupies state indices [k*n, k*n + n).
class LinearOdeRhs {
 public:
  LinearOdeRhs(const LinearOdeProblem& problem, int blocks, const ScalarFn* sigma = nullptr)
      : problem_(problem), blocks_(blocks), sigma_(sigma),
        coeff_(static_cast<std::size_t>(problem.order)) {}

  void operator()(double t, std::span<const double> y, std::span<double> f) const {
    const int n = problem_.order;
    for (int k = 0; k < n; ++k) coeff_[static_cast<std::size_t>(k)] =
        problem_.coefficients[static_cast<std::size_t>(k)](t);
    const double force = sigma_ ? (*sigma_)(t) : 0.0;
    for (int blk = 0; blk < blocks_; ++blk) {
      const int off = blk * n;
      for (int i = 0; i + 1 < n; ++i) f[off + i] = y[off + i + 1];
      double top = force - problem_.shift * y[off];
      for (int k = 1; k <= n; ++k)
        top -= coeff_[static_cast<std::size_t>(k - 1)] * y[off + n - k];
      f[off + n - 1] = top;
    }
  }

 private:
  const LinearOdeProblem& problem_;
  int blocks_;
  const ScalarFn* sigma_;
  mutable std::vector<double> coeff_;  // scratch; one integration per thread
};

}  // namespace detail

/// The canonical fundamental system: n solutions of T_n[M]u = 0 with
/// y_k^(j)(a) = 1 if j == k-1 else 0, integrated jointly on one adaptive
/// mesh. Basis k (0-based) occupies channels [k*n, k*n + n).
struct FundamentalSystem {
  LinearOdeProblem problem;
  DenseTrajectory trajectory;
  double tol = 1e-10;

  int order() const { return problem.order; }

  /// y_{basis+1}^(deriv)(t), 0-based basis index.
  double basis_value(int basis, int deriv, double t) const {
    return trajectory.value(basis * problem.order + deriv, t);
  }

  /// d/dt of the interpolant of y_{basis+1}^(deriv).
  double basis_derivative(int basis, int deriv, double t) const {
    return trajectory.derivative(basis * problem.order + deriv, t);
  }

  /// The solution sum_k coeffs[k] y_{k+1} as a standalone trajectory.
  SolutionTrajectory combine(std::span<const double> coeffs) const {
    return trajectory.linear_combination(coeffs, problem.order);
  }
};

inline FundamentalSystem integrate_fundamental_system(const LinearOdeProblem& problem,
                                                      double tol) {
  problem.validate();
  if (!(tol > 0.0)) throw std::invalid_argument("tolerance must be positive");
  const int n = problem.order;
  std::vector<double> y0(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0.0);
  for (int k = 0; k < n; ++k) y0[static_cast<std::size_t>(k * n + k)] = 1.0;
  detail::LinearOdeRhs rhs(problem, n);
  OdeOptions opt;
  opt.abs_tol = opt.rel_tol = tol * detail::kInterpDerivSafety;
  return FundamentalSystem{problem, integrate_dense(rhs, y0, problem.a, problem.b, opt),
                           tol};
}

/// The solution on [s, b] of T_n[M]u = 0 with u^(j)(s) = 0 for j < n-1 and
/// u^(n-1)(s) = 1 (the variation-of-constants impulse kernel).
inline SolutionTrajectory cauchy_function(const LinearOdeProblem& problem, double s,
                                          double tol) {
  problem.validate();
  if (s < problem.a || s > problem.b)
    throw std::invalid_argument("cauchy seed s must lie in [a, b]");
  const int n = problem.order;
  std::vector<double> y0(static_cast<std::size_t>(n), 0.0);
  y0.back() = 1.0;
  if (s >= problem.b) return DenseTrajectory::single_point(problem.b, std::move(y0));
  detail::LinearOdeRhs rhs(problem, 1);
  OdeOptions opt;
  opt.abs_tol = opt.rel_tol = tol * detail::kInterpDerivSafety;
  return integrate_dense(rhs, y0, s, problem.b, opt);
}

/// T_n[M]u(t) - sigma(t), with u^(n) recovered by differentiating the dense
/// interpolant of the u^(n-1) channel. Verification utility: it does not use
/// the ODE to produce the highest derivative.
inline double residual(const LinearOdeProblem& problem, const SolutionTrajectory& traj,
                       double t, const ScalarFn* sigma = nullptr) {
  const int n = problem.order;
  if (traj.channels() < n)
    throw std::invalid_argument("trajectory has too few channels for the problem");
  double r = traj.derivative(n - 1, t) + problem.shift * traj.value(0, t);
  for (int k = 1; k <= n; ++k)
    r += problem.coefficients[static_cast<std::size_t>(k - 1)](t) * traj.value(n - k, t);
  if (sigma) r -= (*sigma)(t);
  return r;
}

}  // namespace greenfn
