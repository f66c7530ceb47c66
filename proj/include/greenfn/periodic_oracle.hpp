#pragma once

#include <cmath>
#include <stdexcept>

#include "greenfn/common.hpp"

namespace greenfn::periodic {

/// Closed forms for the first-order periodic problem on [0, 1]:
///   u' + M u = sigma,   u(0) - u(1) = delta * int_0^1 u.
/// The spectrum is the line delta = M (including (0, 0)); M = 0 is the
/// unique eigenvalue of the two-point (delta = 0) problem and has its own
/// closed-form kernel.

struct PeriodicParams {
  double shift = 0.0;  ///< M
  double delta = 0.0;
};

/// Parameters closer than this to the spectrum are refused rather than
/// producing huge kernel values.
inline constexpr double kSpectrumGuard = 1e-12;

/// |M| below this uses the M = 0 closed form of the perturbed kernel.
inline constexpr double kShiftSwitch = 1e-8;

/// 1 / (1 - e^{-M}) via expm1, stable for small |M|.
inline double inv_one_minus_exp_neg(double m) { return -1.0 / std::expm1(-m); }

/// The two-point periodic kernel g_M(t, s) for M != 0:
/// e^{-M(t-s)} / (1-e^{-M}) on s <= t, e^{-M(t-s+1)} / (1-e^{-M}) on t < s.
inline double oracle_g(double t, double s, double m,
                       TieBranch branch = TieBranch::t_ge_s) {
  if (std::abs(m) < kSpectrumGuard)
    throw ResonantProblem(0.0, "M = 0 is the eigenvalue of the periodic problem");
  const double inv = inv_one_minus_exp_neg(m);
  const bool first = s < t || (s == t && branch == TieBranch::t_ge_s);
  return first ? std::exp(-m * (t - s)) * inv : std::exp(-m * (t - s + 1.0)) * inv;
}

/// omega_1(t) = g_M(t, 0) = e^{-Mt} / (1 - e^{-M}).
inline double oracle_omega1(double t, double m) {
  if (std::abs(m) < kSpectrumGuard)
    throw ResonantProblem(0.0, "M = 0 is the eigenvalue of the periodic problem");
  return std::exp(-m * t) * inv_one_minus_exp_neg(m);
}

/// The perturbed kernel. For M != 0:
///   G(t,s,delta,M) = delta/(M-delta) * e^{-Mt}/(1-e^{-M}) + g_M(t,s);
/// for M = 0 (delta != 0): s - 1/delta on s <= t, s - 1/delta - 1 on t < s.
inline double oracle_G(double t, double s, PeriodicParams p,
                       TieBranch branch = TieBranch::t_ge_s) {
  const bool first = s < t || (s == t && branch == TieBranch::t_ge_s);
  if (std::abs(p.shift) < kShiftSwitch) {
    if (std::abs(p.delta) < kSpectrumGuard)
      throw SpectralObstruction(0.0, "(M, delta) = (0, 0) lies on the spectrum");
    return first ? s - 1.0 / p.delta : s - 1.0 / p.delta - 1.0;
  }
  if (std::abs(p.delta - p.shift) < kSpectrumGuard)
    throw SpectralObstruction(0.0, "delta = M lies on the spectrum");
  return p.delta / (p.shift - p.delta) * std::exp(-p.shift * t) *
             inv_one_minus_exp_neg(p.shift) +
         oracle_g(t, s, p.shift, branch);
}

/// The three sign boundaries in delta for a given M. G is strictly positive
/// on I x I iff delta in (positive_min, spectrum) and strictly negative iff
/// delta in (spectrum, negative_max); at the endpoints it touches zero on
/// one branch. M = 0 gives the limit values (-1, 0, 1).
struct SignBoundaries {
  double positive_min;
  double spectrum;
  double negative_max;
};

inline SignBoundaries sign_boundaries(double m) {
  if (m == 0.0) return {-1.0, 0.0, 1.0};
  // M/(1-e^M) and M e^M/(e^M - 1) = M/(1 - e^{-M}), both via expm1
  return {-m / std::expm1(m), m, -m / std::expm1(-m)};
}

/// G(t,s,delta,M) + G(1-t,1-s,-delta,-M); the reflected point is evaluated
/// on the mirrored tie branch so the identity also holds on the diagonal.
inline double symmetry_residual(double t, double s, PeriodicParams p) {
  return oracle_G(t, s, p, TieBranch::t_ge_s) +
         oracle_G(1.0 - t, 1.0 - s, {-p.shift, -p.delta}, TieBranch::t_lt_s);
}

/// int_0^1 G(t, s) dt computed exactly from the per-branch exponential
/// slices (equals 1/(M - delta) analytically; -1/delta for M = 0).
inline double oracle_G_time_integral(double s, PeriodicParams p) {
  if (std::abs(p.shift) < kShiftSwitch) {
    if (std::abs(p.delta) < kSpectrumGuard)
      throw SpectralObstruction(0.0, "(M, delta) = (0, 0) lies on the spectrum");
    return -1.0 / p.delta;
  }
  if (std::abs(p.delta - p.shift) < kSpectrumGuard)
    throw SpectralObstruction(0.0, "delta = M lies on the spectrum");
  const double m = p.shift;
  const double inv = inv_one_minus_exp_neg(m);
  const double shared = p.delta / (m - p.delta);
  const double k_lt = (shared + std::exp(m * (s - 1.0))) * inv;  // t < s branch
  const double k_ge = (shared + std::exp(m * s)) * inv;          // t >= s branch
  return k_lt * (-std::expm1(-m * s)) / m +
         k_ge * (std::exp(-m * s) - std::exp(-m)) / m;
}

}  // namespace greenfn::periodic
