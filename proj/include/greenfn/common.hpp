#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace greenfn {

/// Numeric knobs shared across the pipeline. Defaults suit desk-scale
/// problems (order <= 10, |shift| <= 10) with smooth coefficients.
struct Tolerances {
  double ode_tol = 1e-10;       ///< integrator absolute and relative tolerance
  double quad_tol = 1e-10;      ///< quadrature absolute tolerance
  double resonance_tol = 1e-9;  ///< |det K| cutoff, relative to the matrix scale
  double spectral_tol = 1e-9;   ///< |det(I-A)| cutoff, relative to max row sum
  double sign_tol = 1e-10;      ///< strict-sign classification tolerance
  double bisect_tol = 1e-6;     ///< bisection width for sign-boundary estimates
};

/// Which one-sided value a kernel reports on the diagonal t = s. Off the
/// diagonal both conventions agree; the jump across t = s is carried by the
/// highest derivative, so for first-order problems the kernel value itself
/// is convention dependent on the diagonal.
enum class TieBranch {
  t_ge_s,  ///< report the limit from t >= s (default)
  t_lt_s,  ///< report the limit from t < s
};

/// The shift M is an eigenvalue of the two-point problem: the Green's
/// function g_M and the omega_i solutions do not exist.
class ResonantProblem : public std::runtime_error {
 public:
  ResonantProblem(double det, const std::string& what)
      : std::runtime_error(what), det_(det) {}
  double determinant() const { return det_; }

 private:
  double det_;
};

/// det(I - A) vanished: the non-local problem has no unique solution for
/// the given parameter vector.
class SpectralObstruction : public std::runtime_error {
 public:
  SpectralObstruction(double det, const std::string& what)
      : std::runtime_error(what), det_(det) {}
  double determinant() const { return det_; }

 private:
  double det_;
};

/// Adaptive quadrature hit its subdivision limit before reaching the
/// requested tolerance.
class QuadratureError : public std::runtime_error {
 public:
  QuadratureError(double error_estimate, const std::string& what)
      : std::runtime_error(what), error_estimate_(error_estimate) {}
  double error_estimate() const { return error_estimate_; }

 private:
  double error_estimate_;
};

/// The step-size controller underflowed; `where()` reports the time the
/// integration could not advance past.
class IntegratorFailure : public std::runtime_error {
 public:
  IntegratorFailure(double where, const std::string& what)
      : std::runtime_error(what), where_(where) {}
  double where() const { return where_; }

 private:
  double where_;
};

/// Uniform grid with both endpoints included (count >= 2), or {lo} for
/// count == 1.
inline std::vector<double> linspace(double lo, double hi, int count) {
  std::vector<double> out;
  if (count <= 0) return out;
  out.reserve(static_cast<std::size_t>(count));
  if (count == 1) {
    out.push_back(lo);
    return out;
  }
  const double h = (hi - lo) / (count - 1);
  for (int i = 0; i < count; ++i) out.push_back(lo + h * i);
  out.back() = hi;
  return out;
}

}  // namespace greenfn
