#pragma once

#include <Eigen/Dense>
#include <bit>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <unordered_map>
#include <utility>
#include <vector>

#include "greenfn/common.hpp"
#include "greenfn/functional.hpp"
#include "greenfn/ode.hpp"
#include "greenfn/two_point.hpp"

namespace greenfn {

/// Problem data for T_n[M]u = sigma with B_i(u) = delta_i C_i(u).
struct NonlocalSpec {
  LinearOdeProblem problem;
  BoundaryOperatorSet boundary;
  Eigen::VectorXd deltas;
  std::vector<LinearFunctional> functionals;  ///< n entries, or 1 with shared_functional
  bool shared_functional = false;
  Tolerances tols;

  void validate() const {
    problem.validate();
    boundary.validate(problem.order);
    const int n = problem.order;
    if (deltas.size() != n)
      throw std::invalid_argument("delta vector length must equal the problem order");
    if (shared_functional) {
      if (functionals.size() != 1 && static_cast<int>(functionals.size()) != n)
        throw std::invalid_argument("shared functional expects one entry (or n copies)");
    } else if (static_cast<int>(functionals.size()) != n) {
      throw std::invalid_argument("expected one functional per boundary condition");
    }
    for (const LinearFunctional& c : functionals)
      c.validate_support(problem.a, problem.b);
  }
};

/// Matrix of functional values (i, j) = C_i(omega_j).
inline Eigen::MatrixXd functional_matrix(const std::vector<LinearFunctional>& cs,
                                         const std::vector<OmegaSolution>& omegas,
                                         double quad_tol) {
  const int n = static_cast<int>(omegas.size());
  Eigen::MatrixXd m(static_cast<int>(cs.size()), n);
  for (int i = 0; i < static_cast<int>(cs.size()); ++i)
    for (int j = 0; j < n; ++j)
      m(i, j) = cs[static_cast<std::size_t>(i)](omegas[static_cast<std::size_t>(j)].trajectory,
                                                quad_tol);
  return m;
}

/// A(i, j) = delta_j * C_i(omega_j).
inline Eigen::MatrixXd build_A(const Eigen::VectorXd& deltas,
                               const Eigen::MatrixXd& comega) {
  return comega * deltas.asDiagonal();
}

/// det(I - A) plus the uniqueness verdict. A failing check certifies that
/// the non-local problem has no unique solution (1 is an eigenvalue of A).
/// The threshold is relative to 1 + max row sum of A: near the obstruction
/// I - A itself shrinks, so its own norm cannot serve as the scale.
inline std::pair<double, bool> spectrum_check(const Eigen::MatrixXd& a,
                                              double tol = 1e-9) {
  const Eigen::MatrixXd ia = Eigen::MatrixXd::Identity(a.rows(), a.cols()) - a;
  const double det = Eigen::PartialPivLU<Eigen::MatrixXd>(ia).determinant();
  const double scale = 1.0 + a.cwiseAbs().rowwise().sum().maxCoeff();
  return {det, std::abs(det) > tol * scale};
}

/// Everything of the non-local construction that does not depend on the
/// delta vector: g_M, the omega_i, C_i(omega_j), and the cache of slice
/// values [C_j(g_M(., s))]. Share one assembly across many delta vectors
/// (parameter scans, finite differences in delta).
class NonlocalAssembly {
 public:
  NonlocalAssembly(const LinearOdeProblem& problem, const BoundaryOperatorSet& bc,
                   std::vector<LinearFunctional> functionals, bool shared,
                   Tolerances tols = {}, TieBranch branch = TieBranch::t_ge_s)
      : green_(build_green(integrate_fundamental_system(problem, tols.ode_tol), bc, tols,
                           branch)),
        shared_(shared),
        tols_(tols),
        cache_(std::make_unique<Cache>()) {
    const int n = problem.order;
    if (shared_ && functionals.size() == 1)
      functionals.resize(static_cast<std::size_t>(n), functionals.front());
    if (static_cast<int>(functionals.size()) != n)
      throw std::invalid_argument("expected one functional per boundary condition");
    for (const LinearFunctional& c : functionals) c.validate_support(problem.a, problem.b);
    functionals_ = std::move(functionals);
    omegas_ = all_omegas(green_);
    comega_ = functional_matrix(functionals_, omegas_, tols_.quad_tol);
  }

  int order() const { return green_.order(); }
  bool shared_functional() const { return shared_; }
  const TwoPointGreen& green() const { return green_; }
  const std::vector<OmegaSolution>& omegas() const { return omegas_; }
  const std::vector<LinearFunctional>& functionals() const { return functionals_; }
  const Eigen::MatrixXd& comega() const { return comega_; }
  const Tolerances& tolerances() const { return tols_; }

  /// Cached vector [C_j(g_M(., s))], j = 0..n-1.
  const Eigen::VectorXd& slice_values(double s) const {
    const std::uint64_t key = std::bit_cast<std::uint64_t>(s);
    std::lock_guard<std::mutex> lock(cache_->mutex);
    auto it = cache_->map.find(key);
    if (it == cache_->map.end()) {
      auto values = std::make_shared<Eigen::VectorXd>(order());
      if (shared_) {
        const double v = functional_of_green_slice(functionals_.front(), green_, s,
                                                   tols_.quad_tol);
        values->setConstant(v);
      } else {
        for (int j = 0; j < order(); ++j)
          (*values)(j) = functional_of_green_slice(functionals_[static_cast<std::size_t>(j)],
                                                   green_, s, tols_.quad_tol);
      }
      it = cache_->map.emplace(key, std::move(values)).first;
    }
    return *it->second;
  }

  /// Union of the functionals' split points (for quadratures in s).
  std::vector<double> functional_split_points() const {
    std::vector<double> out;
    for (const LinearFunctional& c : functionals_) {
      std::vector<double> sp = c.split_points();
      out.insert(out.end(), sp.begin(), sp.end());
    }
    return out;
  }

 private:
  struct Cache {
    std::mutex mutex;
    std::unordered_map<std::uint64_t, std::shared_ptr<const Eigen::VectorXd>> map;
  };

  TwoPointGreen green_;
  std::vector<LinearFunctional> functionals_;
  bool shared_;
  Tolerances tols_;
  std::vector<OmegaSolution> omegas_;
  Eigen::MatrixXd comega_;
  mutable std::unique_ptr<Cache> cache_;
};

/// The non-local Green's function
///   G(t, s) = g_M(t, s) + sum_i sum_j delta_i b_ij omega_i(t) C_j(g_M(., s))
/// with B = (I - A)^{-1}. Read-only evaluation, safe for concurrent use.
class NonlocalGreen {
 public:
  double operator()(double t, double s) const { return eval(t, s, 0, false, {}); }

  /// Evaluate with an explicit tie-branch convention; only the two-point
  /// part is branch dependent, the correction term is continuous in t.
  double value(double t, double s, TieBranch branch) const {
    return eval(t, s, 0, false, branch);
  }

  /// d^j G / dt^j, j <= n-1.
  double t_derivative(double t, double s, int deriv) const {
    return eval(t, s, deriv, true, {});
  }

  const NonlocalAssembly& assembly() const { return *assembly_; }
  const TwoPointGreen& two_point() const { return assembly_->green(); }
  const std::vector<OmegaSolution>& omegas() const { return assembly_->omegas(); }
  const Eigen::VectorXd& deltas() const { return deltas_; }
  const Eigen::MatrixXd& A() const { return a_; }
  const Eigen::MatrixXd& resolvent() const { return b_; }
  double det_IA() const { return det_; }
  bool scalar_path() const { return scalar_; }
  double scalar_denominator() const { return scalar_denom_; }
  Eigen::VectorXd slice_values(double s) const { return assembly_->slice_values(s); }
  std::shared_ptr<const NonlocalAssembly> assembly_ptr() const { return assembly_; }

 private:
  friend NonlocalGreen make_nonlocal_green(std::shared_ptr<const NonlocalAssembly>,
                                           Eigen::VectorXd);
  friend NonlocalGreen make_single_functional_green(std::shared_ptr<const NonlocalAssembly>,
                                                    Eigen::VectorXd);

  double eval(double t, double s, int deriv, bool use_deriv,
              std::optional<TieBranch> branch) const {
    const TwoPointGreen& g = assembly_->green();
    const double base = use_deriv ? g.t_derivative(t, s, deriv)
                                  : g.value(t, s, branch.value_or(g.branch()));
    const Eigen::VectorXd& slices = assembly_->slice_values(s);
    const std::vector<OmegaSolution>& om = assembly_->omegas();
    const int n = static_cast<int>(om.size());
    if (scalar_) {
      double num = 0.0;
      for (int i = 0; i < n; ++i)
        num += deltas_(i) * om[static_cast<std::size_t>(i)].trajectory.value(deriv, t);
      return base + num / scalar_denom_ * slices(0);
    }
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      const double wi = deltas_(i) * om[static_cast<std::size_t>(i)].trajectory.value(deriv, t);
      double row = 0.0;
      for (int j = 0; j < n; ++j) row += b_(i, j) * slices(j);
      acc += wi * row;
    }
    return base + acc;
  }

  std::shared_ptr<const NonlocalAssembly> assembly_;
  Eigen::VectorXd deltas_;
  Eigen::MatrixXd a_;
  Eigen::MatrixXd b_;
  double det_ = 1.0;
  bool scalar_ = false;
  double scalar_denom_ = 1.0;
};

/// General path: materialise A and the resolvent B = (I - A)^{-1}.
/// Throws SpectralObstruction when det(I - A) is below threshold.
inline NonlocalGreen make_nonlocal_green(std::shared_ptr<const NonlocalAssembly> assembly,
                                         Eigen::VectorXd deltas) {
  const int n = assembly->order();
  if (deltas.size() != n)
    throw std::invalid_argument("delta vector length must equal the problem order");
  NonlocalGreen g;
  g.assembly_ = std::move(assembly);
  g.a_ = build_A(deltas, g.assembly_->comega());
  auto [det, ok] = spectrum_check(g.a_, g.assembly_->tolerances().spectral_tol);
  g.det_ = det;
  if (!ok)
    throw SpectralObstruction(det, "det(I - A) vanished: 1 is an eigenvalue of A");
  const Eigen::MatrixXd ia = Eigen::MatrixXd::Identity(n, n) - g.a_;
  g.b_ = Eigen::PartialPivLU<Eigen::MatrixXd>(ia).inverse();
  g.deltas_ = std::move(deltas);
  return g;
}

/// Single-functional fast path (all C_i equal): the resolvent collapses to
/// the scalar 1 / (1 - sum_j delta_j C(omega_j)); the kernel is
///   G = g_M + (sum_i delta_i omega_i(t)) / (1 - sum_j delta_j C(omega_j)) * C(g_M(., s)).
inline NonlocalGreen make_single_functional_green(
    std::shared_ptr<const NonlocalAssembly> assembly, Eigen::VectorXd deltas) {
  if (!assembly->shared_functional())
    throw std::logic_error("single-functional path requires a shared functional");
  const int n = assembly->order();
  if (deltas.size() != n)
    throw std::invalid_argument("delta vector length must equal the problem order");
  NonlocalGreen g;
  g.assembly_ = std::move(assembly);
  g.scalar_ = true;
  double sum = 0.0, scale = 1.0;
  for (int j = 0; j < n; ++j) {
    const double term = deltas(j) * g.assembly_->comega()(0, j);
    sum += term;
    scale += std::abs(term);
  }
  g.scalar_denom_ = 1.0 - sum;
  g.det_ = g.scalar_denom_;  // det(I - A) of the rank-one A, exactly
  if (!(std::abs(g.scalar_denom_) >
        g.assembly_->tolerances().spectral_tol * scale))
    throw SpectralObstruction(g.scalar_denom_,
                              "sum_j delta_j C(omega_j) = 1: no unique solution");
  g.a_ = build_A(deltas, g.assembly_->comega());
  // (I - u v^T)^{-1} = I + u v^T / (1 - v^T u), the scalar-resolvent algebra
  Eigen::VectorXd v(n);
  for (int j = 0; j < n; ++j) v(j) = deltas(j) * g.assembly_->comega()(0, j);
  g.b_ = Eigen::MatrixXd::Identity(n, n) +
         Eigen::VectorXd::Ones(n) * v.transpose() / g.scalar_denom_;
  g.deltas_ = std::move(deltas);
  return g;
}

inline std::shared_ptr<const NonlocalAssembly> make_assembly(const NonlocalSpec& spec) {
  spec.validate();
  return std::make_shared<const NonlocalAssembly>(spec.problem, spec.boundary,
                                                  spec.functionals, spec.shared_functional,
                                                  spec.tols);
}

inline NonlocalGreen build_nonlocal_green(const NonlocalSpec& spec) {
  return make_nonlocal_green(make_assembly(spec), spec.deltas);
}

inline NonlocalGreen single_functional_green(const NonlocalSpec& spec) {
  if (!spec.shared_functional)
    throw std::logic_error("single-functional path requires a shared functional");
  return make_single_functional_green(make_assembly(spec), spec.deltas);
}

/// u(t) = int_a^b G(t, s) sigma(s) ds evaluated by quadrature at one t,
/// with the s-integration split at the kink s = t.
inline double kernel_solution_value(const NonlocalGreen& g, const ScalarFn& sigma,
                                    double t, std::span<const double> extra_splits = {}) {
  const LinearOdeProblem& p = g.two_point().problem();
  std::vector<double> splits{t};
  splits.insert(splits.end(), extra_splits.begin(), extra_splits.end());
  return integrate_or_throw([&](double s) { return g(t, s) * sigma(s); }, p.a, p.b,
                            g.assembly().tolerances().quad_tol, splits);
}

/// Solve the non-local problem for a forcing term sigma. The kernel formula
/// fixes the initial data u^(j)(a) = int d_{j+1}(s) sigma(s) ds
/// + sum_i delta_i omega_i^(j)(a) (B int [C(g_M(., s))] sigma ds)_i, and the
/// trajectory is then produced by integrating T_n[M]u = sigma from a.
/// `extra_split` perturbs the quadrature panelisation (results must agree).
inline SolutionTrajectory solve(const NonlocalGreen& g, const ScalarFn& sigma,
                                std::span<const double> extra_split = {}) {
  const NonlocalAssembly& assembly = g.assembly();
  const TwoPointGreen& green = assembly.green();
  const LinearOdeProblem& p = green.problem();
  const int n = p.order;
  const double quad_tol = assembly.tolerances().quad_tol;

  std::vector<double> splits = assembly.functional_split_points();
  splits.insert(splits.end(), extra_split.begin(), extra_split.end());

  // v^(j)(a) = int d_{j+1}(s) sigma(s) ds: at t = a only the
  // fundamental-system part of g contributes, and its initial data is the
  // identity.
  Eigen::VectorXd v0(n);
  for (int j = 0; j < n; ++j)
    v0(j) = integrate_or_throw(
        [&](double s) { return green.slice_coefficients(s)(j) * sigma(s); }, p.a, p.b,
        quad_tol, splits);

  // C_l(v) = int C_l(g_M(., s)) sigma(s) ds
  Eigen::VectorXd cv(n);
  for (int l = 0; l < n; ++l)
    cv(l) = integrate_or_throw(
        [&](double s) { return assembly.slice_values(s)(l) * sigma(s); }, p.a, p.b,
        quad_tol, splits);

  Eigen::VectorXd r = g.scalar_path()
                          ? Eigen::VectorXd::Constant(n, cv(0) / g.scalar_denominator())
                          : Eigen::VectorXd(g.resolvent() * cv);

  std::vector<double> u0(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    double acc = v0(j);
    for (int i = 0; i < n; ++i)
      acc += g.deltas()(i) * r(i) *
             g.omegas()[static_cast<std::size_t>(i)].trajectory.value(j, p.a);
    u0[static_cast<std::size_t>(j)] = acc;
  }

  detail::LinearOdeRhs rhs(p, 1, &sigma);
  OdeOptions opt;
  opt.abs_tol = opt.rel_tol = assembly.tolerances().ode_tol * detail::kInterpDerivSafety;
  return integrate_dense(rhs, u0, p.a, p.b, opt);
}

/// Closed-form partial derivative of the single-functional kernel with
/// respect to delta_k (0-based):
///   dG/ddelta_k = [omega_k(t) (1 - sum_j delta_j C(omega_j))
///                  + C(omega_k) sum_j delta_j omega_j(t)]
///                 / (1 - sum_j delta_j C(omega_j))^2 * C(g_M(., s)).
inline double dG_ddelta(const NonlocalGreen& g, int k, double t, double s) {
  const NonlocalAssembly& assembly = g.assembly();
  if (!assembly.shared_functional())
    throw std::logic_error("dG_ddelta requires the shared-functional form");
  const int n = assembly.order();
  if (k < 0 || k >= n) throw std::invalid_argument("delta index out of range");
  double denom = 1.0;
  double weighted = 0.0;
  for (int j = 0; j < n; ++j) {
    denom -= g.deltas()(j) * assembly.comega()(0, j);
    weighted += g.deltas()(j) *
                assembly.omegas()[static_cast<std::size_t>(j)].trajectory.value(0, t);
  }
  const double omega_k =
      assembly.omegas()[static_cast<std::size_t>(k)].trajectory.value(0, t);
  const double c_k = assembly.comega()(0, k);
  return (omega_k * denom + c_k * weighted) / (denom * denom) *
         assembly.slice_values(s)(0);
}

}  // namespace greenfn
