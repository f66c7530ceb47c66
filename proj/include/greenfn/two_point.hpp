#pragma once

#include <Eigen/Dense>
#include <bit>
#include <cstdint>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "greenfn/common.hpp"
#include "greenfn/ode.hpp"

namespace greenfn {

/// The two-point boundary operators B_i(u) = sum_j alpha(i,j) u^(j)(a)
/// + beta(i,j) u^(j)(b), i = 0..n-1, j = 0..n-1.
struct BoundaryOperatorSet {
  Eigen::MatrixXd alpha;
  Eigen::MatrixXd beta;

  int order() const { return static_cast<int>(alpha.rows()); }

  void validate(int n) const {
    if (alpha.rows() != n || alpha.cols() != n || beta.rows() != n || beta.cols() != n)
      throw std::invalid_argument("boundary matrices must be n x n");
  }
};

/// B_i applied to a trajectory that exposes derivatives 0..n-1 at both ends.
inline double boundary_apply(const BoundaryOperatorSet& bc, int i,
                             const SolutionTrajectory& u) {
  const int n = bc.order();
  if (u.channels() < n)
    throw std::invalid_argument("trajectory has too few derivative channels");
  const double a = u.t_begin();
  const double b = u.t_end();
  double acc = 0.0;
  for (int j = 0; j < n; ++j)
    acc += bc.alpha(i, j) * u.value(j, a) + bc.beta(i, j) * u.value(j, b);
  return acc;
}

/// Necessary condition for unique solvability: rank [alpha | beta] == n.
inline bool rank_precheck(const BoundaryOperatorSet& bc, double pivot_tol = 1e-12) {
  const int n = bc.order();
  Eigen::MatrixXd stacked(n, 2 * n);
  stacked << bc.alpha, bc.beta;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(stacked);
  lu.setThreshold(pivot_tol);
  return lu.rank() == n;
}

/// K(i, j) = B_i(y_j) over the canonical fundamental system.
inline Eigen::MatrixXd boundary_matrix(const FundamentalSystem& fsys,
                                       const BoundaryOperatorSet& bc) {
  const int n = fsys.order();
  bc.validate(n);
  Eigen::MatrixXd k(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int d = 0; d < n; ++d)
        acc += bc.alpha(i, d) * fsys.basis_value(j, d, fsys.problem.a) +
               bc.beta(i, d) * fsys.basis_value(j, d, fsys.problem.b);
      k(i, j) = acc;
    }
  return k;
}

/// det[B_i(y_j)]; nonzero (beyond a resonance threshold) certifies unique
/// solvability of the two-point problem. The caller interprets magnitude.
inline double uniqueness_determinant(const FundamentalSystem& fsys,
                                     const BoundaryOperatorSet& bc) {
  return Eigen::PartialPivLU<Eigen::MatrixXd>(boundary_matrix(fsys, bc)).determinant();
}

/// The Green's function g_M of the homogeneous two-point problem,
/// represented as g(t, s) = H(t - s) c_s(t) + sum_k d_k(s) y_k(t) with c_s
/// the Cauchy function seeded at s and d(s) solving B_i(g(., s)) = 0.
///
/// Evaluation is lazy: the per-s Cauchy trajectory and coefficient vector
/// are built once and memoised (thread-safe). Everything else is immutable
/// after build_green.
class TwoPointGreen {
 public:
  double operator()(double t, double s) const { return value(t, s, branch_); }

  /// Evaluate under an explicit tie-branch convention (only the diagonal
  /// t = s is affected).
  double value(double t, double s, TieBranch branch) const {
    const Slice& sl = slice(s);
    const int n = order();
    double v = 0.0;
    for (int k = 0; k < n; ++k) v += sl.d(k) * fsys_->basis_value(k, 0, t);
    if (t > s || (t == s && branch == TieBranch::t_ge_s)) v += sl.cauchy.value(0, t);
    return v;
  }

  /// d^j g / dt^j at (t, s), j <= n-1, under the tie-branch convention.
  double t_derivative(double t, double s, int deriv) const {
    const int n = order();
    if (deriv < 0 || deriv >= n)
      throw std::invalid_argument("derivative order must be in [0, n-1]");
    const Slice& sl = slice(s);
    double v = 0.0;
    for (int k = 0; k < n; ++k) v += sl.d(k) * fsys_->basis_value(k, deriv, t);
    if (include_cauchy(t, s)) v += sl.cauchy.value(deriv, t);
    return v;
  }

  /// T_n[M] g(., s) evaluated at t != s by differentiating dense output.
  double ode_residual(double t, double s) const {
    const Slice& sl = slice(s);
    const int n = order();
    const LinearOdeProblem& p = fsys_->problem;
    const bool with_cauchy = include_cauchy(t, s);
    double un = 0.0;
    for (int k = 0; k < n; ++k) un += sl.d(k) * fsys_->basis_derivative(k, n - 1, t);
    if (with_cauchy) un += sl.cauchy.derivative(n - 1, t);
    double r = un + p.shift * (*this)(t, s);
    for (int k = 1; k <= n; ++k)
      r += p.coefficients[static_cast<std::size_t>(k - 1)](t) * t_derivative(t, s, n - k);
    return r;
  }

  /// The coefficient vector d(s) of the fundamental-system part.
  const Eigen::VectorXd& slice_coefficients(double s) const { return slice(s).d; }

  /// Solve K x = rhs against the stored factorization of K(i,j) = B_i(y_j).
  Eigen::VectorXd solve_boundary_system(const Eigen::VectorXd& rhs) const {
    return lu_.solve(rhs);
  }

  int order() const { return fsys_->order(); }
  const FundamentalSystem& fundamental() const { return *fsys_; }
  const LinearOdeProblem& problem() const { return fsys_->problem; }
  const BoundaryOperatorSet& boundary() const { return bc_; }
  const Tolerances& tolerances() const { return tols_; }
  double determinant() const { return det_; }
  TieBranch branch() const { return branch_; }

 private:
  friend TwoPointGreen build_green(FundamentalSystem fsys, BoundaryOperatorSet bc,
                                   Tolerances tols, TieBranch branch);

  struct Slice {
    SolutionTrajectory cauchy;
    Eigen::VectorXd d;
  };

  struct Memo {
    std::mutex mutex;
    std::unordered_map<std::uint64_t, std::shared_ptr<const Slice>> map;
  };

  TwoPointGreen() = default;

  bool include_cauchy(double t, double s) const {
    return t > s || (t == s && branch_ == TieBranch::t_ge_s);
  }

  const Slice& slice(double s) const {
    const LinearOdeProblem& p = fsys_->problem;
    if (s < p.a || s > p.b)
      throw std::out_of_range("slice parameter s outside [a, b]");
    const std::uint64_t key = std::bit_cast<std::uint64_t>(s);
    std::lock_guard<std::mutex> lock(memo_->mutex);
    auto it = memo_->map.find(key);
    if (it == memo_->map.end()) {
      auto built = std::make_shared<Slice>();
      built->cauchy = cauchy_function(p, s, tols_.ode_tol);
      const int n = p.order;
      Eigen::VectorXd rhs(n);
      for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int d = 0; d < n; ++d) acc += bc_.beta(i, d) * built->cauchy.value(d, p.b);
        rhs(i) = -acc;
      }
      built->d = lu_.solve(rhs);
      it = memo_->map.emplace(key, std::move(built)).first;
    }
    return *it->second;
  }

  std::shared_ptr<const FundamentalSystem> fsys_;
  BoundaryOperatorSet bc_;
  Tolerances tols_;
  TieBranch branch_ = TieBranch::t_ge_s;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
  double det_ = 0.0;
  std::unique_ptr<Memo> memo_;
};

/// Assemble g_M. Throws ResonantProblem when |det[B_i(y_j)]| falls below the
/// resonance threshold (M is an eigenvalue: g_M and the omega_i do not
/// exist), and std::invalid_argument when [alpha|beta] is rank deficient.
inline TwoPointGreen build_green(FundamentalSystem fsys, BoundaryOperatorSet bc,
                                 Tolerances tols = {},
                                 TieBranch branch = TieBranch::t_ge_s) {
  bc.validate(fsys.order());
  if (!rank_precheck(bc))
    throw std::invalid_argument("boundary operator block [alpha|beta] is rank deficient");
  const Eigen::MatrixXd k = boundary_matrix(fsys, bc);
  TwoPointGreen g;
  g.fsys_ = std::make_shared<const FundamentalSystem>(std::move(fsys));
  g.bc_ = std::move(bc);
  g.tols_ = tols;
  g.branch_ = branch;
  g.lu_ = Eigen::PartialPivLU<Eigen::MatrixXd>(k);
  g.det_ = g.lu_.determinant();
  const double scale = k.cwiseAbs().rowwise().sum().maxCoeff();
  if (!(std::abs(g.det_) > tols.resonance_tol * std::max(scale, 1e-300)))
    throw ResonantProblem(g.det_,
                          "shift M is (numerically) an eigenvalue of the two-point problem");
  g.memo_ = std::make_unique<TwoPointGreen::Memo>();
  return g;
}

/// omega_i: the solution of T_n[M]u = 0 with B_j(u) = delta_ij (0-based i).
struct OmegaSolution {
  int index;
  Eigen::VectorXd coefficients;  ///< expansion in the canonical basis
  SolutionTrajectory trajectory;
};

inline OmegaSolution omega(const TwoPointGreen& g, int i) {
  const int n = g.order();
  if (i < 0 || i >= n) throw std::invalid_argument("omega index out of range");
  Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
  e(i) = 1.0;
  Eigen::VectorXd c = g.solve_boundary_system(e);
  std::vector<double> w(c.data(), c.data() + n);
  return OmegaSolution{i, std::move(c), g.fundamental().combine(w)};
}

inline std::vector<OmegaSolution> all_omegas(const TwoPointGreen& g) {
  std::vector<OmegaSolution> out;
  out.reserve(static_cast<std::size_t>(g.order()));
  for (int i = 0; i < g.order(); ++i) out.push_back(omega(g, i));
  return out;
}

}  // namespace greenfn
