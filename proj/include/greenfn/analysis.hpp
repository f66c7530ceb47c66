#pragma once

#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <memory>
#include <ostream>
#include <span>
#include <string_view>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "greenfn/common.hpp"
#include "greenfn/nonlocal.hpp"
#include "greenfn/periodic_oracle.hpp"

namespace greenfn {

enum class SignLabel { positive, negative, mixed, resonant, spectral_obstruction };

inline std::string_view to_string(SignLabel label) {
  switch (label) {
    case SignLabel::positive: return "positive";
    case SignLabel::negative: return "negative";
    case SignLabel::mixed: return "mixed";
    case SignLabel::resonant: return "resonant";
    case SignLabel::spectral_obstruction: return "spectral-obstruction";
  }
  return "?";
}

/// Grid proxy for "constant sign on I x I". A kernel that touches zero
/// (within tol) without crossing keeps the label of its nonzero part and
/// sets touches_zero.
struct SignClassification {
  SignLabel label = SignLabel::mixed;
  bool touches_zero = false;
  double min_value = 0.0;
  double max_value = 0.0;
  double argmin_t = 0.0, argmin_s = 0.0;
  double argmax_t = 0.0, argmax_s = 0.0;
};

/// Kernel with an explicit diagonal convention. On the diagonal t = s the
/// one-sided limits differ (for first-order problems by the unit jump);
/// classification must see both, since the exact sign boundaries of the
/// parameter plane are attained at corner points on one branch only.
using BranchKernel = std::function<double(double t, double s, TieBranch)>;

inline SignClassification constant_sign_on_grid(const BranchKernel& kernel,
                                                std::span<const double> t_grid,
                                                std::span<const double> s_grid, double tol) {
  SignClassification out;
  out.min_value = std::numeric_limits<double>::infinity();
  out.max_value = -std::numeric_limits<double>::infinity();
  auto visit = [&out](double v, double t, double s) {
    if (v < out.min_value) {
      out.min_value = v;
      out.argmin_t = t;
      out.argmin_s = s;
    }
    if (v > out.max_value) {
      out.max_value = v;
      out.argmax_t = t;
      out.argmax_s = s;
    }
  };
  for (double s : s_grid)
    for (double t : t_grid) {
      visit(kernel(t, s, TieBranch::t_ge_s), t, s);
      if (t == s) visit(kernel(t, s, TieBranch::t_lt_s), t, s);
    }
  if (out.min_value > tol) {
    out.label = SignLabel::positive;
  } else if (out.max_value < -tol) {
    out.label = SignLabel::negative;
  } else if (out.min_value >= -tol && out.max_value > tol) {
    out.label = SignLabel::positive;  // nonnegative, touches zero
    out.touches_zero = true;
  } else if (out.max_value <= tol && out.min_value < -tol) {
    out.label = SignLabel::negative;
    out.touches_zero = true;
  } else {
    out.label = SignLabel::mixed;
    out.touches_zero = std::abs(out.min_value) <= tol && std::abs(out.max_value) <= tol;
  }
  return out;
}

inline SignClassification constant_sign_on_grid(
    const std::function<double(double, double)>& kernel, std::span<const double> t_grid,
    std::span<const double> s_grid, double tol) {
  return constant_sign_on_grid(
      BranchKernel([&kernel](double t, double s, TieBranch) { return kernel(t, s); }),
      t_grid, s_grid, tol);
}

/// Outcome of the comparison principle (shared-functional form): hypotheses
///   (a) sum_j delta_j C(omega_j) < 1,
///   (b) delta_i omega_i >= 0 on I for every i,
///   (c) u >= 0 implies C(u) >= 0,
/// and, when they hold and g_M has constant sign, the pointwise conclusion
/// G >= g_M >= 0 (or G <= g_M <= 0).
struct ComparisonReport {
  bool resolvent_below_one = false;   // (a)
  bool omega_terms_nonneg = false;    // (b)
  bool functional_nonneg = false;     // (c)
  enum class Conclusion { dominates_nonnegative, dominated_nonpositive, not_applicable };
  Conclusion conclusion = Conclusion::not_applicable;
  bool verified = false;  ///< the pointwise inequality held on the grid
  SignClassification g_sign;
  SignClassification G_sign;
  bool has_witness = false;  ///< a grid point violating the claimed inequality
  double witness_t = 0.0, witness_s = 0.0;
};

inline ComparisonReport comparison_check(const NonlocalGreen& g,
                                         std::span<const double> t_grid,
                                         std::span<const double> s_grid, double tol) {
  const NonlocalAssembly& assembly = g.assembly();
  if (!assembly.shared_functional())
    throw std::logic_error("comparison_check requires the shared-functional form");
  ComparisonReport rep;
  const int n = assembly.order();

  double sum = 0.0;
  for (int j = 0; j < n; ++j) sum += g.deltas()(j) * assembly.comega()(0, j);
  rep.resolvent_below_one = sum < 1.0;

  rep.omega_terms_nonneg = true;
  for (int i = 0; i < n && rep.omega_terms_nonneg; ++i)
    for (double t : t_grid) {
      const double v = g.deltas()(i) *
                       assembly.omegas()[static_cast<std::size_t>(i)].trajectory.value(0, t);
      if (v < -tol) {
        rep.omega_terms_nonneg = false;
        break;
      }
    }

  rep.functional_nonneg = assembly.functionals().front().nonnegative_weights();

  const TwoPointGreen& green = assembly.green();
  rep.g_sign = constant_sign_on_grid(
      BranchKernel([&green](double t, double s, TieBranch br) { return green.value(t, s, br); }),
      t_grid, s_grid, tol);
  rep.G_sign = constant_sign_on_grid(
      BranchKernel([&g](double t, double s, TieBranch br) { return g.value(t, s, br); }),
      t_grid, s_grid, tol);

  if (!(rep.resolvent_below_one && rep.omega_terms_nonneg && rep.functional_nonneg))
    return rep;

  const bool g_nonneg = rep.g_sign.min_value >= -tol;
  const bool g_nonpos = rep.g_sign.max_value <= tol;
  if (!g_nonneg && !g_nonpos) return rep;

  rep.conclusion = g_nonneg ? ComparisonReport::Conclusion::dominates_nonnegative
                            : ComparisonReport::Conclusion::dominated_nonpositive;
  rep.verified = true;
  for (double s : s_grid) {
    for (double t : t_grid) {
      const double diff = g(t, s) - green(t, s);
      const bool ok = g_nonneg ? diff >= -tol : diff <= tol;
      if (!ok) {
        rep.verified = false;
        rep.has_witness = true;
        rep.witness_t = t;
        rep.witness_s = s;
        return rep;
      }
    }
  }
  return rep;
}

/// One scanned parameter cell.
struct CellRecord {
  double shift = 0.0;  ///< M
  double delta = 0.0;
  SignLabel label = SignLabel::mixed;
  bool touches_zero = false;
  double min_value = std::numeric_limits<double>::quiet_NaN();
  double max_value = std::numeric_limits<double>::quiet_NaN();
  double argmin_t = std::numeric_limits<double>::quiet_NaN();
  double argmin_s = std::numeric_limits<double>::quiet_NaN();
};

/// A bisected sign-change location within one M column.
struct BoundaryEstimate {
  double shift = 0.0;
  double delta = 0.0;  ///< bisection estimate of the label change
  SignLabel lower_label = SignLabel::mixed;
  SignLabel upper_label = SignLabel::mixed;
};

struct SignRegionReport {
  std::vector<double> shift_axis;
  std::vector<double> delta_axis;
  std::vector<CellRecord> cells;  ///< row-major: shift index outer, delta inner
  std::vector<BoundaryEstimate> boundaries;
};

/// A cell build either yields an evaluable kernel or fails with a label
/// (resonant / spectral-obstruction).
using CellBuild = std::variant<BranchKernel, SignLabel>;
/// Per-column builder: called with delta for a fixed M.
using ColumnBuilder = std::function<CellBuild(double delta)>;
/// Family: produces the column builder for a given M. Must be safe to call
/// from concurrent workers (each column is built inside its worker).
using ScanFamily = std::function<ColumnBuilder(double shift)>;

struct ScanOptions {
  int t_points = 41;
  int s_points = 41;
  double sign_tol = 1e-10;
  double bisect_tol = 1e-6;
  int workers = 1;
};

namespace detail {

struct ColumnScan {
  std::vector<CellRecord> cells;
  std::vector<BoundaryEstimate> boundaries;
};

inline bool sign_kind(SignLabel label) {
  return label == SignLabel::positive || label == SignLabel::negative ||
         label == SignLabel::mixed;
}

inline ColumnScan scan_column(const ColumnBuilder& build, double shift,
                              std::span<const double> delta_axis,
                              std::span<const double> t_grid,
                              std::span<const double> s_grid, const ScanOptions& opt) {
  ColumnScan out;
  out.cells.reserve(delta_axis.size());

  auto classify = [&](double delta, CellRecord& rec) {
    rec.shift = shift;
    rec.delta = delta;
    CellBuild built = build(delta);
    if (const auto* failure = std::get_if<SignLabel>(&built)) {
      rec.label = *failure;
      return;
    }
    const auto& kernel = std::get<BranchKernel>(built);
    const SignClassification sc = constant_sign_on_grid(kernel, t_grid, s_grid, opt.sign_tol);
    rec.label = sc.label;
    rec.touches_zero = sc.touches_zero;
    rec.min_value = sc.min_value;
    rec.max_value = sc.max_value;
    rec.argmin_t = sc.argmin_t;
    rec.argmin_s = sc.argmin_s;
  };

  for (double delta : delta_axis) {
    CellRecord rec;
    classify(delta, rec);
    out.cells.push_back(rec);
  }

  // Bisect every sign transition between adjacent classified cells.
  for (std::size_t j = 0; j + 1 < out.cells.size(); ++j) {
    const SignLabel lo_label = out.cells[j].label;
    const SignLabel hi_label = out.cells[j + 1].label;
    if (!sign_kind(lo_label) || !sign_kind(hi_label) || lo_label == hi_label) continue;
    double lo = out.cells[j].delta;
    double hi = out.cells[j + 1].delta;
    while (hi - lo > opt.bisect_tol) {
      const double mid = 0.5 * (lo + hi);
      CellRecord rec;
      classify(mid, rec);
      if (!sign_kind(rec.label)) break;  // ran into the spectrum line
      if (rec.label == lo_label)
        lo = mid;
      else
        hi = mid;
    }
    out.boundaries.push_back({shift, 0.5 * (lo + hi), lo_label, hi_label});
  }
  return out;
}

}  // namespace detail

/// Classify the sign of the family's kernel over a (M, delta) rectangle and
/// estimate the sign-change boundaries per column. Cell build failures are
/// recorded as resonant / spectral-obstruction labels, never as process
/// failure. Columns are independent; with workers > 1 they are distributed
/// over threads and merged in axis order (deterministic output).
inline SignRegionReport sign_region_scan(const ScanFamily& family,
                                         std::pair<double, double> shift_range,
                                         std::pair<double, double> delta_range,
                                         int shift_points, int delta_points,
                                         std::pair<double, double> interval,
                                         const ScanOptions& opt = {}) {
  SignRegionReport report;
  report.shift_axis = linspace(shift_range.first, shift_range.second, shift_points);
  report.delta_axis = linspace(delta_range.first, delta_range.second, delta_points);
  const std::vector<double> t_grid = linspace(interval.first, interval.second, opt.t_points);
  const std::vector<double> s_grid = linspace(interval.first, interval.second, opt.s_points);

  std::vector<detail::ColumnScan> columns(report.shift_axis.size());
  auto run_column = [&](std::size_t c) {
    const double shift = report.shift_axis[c];
    columns[c] = detail::scan_column(family(shift), shift, report.delta_axis, t_grid,
                                     s_grid, opt);
  };

  const int workers = std::max(1, opt.workers);
  if (workers == 1 || report.shift_axis.size() <= 1) {
    for (std::size_t c = 0; c < report.shift_axis.size(); ++c) run_column(c);
  } else {
    std::vector<std::thread> pool;
    std::size_t next = 0;
    std::mutex next_mutex;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&]() {
        for (;;) {
          std::size_t c;
          {
            std::lock_guard<std::mutex> lock(next_mutex);
            if (next >= report.shift_axis.size()) return;
            c = next++;
          }
          run_column(c);
        }
      });
    for (std::thread& th : pool) th.join();
  }

  for (const detail::ColumnScan& col : columns) {
    report.cells.insert(report.cells.end(), col.cells.begin(), col.cells.end());
    report.boundaries.insert(report.boundaries.end(), col.boundaries.begin(),
                             col.boundaries.end());
  }
  return report;
}

/// The first-order periodic problem u' + Mu = sigma, u(0) - u(1) = delta
/// int_0^1 u, as a NonlocalSpec.
inline NonlocalSpec make_periodic_spec(double shift, double delta, Tolerances tols = {}) {
  NonlocalSpec spec;
  spec.problem.order = 1;
  spec.problem.a = 0.0;
  spec.problem.b = 1.0;
  spec.problem.coefficients = {[](double) { return 0.0; }};
  spec.problem.shift = shift;
  spec.boundary.alpha = Eigen::MatrixXd::Constant(1, 1, 1.0);
  spec.boundary.beta = Eigen::MatrixXd::Constant(1, 1, -1.0);
  spec.deltas = Eigen::VectorXd::Constant(1, delta);
  spec.functionals = {LinearFunctional::weighted_integral([](double) { return 1.0; }, 0.0, 1.0)};
  spec.shared_functional = true;
  spec.tols = tols;
  return spec;
}

/// Family over (M, delta) built from a template spec: each column rebuilds
/// the two-point machinery at its shift and every delta_i is set to the
/// scanned delta. With `periodic_oracle_fallback`, columns at |M| below the
/// closed-form switch use the M = 0 kernel of the periodic family instead
/// of failing as resonant (only meaningful for that family).
inline ScanFamily make_spec_family(const NonlocalSpec& base,
                                   bool periodic_oracle_fallback = false) {
  return [base, periodic_oracle_fallback](double shift) -> ColumnBuilder {
    if (periodic_oracle_fallback && std::abs(shift) <= periodic::kShiftSwitch) {
      return [](double delta) -> CellBuild {
        if (std::abs(delta) < periodic::kSpectrumGuard)
          return SignLabel::spectral_obstruction;
        const periodic::PeriodicParams p{0.0, delta};
        return BranchKernel([p](double t, double s, TieBranch branch) {
          return periodic::oracle_G(t, s, p, branch);
        });
      };
    }
    std::shared_ptr<const NonlocalAssembly> assembly;
    try {
      NonlocalSpec spec = base;
      spec.problem.shift = shift;
      spec.validate();
      assembly = std::make_shared<const NonlocalAssembly>(
          spec.problem, spec.boundary, spec.functionals, spec.shared_functional, spec.tols);
    } catch (const ResonantProblem&) {
      return [](double) -> CellBuild { return SignLabel::resonant; };
    }
    const int n = assembly->order();
    return [assembly, n](double delta) -> CellBuild {
      try {
        NonlocalGreen kernel =
            make_nonlocal_green(assembly, Eigen::VectorXd::Constant(n, delta));
        return BranchKernel([kernel](double t, double s, TieBranch branch) {
          return kernel.value(t, s, branch);
        });
      } catch (const SpectralObstruction&) {
        return SignLabel::spectral_obstruction;
      }
    };
  };
}

/// The Figure-1 family: periodic problem columns with the numeric pipeline
/// away from M = 0 and the closed-form kernel on the resonant column.
inline ScanFamily make_periodic_family(Tolerances tols = {}) {
  return make_spec_family(make_periodic_spec(1.0, 0.0, tols), true);
}

/// CSV: M,delta,label,min,max,argmin_t,argmin_s (17 significant digits).
inline void write_csv(const SignRegionReport& report, std::ostream& os) {
  os << "M,delta,label,min,max,argmin_t,argmin_s\n";
  char buf[160];
  for (const CellRecord& cell : report.cells) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%s,%.17g,%.17g,%.17g,%.17g\n", cell.shift,
                  cell.delta, std::string(to_string(cell.label)).c_str(), cell.min_value,
                  cell.max_value, cell.argmin_t, cell.argmin_s);
    os << buf;
  }
}

/// Compact JSON summary: axes, per-label cell counts, zero-touching cells,
/// and the bisected boundary curves grouped by transition type.
inline void write_json(const SignRegionReport& report, std::ostream& os) {
  nlohmann::json j;
  j["shift_axis"] = report.shift_axis;
  j["delta_axis"] = report.delta_axis;
  nlohmann::json counts = nlohmann::json::object();
  for (const CellRecord& cell : report.cells) {
    const std::string key(to_string(cell.label));
    counts[key] = counts.value(key, 0) + 1;
  }
  j["cell_counts"] = counts;
  nlohmann::json touching = nlohmann::json::array();
  for (const CellRecord& cell : report.cells)
    if (cell.touches_zero) touching.push_back({cell.shift, cell.delta});
  j["zero_touching_cells"] = touching;
  nlohmann::json curves = nlohmann::json::object();
  for (const BoundaryEstimate& b : report.boundaries) {
    const std::string key =
        std::string(to_string(b.lower_label)) + "-" + std::string(to_string(b.upper_label));
    curves[key].push_back({b.shift, b.delta});
  }
  j["boundary_curves"] = curves;
  os << j.dump(2) << "\n";
}

}  // namespace greenfn
