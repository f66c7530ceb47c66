// Command-line front end: ingest a problem file, run builds / solves /
// parameter scans, and emit CSV/JSON artifacts.
//
// Exit codes: 0 success, 1 runtime failure, 2 resonant problem,
// 3 spectral obstruction, 4 parse or semantic error in the problem file,
// 5 verify-oracle tolerance not met.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "greenfn/analysis.hpp"
#include "greenfn/nonlocal.hpp"
#include "greenfn/periodic_oracle.hpp"
#include "greenfn/spec_file.hpp"

namespace {

using namespace greenfn;

constexpr int kExitRuntime = 1;
constexpr int kExitResonant = 2;
constexpr int kExitSpectral = 3;
constexpr int kExitParse = 4;
constexpr int kExitVerify = 5;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Args {
  std::string spec_path;
  std::string out_dir = ".";
  std::string grid;
  double tol = 0.0;
  int workers = 1;
};

std::pair<int, int> parse_grid(const std::string& text) {
  const std::size_t x = text.find('x');
  if (x == std::string::npos)
    throw std::runtime_error("--grid expects <N>x<M>, got '" + text + "'");
  const int a = std::stoi(text.substr(0, x));
  const int b = std::stoi(text.substr(x + 1));
  if (a < 2 || b < 2) throw std::runtime_error("--grid needs at least 2 points per axis");
  return {a, b};
}

ParsedSpec load(const Args& args) {
  ParsedSpec parsed = parse_spec_file(args.spec_path);
  if (args.tol > 0.0)
    parsed.options.tols.ode_tol = parsed.options.tols.quad_tol = args.tol;
  parsed.spec.tols = parsed.options.tols;
  if (!args.grid.empty()) {
    auto [gt, gs] = parse_grid(args.grid);
    parsed.options.grid_t = gt;
    parsed.options.grid_s = gs;
  }
  return parsed;
}

std::ofstream open_out(const Args& args, const std::string& name) {
  std::filesystem::create_directories(args.out_dir);
  const std::filesystem::path path = std::filesystem::path(args.out_dir) / name;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

int run_check(const Args& args) {
  ParsedSpec parsed = load(args);
  const NonlocalSpec& spec = parsed.spec;
  const bool rank_ok = rank_precheck(spec.boundary);
  std::cout << "rank precheck: " << (rank_ok ? "ok" : "FAIL") << "\n";
  FundamentalSystem fsys = integrate_fundamental_system(spec.problem, spec.tols.ode_tol);
  const double det = uniqueness_determinant(fsys, spec.boundary);
  std::cout << "det[B_i(y_j)] = " << fmt(det) << "\n";
  NonlocalGreen g = build_nonlocal_green(spec);  // throws resonant / spectral
  std::cout << "det(I - A) = " << fmt(g.det_IA()) << "\n";
  std::cout << "spectrum check: ok\n";
  return 0;
}

int run_build(const Args& args) {
  ParsedSpec parsed = load(args);
  const NonlocalSpec& spec = parsed.spec;
  NonlocalGreen g = build_nonlocal_green(spec);
  const int n = spec.problem.order;

  nlohmann::json j;
  j["order"] = n;
  j["interval"] = {spec.problem.a, spec.problem.b};
  j["shift"] = spec.problem.shift;
  j["rank_precheck"] = rank_precheck(spec.boundary);
  j["det_two_point"] = g.two_point().determinant();
  j["det_I_minus_A"] = g.det_IA();
  std::vector<double> deltas(g.deltas().data(), g.deltas().data() + n);
  j["deltas"] = deltas;
  auto matrix_json = [n](const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < n; ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (int k = 0; k < n; ++k) row.push_back(m(i, k));
      rows.push_back(row);
    }
    return rows;
  };
  j["C_omega"] = matrix_json(g.assembly().comega());
  j["A"] = matrix_json(g.A());
  j["resolvent"] = matrix_json(g.resolvent());

  auto out = open_out(args, "build.json");
  out << j.dump(2) << "\n";
  std::cout << "build: ok, det(I - A) = " << fmt(g.det_IA()) << " -> build.json\n";
  return 0;
}

int run_eval(const Args& args) {
  ParsedSpec parsed = load(args);
  const NonlocalSpec& spec = parsed.spec;
  NonlocalGreen g = build_nonlocal_green(spec);
  const std::vector<double> ts =
      linspace(spec.problem.a, spec.problem.b, parsed.options.grid_t);
  const std::vector<double> ss =
      linspace(spec.problem.a, spec.problem.b, parsed.options.grid_s);
  auto out = open_out(args, "eval.csv");
  out << "t,s,G\n";
  for (double t : ts)
    for (double s : ss) out << fmt(t) << "," << fmt(s) << "," << fmt(g(t, s)) << "\n";
  std::cout << "eval: " << ts.size() << "x" << ss.size() << " grid -> eval.csv\n";
  return 0;
}

int run_solve(const Args& args) {
  ParsedSpec parsed = load(args);
  const NonlocalSpec& spec = parsed.spec;
  NonlocalGreen g = build_nonlocal_green(spec);
  const expr::Expression sigma_expr = parsed.sigma;
  ScalarFn sigma = [sigma_expr](double t) { return sigma_expr(t); };
  SolutionTrajectory u = solve(g, sigma);
  const int n = spec.problem.order;

  auto out = open_out(args, "solution.csv");
  out << "t";
  for (int j = 0; j < n; ++j) out << ",u" << j;
  out << "\n";
  for (double t : linspace(spec.problem.a, spec.problem.b, parsed.options.grid_t)) {
    out << fmt(t);
    for (int j = 0; j < n; ++j) out << "," << fmt(u.value(j, t));
    out << "\n";
  }

  // residual report: ODE residual, boundary residuals, kernel cross-check
  double max_ode = 0.0;
  for (double t : linspace(spec.problem.a, spec.problem.b, 101))
    max_ode = std::max(max_ode, std::abs(residual(spec.problem, u, t, &sigma)));
  nlohmann::json j;
  j["max_ode_residual"] = max_ode;
  nlohmann::json bres = nlohmann::json::array();
  const std::vector<LinearFunctional>& cs = g.assembly().functionals();
  for (int i = 0; i < n; ++i) {
    const double bu = boundary_apply(spec.boundary, i, u);
    const double cu = cs[static_cast<std::size_t>(i)](u, spec.tols.quad_tol);
    bres.push_back({{"i", i + 1},
                    {"B_u", bu},
                    {"delta_C_u", g.deltas()(i) * cu},
                    {"residual", bu - g.deltas()(i) * cu}});
  }
  j["boundary_residuals"] = bres;
  double max_kernel_diff = 0.0;
  for (double t : linspace(spec.problem.a, spec.problem.b, 5))
    max_kernel_diff =
        std::max(max_kernel_diff, std::abs(u.value(0, t) - kernel_solution_value(g, sigma, t)));
  j["max_kernel_solution_diff"] = max_kernel_diff;
  auto rep = open_out(args, "residuals.json");
  rep << j.dump(2) << "\n";
  std::cout << "solve: max |T_n[M]u - sigma| = " << fmt(max_ode)
            << " -> solution.csv, residuals.json\n";
  return 0;
}

int run_scan(const Args& args) {
  ParsedSpec parsed = load(args);
  if (!parsed.options.scan_shift || !parsed.options.scan_delta)
    throw SpecParseError(0, "scan requires 'scan shift ...' and 'scan delta ...' lines");
  RunOptions::Range sr = *parsed.options.scan_shift;
  RunOptions::Range dr = *parsed.options.scan_delta;
  if (!args.grid.empty()) {
    auto [gs, gd] = parse_grid(args.grid);
    sr.count = gs;
    dr.count = gd;
  }
  ScanOptions opt;
  opt.sign_tol = parsed.options.tols.sign_tol;
  opt.bisect_tol = parsed.options.tols.bisect_tol;
  opt.workers = args.workers;
  const ScanFamily family = make_spec_family(parsed.spec, parsed.options.periodic_oracle);
  const SignRegionReport report =
      sign_region_scan(family, {sr.lo, sr.hi}, {dr.lo, dr.hi}, sr.count, dr.count,
                       {parsed.spec.problem.a, parsed.spec.problem.b}, opt);
  {
    auto out = open_out(args, "scan.csv");
    write_csv(report, out);
  }
  {
    auto out = open_out(args, "scan.json");
    write_json(report, out);
  }
  std::cout << "scan: " << sr.count << "x" << dr.count << " cells, "
            << report.boundaries.size() << " boundary estimates -> scan.csv, scan.json\n";
  return 0;
}

void require_periodic_family(const NonlocalSpec& spec) {
  const auto fail = [](const std::string& what) {
    throw SpecParseError(0, "verify-oracle needs the first-order periodic problem: " + what);
  };
  if (spec.problem.order != 1) fail("order must be 1");
  if (spec.problem.a != 0.0 || spec.problem.b != 1.0) fail("interval must be [0, 1]");
  for (double t : linspace(0.0, 1.0, 7))
    if (std::abs(spec.problem.coefficients[0](t)) > 0.0) fail("a_1 must vanish");
  if (spec.boundary.alpha(0, 0) != 1.0 || spec.boundary.beta(0, 0) != -1.0)
    fail("boundary must be u(0) - u(1)");
  if (!spec.shared_functional || spec.functionals.size() != 1)
    fail("one shared functional expected");
  const auto* wi = std::get_if<LinearFunctional::WeightedIntegral>(
      &spec.functionals.front().terms().front());
  if (!wi || wi->lo != 0.0 || wi->hi != 1.0) fail("functional must integrate over [0, 1]");
  for (double t : linspace(0.0, 1.0, 7))
    if (std::abs(wi->weight(t) - 1.0) > 0.0) fail("functional weight must be 1");
}

int run_verify_oracle(const Args& args) {
  ParsedSpec parsed = load(args);
  require_periodic_family(parsed.spec);
  const std::pair<double, double> probes[] = {
      {1.0, 0.5}, {1.0, -0.3}, {2.0, 3.0}, {-1.0, -0.5}, {0.5, -0.3}};
  const std::vector<double> ts = linspace(0.0, 1.0, parsed.options.grid_t);
  const std::vector<double> ss = linspace(0.0, 1.0, parsed.options.grid_s);
  constexpr double kTol = 1e-6;
  double worst = 0.0;
  for (auto [m, delta] : probes) {
    NonlocalSpec spec = parsed.spec;
    spec.problem.shift = m;
    spec.deltas(0) = delta;
    NonlocalGreen g = build_nonlocal_green(spec);
    const periodic::PeriodicParams p{m, delta};
    double max_err = 0.0;
    for (double t : ts)
      for (double s : ss)
        max_err = std::max(max_err, std::abs(g(t, s) - periodic::oracle_G(t, s, p)));
    worst = std::max(worst, max_err);
    std::cout << "M = " << m << ", delta = " << delta << ": max |G - oracle| = "
              << fmt(max_err) << (max_err <= kTol ? "  ok" : "  FAIL") << "\n";
  }
  std::cout << "overall max error = " << fmt(worst) << " (tolerance " << fmt(kTol) << ")\n";
  return worst <= kTol ? 0 : kExitVerify;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Green's functions of n-th order linear ODEs under parameterised "
               "non-local boundary conditions"};
  app.require_subcommand(1);

  Args args;
  int (*action)(const Args&) = nullptr;
  auto add = [&](const std::string& name, const std::string& help,
                 int (*fn)(const Args&)) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--spec", args.spec_path, "problem file")->required();
    sub->add_option("--out", args.out_dir, "output directory (default .)");
    sub->add_option("--grid", args.grid, "grid override, <N>x<M>");
    sub->add_option("--tol", args.tol, "integrator/quadrature tolerance override");
    sub->add_option("--workers", args.workers, "worker threads (scan)");
    sub->callback([&action, fn]() { action = fn; });
    return sub;
  };

  add("check", "rank precheck, uniqueness determinant, det(I-A)", run_check);
  add("build", "assemble the kernel and dump A, B, determinants", run_build);
  add("eval", "G values on a (t, s) grid as CSV", run_eval);
  add("solve", "solve for the forcing term, emit samples and residuals", run_solve);
  add("scan", "sign classification over the (M, delta) plane", run_scan);
  add("verify-oracle", "numeric pipeline vs closed-form periodic kernel", run_verify_oracle);

  try {
    app.parse(argc, argv);
    return action(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const SpecParseError& e) {
    std::cerr << "spec error: " << e.what() << "\n";
    return kExitParse;
  } catch (const expr::ParseError& e) {
    std::cerr << "expression error: " << e.what() << "\n";
    return kExitParse;
  } catch (const ResonantProblem& e) {
    std::cerr << "resonant problem: " << e.what() << "\n";
    return kExitResonant;
  } catch (const SpectralObstruction& e) {
    std::cerr << "spectral obstruction: " << e.what() << "\n";
    return kExitSpectral;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid problem: " << e.what() << "\n";
    return kExitParse;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
