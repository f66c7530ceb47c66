#pragma once

#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "greenfn/analysis.hpp"
#include "greenfn/expression.hpp"
#include "greenfn/nonlocal.hpp"

namespace greenfn {

class SpecParseError : public std::runtime_error {
 public:
  SpecParseError(int line, const std::string& message)
      : std::runtime_error("line " + std::to_string(line) + ": " + message),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

/// Run configuration carried by a problem file alongside the problem data.
struct RunOptions {
  Tolerances tols;
  int grid_t = 21;
  int grid_s = 21;
  struct Range {
    double lo = 0.0;
    double hi = 0.0;
    int count = 0;
  };
  std::optional<Range> scan_shift;
  std::optional<Range> scan_delta;
  bool periodic_oracle = false;  ///< closed-form fallback at the resonant shift
};

struct ParsedSpec {
  NonlocalSpec spec;
  expr::Expression sigma;
  RunOptions options;
};

namespace detail {

inline std::vector<std::string> tokenize(std::string_view line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) out.emplace_back(line.substr(start, i - start));
  }
  return out;
}

inline double parse_double(const std::string& token, int line) {
  double value = 0.0;
  const char* begin = token.data();
  const char* end = begin + token.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end)
    throw SpecParseError(line, "expected a number, got '" + token + "'");
  return value;
}

inline int parse_int(const std::string& token, int line) {
  int value = 0;
  const char* begin = token.data();
  const char* end = begin + token.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end)
    throw SpecParseError(line, "expected an integer, got '" + token + "'");
  return value;
}

inline expr::Expression parse_expression(const std::string& text, int line) {
  try {
    return expr::Expression::parse(text);
  } catch (const expr::ParseError& e) {
    throw SpecParseError(line, "bad expression '" + text + "': " + e.bare_message());
  }
}

inline ScalarFn to_fn(expr::Expression e) {
  return [e = std::move(e)](double t) { return e(t); };
}

}  // namespace detail

/// Parse the line-oriented problem-file format (grammar in the README):
/// order / interval / shift / coeff / alpha / beta / delta / functional /
/// sigma / tol / grid / scan / oracle, with '#' comments. Dimension and
/// support mismatches are rejected with line-anchored diagnostics.
inline ParsedSpec parse_spec_text(std::string_view text) {
  struct FunctionalEntry {
    int line;
    LinearFunctional functional;
  };

  std::optional<int> order;
  int order_line = 0;
  std::optional<std::pair<double, double>> interval;
  std::optional<double> shift;
  std::map<int, std::pair<int, expr::Expression>> coeffs;  // index -> (line, expr)
  std::map<int, std::pair<int, std::vector<double>>> alpha_rows, beta_rows;
  std::optional<std::vector<double>> deltas;
  int delta_line = 0;
  std::map<int, FunctionalEntry> functionals;  // 0 = shared
  bool shared = false;
  std::optional<expr::Expression> sigma;
  RunOptions options;

  auto need_order = [&](int line) -> int {
    if (!order) throw SpecParseError(line, "'order' must be declared first");
    return *order;
  };

  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    std::vector<std::string> tok = detail::tokenize(raw);
    if (tok.empty()) continue;
    const std::string& key = tok[0];

    if (key == "order") {
      if (tok.size() != 2) throw SpecParseError(line_no, "usage: order <n>");
      order = detail::parse_int(tok[1], line_no);
      order_line = line_no;
      if (*order < 1) throw SpecParseError(line_no, "order must be >= 1");
    } else if (key == "interval") {
      if (tok.size() != 3) throw SpecParseError(line_no, "usage: interval <a> <b>");
      interval = {detail::parse_double(tok[1], line_no), detail::parse_double(tok[2], line_no)};
      if (!(interval->first < interval->second))
        throw SpecParseError(line_no, "interval requires a < b");
    } else if (key == "shift") {
      if (tok.size() != 2) throw SpecParseError(line_no, "usage: shift <M>");
      shift = detail::parse_double(tok[1], line_no);
    } else if (key == "coeff") {
      if (tok.size() < 3) throw SpecParseError(line_no, "usage: coeff <k> <expression>");
      const int n = need_order(line_no);
      const int idx = detail::parse_int(tok[1], line_no);
      if (idx < 1 || idx > n)
        throw SpecParseError(line_no, "coefficient index out of range 1..n");
      if (coeffs.count(idx)) throw SpecParseError(line_no, "duplicate coefficient index");
      std::string expr_text;
      for (std::size_t i = 2; i < tok.size(); ++i) {
        if (i > 2) expr_text += ' ';
        expr_text += tok[i];
      }
      coeffs.emplace(idx, std::pair{line_no, detail::parse_expression(expr_text, line_no)});
    } else if (key == "alpha" || key == "beta") {
      const int n = need_order(line_no);
      if (static_cast<int>(tok.size()) != 2 + n)
        throw SpecParseError(line_no,
                             "usage: " + key + " <i> followed by exactly n entries");
      const int idx = detail::parse_int(tok[1], line_no);
      if (idx < 1 || idx > n) throw SpecParseError(line_no, "row index out of range 1..n");
      std::vector<double> row;
      for (std::size_t i = 2; i < tok.size(); ++i)
        row.push_back(detail::parse_double(tok[i], line_no));
      auto& rows = key == "alpha" ? alpha_rows : beta_rows;
      if (rows.count(idx)) throw SpecParseError(line_no, "duplicate " + key + " row");
      rows.emplace(idx, std::pair{line_no, std::move(row)});
    } else if (key == "delta") {
      if (deltas) throw SpecParseError(line_no, "duplicate delta line");
      std::vector<double> values;
      for (std::size_t i = 1; i < tok.size(); ++i)
        values.push_back(detail::parse_double(tok[i], line_no));
      deltas = std::move(values);
      delta_line = line_no;
    } else if (key == "functional") {
      const int n = need_order(line_no);
      if (tok.size() < 3)
        throw SpecParseError(line_no, "usage: functional <i|shared> <integral|multipoint> ...");
      int idx = 0;
      if (tok[1] == "shared") {
        shared = true;
      } else {
        idx = detail::parse_int(tok[1], line_no);
        if (idx < 1 || idx > n)
          throw SpecParseError(line_no, "functional index out of range 1..n");
      }
      if (functionals.count(idx))
        throw SpecParseError(line_no, "duplicate functional declaration");
      const std::string& kind = tok[2];
      if (kind == "integral") {
        // functional <who> integral <expr...> on <lo> <hi>
        if (tok.size() < 6 || tok[tok.size() - 3] != "on")
          throw SpecParseError(line_no,
                               "usage: functional <i|shared> integral <weight> on <lo> <hi>");
        std::string expr_text;
        for (std::size_t i = 3; i + 3 < tok.size(); ++i) {
          if (i > 3) expr_text += ' ';
          expr_text += tok[i];
        }
        expr::Expression weight = detail::parse_expression(expr_text, line_no);
        const double lo = detail::parse_double(tok[tok.size() - 2], line_no);
        const double hi = detail::parse_double(tok[tok.size() - 1], line_no);
        if (!(lo <= hi)) throw SpecParseError(line_no, "subinterval requires lo <= hi");
        functionals.emplace(
            idx, FunctionalEntry{line_no, LinearFunctional::weighted_integral(
                                              detail::to_fn(std::move(weight)), lo, hi)});
      } else if (kind == "multipoint") {
        if (tok.size() < 5 || (tok.size() - 3) % 2 != 0)
          throw SpecParseError(line_no,
                               "usage: functional <i|shared> multipoint <nu> <eps> ...");
        std::vector<double> points, weights;
        for (std::size_t i = 3; i < tok.size(); i += 2) {
          points.push_back(detail::parse_double(tok[i], line_no));
          weights.push_back(detail::parse_double(tok[i + 1], line_no));
        }
        functionals.emplace(idx, FunctionalEntry{line_no, LinearFunctional::multi_point(
                                                              std::move(points),
                                                              std::move(weights))});
      } else {
        throw SpecParseError(line_no, "unknown functional kind '" + kind + "'");
      }
    } else if (key == "sigma") {
      if (tok.size() < 2) throw SpecParseError(line_no, "usage: sigma <expression>");
      std::string expr_text;
      for (std::size_t i = 1; i < tok.size(); ++i) {
        if (i > 1) expr_text += ' ';
        expr_text += tok[i];
      }
      sigma = detail::parse_expression(expr_text, line_no);
    } else if (key == "tol") {
      if (tok.size() != 2) throw SpecParseError(line_no, "usage: tol <value>");
      const double tol = detail::parse_double(tok[1], line_no);
      if (!(tol > 0.0)) throw SpecParseError(line_no, "tolerance must be positive");
      options.tols.ode_tol = options.tols.quad_tol = tol;
    } else if (key == "grid") {
      if (tok.size() != 2) throw SpecParseError(line_no, "usage: grid <N>x<M>");
      const std::string& g = tok[1];
      const std::size_t x = g.find('x');
      if (x == std::string::npos) throw SpecParseError(line_no, "usage: grid <N>x<M>");
      options.grid_t = detail::parse_int(g.substr(0, x), line_no);
      options.grid_s = detail::parse_int(g.substr(x + 1), line_no);
      if (options.grid_t < 2 || options.grid_s < 2)
        throw SpecParseError(line_no, "grid needs at least 2 points per axis");
    } else if (key == "scan") {
      if (tok.size() != 5 || (tok[1] != "shift" && tok[1] != "delta"))
        throw SpecParseError(line_no, "usage: scan <shift|delta> <lo> <hi> <count>");
      RunOptions::Range r;
      r.lo = detail::parse_double(tok[2], line_no);
      r.hi = detail::parse_double(tok[3], line_no);
      r.count = detail::parse_int(tok[4], line_no);
      if (!(r.lo < r.hi) || r.count < 2)
        throw SpecParseError(line_no, "scan range requires lo < hi and count >= 2");
      (tok[1] == "shift" ? options.scan_shift : options.scan_delta) = r;
    } else if (key == "oracle") {
      if (tok.size() != 2 || tok[1] != "periodic")
        throw SpecParseError(line_no, "usage: oracle periodic");
      options.periodic_oracle = true;
    } else {
      throw SpecParseError(line_no, "unknown key '" + key + "'");
    }
  }

  if (!order) throw SpecParseError(line_no, "missing 'order'");
  if (!interval) throw SpecParseError(line_no, "missing 'interval'");
  if (!shift) throw SpecParseError(line_no, "missing 'shift'");
  const int n = *order;

  ParsedSpec out;
  out.spec.problem.order = n;
  out.spec.problem.a = interval->first;
  out.spec.problem.b = interval->second;
  out.spec.problem.shift = *shift;
  for (int k = 1; k <= n; ++k) {
    auto it = coeffs.find(k);
    if (it == coeffs.end())
      throw SpecParseError(order_line, "missing 'coeff " + std::to_string(k) + "'");
    out.spec.problem.coefficients.push_back(detail::to_fn(std::move(it->second.second)));
  }

  out.spec.boundary.alpha = Eigen::MatrixXd::Zero(n, n);
  out.spec.boundary.beta = Eigen::MatrixXd::Zero(n, n);
  for (auto [rows, target] : {std::pair{&alpha_rows, &out.spec.boundary.alpha},
                              std::pair{&beta_rows, &out.spec.boundary.beta}}) {
    for (int i = 1; i <= n; ++i) {
      auto it = rows->find(i);
      if (it == rows->end())
        throw SpecParseError(order_line, "missing boundary row " + std::to_string(i));
      for (int j = 0; j < n; ++j)
        (*target)(i - 1, j) = it->second.second[static_cast<std::size_t>(j)];
    }
  }

  if (!deltas) throw SpecParseError(line_no, "missing 'delta'");
  if (static_cast<int>(deltas->size()) != n)
    throw SpecParseError(delta_line, "delta count " + std::to_string(deltas->size()) +
                                         " does not match order " + std::to_string(n));
  out.spec.deltas = Eigen::Map<const Eigen::VectorXd>(deltas->data(),
                                                      static_cast<Eigen::Index>(n));

  if (functionals.empty()) throw SpecParseError(line_no, "missing 'functional'");
  if (shared) {
    if (functionals.size() != 1)
      throw SpecParseError(functionals.begin()->second.line,
                           "a shared functional excludes indexed functionals");
    out.spec.shared_functional = true;
    out.spec.functionals.push_back(functionals.at(0).functional);
  } else {
    for (int i = 1; i <= n; ++i) {
      auto it = functionals.find(i);
      if (it == functionals.end())
        throw SpecParseError(functionals.begin()->second.line,
                             "missing functional " + std::to_string(i));
      out.spec.functionals.push_back(it->second.functional);
    }
  }
  for (const auto& [idx, entry] : functionals) {
    try {
      entry.functional.validate_support(out.spec.problem.a, out.spec.problem.b);
    } catch (const std::invalid_argument& e) {
      throw SpecParseError(entry.line, e.what());
    }
  }

  out.spec.tols = options.tols;
  out.sigma = sigma ? *sigma : expr::Expression::constant(0.0);
  out.options = options;
  return out;
}

inline ParsedSpec parse_spec_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open problem file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_spec_text(buffer.str());
}

}  // namespace greenfn
