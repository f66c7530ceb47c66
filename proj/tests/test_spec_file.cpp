#include <catch2/catch_amalgamated.hpp>

#include "greenfn/spec_file.hpp"

using Catch::Approx;
using namespace greenfn;

#ifndef GREENFN_FIXTURE_DIR
#define GREENFN_FIXTURE_DIR "fixtures"
#endif

TEST_CASE("shipped periodic problem file") {
  auto parsed = parse_spec_file(std::string(GREENFN_FIXTURE_DIR) + "/periodic.spec");
  const NonlocalSpec& spec = parsed.spec;
  CHECK(spec.problem.order == 1);
  CHECK(spec.problem.a == 0.0);
  CHECK(spec.problem.b == 1.0);
  CHECK(spec.problem.shift == 1.0);
  CHECK(spec.problem.coefficients[0](0.37) == 0.0);
  CHECK(spec.boundary.alpha(0, 0) == 1.0);
  CHECK(spec.boundary.beta(0, 0) == -1.0);
  CHECK(spec.deltas(0) == 0.5);
  CHECK(spec.shared_functional);
  CHECK(parsed.sigma(0.5) == 1.0);
  CHECK(parsed.options.grid_t == 21);
  CHECK(parsed.options.periodic_oracle);
  REQUIRE(parsed.options.scan_shift.has_value());
  CHECK(parsed.options.scan_shift->lo == -3.0);
  CHECK(parsed.options.scan_shift->count == 61);
  REQUIRE(parsed.options.scan_delta.has_value());
  CHECK(parsed.options.scan_delta->count == 81);
  CHECK_NOTHROW(spec.validate());
}

TEST_CASE("shipped second-order problem file") {
  auto parsed = parse_spec_file(std::string(GREENFN_FIXTURE_DIR) + "/dirichlet2.spec");
  CHECK(parsed.spec.problem.order == 2);
  CHECK(parsed.spec.deltas(0) == 0.3);
  CHECK(parsed.spec.deltas(1) == -0.2);
  CHECK(parsed.spec.boundary.alpha(0, 0) == 1.0);
  CHECK(parsed.spec.boundary.beta(1, 0) == 1.0);
  CHECK(parsed.sigma(0.0) == Approx(1.0));
  CHECK_NOTHROW(parsed.spec.validate());
}

namespace {

constexpr const char* kBase = R"(order 1
interval 0 1
shift 1
coeff 1 0
alpha 1 1
beta 1 -1
delta 0.5
functional shared integral 1 on 0 1
)";

int error_line(const std::string& text) {
  try {
    parse_spec_text(text);
  } catch (const SpecParseError& e) {
    return e.line();
  }
  return -1;
}

}  // namespace

TEST_CASE("semantic errors carry line numbers") {
  CHECK(error_line("order 1\ninterval 0 1\nshift 1\ncoeff 1 0\nalpha 1 1\nbeta 1 -1\n"
                   "delta 0.5 0.5\nfunctional shared integral 1 on 0 1\n") == 7);
  CHECK(error_line(std::string(kBase) + "functional 1 multipoint 0.5 1\n") == 9);
  CHECK(error_line("order 1\ninterval 0 1\nshift 1\ncoeff 1 0\nalpha 1 1\nbeta 1 -1\n"
                   "delta 0.5\nfunctional shared integral 1 on 0 2\n") == 8);
  CHECK(error_line(std::string(kBase) + "unknown_key 3\n") == 9);
  CHECK(error_line("coeff 1 0\n") == 1);  // order must come first
  CHECK(error_line("order 1\ninterval 1 0\n") == 2);
  CHECK(error_line("order 1\ninterval 0 1\nshift 1\ncoeff 1 2*tan(t)\n") == 4);
  CHECK(error_line(std::string(kBase) + "alpha 1 2\n") == 9);  // duplicate row
  CHECK(error_line(std::string(kBase) + "grid 21\n") == 9);
  CHECK(error_line(std::string(kBase) + "scan shift 3 -3 61\n") == 9);
}

TEST_CASE("missing sections are rejected") {
  CHECK_THROWS_AS(parse_spec_text("order 1\ninterval 0 1\nshift 1\n"), SpecParseError);
  // missing functional
  CHECK_THROWS_AS(parse_spec_text("order 1\ninterval 0 1\nshift 1\ncoeff 1 0\n"
                                  "alpha 1 1\nbeta 1 -1\ndelta 0.5\n"),
                  SpecParseError);
}

TEST_CASE("expressions with spaces and comments parse") {
  auto parsed = parse_spec_text(
      "order 1\ninterval 0 1\nshift 2\n"
      "coeff 1 0.5 * sin(3*t) + 0.1   # damping\n"
      "alpha 1 1\nbeta 1 -1\ndelta 0\n"
      "functional shared integral 1 + t on 0.25 0.75\n"
      "sigma exp(-t) * (1 - t)\n");
  CHECK(parsed.spec.problem.coefficients[0](0.0) == Approx(0.1));
  CHECK(parsed.sigma(0.0) == Approx(1.0));
  CHECK(parsed.sigma(1.0) == Approx(0.0));
}

TEST_CASE("multipoint functionals parse") {
  auto parsed = parse_spec_text(
      "order 1\ninterval 0 1\nshift 1\ncoeff 1 0\nalpha 1 1\nbeta 1 -1\ndelta 0.25\n"
      "functional 1 multipoint 0.5 1 0.25 -2\n");
  CHECK_FALSE(parsed.spec.shared_functional);
  CHECK(parsed.spec.functionals.size() == 1);
  CHECK(parsed.spec.functionals[0]([](double t) { return t; }) ==
        Approx(0.5 * 1.0 + 0.25 * -2.0));
}
