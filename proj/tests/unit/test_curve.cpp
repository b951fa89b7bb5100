#include <doctest.h>

#include <cmath>

#include "common/error.hpp"
#include "common/rng.hpp"
#include "curve/curve.hpp"
#include "support/oracles.hpp"

using namespace gdce;
using namespace gdce::curve;

namespace {

double run(double x, std::vector<double> a) {
  return apply_curve(image::UnitImage(1, 1, {x}), CurveCoefficients(std::move(a)))[0];
}

}  // namespace

TEST_CASE("curve forward examples") {
  CHECK(run(0.5, {0.0}) == 0.5);
  CHECK(run(0.5, {1.0}) == 0.75);
  CHECK(run(0.5, {1.0, 1.0}) == 0.9375);
  CHECK(run(0.3, {-1.0}) == doctest::Approx(0.09));
  for (double a : {-1.0, -0.3, 0.0, 0.8, 1.0}) {
    CHECK(run(0.0, {a, a, a}) == 0.0);
    CHECK(run(1.0, {a, -a, a}) == 1.0);
  }
}

TEST_CASE("coefficients outside [-1,1] are rejected") {
  CHECK_THROWS_AS(CurveCoefficients({1.0001}), DataError);
  CHECK_THROWS_AS(CurveCoefficients(std::vector<double>{}), DataError);
  CHECK_THROWS_AS(CurveCoefficients({std::nan("")}), DataError);
}

TEST_CASE("range, monotonicity and global-only mapping") {
  Rng rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(8));
    std::vector<double> a(static_cast<std::size_t>(n));
    for (auto& v : a) v = rng.uniform(-1.0, 1.0);
    std::vector<double> x(33);
    for (auto& v : x) v = rng.uniform();
    x[5] = x[9];
    const auto y = apply_curve(image::UnitImage(33, 1, x), CurveCoefficients(a));
    CHECK(y[5] == y[9]);
    for (std::size_t i = 0; i < x.size(); ++i) {
      REQUIRE(y[i] >= 0.0);
      REQUIRE(y[i] <= 1.0);
      for (std::size_t j = 0; j < x.size(); ++j) {
        if (x[i] <= x[j]) REQUIRE(y[i] <= y[j]);
      }
    }
  }
}

TEST_CASE("alpha gradient examples") {
  auto g = curve_grad_alpha(image::UnitImage(1, 1, {0.5}), CurveCoefficients({0.3}));
  CHECK(g.at(0, 0) == 0.25);
  auto z = curve_grad_alpha(image::UnitImage(1, 1, {0.0}), CurveCoefficients({0.3, -0.2, 0.9}));
  for (double v : z.values) CHECK(v == 0.0);
}

TEST_CASE("input gradient examples") {
  auto id = curve_grad_input(image::UnitImage(2, 1, {0.2, 0.7}), CurveCoefficients::identity(4));
  CHECK(id[0] == 1.0);
  CHECK(id[1] == 1.0);
  CHECK(curve_grad_input(image::UnitImage(1, 1, {0.5}), CurveCoefficients({1.0}))[0] == 1.0);
}

TEST_CASE("curve gradients match central differences over 1000 cases") {
  Rng rng(17);
  double worst_alpha = 0.0, worst_input = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(8));
    std::vector<double> a(static_cast<std::size_t>(n));
    for (auto& v : a) v = rng.uniform(-0.99, 0.99);
    std::vector<double> x = {rng.uniform(0.01, 0.99)};
    const auto ga = curve_grad_alpha(image::UnitImage(1, 1, x), CurveCoefficients(a));
    auto fa = [&] { return curve_value<double>(x[0], a); };
    worst_alpha = std::max(worst_alpha, oracle::max_fd_error(a, ga.values, fa));
    const auto gi = curve_grad_input(image::UnitImage(1, 1, x), CurveCoefficients(a));
    worst_input = std::max(worst_input, oracle::max_fd_error(x, gi, fa));
  }
  CHECK(worst_alpha < 1e-6);
  CHECK(worst_input < 1e-6);
}

TEST_CASE("vector-Jacobian product equals weighted per-pixel gradients") {
  Rng rng(2);
  std::vector<double> x(20), w(20), a = {0.4, -0.7, 0.2};
  for (auto& v : x) v = rng.uniform();
  for (auto& v : w) v = rng.uniform(-1, 1);
  std::vector<double> vjp(3, 0.0);
  curve_backward<double>(x, a, w, vjp);
  const auto g = curve_grad_alpha(image::UnitImage(20, 1, x), CurveCoefficients(a));
  for (std::size_t n = 0; n < 3; ++n) {
    double s = 0.0;
    for (std::size_t p = 0; p < 20; ++p) s += w[p] * g.at(p, n);
    CHECK(vjp[n] == doctest::Approx(s).epsilon(1e-12));
  }
}

TEST_CASE("fitting examples") {
  std::vector<double> grid(257);
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = double(i) / 256.0;
  auto id = fit_curve_to_target(grid, 4);
  CHECK(id.max_error < 1e-12);
  for (double v : id.coefficients.alphas()) CHECK(std::abs(v) < 1e-9);

  std::vector<double> one(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) one[i] = curve_value<double>(grid[i], std::vector<double>{0.7});
  auto r = fit_curve_to_target(one, 1);
  CHECK(r.coefficients[0] == doctest::Approx(0.7).epsilon(1e-6));
  CHECK(r.max_error < 1e-8);

  std::vector<double> bad = grid;
  bad.front() = 0.1;
  CHECK_THROWS_AS(fit_curve_to_target(bad, 2), DataError);
}
