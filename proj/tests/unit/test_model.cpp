#include "doctest.h"

#include <cmath>

#include "phantom/error.hpp"
#include "phantom/model.hpp"

using namespace phantom;

namespace {

// Brute-force bisection for the middle root of a cubic on a grid, written
// independently of the library solver.
double middle_root_oracle(double X, const ParameterSet& p) {
  auto h = [&](double x) { return p.a0() * x + p.a1() * f_cubic(x, p) + p.a2() + p.c() * X; };
  std::vector<std::pair<double, double>> brackets;
  const double step = 1e-3;
  for (double x = -60.0; x < 60.0; x += step) {
    if ((h(x) < 0.0) != (h(x + step) < 0.0)) brackets.emplace_back(x, x + step);
  }
  REQUIRE(brackets.size() == 3);
  auto [lo, hi] = brackets[1];
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if ((h(mid) < 0.0) == (h(lo) < 0.0)) lo = mid; else hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("parameter validation rejects sign violations") {
  ParameterValues v;
  v.lambda3 = 1.0;
  CHECK_THROWS_AS(ParameterSet{v}, InvalidParameter);
  v = ParameterValues{};
  v.eps = 1.0;
  CHECK_THROWS_AS(ParameterSet{v}, InvalidParameter);
  v = ParameterValues{};
  v.a2 = 0.0;
  CHECK_THROWS_AS(ParameterSet{v}, InvalidParameter);
  CHECK_THROWS_AS(ParameterSet::reference().with("nonsense", 1.0), InvalidParameter);
  CHECK(ParameterSet::reference().with("lambda1", 3.0).lambda1() == 3.0);
}

TEST_CASE("full right-hand side") {
  const ParameterSet p = ParameterSet::reference().with_singular(0.1, 0.1);
  const State4 d = eval_full_rhs({0, 0, 0, 0}, p);
  CHECK(d.x == 0.0);
  CHECK(d.y == doctest::Approx(8.0).epsilon(1e-14));
  CHECK(d.X == 0.0);
  CHECK(d.Y == doctest::Approx(-0.8).epsilon(1e-14));

  const State4 s{0.3, -0.2, 1.1, 0.4};
  const State4 a = eval_full_rhs(s, p);
  const State4 b = eval_full_rhs(s, p.with("eps", 0.05));
  CHECK(b.x == doctest::Approx(2.0 * a.x).epsilon(1e-14));
  CHECK(b.y == a.y);
  CHECK(b.X == a.X);
  CHECK(b.Y == a.Y);
}

TEST_CASE("full equilibrium is a zero of the vector field") {
  const ParameterSet p = ParameterSet::reference();
  // Y' = 0 gives X = -b2 (b1 = 0); then Y = g(X), and the Secretor
  // equilibrium is any root of a0 x + a1 f(x) + a2 + c X = 0.
  const double X = 0.8;
  const double Y = g_cubic(X, p);
  const double x = x_sing(X, p);
  const State4 d = eval_full_rhs({x, f_cubic(x, p), X, Y}, p);
  CHECK(std::abs(d.x) < 1e-10);
  CHECK(std::abs(d.y) < 1e-10);
  CHECK(std::abs(d.X) < 1e-12);
  CHECK(std::abs(d.Y) < 1e-12);
}

TEST_CASE("cubic evaluations") {
  const ParameterSet p = ParameterSet::reference();
  const CubicValues c0 = eval_cubics(0.0, p);
  CHECK(c0.f == 0.0);
  CHECK(c0.df == 1.5);
  CHECK(c0.ft == doctest::Approx(-1.15942).epsilon(1e-5));
  const double xf = std::sqrt(0.5);
  CHECK(std::abs(df_cubic(xf, p)) < 1e-12);
  CHECK(f_cubic(xf, p) == doctest::Approx(0.707107).epsilon(1e-6));
  for (double x = -3.0; x <= 3.0; x += 0.37) {
    CHECK(f_cubic(-x, p) == -f_cubic(x, p));
    const double h = 1e-6;
    const CubicValues c = eval_cubics(x, p);
    CHECK(c.df == doctest::Approx((f_cubic(x + h, p) - f_cubic(x - h, p)) / (2 * h)).epsilon(1e-7));
    CHECK(c.dg == doctest::Approx((g_cubic(x + h, p) - g_cubic(x - h, p)) / (2 * h)).epsilon(1e-7));
    CHECK(c.dft == doctest::Approx((f_tilde(x + h, p) - f_tilde(x - h, p)) / (2 * h)).epsilon(1e-7));
  }
}

TEST_CASE("fold geometry at the reference parameters") {
  const ParameterSet p = ParameterSet::reference();
  const FoldGeometry g = geometry(p);
  CHECK(g.x_f == doctest::Approx(0.707107).epsilon(1e-6));
  CHECK(g.gamma == doctest::Approx(1.154701).epsilon(1e-6));
  CHECK(g.X_f == doctest::Approx(-2.204708).epsilon(1e-6));
  CHECK(g.X_SN == doctest::Approx(12.81280).epsilon(1e-6));
  CHECK(g.alpha == doctest::Approx(2.121320).epsilon(1e-6));
  CHECK(g.phi == doctest::Approx(0.283940).epsilon(1e-5));
  CHECK(g.psi == doctest::Approx(0.260439).epsilon(1e-5));
  CHECK(g.X_min == doctest::Approx(-2.309401).epsilon(1e-6));
  CHECK(g.X_max == doctest::Approx(2.309401).epsilon(1e-6));
  CHECK(g.X_max == 2.0 * g.gamma);
  CHECK(g.X_min == -2.0 * g.gamma);
  CHECK(g_cubic(g.X_max, p) == doctest::Approx(g_cubic(-g.gamma, p)).epsilon(1e-12));

  CHECK(std::abs(df_cubic(g.x_f, p)) < 1e-12);
  CHECK(std::abs(dg_cubic(g.gamma, p)) < 1e-12);
  CHECK(std::abs(dg_cubic(-g.gamma, p)) < 1e-12);
  CHECK(g.X_min < -g.gamma);
  CHECK(g.X_max > g.gamma);
  CHECK(g.x_cminus < 0.0);
  CHECK(g.x_cplus > 0.0);
  CHECK(std::abs(df_tilde(g.x_cplus, p)) < 1e-10);
  CHECK(std::abs(df_tilde(g.x_cminus, p)) < 1e-10);
  CHECK(g.x_c_squared == doctest::Approx(17.1667).epsilon(1e-4));

  // psi against a central difference of the drift.
  const double h = 1e-5;
  const double fd =
      (regulator_drift(g.X_f + h, p) - regulator_drift(g.X_f - h, p)) / (2.0 * h);
  CHECK(g.psi == doctest::Approx(fd).epsilon(1e-6));

  CHECK(geometry(p.with("lambda1", 3.0)).x_f == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("geometry rejects a Regulator knee at X_f") {
  // Choose mu1 so that g'(X_f) = 0: mu1 = -3 mu3 X_f^2.
  const ParameterSet p = ParameterSet::reference();
  const double Xf = geometry(p).X_f;
  CHECK_THROWS_AS(geometry(p.with("mu1", 3.0 * Xf * Xf)), DomainError);
}

TEST_CASE("x_sing") {
  const ParameterSet p = ParameterSet::reference();
  NullclineCubic k = NullclineCubic::from(p);
  k.a2 = 0.0;
  CHECK(std::abs(x_sing(0.0, k)) < 1e-14);

  const FoldGeometry g = geometry(p);
  const double xm = x_sing(g.X_max, p);
  const double xg = x_sing(g.gamma, p);
  CHECK(xm == doctest::Approx(middle_root_oracle(g.X_max, p)).epsilon(1e-12));
  CHECK(xg == doctest::Approx(middle_root_oracle(g.gamma, p)).epsilon(1e-12));
  CHECK(xm == doctest::Approx(-2.7104021).epsilon(1e-7));
  CHECK(xg == doctest::Approx(-1.6351240).epsilon(1e-7));

  for (double X = -5.0; X <= 2.9; X += 0.1) {
    CHECK(std::abs(f_tilde(x_sing(X, p), p) - X) < 1e-9);
  }
  CHECK_THROWS_AS(x_sing(3.0, p), DomainError);
  CHECK_THROWS_AS(x_sing(-5.5, p), DomainError);
}

TEST_CASE("cubic solver near a double root") {
  // (x - 1)^2 (x + 2) = x^3 - 3x + 2
  const auto r = depressed_cubic_roots(1.0, -3.0, 2.0);
  CHECK(r.front() == doctest::Approx(-2.0).epsilon(1e-12));
  const auto r3 = depressed_cubic_roots(1.0, -3.0, 2.0 - 1e-6);
  CHECK(r3.size() == 3);
}

TEST_CASE("hypotheses H1-H4") {
  const ParameterSet p = ParameterSet::reference();
  const HypothesisReport r = check_hypotheses(p);
  CHECK(r.all());
  CHECK(r.h1_gap == doctest::Approx(0.1047).epsilon(1e-3));
  CHECK_FALSE(r.h1_warning.has_value());
  CHECK(r.h1.holds == (r.h1.margin > 0.0));
  CHECK(r.h2.holds == (r.h2.margin > 0.0));

  const HypothesisReport c4 = check_hypotheses(p.with("c", 4.0));
  CHECK_FALSE(c4.h3.holds);
  CHECK(geometry(p.with("c", 4.0)).X_SN == doctest::Approx(2.2105).epsilon(1e-4));

  // c -> 0+: H2 reduces to the sign of -a0 x_f + a1 f(-x_f) + a2 > 0.
  const HypothesisReport small_c = check_hypotheses(p.with("c", 1e-9));
  CHECK_FALSE(small_c.h2.holds);
  CHECK(-small_c.h2.margin == doctest::Approx(0.0787510).epsilon(1e-5));

  const HypothesisReport warn = check_hypotheses(p, 0.05);
  CHECK(warn.h1_warning.has_value());
}
