#include "doctest.h"

#include <cmath>
#include <functional>
#include <numbers>

#include "phantom/error.hpp"
#include "phantom/folded.hpp"

using namespace phantom;

namespace {

// Composite Gauss-Legendre (5 points per panel), independent of the library
// quadrature.
double gl5(const std::function<double(double)>& f, double a, double b, int panels) {
  static const double xs[5] = {0.0, -0.5384693101056831, 0.5384693101056831, -0.9061798459386640,
                               0.9061798459386640};
  static const double ws[5] = {0.5688888888888889, 0.4786286704993665, 0.4786286704993665,
                               0.2369268850561891, 0.2369268850561891};
  double s = 0.0;
  const double w = (b - a) / panels;
  for (int k = 0; k < panels; ++k) {
    const double m = a + (k + 0.5) * w;
    for (int i = 0; i < 5; ++i) s += ws[i] * f(m + 0.5 * w * xs[i]);
  }
  return 0.5 * w * s;
}

// Way-in/way-out oracle: quadrature of Z/(phi + psi Z) plus bisection.
double wiwo_oracle(double X0, double phi, double psi) {
  auto I = [&](double Xs) {
    return gl5([&](double z) { return z / (phi + psi * z); }, X0, Xs, 400);
  };
  double lo = 1e-9;
  double hi = 4.0 * std::abs(X0);
  for (int i = 0; i < 100; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (I(mid) < 0.0) lo = mid; else hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("folded node classification") {
  const ParameterSet p = ParameterSet::reference();
  for (double delta : {1e-3, 1e-2}) {
    const FoldedSingularity fs = classify_folded(p, delta);
    CHECK(fs.X_eval == doctest::Approx(-3.3248).epsilon(1e-4));
    CHECK(fs.kind == FoldedKind::FoldedNode);
    CHECK(fs.xi_plus.imag() == 0.0);
    CHECK(fs.xi_plus.real() < 0.0);
    CHECK(fs.xi_minus.real() < fs.xi_plus.real());
  }
  const FoldedSingularity z = classify_folded(p, 0.0);
  CHECK(z.xi_plus.real() == 0.0);
  CHECK(z.xi_minus.real() == -p.a0());
  CHECK(z.complex_window == doctest::Approx(0.683195).epsilon(1e-6));

  const FoldedSingularity s = classify_folded(p.with("b2", 3.1), 0.01);
  CHECK(s.phi < 0.0);
  CHECK(s.X_eval > 0.0);
  CHECK(s.kind == FoldedKind::FoldedSaddle);
}

TEST_CASE("K1 equilibria") {
  const ParameterSet p = ParameterSet::reference();
  const FoldGeometry g = geometry(p);
  const double ac = g.alpha * p.c();
  const K1Equilibria e0 = k1_equilibria(p, 0.0);
  CHECK(e0.X1_minus == doctest::Approx(-p.a0() / ac).epsilon(1e-15));
  CHECK(e0.X1_plus == 0.0);

  const K1Equilibria e = k1_equilibria(p, 0.01);
  CHECK(e.X1_plus == doctest::Approx(-0.005727).epsilon(1e-3));
  CHECK(e.X1_minus == doctest::Approx(-0.677470).epsilon(1e-5));
  CHECK(e.X1_minus < e.X1_plus);
  CHECK(e.X1_plus < 0.0);

  auto defect = [&](double d) {
    return std::abs(k1_equilibria(p, d).X1_minus - (-p.a0() / ac + 2.0 * g.phi * d / p.a0()));
  };
  const double ratio = defect(0.01) / defect(0.005);
  CHECK(ratio == doctest::Approx(4.0).epsilon(0.05));
  CHECK_THROWS_AS(k1_equilibria(p, 0.5), DomainError);
}

TEST_CASE("way-in/way-out function") {
  const ParameterSet p = ParameterSet::reference();
  const WiwoCoefficients k = WiwoCoefficients::from(p);
  CHECK(k.phi == doctest::Approx(0.283940).epsilon(1e-5));
  CHECK(k.psi == doctest::Approx(0.260439).epsilon(1e-5));

  WiwoCoefficients sym = k;
  sym.psi = 0.0;
  for (int i = 1; i <= 20; ++i) {
    const double X0 = -0.65 * i / 21.0;
    CHECK(std::abs(wiwo(X0, sym) + X0) < 1e-10);
  }
  WiwoCoefficients tiny = k;
  tiny.psi = 1e-7;
  CHECK(std::abs(wiwo(-0.3, tiny) - 0.3) < 1e-6);

  for (double X0 : {-0.6, -0.45, -0.3, -0.2, -0.05}) {
    const double xs = wiwo(X0, k);
    CHECK(xs > 0.0);
    CHECK(xs == doctest::Approx(wiwo_oracle(X0, k.phi, k.psi)).epsilon(1e-8));
    CHECK(std::abs(wiwo_integral(X0, xs, k)) < 1e-12);
  }
  CHECK(wiwo(-0.3, k) == doctest::Approx(0.3677398).epsilon(1e-6));
  CHECK(wiwo(-0.2, k) == doctest::Approx(0.2279219).epsilon(1e-6));

  double last = std::numeric_limits<double>::infinity();
  for (int i = 1; i <= 50; ++i) {
    const double X0 = -k.window() + (k.window() - 1e-3) * i / 51.0;
    const double xs = wiwo(X0, k);
    CHECK(xs < last);
    last = xs;
  }
  CHECK_THROWS_AS(wiwo(0.1, k), DomainError);
  CHECK_THROWS_AS(wiwo(-0.9, k), DomainError);
}

TEST_CASE("rotation sectors") {
  const ParameterSet p = ParameterSet::reference();
  const WiwoCoefficients k = WiwoCoefficients::from(p);
  const WiwoResult r0 = rotation_sector(-1e-6, k, 0.01);
  CHECK(r0.R < 1e-5);
  CHECK(r0.k == 0);

  const WiwoResult r = rotation_sector(-0.3, k, 0.05);
  auto omega = [&](double z) { return std::sqrt(std::max(0.0, k.a0 - k.A * k.A * z * z)); };
  const double R_oracle =
      gl5([&](double z) { return omega(z) / (k.phi + k.psi * z); }, -0.3, r.Xstar, 2000);
  CHECK(r.R == doctest::Approx(R_oracle).epsilon(1e-6));
  CHECK(r.k == static_cast<int>(std::floor(r.R / (2.0 * std::numbers::pi * 0.05))));
  const WiwoResult half = rotation_sector(-0.3, k, 0.025);
  CHECK(std::abs(half.k - 2 * r.k) <= 1);

  int last_k = 1 << 20;
  for (int i = 1; i < 40; ++i) {
    const double X0 = -k.window() + (k.window() - 1e-3) * i / 40.0;
    const int kk = rotation_sector(X0, k, 0.02).k;
    CHECK(kk <= last_k);
    last_k = kk;
  }

  // The printed integrand is real only for Z > 1/A; report it where defined.
  const WiwoResult far = rotation_sector(-0.6, k, 0.05);
  CHECK(far.Xstar > 1.0 / k.A);
  CHECK(far.R_printed.has_value());
  CHECK_FALSE(rotation_sector(-0.2, k, 0.05).R_printed.has_value());
}

TEST_CASE("C3 and C4") {
  const ParameterSet p = ParameterSet::reference();
  const FoldGeometry g = geometry(p);
  const double c3_gk = contraction_c3(p, QuadratureRule::GaussKronrod);
  const double c3_ts = contraction_c3(p, QuadratureRule::TanhSinh);
  CHECK(c3_gk > 0.0);
  CHECK(std::abs(c3_gk - c3_ts) < 1e-6 * c3_gk);
  const double lo = x_sing(g.X_max, p);
  const double hi = x_sing(g.gamma, p);
  CHECK(std::abs(c3_integrand(hi, p)) < 1e-12);
  for (int i = 0; i <= 100; ++i) CHECK(c3_integrand(lo + (hi - lo) * i / 100.0, p) >= 0.0);
  const double c3_oracle =
      p.c() * gl5([&](double x) { return c3_integrand(x, p); }, lo, hi, 400);
  CHECK(c3_gk == doctest::Approx(c3_oracle).epsilon(1e-9));
  CHECK(c3_gk == doctest::Approx(0.3260781).epsilon(1e-6));

  const double c4_gk = expansion_c4(p, QuadratureRule::GaussKronrod);
  const double c4_ts = expansion_c4(p, QuadratureRule::TanhSinh);
  CHECK(c4_gk == doctest::Approx(0.75).epsilon(0.02 / 0.75));
  CHECK(std::abs(c4_gk - c4_ts) < 1e-6 * c4_gk);
  CHECK(std::abs(c4_integrand(g.x_f, p)) < 1e-20);
  CHECK(std::abs(c4_integrand(-g.x_f, p)) < 1e-20);
  auto denom = [&](double x) { return p.a0() * x + p.a1() * f_cubic(x, p) + p.a2() - p.c() * g.X_f; };
  CHECK(denom(-g.x_f) == doctest::Approx(1.600).epsilon(1e-3));
  CHECK(denom(g.x_f) == doctest::Approx(3.043).epsilon(1e-3));
}

TEST_CASE("H5 check") {
  const ParameterSet p = ParameterSet::reference();
  const H5Report desk = check_h5(p.with_singular(0.05, 0.1));
  CHECK_FALSE(desk.holds);
  CHECK(desk.lhs == doctest::Approx(desk.C3 / 0.1));
  CHECK(desk.rhs == doctest::Approx(2.0 * desk.C4 / 0.05));
  CHECK(check_h5(p.with_singular(0.05, 1e-4)).holds);

  const double ds = desk.delta_star;
  CHECK(check_h5(desk.C3, desk.C4, 0.05, ds * (1 - 1e-9)).holds);
  CHECK_FALSE(check_h5(desk.C3, desk.C4, 0.05, ds * (1 + 1e-9)).holds);
}
