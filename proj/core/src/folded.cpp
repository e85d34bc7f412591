#include "phantom/folded.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/tools/roots.hpp>

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <sstream>

#include "phantom/error.hpp"

namespace phantom {

namespace {

constexpr double kQuadTol = 1e-12;

template <class F>
double integrate(F&& fn, double a, double b, QuadratureRule rule) {
  if (rule == QuadratureRule::GaussKronrod) {
    double err = 0.0;
    return boost::math::quadrature::gauss_kronrod<double, 15>::integrate(fn, a, b, 20, kQuadTol,
                                                                          &err);
  }
  boost::math::quadrature::tanh_sinh<double> ts;
  return ts.integrate(fn, a, b, kQuadTol);
}

}  // namespace

std::string_view to_string(FoldedKind kind) {
  switch (kind) {
    case FoldedKind::FoldedNode:
      return "FoldedNode";
    case FoldedKind::FoldedSaddle:
      return "FoldedSaddle";
    case FoldedKind::FoldedSaddleNode:
      return "FoldedSaddleNode";
  }
  return "?";
}

FoldedSingularity classify_folded(const ParameterSet& p, double delta) {
  if (!(delta >= 0.0)) throw InvalidParameter("classify: delta must be non-negative");
  const FoldGeometry geo = geometry(p);
  FoldedSingularity fs;
  fs.delta = delta;
  fs.phi = geo.phi;
  fs.psi = geo.psi;
  fs.X_eval = 24.0 * p.c() * p.lambda3() * geo.x_f * geo.phi;
  fs.A = geo.alpha * p.c() / p.a0();
  fs.complex_window = std::sqrt(p.a0()) / fs.A;
  const std::complex<double> root =
      std::sqrt(std::complex<double>(p.a0() * p.a0() + delta * fs.X_eval, 0.0));
  fs.xi_plus = 0.5 * (-p.a0() + root);
  fs.xi_minus = 0.5 * (-p.a0() - root);
  if (std::abs(fs.phi) < kSaddleNodeTol) {
    fs.kind = FoldedKind::FoldedSaddleNode;
  } else if (fs.X_eval < 0.0) {
    fs.kind = FoldedKind::FoldedNode;
  } else {
    fs.kind = FoldedKind::FoldedSaddle;
  }
  try {
    const K1Equilibria eq = k1_equilibria(p, delta);
    fs.X1_minus = eq.X1_minus;
    fs.X1_plus = eq.X1_plus;
  } catch (const DomainError&) {
  }
  return fs;
}

K1Equilibria k1_equilibria(const ParameterSet& p, double delta) {
  const FoldGeometry geo = geometry(p);
  const double ac = geo.alpha * p.c();
  const double disc = p.a0() * p.a0() - 8.0 * delta * ac * geo.phi;
  if (disc < 0.0) {
    std::ostringstream os;
    os << "delta too large for K1 equilibria (a0^2 - 8 delta alpha c phi = " << disc << ")";
    throw DomainError(os.str());
  }
  const double s = std::sqrt(disc);
  // Citardauq form for the root near zero avoids cancellation.
  const double plus = -4.0 * delta * geo.phi / (p.a0() + s);
  return {(-p.a0() - s) / (2.0 * ac), plus};
}

double WiwoCoefficients::window() const { return std::sqrt(a0) / A; }

WiwoCoefficients WiwoCoefficients::from(const ParameterSet& p) {
  const FoldGeometry geo = geometry(p);
  return {geo.phi, geo.psi, p.a0(), geo.alpha * p.c() / p.a0()};
}

WiwoCoefficients WiwoCoefficients::chart_k2(const ParameterSet& p, double eps) {
  WiwoCoefficients k = from(p);
  k.psi *= std::sqrt(eps);
  return k;
}

namespace {

// H(Z) = int_0^Z s/(phi + psi s) ds.
double wiwo_primitive(double Z, const WiwoCoefficients& k) {
  if (std::abs(k.psi) < 1e-10) return Z * Z / (2.0 * k.phi);
  const double u = k.psi * Z / k.phi;
  if (std::abs(u) < 0.1) {
    // u - log1p(u) = sum_{n>=2} (-1)^n u^n / n, scaled by phi/psi^2 = Z^2/(phi u^2).
    double sum = 0.0;
    double term = 1.0;  // u^(n-2)
    for (int n = 2; n < 40; ++n) {
      const double add = ((n % 2 == 0) ? 1.0 : -1.0) * term / n;
      sum += add;
      if (std::abs(add) < 1e-18 * std::abs(sum)) break;
      term *= u;
    }
    return Z * Z / k.phi * sum;
  }
  return Z / k.psi - (k.phi / (k.psi * k.psi)) * std::log1p(u);
}

void check_drift(double Z, const WiwoCoefficients& k) {
  if (!(k.phi + k.psi * Z > 0.0)) {
    std::ostringstream os;
    os << "wiwo: phi + psi Z loses sign at Z = " << Z;
    throw DomainError(os.str());
  }
}

}  // namespace

double wiwo_integral(double X0, double X1, const WiwoCoefficients& k) {
  check_drift(X0, k);
  check_drift(X1, k);
  return wiwo_primitive(X1, k) - wiwo_primitive(X0, k);
}

double wiwo(double X0, const WiwoCoefficients& k) {
  if (!(k.phi > 0.0)) throw DomainError("wiwo: requires phi > 0");
  const double w = k.window();
  if (!(X0 > -w && X0 < 0.0)) {
    std::ostringstream os;
    os << "wiwo: X0 = " << X0 << " outside the window (" << -w << ", 0)";
    throw DomainError(os.str());
  }
  check_drift(X0, k);
  if (std::abs(k.psi) < 1e-10) return -X0;
  const double target = wiwo_primitive(X0, k);
  auto fn = [&](double Z) { return wiwo_primitive(Z, k) - target; };

  double hi = -X0;
  const double limit = k.psi < 0.0 ? -k.phi / k.psi : std::numeric_limits<double>::infinity();
  while (fn(hi) < 0.0) {
    hi = std::min(2.0 * hi, 0.5 * (hi + limit));
    if (!(k.phi + k.psi * hi > 0.0)) throw DomainError("wiwo: phi + psi Z loses sign");
    if (hi > 1e6) throw ConvergenceError("wiwo: failed to bracket the exit point");
  }
  double lo = 0.0;
  std::uintmax_t iters = 200;
  const auto [a, b] = boost::math::tools::toms748_solve(
      fn, lo, hi, fn(lo), fn(hi), boost::math::tools::eps_tolerance<double>(52), iters);
  return 0.5 * (a + b);
}

double wiwo(double X0, const ParameterSet& p) { return wiwo(X0, WiwoCoefficients::from(p)); }

WiwoResult rotation_sector(double X0, const WiwoCoefficients& k, double delta) {
  if (!(delta > 0.0)) throw InvalidParameter("rotation_sector: delta must be positive");
  WiwoResult r;
  r.X0 = X0;
  r.delta = delta;
  r.Xstar = wiwo(X0, k);
  const double w = k.window();
  auto omega = [&](double Z) {
    const double v = k.a0 - k.A * k.A * Z * Z;
    return v > 0.0 ? std::sqrt(v) : 0.0;
  };
  auto integrand = [&](double Z) { return omega(Z) / (k.phi + k.psi * Z); };
  // Split at the zero of omega so the square-root endpoint sits at a
  // subinterval boundary.
  const double upper = std::min(r.Xstar, w);
  r.R = integrate(integrand, X0, upper, QuadratureRule::TanhSinh);

  const double lo = std::max(X0, 1.0 / k.A);
  if (lo < r.Xstar) {
    auto printed = [&](double Z) {
      return std::sqrt(std::max(0.0, k.A * Z - 1.0)) / (k.phi + k.psi * Z);
    };
    r.R_printed = integrate(printed, lo, r.Xstar, QuadratureRule::TanhSinh);
  }
  r.k = static_cast<int>(std::floor(r.R / (2.0 * std::numbers::pi * delta)));
  return r;
}

WiwoResult rotation_sector(double X0, const ParameterSet& p, double delta) {
  return rotation_sector(X0, WiwoCoefficients::from(p), delta);
}

double c3_integrand(double x, const ParameterSet& p) {
  const double ft = f_tilde(x, p);
  const double dft = df_tilde(x, p);
  const double denom = df_cubic(x, p) * (ft + p.b1() * g_cubic(ft, p) + p.b2());
  return dft * dft * dg_cubic(ft, p) / denom;
}

double contraction_c3(const ParameterSet& p, QuadratureRule rule) {
  const FoldGeometry geo = geometry(p);
  const double lo = x_sing(geo.X_max, p);
  const double hi = x_sing(geo.gamma, p);
  constexpr int kSamples = 200;
  double sign0 = 0.0;
  for (int i = 0; i <= kSamples; ++i) {
    const double x = lo + (hi - lo) * i / kSamples;
    const double ft = f_tilde(x, p);
    const double d = df_cubic(x, p) * (ft + p.b1() * g_cubic(ft, p) + p.b2());
    if (i == 0) sign0 = d;
    if (d == 0.0 || (d > 0.0) != (sign0 > 0.0)) {
      std::ostringstream os;
      os << "contraction_c3: degenerate surge configuration (denominator vanishes near x = " << x
         << ")";
      throw DomainError(os.str());
    }
  }
  return p.c() * integrate([&](double x) { return c3_integrand(x, p); }, lo, hi, rule);
}

double c4_integrand(double x, const ParameterSet& p) {
  const FoldGeometry geo = geometry(p);
  const double df = df_cubic(x, p);
  return df * df / (p.a0() * x + p.a1() * f_cubic(x, p) + p.a2() - p.c() * geo.X_f);
}

double expansion_c4(const ParameterSet& p, QuadratureRule rule) {
  const FoldGeometry geo = geometry(p);
  const double shift = p.a2() - p.c() * geo.X_f;
  auto denom = [&](double x) { return p.a0() * x + p.a1() * f_cubic(x, p) + shift; };
  constexpr int kSamples = 200;
  for (int i = 0; i <= kSamples; ++i) {
    const double x = -geo.x_f + 2.0 * geo.x_f * i / kSamples;
    if (!(denom(x) > 0.0)) {
      std::ostringstream os;
      os << "expansion_c4: denominator a0 x + a1 f(x) + a2 - c X_f = " << denom(x)
         << " is not positive at x = " << x;
      throw DomainError(os.str());
    }
  }
  auto integrand = [&](double x) {
    const double df = df_cubic(x, p);
    return df * df / denom(x);
  };
  return integrate(integrand, -geo.x_f, geo.x_f, rule);
}

H5Report check_h5(double C3, double C4, double eps, double delta) {
  if (!(eps > 0.0) || !(delta > 0.0)) throw InvalidParameter("check_h5: eps, delta must be > 0");
  H5Report r;
  r.C3 = C3;
  r.C4 = C4;
  r.lhs = C3 / delta;
  r.rhs = 2.0 * C4 / eps;
  r.margin = r.lhs - r.rhs;
  r.holds = r.lhs > r.rhs;
  r.delta_star = eps * C3 / (2.0 * C4);
  return r;
}

H5Report check_h5(const ParameterSet& p) {
  return check_h5(contraction_c3(p), expansion_c4(p), p.eps(), p.delta());
}

}  // namespace phantom
