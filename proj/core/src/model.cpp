#include "phantom/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "phantom/error.hpp"

namespace phantom {

namespace {

bool finite_all(const ParameterValues& v) {
  for (double d : {v.a0, v.a1, v.a2, v.c, v.b1, v.b2, v.lambda1, v.lambda3, v.mu1,
                   v.mu3, v.eps, v.delta}) {
    if (!std::isfinite(d)) return false;
  }
  return true;
}

double* field_ptr(ParameterValues& v, std::string_view key) {
  if (key == "a0") return &v.a0;
  if (key == "a1") return &v.a1;
  if (key == "a2") return &v.a2;
  if (key == "c") return &v.c;
  if (key == "b1") return &v.b1;
  if (key == "b2") return &v.b2;
  if (key == "lambda1" || key == "λ1") return &v.lambda1;
  if (key == "lambda3" || key == "λ3") return &v.lambda3;
  if (key == "mu1" || key == "μ1") return &v.mu1;
  if (key == "mu3" || key == "μ3") return &v.mu3;
  if (key == "eps" || key == "ε" || key == "epsilon") return &v.eps;
  if (key == "delta" || key == "δ") return &v.delta;
  return nullptr;
}

}  // namespace

ParameterSet::ParameterSet(const ParameterValues& values) : v_(values) {
  std::ostringstream err;
  if (!finite_all(v_)) err << "all parameters must be finite; ";
  if (!(v_.lambda3 < 0.0)) err << "lambda3 must be negative (got " << v_.lambda3 << "); ";
  if (!(v_.mu3 < 0.0)) err << "mu3 must be negative (got " << v_.mu3 << "); ";
  if (!(v_.lambda1 > 0.0)) err << "lambda1 must be positive (got " << v_.lambda1 << "); ";
  if (!(v_.mu1 > 0.0)) err << "mu1 must be positive (got " << v_.mu1 << "); ";
  if (!(v_.a0 > 0.0)) err << "a0 must be positive (got " << v_.a0 << "); ";
  if (!(v_.a1 > 0.0)) err << "a1 must be positive (got " << v_.a1 << "); ";
  if (!(v_.a2 > 0.0)) err << "a2 must be positive (got " << v_.a2 << "); ";
  if (!(v_.c > 0.0)) err << "c must be positive (got " << v_.c << "); ";
  if (!(v_.eps > 0.0 && v_.eps < 1.0)) err << "eps must lie in (0,1) (got " << v_.eps << "); ";
  if (!(v_.delta > 0.0 && v_.delta < 1.0))
    err << "delta must lie in (0,1) (got " << v_.delta << "); ";
  const std::string msg = err.str();
  if (!msg.empty()) throw InvalidParameter("invalid parameter set: " + msg.substr(0, msg.size() - 2));
}

ParameterSet ParameterSet::reference() { return ParameterSet(ParameterValues{}); }

ParameterSet ParameterSet::with(std::string_view key, double value) const {
  ParameterValues v = v_;
  double* slot = field_ptr(v, key);
  if (slot == nullptr) throw InvalidParameter("unknown parameter '" + std::string(key) + "'");
  *slot = value;
  return ParameterSet(v);
}

ParameterSet ParameterSet::with_singular(double eps, double delta) const {
  ParameterValues v = v_;
  v.eps = eps;
  v.delta = delta;
  return ParameterSet(v);
}

double ParameterSet::get(std::string_view key) const {
  ParameterValues v = v_;
  const double* slot = field_ptr(v, key);
  if (slot == nullptr) throw InvalidParameter("unknown parameter '" + std::string(key) + "'");
  return *slot;
}

const std::vector<std::string>& ParameterSet::field_names() {
  static const std::vector<std::string> names{"a0", "a1", "a2", "c", "b1", "b2", "lambda1",
                                              "lambda3", "mu1", "mu3", "eps", "delta"};
  return names;
}

double f_cubic(double x, const ParameterSet& p) { return p.lambda3() * x * x * x + p.lambda1() * x; }
double df_cubic(double x, const ParameterSet& p) { return 3.0 * p.lambda3() * x * x + p.lambda1(); }
double g_cubic(double X, const ParameterSet& p) { return p.mu3() * X * X * X + p.mu1() * X; }
double dg_cubic(double X, const ParameterSet& p) { return 3.0 * p.mu3() * X * X + p.mu1(); }

double f_tilde(double x, const ParameterSet& p) {
  return -(p.a0() * x + p.a1() * f_cubic(x, p) + p.a2()) / p.c();
}

double df_tilde(double x, const ParameterSet& p) {
  return -(p.a0() + p.a1() * df_cubic(x, p)) / p.c();
}

double regulator_drift(double X, const ParameterSet& p) {
  const double dg = dg_cubic(X, p);
  if (dg == 0.0) {
    std::ostringstream os;
    os << "regulator drift is singular at X = " << X << " (g'(X) = 0)";
    throw DomainError(os.str());
  }
  return (X + p.b1() * g_cubic(X, p) + p.b2()) / dg;
}

State4 eval_full_rhs(const State4& s, const ParameterSet& p) {
  const double ed = p.eps() * p.delta();
  return {(-s.y + f_cubic(s.x, p)) / ed,
          (p.a0() * s.x + p.a1() * s.y + p.a2() + p.c() * s.X) / p.delta(),
          (-s.Y + g_cubic(s.X, p)) / p.delta(), s.X + p.b1() * s.Y + p.b2()};
}

CubicValues eval_cubics(double arg, const ParameterSet& p) {
  return {f_cubic(arg, p), df_cubic(arg, p), g_cubic(arg, p),
          dg_cubic(arg, p), f_tilde(arg, p), df_tilde(arg, p)};
}

std::vector<double> depressed_cubic_roots(double a3, double a1, double a0) {
  if (a3 == 0.0) throw DomainError("depressed_cubic_roots: leading coefficient is zero");
  const double p = a1 / a3;
  const double q = a0 / a3;
  auto poly = [&](double x) { return (x * x + p) * x + q; };
  auto dpoly = [&](double x) { return 3.0 * x * x + p; };
  auto polish = [&](double x) {
    const double d = dpoly(x);
    if (d != 0.0) {
      const double step = poly(x) / d;
      if (std::isfinite(step)) x -= step;
    }
    return x;
  };

  // disc > 0 <=> three distinct real roots.
  const double disc = -(4.0 * p * p * p + 27.0 * q * q);
  const double scale = 4.0 * std::abs(p * p * p) + 27.0 * q * q;
  std::vector<double> roots;
  if (p < 0.0 && disc > 1e-12 * scale) {
    const double m = 2.0 * std::sqrt(-p / 3.0);
    const double arg = std::clamp(3.0 * q / (p * m), -1.0, 1.0);
    const double theta = std::acos(arg) / 3.0;
    for (int k = 0; k < 3; ++k) {
      roots.push_back(polish(m * std::cos(theta - 2.0 * std::numbers::pi * k / 3.0)));
    }
    std::sort(roots.begin(), roots.end());
  } else {
    const double r = std::sqrt(std::max(0.0, q * q / 4.0 + p * p * p / 27.0));
    const double x = std::cbrt(-q / 2.0 + r) + std::cbrt(-q / 2.0 - r);
    roots.push_back(polish(x));
  }
  return roots;
}

namespace {

// Bisection on a sign-changing bracket; used when the trigonometric roots
// are too close for Newton polishing to separate them.
double bisect_root(double lo, double hi, const auto& fn) {
  double flo = fn(lo);
  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = fn(mid);
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

double x_sing(double X, const NullclineCubic& k) {
  const double a3 = k.a1 * k.lambda3;
  const double a1 = k.a0 + k.a1 * k.lambda1;
  const double a0 = k.a2 + k.c * X;
  const auto roots = depressed_cubic_roots(a3, a1, a0);
  if (roots.size() != 3) {
    std::ostringstream os;
    os << "fewer than three intersections of the Secretor nullclines at X = " << X;
    throw DomainError(os.str());
  }
  const double mid = roots[1];
  auto poly = [&](double x) { return (a3 * x * x + a1) * x + a0; };
  // Deflation fallback: the middle root is bracketed by the two critical
  // points of the cubic.
  const double xc = std::sqrt(-a1 / (3.0 * a3));
  const double lo = -xc;
  const double hi = xc;
  if (!(mid > lo && mid < hi) || std::abs(poly(mid)) > 1e-10 * (std::abs(a0) + std::abs(a1) + 1.0)) {
    if ((poly(lo) < 0.0) == (poly(hi) < 0.0)) {
      throw DomainError("x_sing: middle root not bracketed");
    }
    return bisect_root(lo, hi, poly);
  }
  return mid;
}

double x_sing(double X, const ParameterSet& p) { return x_sing(X, NullclineCubic::from(p)); }

FoldGeometry geometry(const ParameterSet& p) {
  FoldGeometry g;
  g.x_f = std::sqrt(p.lambda1() / (-3.0 * p.lambda3()));
  g.y_f = (2.0 / 3.0) * p.lambda1() * g.x_f;
  g.gamma = std::sqrt(p.mu1() / (-3.0 * p.mu3()));
  g.X_f = -(p.a0() * g.x_f + p.a1() * g.y_f + p.a2()) / p.c();
  const double s = p.a0() + p.a1() * p.lambda1();
  g.X_SN = s * s / (4.0 * p.a1() * p.c() * p.lambda1());
  g.alpha = std::sqrt(-3.0 * p.lambda1() * p.lambda3());

  const double dgf = dg_cubic(g.X_f, p);
  if (dgf == 0.0) {
    throw DomainError("degenerate configuration: Regulator knee coincides with X_f (g'(X_f) = 0)");
  }
  const double num = g.X_f + p.b1() * g_cubic(g.X_f, p) + p.b2();
  g.phi = num / dgf;
  // d/dX [(X + b1 g + b2)/g'] = ((1 + b1 g') g' - (X + b1 g + b2) g'') / g'^2
  const double ddg = 6.0 * p.mu3() * g.X_f;
  g.psi = ((1.0 + p.b1() * dgf) * dgf - num * ddg) / (dgf * dgf);

  g.x_c_squared = -(p.a0() + p.a1() * p.lambda1()) / (3.0 * p.a1() * p.lambda3());
  g.x_cplus = std::sqrt(g.x_c_squared);
  g.x_cminus = -g.x_cplus;

  // g(X) - g(+-gamma) has a double root at +-gamma; the remaining root
  // follows from the vanishing quadratic coefficient (roots sum to zero).
  g.X_min = -2.0 * g.gamma;
  g.X_max = 2.0 * g.gamma;
  return g;
}

HypothesisReport check_hypotheses(const ParameterSet& p, double h1_band) {
  const FoldGeometry geo = geometry(p);
  HypothesisReport r;
  r.h1_gap = geo.X_f - geo.X_min;
  r.h1 = {r.h1_gap > 0.0, r.h1_gap};
  const double base = -p.a0() * geo.x_f + p.a1() * f_cubic(-geo.x_f, p) + p.a2();
  const double h2_expr = base - p.c() * geo.gamma;
  r.h2 = {-h2_expr > 0.0, -h2_expr};
  r.h3 = {geo.X_SN - geo.X_max > 0.0, geo.X_SN - geo.X_max};
  const double h4_expr = base + p.c() * geo.gamma;
  r.h4 = {h4_expr > 0.0, h4_expr};
  if (r.h1.holds && r.h1_gap > h1_band) {
    std::ostringstream os;
    os << "X_f - X_min = " << r.h1_gap << " exceeds the closeness band " << h1_band
       << "; small oscillations may be invisible";
    r.h1_warning = os.str();
  }
  return r;
}

}  // namespace phantom
