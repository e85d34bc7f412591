#pragma once

// Phantom burster model: two feed-forward coupled FitzHugh-Nagumo
// oscillators on three time scales.
//
//   eps*delta x' = -y + f(x)
//       delta y' = a0 x + a1 y + a2 + c X
//       delta X' = -Y + g(X)
//             Y' = X + b1 Y + b2
//
// with f(x) = lambda3 x^3 + lambda1 x and g(X) = mu3 X^3 + mu1 X.

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace phantom {

/// Raw parameter values. No invariants are enforced here; use
/// ParameterSet for a validated, immutable set.
struct ParameterValues {
  double a0 = 1.0;
  double a1 = 0.02;
  double a2 = 0.8;
  double c = 0.69;
  double b1 = 0.0;
  double b2 = -0.8;
  double lambda1 = 1.5;
  double lambda3 = -1.0;
  double mu1 = 4.0;
  double mu3 = -1.0;
  double eps = 0.05;
  double delta = 0.1;
};

/// Validated model parameters. Immutable after construction.
class ParameterSet {
 public:
  /// Throws InvalidParameter with a descriptive message on any violation.
  explicit ParameterSet(const ParameterValues& values);

  /// The reference parameter values (c=0.69, a0=1, a1=0.02, a2=0.8,
  /// b1=0, b2=-0.8, lambda3=-1, lambda1=1.5, mu3=-1, mu1=4) with the
  /// desk-scale defaults eps=0.05, delta=0.1.
  static ParameterSet reference();

  const ParameterValues& values() const noexcept { return v_; }

  double a0() const noexcept { return v_.a0; }
  double a1() const noexcept { return v_.a1; }
  double a2() const noexcept { return v_.a2; }
  double c() const noexcept { return v_.c; }
  double b1() const noexcept { return v_.b1; }
  double b2() const noexcept { return v_.b2; }
  double lambda1() const noexcept { return v_.lambda1; }
  double lambda3() const noexcept { return v_.lambda3; }
  double mu1() const noexcept { return v_.mu1; }
  double mu3() const noexcept { return v_.mu3; }
  double eps() const noexcept { return v_.eps; }
  double delta() const noexcept { return v_.delta; }

  /// Copy with one named field replaced ("a2", "lambda1", "eps", ...).
  ParameterSet with(std::string_view key, double value) const;
  ParameterSet with_singular(double eps, double delta) const;

  /// Value of a named field; throws InvalidParameter on unknown keys.
  double get(std::string_view key) const;

  /// Canonical field names in declaration order.
  static const std::vector<std::string>& field_names();

 private:
  ParameterValues v_;
};

/// Full state (Secretor fast/slow, Regulator fast/slow).
struct State4 {
  double x = 0.0;
  double y = 0.0;
  double X = 0.0;
  double Y = 0.0;

  std::array<double, 4> as_array() const { return {x, y, X, Y}; }
  static State4 from_array(const std::array<double, 4>& a) {
    return {a[0], a[1], a[2], a[3]};
  }
};

/// Right-hand side of the full four-dimensional system.
State4 eval_full_rhs(const State4& s, const ParameterSet& p);

/// Cubic nullcline values at one abscissa. f and g share the argument;
/// ft is f-tilde(x) = -(a0 x + a1 f(x) + a2)/c, the X-value at which the
/// Secretor y-nullcline passes through (x, f(x)).
struct CubicValues {
  double f = 0.0;
  double df = 0.0;
  double g = 0.0;
  double dg = 0.0;
  double ft = 0.0;
  double dft = 0.0;
};

CubicValues eval_cubics(double arg, const ParameterSet& p);

double f_cubic(double x, const ParameterSet& p);
double df_cubic(double x, const ParameterSet& p);
double g_cubic(double X, const ParameterSet& p);
double dg_cubic(double X, const ParameterSet& p);
double f_tilde(double x, const ParameterSet& p);
double df_tilde(double x, const ParameterSet& p);

/// Slow Regulator drift (X + b1 g(X) + b2)/g'(X) on Y = g(X).
/// Throws DomainError where g'(X) = 0.
double regulator_drift(double X, const ParameterSet& p);

/// Derived geometric constants of the nullclines.
struct FoldGeometry {
  double x_f = 0.0;      // upper Secretor fold abscissa
  double y_f = 0.0;      // f(x_f)
  double gamma = 0.0;    // Regulator knee abscissa, g'(+-gamma) = 0
  double X_f = 0.0;      // X at which the y-nullcline passes through the fold
  double X_SN = 0.0;     // Secretor saddle-node value of X
  double alpha = 0.0;    // sqrt(-3 lambda1 lambda3)
  double phi = 0.0;      // drift at the folded singularity
  double psi = 0.0;      // slope of the drift at the folded singularity
  double x_cminus = 0.0; // local max of f-tilde
  double x_cplus = 0.0;  // local min of f-tilde
  double X_min = 0.0;    // singular-limit jump landing points of the
  double X_max = 0.0;    // Regulator relaxation cycle
  /// a0 + a1 lambda1 over -3 a1 lambda3, i.e. x_c^2 (reported, see docs).
  double x_c_squared = 0.0;
};

/// Throws DomainError when g'(X_f) = 0.
FoldGeometry geometry(const ParameterSet& p);

/// Coefficients of the Secretor nullcline intersection cubic
/// a1 lambda3 x^3 + (a0 + a1 lambda1) x + (a2 + c X) = 0. Kept separate
/// from ParameterSet so degenerate settings (a2 = 0) can be probed.
struct NullclineCubic {
  double a0 = 0.0;
  double a1 = 0.0;
  double a2 = 0.0;
  double c = 0.0;
  double lambda1 = 0.0;
  double lambda3 = 0.0;

  static NullclineCubic from(const ParameterSet& p) {
    return {p.a0(), p.a1(), p.a2(), p.c(), p.lambda1(), p.lambda3()};
  }
};

/// Real roots of a3 x^3 + a1 x + a0 = 0 in increasing order (one or
/// three entries; a near-double root is reported once per multiplicity
/// only when the discriminant is clearly positive).
std::vector<double> depressed_cubic_roots(double a3, double a1, double a0);

/// Middle root of a0 x + a1 f(x) + a2 + c X = 0. Throws DomainError
/// ("fewer than three intersections") if the cubic has one real root.
double x_sing(double X, const NullclineCubic& cubic);
double x_sing(double X, const ParameterSet& p);

struct HypothesisCheck {
  bool holds = false;
  double margin = 0.0;  // slack of the defining inequality; holds == (margin > 0)
};

struct HypothesisReport {
  HypothesisCheck h1;  // X_min <= X_f
  HypothesisCheck h2;  // -a0 x_f + a1 f(-x_f) + a2 - c gamma < 0
  HypothesisCheck h3;  // X_max < X_SN
  HypothesisCheck h4;  // -a0 x_f + a1 f(-x_f) + a2 + c gamma > 0
  double h1_gap = 0.0; // X_f - X_min
  /// Set when X_f - X_min exceeds the closeness band.
  std::optional<std::string> h1_warning;

  bool all() const { return h1.holds && h2.holds && h3.holds && h4.holds; }
};

HypothesisReport check_hypotheses(const ParameterSet& p, double h1_band = 0.5);

}  // namespace phantom
