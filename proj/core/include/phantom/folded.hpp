#pragma once

// Folded singularity of the three-time-scale system: classification,
// blow-up chart equilibria, way-in/way-out function, rotation sectors and
// the global contraction/expansion constants.

#include <complex>
#include <optional>
#include <string_view>

#include "phantom/model.hpp"

namespace phantom {

enum class FoldedKind { FoldedNode, FoldedSaddle, FoldedSaddleNode };

std::string_view to_string(FoldedKind kind);

struct FoldedSingularity {
  FoldedKind kind = FoldedKind::FoldedNode;
  double X_eval = 0.0;  // 24 c lambda3 x_f phi
  std::complex<double> xi_plus;
  std::complex<double> xi_minus;
  double phi = 0.0;
  double psi = 0.0;
  double A = 0.0;               // alpha c / a0
  double complex_window = 0.0;  // sqrt(a0) / A
  std::optional<double> X1_plus;
  std::optional<double> X1_minus;
  double delta = 0.0;
};

constexpr double kSaddleNodeTol = 1e-8;

FoldedSingularity classify_folded(const ParameterSet& p, double delta);

struct K1Equilibria {
  double X1_minus = 0.0;
  double X1_plus = 0.0;
};

/// Equilibria of the centre-manifold system in the entry chart.
/// Throws DomainError("delta too large for K1 equilibria") when
/// a0^2 - 8 delta alpha c phi < 0.
K1Equilibria k1_equilibria(const ParameterSet& p, double delta);

/// Coefficients of the slow drift phi + psi Z and of the rotation rate
/// sqrt(a0 - A^2 Z^2).
struct WiwoCoefficients {
  double phi = 0.0;
  double psi = 0.0;
  double a0 = 1.0;
  double A = 1.0;

  double window() const;

  static WiwoCoefficients from(const ParameterSet& p);
  /// Drift of the transition-chart field: psi is scaled by sqrt(eps).
  static WiwoCoefficients chart_k2(const ParameterSet& p, double eps);
};

/// Psi(X0): the positive root of int_{X0}^{X*} Z/(phi + psi Z) dZ = 0.
/// Requires -sqrt(a0)/A < X0 < 0 and phi + psi Z > 0 on the range.
double wiwo(double X0, const WiwoCoefficients& k);
double wiwo(double X0, const ParameterSet& p);

/// int_{X0}^{X1} Z/(phi + psi Z) dZ, evaluated from the closed form.
double wiwo_integral(double X0, double X1, const WiwoCoefficients& k);

struct WiwoResult {
  double X0 = 0.0;
  double Xstar = 0.0;
  double R = 0.0;
  /// Rotation integral with the integrand sqrt(A Z - 1), restricted to the
  /// part of [X0, X*] where it is real; unset when that part is empty.
  std::optional<double> R_printed;
  int k = 0;
  double delta = 0.0;
};

/// R = int_{X0}^{Psi(X0)} omega(Z)/(phi + psi Z) dZ with
/// omega = sqrt(max(0, a0 - A^2 Z^2)); k = floor(R / (2 pi delta)).
WiwoResult rotation_sector(double X0, const WiwoCoefficients& k, double delta);
WiwoResult rotation_sector(double X0, const ParameterSet& p, double delta);

enum class QuadratureRule { GaussKronrod, TanhSinh };

/// Surge contraction constant.
double contraction_c3(const ParameterSet& p, QuadratureRule rule = QuadratureRule::GaussKronrod);
/// Integrand of contraction_c3 (without the factor c).
double c3_integrand(double x, const ParameterSet& p);

/// Canard expansion constant.
double expansion_c4(const ParameterSet& p, QuadratureRule rule = QuadratureRule::GaussKronrod);
double c4_integrand(double x, const ParameterSet& p);

struct H5Report {
  bool holds = false;
  double C3 = 0.0;
  double C4 = 0.0;
  double lhs = 0.0;  // C3 / delta
  double rhs = 0.0;  // 2 C4 / eps
  double margin = 0.0;
  double delta_star = 0.0;  // eps C3 / (2 C4)
};

/// Uses p.eps() and p.delta().
H5Report check_h5(const ParameterSet& p);
/// Same check with precomputed constants.
H5Report check_h5(double C3, double C4, double eps, double delta);

}  // namespace phantom
