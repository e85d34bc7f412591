#pragma once

// Boundary-value problems by Gauss-Legendre collocation.
//
// A problem is posed on tau in [0, 1] as u' = T F(u, lambda) with unknown
// T (optional) and free parameters lambda, closed by nonlinear boundary
// conditions and integral conditions of the form
//   int_0^1 <u(tau), w(tau)> dtau + c_T T + <c_lambda, lambda> = rhs.

#include <functional>
#include <vector>

#include "phantom/integrator.hpp"
#include "phantom/reductions.hpp"

namespace phantom {

/// Continuous piecewise polynomial of degree m on a mesh of [0, 1],
/// stored by its values at the mesh points and at the m Gauss points of
/// every interval.
class PiecewisePolynomial {
 public:
  PiecewisePolynomial() = default;
  PiecewisePolynomial(std::vector<double> mesh, std::vector<Vec> nodes, std::vector<Vec> stages,
                      int m);

  int intervals() const noexcept { return static_cast<int>(mesh_.size()) - 1; }
  int stages_per_interval() const noexcept { return m_; }
  int dimension() const { return static_cast<int>(nodes_.front().size()); }
  const std::vector<double>& mesh() const noexcept { return mesh_; }
  const std::vector<Vec>& nodes() const noexcept { return nodes_; }
  const std::vector<Vec>& stages() const noexcept { return stages_; }
  std::vector<Vec>& nodes() noexcept { return nodes_; }
  std::vector<Vec>& stages() noexcept { return stages_; }

  Vec eval(double tau) const;
  /// Derivative with respect to tau.
  Vec derivative(double tau) const;
  /// The same function on another mesh (interpolated).
  PiecewisePolynomial remesh(const std::vector<double>& mesh) const;
  /// m-th derivative on interval j (constant there).
  Vec top_derivative(int j) const;

 private:
  int locate(double tau) const;
  std::vector<double> mesh_;
  std::vector<Vec> nodes_;
  std::vector<Vec> stages_;
  int m_ = 4;
};

/// Gauss-Legendre collocation tableau on [0, 1].
struct GaussTableau {
  int m = 4;
  std::vector<double> c;
  std::vector<double> b;
  Mat a;
  static const GaussTableau& get(int m);
};

using ParamRhs = std::function<void(const Vec& u, const Vec& lambda, Vec& f)>;
using ParamJac = std::function<void(const Vec& u, const Vec& lambda, Mat& jac)>;

struct IntegralCondition {
  std::function<Vec(double tau)> weight;
  double coef_T = 0.0;
  Vec coef_params;  // empty means zero
  double rhs = 0.0;
};

struct BvpProblem {
  int dim = 0;
  int n_params = 0;
  bool free_T = true;
  ParamRhs rhs;
  ParamJac jac_u;    // optional: finite differences when empty
  ParamJac jac_lam;  // optional: finite differences when empty
  /// Boundary residual g(u(0), u(1), T, lambda); Jacobian by finite differences.
  std::function<Vec(const Vec& u0, const Vec& u1, double T, const Vec& lambda)> bc;
  int n_bc = 0;
  std::vector<IntegralCondition> integral;
  FieldTag tag = FieldTag::Custom;
};

struct CollocationOptions {
  int intervals = 200;
  int stages = 4;
  int max_newton = 40;
  /// Newton stops when the scaled update and the residual fall below this.
  double tol = 1e-11;
  double residual_target = 1e-9;
  /// Mesh redistribution passes after the first converged solve.
  int adapt_passes = 2;
};

/// Solution of a collocation BVP.
struct OrbitSegment {
  FieldTag tag = FieldTag::Custom;
  PiecewisePolynomial path;
  double T = 0.0;
  Vec params;
  /// Max-norm of the discrete collocation and continuity equations.
  double collocation_residual = 0.0;
  double boundary_residual = 0.0;
  int newton_iterations = 0;

  Vec start() const { return path.nodes().front(); }
  Vec end() const { return path.nodes().back(); }
  Vec at(double tau) const { return path.eval(tau); }
  /// n samples (t = tau T, u) at equally spaced tau.
  std::vector<std::pair<double, Vec>> sample(std::size_t n) const;
};

/// Newton solve on the mesh of `guess`; no redistribution.
/// Throws ConvergenceError (with the final residual) or DomainError
/// (singular Jacobian).
OrbitSegment solve_collocation(const BvpProblem& problem, const OrbitSegment& guess,
                               const CollocationOptions& opts = {});

/// Solve, then redistribute the mesh by equidistribution of the m-th
/// derivative and re-solve opts.adapt_passes times.
OrbitSegment solve_adaptive(const BvpProblem& problem, const OrbitSegment& guess,
                            const CollocationOptions& opts = {});

/// Equidistributed mesh with `intervals` intervals for the given path.
std::vector<double> equidistributed_mesh(const PiecewisePolynomial& path, int intervals);

/// Continuous residual max |p'(tau) - T F(p(tau))| sampled at interval
/// midpoints, relative to 1 + |T F|.
double collocation_defect(const BvpProblem& problem, const OrbitSegment& seg);

/// Initial guess from a sampled trajectory over [t0, t1]; the mesh
/// follows the density of the integrator's accepted steps.
OrbitSegment guess_from_trajectory(const Trajectory& traj, int intervals, int stages = 4,
                                   FieldTag tag = FieldTag::Custom);
/// Initial guess on a uniform mesh from a function of tau.
OrbitSegment guess_from_function(const std::function<Vec(double)>& u, double T, int intervals,
                                 int stages = 4);

// Orbit segments between a start curve and an end hyperplane.

struct StartCondition {
  Vec point;  // u(0) = point
};

struct EndPlane {
  Vec normal;
  double offset = 0.0;  // <normal, u(1)> = offset
};

/// u' = T F(u) from a fixed start point to the hyperplane, T unknown.
OrbitSegment solve_segment(const VectorField& field, const StartCondition& start,
                           const EndPlane& end, const OrbitSegment& guess,
                           const CollocationOptions& opts = {});

/// Initial guess for solve_segment from an initial-value integration.
OrbitSegment segment_guess(const VectorField& field, const StartCondition& start,
                           const EndPlane& end, double max_time, int intervals,
                           const Tolerances& tol = {});

// Periodic orbits.

/// Periodic boundary conditions plus the integral phase condition
/// int <u, u_ref'> = int <u_ref, u_ref'> against `reference`.
BvpProblem periodic_problem(const ParameterSet& p, const OrbitSegment& reference);
BvpProblem periodic_problem(const VectorField& field, const OrbitSegment& reference);

/// Seed: a trajectory over one period (endpoint gap < 0.1 scaled).
OrbitSegment solve_periodic(const ParameterSet& p, const Trajectory& seed,
                            const CollocationOptions& opts = {});
OrbitSegment solve_periodic(const VectorField& field, const Trajectory& seed,
                            const CollocationOptions& opts = {});

}  // namespace phantom
