#pragma once

// Adaptive three-stage Radau IIA integrator (order 5, L-stable) with
// collocation dense output and section-event detection.

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "phantom/reductions.hpp"

namespace phantom {

struct Tolerances {
  double abs = 1e-8;
  double rel = 1e-8;
  double h_init = 0.0;  // 0 selects a starting step automatically
  double h_max = std::numeric_limits<double>::infinity();
  long max_steps = 2'000'000;
};

/// Scalar section function with an optional direction filter
/// (+1: increasing through zero, -1: decreasing, 0: either).
struct Section {
  std::string id;
  std::function<double(const Vec&)> fn;
  int direction = 0;
};

struct SectionEvent {
  std::string id;
  double t = 0.0;
  Vec state;
  int direction = 0;
};

struct IntegratorStats {
  long accepted = 0;
  long rejected = 0;
  long newton_failures = 0;
  long rhs_evals = 0;
  long jacobian_evals = 0;
  long decompositions = 0;
  double h_min = std::numeric_limits<double>::infinity();
  double h_max = 0.0;
};

/// One accepted step; the state on [t0, t0 + h] is
/// y0 + P(theta), P the cubic through (0,0), (c_i, Z_i).
struct DenseStep {
  double t0 = 0.0;
  double h = 0.0;
  Vec y0;
  Vec z1;
  Vec z2;
  Vec z3;

  Vec eval(double t) const;
};

class Trajectory {
 public:
  Trajectory() = default;
  Trajectory(FieldTag tag, int dimension, Tolerances tol);

  FieldTag tag() const noexcept { return tag_; }
  int dimension() const noexcept { return dim_; }
  const Tolerances& tolerances() const noexcept { return tol_; }

  const std::vector<double>& times() const noexcept { return t_; }
  const std::vector<Vec>& states() const noexcept { return u_; }
  const std::vector<DenseStep>& steps() const noexcept { return steps_; }
  const std::vector<SectionEvent>& events() const noexcept { return events_; }
  const IntegratorStats& stats() const noexcept { return stats_; }

  std::size_t size() const noexcept { return t_.size(); }
  double t_begin() const { return t_.front(); }
  double t_end() const { return t_.back(); }
  const Vec& back() const { return u_.back(); }

  /// Dense interpolant; throws DomainError outside [t_begin, t_end].
  Vec at(double t) const;
  /// Dense samples at n equally spaced times (n >= 2).
  std::vector<std::pair<double, Vec>> resample(std::size_t n) const;

  // Construction interface used by the integrator.
  void push(double t, const Vec& u);
  void push_step(DenseStep step);
  void push_event(SectionEvent ev);
  IntegratorStats& mutable_stats() { return stats_; }

 private:
  FieldTag tag_ = FieldTag::Full4D;
  int dim_ = 0;
  Tolerances tol_;
  std::vector<double> t_;
  std::vector<Vec> u_;
  std::vector<DenseStep> steps_;
  std::vector<SectionEvent> events_;
  IntegratorStats stats_;
};

/// Integrates from (t0, u0) to t1 > t0. Every crossing of the given
/// sections is logged; sections listed in `terminal` stop the run at their
/// first directed crossing.
struct IntegrateOptions {
  std::vector<Section> sections;
  std::vector<std::string> terminal;
  /// Store dense output for every step (needed by Trajectory::at).
  bool dense = true;
};

Trajectory integrate(const VectorField& field, const Vec& u0, double t0, double t1,
                     const Tolerances& tol = {}, const IntegrateOptions& opts = {});

struct SectionHit {
  Trajectory trajectory;
  SectionEvent event;
};

/// Integrates until the first directed crossing of `section` (a zero at the
/// starting point is ignored). Additional sections are logged only.
/// Throws DomainError("no crossing ...") when max_time elapses first.
SectionHit integrate_to_section(const VectorField& field, const Vec& u0, const Section& section,
                                double max_time, const Tolerances& tol = {},
                                std::vector<Section> logged = {}, double t0 = 0.0);

/// Named sections of the full system, each offset by eta.
///   in:        y = y_f - eta
///   f:         x = x_f
///   surge:     x = x_sing(X_max) + eta
///   endsurge:  x = x_sing(gamma) - eta
Section section_in(const ParameterSet& p, double eta = 0.1, int direction = 0);
Section section_f(const ParameterSet& p, int direction = 0);
Section section_surge(const ParameterSet& p, double eta = 0.1, int direction = 0);
Section section_endsurge(const ParameterSet& p, double eta = 0.1, int direction = 0);

}  // namespace phantom
