#pragma once

// Phase segmentation of full-system trajectories, (p, s) counting and the
// periodic orbit located through the end-of-surge return map.

#include <string>
#include <string_view>
#include <vector>

#include "phantom/integrator.hpp"

namespace phantom {

enum class PhaseKind { Pulsatility, Surge, Pause, Transition };

std::string_view to_string(PhaseKind kind);

/// Thresholds in units of y_f.
struct ClassifierThresholds {
  double surge_factor = 5.0;   // y_surge_threshold = surge_factor * y_f
  double pulse_factor = 0.5;   // A_pulse
  double small_factor = 0.1;   // A_small
  double pause_radius = 0.5;   // |x - x_f|, |y - y_f| below pause_radius * y_f
};

struct PhaseInterval {
  PhaseKind kind = PhaseKind::Transition;
  double t_start = 0.0;
  double t_end = 0.0;
  int oscillations = 0;
  double y_min = 0.0;
  double y_max = 0.0;
  double mean_amplitude = 0.0;  // mean y-amplitude of the oscillations inside
};

struct Oscillation {
  double t_peak = 0.0;
  double x_peak = 0.0;
  double prominence = 0.0;  // in x
  double y_amplitude = 0.0;
  double t_left = 0.0;
  double t_right = 0.0;
};

struct MmoSignature {
  int p = 0;
  int s = 0;
  std::vector<PhaseInterval> intervals;
  std::vector<Oscillation> pulses;
  std::vector<Oscillation> small;
  /// Amplitude between A_small and A_pulse.
  std::vector<Oscillation> unclassified;
  int ambiguous = 0;
  /// X ranges over (-gamma, gamma) at least once.
  bool full_cycle = false;
  std::vector<std::string> warnings;
};

/// Samples must be strictly increasing in t and 4-dimensional
/// (x, y, X, Y). Throws DomainError for fewer than three samples.
MmoSignature classify(const std::vector<double>& t, const std::vector<Vec>& u,
                      const FoldGeometry& geom, const ClassifierThresholds& thr = {});
/// Resamples the dense output with n points.
MmoSignature classify(const Trajectory& traj, const FoldGeometry& geom,
                      const ClassifierThresholds& thr = {}, std::size_t n = 20000);

struct ReturnOptions {
  Tolerances tol{1e-10, 1e-10};
  double eta = 0.1;
  double max_time = 200.0;
};

struct ReturnResult {
  Vec state;  // next crossing of the end-of-surge section
  double time = 0.0;
  Trajectory trajectory;
};

/// Integrates Full4D from a state on the end-of-surge section to its next
/// increasing crossing; the in, f and surge sections are logged on the way.
/// Throws DomainError("no crossing ...") when max_time elapses.
ReturnResult return_map(const Vec& state, const ParameterSet& p, const ReturnOptions& opts = {});

/// Distance between two section points, scaled by 1 + |a|.
double section_distance(const Vec& a, const Vec& b);

struct PeriodicOptions {
  ReturnOptions ret;
  int max_iterations = 50;
  double tol = 1e-8;
  /// Perturbation size for the contraction estimate.
  double probe = 1e-4;
  ClassifierThresholds thresholds;
};

struct PeriodicOrbit {
  double period = 0.0;
  Vec anchor;
  /// Largest modulus among the eigenvalues of the finite-difference return
  /// map derivative on the section.
  double contraction = 0.0;
  MmoSignature signature;
  std::vector<double> history;  // section distance per iteration
  Trajectory orbit;             // one period starting at the anchor
};

/// Seeds off the section are first integrated onto it. Throws
/// ConvergenceError after max_iterations.
PeriodicOrbit find_periodic(const ParameterSet& p, const Vec& seed, const PeriodicOptions& opts = {});

}  // namespace phantom
