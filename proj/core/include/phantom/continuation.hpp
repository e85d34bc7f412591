#pragma once

// Pseudo-arclength continuation of periodic orbits of the full system in
// one parameter, with canard-explosion markers and (p, s) labels.

#include <string>
#include <vector>

#include "phantom/bvp.hpp"
#include "phantom/mmo.hpp"

namespace phantom {

enum class BranchMeasure { MaxY, MeanX, L2 };

std::string_view to_string(BranchMeasure m);
BranchMeasure branch_measure_from_string(std::string_view name);

struct ContinuationOptions {
  double ds = 0.05;
  double ds_min = 1e-7;
  double ds_max = 0.5;
  int max_points = 5000;
  CollocationOptions colloc;
  /// Explosion marker: |delta parameter| below and |delta measure| above.
  double explosion_dparam = 1e-8;
  double explosion_dmeasure = 1e-2;
  BranchMeasure measure = BranchMeasure::MaxY;
  ClassifierThresholds thresholds;
  std::size_t classify_samples = 20000;
  /// Mesh redistribution before every this many steps (0: never).
  int remesh_every = 1;
  /// Parameter jump used to restart after a step underflow.
  double restart_jump = 1e-6;
  PeriodicOptions periodic;
};

struct BranchPoint {
  double param = 0.0;
  double max_y = 0.0;
  double mean_x = 0.0;
  double l2 = 0.0;
  double measure = 0.0;  // the selected measure
  double period = 0.0;
  MmoSignature signature;
  double ds = 0.0;  // step that produced the point
  bool explosion = false;
  bool restart = false;
  double collocation_residual = 0.0;
  double boundary_residual = 0.0;
  /// Continuous defect between the collocation points (collocation_defect).
  double defect = 0.0;
  /// "(p,s)->(p',s')" when the signature differs from the previous point.
  std::string transition;
};

struct Explosion {
  std::size_t first = 0;  // first marked point
  std::size_t last = 0;   // last marked point
  int p_before = 0, s_before = 0;
  int p_after = 0, s_after = 0;
  double param = 0.0;
  /// (p, s) -> (p +- 1, s) or (p +- 1, s -+ 1).
  bool canonical = false;
};

struct Branch {
  std::string parameter;
  std::vector<BranchPoint> points;
  std::vector<Explosion> explosions;
  /// Solutions at the accepted points (kept when requested).
  std::vector<OrbitSegment> orbits;
};

/// Continues the periodic orbit of Full4D in `parameter` from `from`
/// towards `to`. The start orbit is located by find_periodic and refined
/// by solve_periodic.
Branch continue_branch(const ParameterSet& p, const std::string& parameter, double from, double to,
                       const ContinuationOptions& opts = {}, bool keep_orbits = false);

/// Marks explosions and transitions on an existing list of points.
void mark_explosions(Branch& branch, const ContinuationOptions& opts);

/// Scalar measures of a periodic solution (x, y, X, Y).
double orbit_max_y(const OrbitSegment& s, std::size_t samples = 20000);
double orbit_mean_x(const OrbitSegment& s);
double orbit_l2(const OrbitSegment& s);

}  // namespace phantom
