#pragma once

// Slow-manifold sweeps near the folded node and secondary-canard detection
// in the section through it.
//
// Both manifolds are swept as one-parameter families of orbit segments:
// segments start on the critical manifold at x = +x0 (attracting side) or
// x = -x0 (repelling side, reversed time), parametrised by their starting
// X, and end in the section {X = 0}. Windings are measured about the slow
// curve of the drifting layer system.

#include <map>
#include <string>
#include <vector>

#include "phantom/bvp.hpp"

namespace phantom {

enum class ManifoldSide { Attracting, Repelling };

std::string_view to_string(ManifoldSide side);

struct SweepOptions {
  /// |x| of the start curve in field coordinates; 0 selects one chart unit
  /// (1 in ChartK2, sqrt(eps) in NormalFormLocal).
  double x0 = 0.0;
  double step = 0.01;  // initial step in the start parameter (chart units)
  double min_step = 1e-7;
  double max_step = 0.05;
  /// Bounds on the change between consecutive members in the section.
  double max_angle_change = 0.3;
  double max_log_radius_change = 0.5;
  CollocationOptions colloc{200, 4, 40, 1e-12, 1e-10, 1};
  /// Integration tolerances for initial guesses and the slow curve.
  Tolerances tol{1e-13, 1e-12};
  /// Points per collocation interval used for angle unwrapping.
  int winding_samples = 8;
  int max_members = 20000;
};

struct ManifoldMember {
  double start = 0.0;  // start parameter in field coordinates
  OrbitSegment segment;
  Vec end;              // (x, y) in the section
  double log_radius = 0.0;
  double start_angle = 0.0;  // about the slow curve, in (-pi, pi]
  double end_angle = 0.0;    // unwrapped along the segment
};

struct ManifoldFamily {
  ManifoldSide side = ManifoldSide::Attracting;
  FieldTag tag = FieldTag::ChartK2;
  ParameterSet params = ParameterSet::reference();
  SweepOptions options;
  double x0 = 0.0;
  /// Normal-form X per unit of the field's X coordinate.
  double blow_down = 1.0;
  /// Slow curve as a table (X, x, y), increasing in X.
  std::vector<Vec> slow_curve;
  Vec center;  // slow curve in the section
  std::vector<ManifoldMember> members;
  /// Ordered section traces; "sigma0" holds the end points.
  std::map<std::string, std::vector<Vec>> traces;
  bool stalled = false;
  std::string message;
};

/// Natural-parameter sweep of the start parameter from `from` to `to`
/// (field coordinates; attracting side needs negative values, repelling
/// side positive ones). tag is ChartK2 or NormalFormLocal. A stall returns
/// the members computed so far with stalled = true.
ManifoldFamily sweep_manifold(const ParameterSet& p, FieldTag tag, ManifoldSide side, double from,
                              double to, const SweepOptions& opts = {});

/// Solves a single member at the given start parameter.
ManifoldMember solve_member(const ManifoldFamily& family, double start,
                            const OrbitSegment* guess = nullptr);

struct CanardIntersection {
  Vec location;  // (x, y) in the section
  int rotation = 0;
  double winding = 0.0;      // total angle of the canard in radians
  double start_attracting = 0.0;  // field coordinates
  double start_repelling = 0.0;
  double X = 0.0;  // attracting start in normal-form units
  double gap_prev = 0.0;  // |X difference| to neighbours, NaN at the ends
  double gap_next = 0.0;
  bool refined = false;
};

struct CanardOptions {
  bool refine = true;
  int max_refine = 12;
  double tol = 1e-10;
};

/// Intersections of the two traces in (log radius, unwrapped angle)
/// coordinates about the attracting slow curve, sorted by decreasing
/// attracting start parameter. Throws InvalidParameter for families from
/// different fields and DomainError when a trace has fewer than two members.
std::vector<CanardIntersection> detect_canards(const ManifoldFamily& attracting,
                                               const ManifoldFamily& repelling,
                                               const CanardOptions& opts = {});

/// Median gap between consecutive canards whose X lies in [lo, hi]
/// (normal-form units); NaN with fewer than two such canards.
double median_spacing(const std::vector<CanardIntersection>& canards, double lo, double hi);

/// Direct rotation count through the fold region. ChartK2 is integrated
/// from its critical point at X2 = X0 together with a tangent vector of
/// the layer linearisation; the run stops where the accumulated log growth
/// of the tangent returns to zero (the way-out point).
struct SectorCount {
  double X0 = 0.0;
  double X_exit = 0.0;
  double turns = 0.0;  // tangent rotation / 2 pi
  int k = 0;           // floor(turns)
};

SectorCount count_sector_rotations(const ParameterSet& p, double X0,
                                   const Tolerances& tol = {1e-11, 1e-9});

/// Least-squares slope of log y against log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace phantom
