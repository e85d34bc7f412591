#include "phantom/canard.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "phantom/error.hpp"
#include "phantom/folded.hpp"

namespace phantom {

std::string_view to_string(ManifoldSide side) {
  return side == ManifoldSide::Attracting ? "attracting" : "repelling";
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap(double a) { return std::remainder(a, kTwoPi); }

VectorField family_field(const ManifoldFamily& fam) {
  VectorField f = build_field(fam.tag, fam.params);
  return fam.side == ManifoldSide::Repelling ? f.time_reversed() : f;
}

// Point of the start curve {x = +-x0} on the critical manifold. The first
// component of both local fields is affine in y.
Vec start_point(const VectorField& field, double x, double X) {
  Vec u(3);
  u << x, 0.0, X;
  Vec du(3);
  field.eval(u, du);
  Mat J(3, 3);
  field.jacobian(u, J);
  u[1] = -du[0] / J(0, 1);
  return u;
}

// Linear interpolation in the slow-curve table.
Vec slow_point(const std::vector<Vec>& table, double X) {
  if (X <= table.front()[0]) return table.front().tail(2);
  if (X >= table.back()[0]) return table.back().tail(2);
  const auto it = std::lower_bound(table.begin(), table.end(), X,
                                   [](const Vec& row, double v) { return row[0] < v; });
  const Vec& b = *it;
  const Vec& a = *(it - 1);
  const double w = (X - a[0]) / (b[0] - a[0]);
  return ((1.0 - w) * a.tail(2) + w * b.tail(2)).eval();
}

double typical_time(const VectorField& field, const Vec& u0) {
  Vec du(3);
  field.eval(u0, du);
  return 4.0 * std::abs(u0[2]) / std::max(std::abs(du[2]), 1e-12) + 100.0;
}

const EndPlane kSigma0{(Vec(3) << 0.0, 0.0, 1.0).finished(), 0.0};

// Keeps the start angle on the branch nearest to `reference`.
void align(ManifoldMember& m, double reference) {
  const double shift = kTwoPi * std::round((reference - m.start_angle) / kTwoPi);
  m.start_angle += shift;
  m.end_angle += shift;
}

}  // namespace

ManifoldMember solve_member(const ManifoldFamily& fam, double start, const OrbitSegment* guess) {
  const VectorField field = family_field(fam);
  const double sx = fam.side == ManifoldSide::Attracting ? fam.x0 : -fam.x0;
  const Vec u0 = start_point(field, sx, start);
  const StartCondition sc{u0};
  OrbitSegment g = guess ? *guess
                         : segment_guess(field, sc, kSigma0, typical_time(field, u0),
                                         fam.options.colloc.intervals, fam.options.tol);
  ManifoldMember m;
  m.start = start;
  m.segment = solve_segment(field, sc, kSigma0, g, fam.options.colloc);

  // Winding about the slow curve along the segment.
  const PiecewisePolynomial& path = m.segment.path;
  const int K = std::max(2, fam.options.winding_samples);
  double prev = 0.0;
  double unwrapped = 0.0;
  bool first = true;
  for (int j = 0; j < path.intervals(); ++j) {
    const double a = path.mesh()[j];
    const double b = path.mesh()[j + 1];
    for (int k = 0; k < K; ++k) {
      const Vec u = path.eval(a + (b - a) * k / K);
      const Vec c = slow_point(fam.slow_curve, u[2]);
      const double ang = std::atan2(u[1] - c[1], u[0] - c[0]);
      if (first) {
        m.start_angle = ang;
        unwrapped = ang;
        first = false;
      } else {
        unwrapped += wrap(ang - prev);
      }
      prev = ang;
    }
  }
  const Vec e = path.nodes().back();
  m.end = e.head(2);
  const Vec d = m.end - fam.center;
  m.end_angle = unwrapped + wrap(std::atan2(d[1], d[0]) - prev);
  m.log_radius = std::log(d.norm());
  return m;
}

ManifoldFamily sweep_manifold(const ParameterSet& p, FieldTag tag, ManifoldSide side, double from,
                              double to, const SweepOptions& opts) {
  if (tag != FieldTag::ChartK2 && tag != FieldTag::NormalFormLocal) {
    throw InvalidParameter("sweep_manifold: field must be ChartK2 or NormalFormLocal");
  }
  const double sgn = side == ManifoldSide::Attracting ? -1.0 : 1.0;
  if (!(from * sgn > 0.0) || !(to * sgn > 0.0)) {
    throw InvalidParameter("sweep_manifold: start parameters must lie on the " +
                           std::string(to_string(side)) + " side of the section");
  }
  if (!(opts.step > 0.0) || !(opts.min_step > 0.0) || opts.min_step > opts.max_step) {
    throw InvalidParameter("sweep_manifold: need 0 < min_step <= max_step and step > 0");
  }
  ManifoldFamily fam;
  fam.side = side;
  fam.tag = tag;
  fam.params = p;
  fam.options = opts;
  fam.blow_down = tag == FieldTag::ChartK2 ? std::sqrt(p.eps()) : 1.0;
  fam.x0 = opts.x0 > 0.0 ? opts.x0 : (tag == FieldTag::ChartK2 ? 1.0 : std::sqrt(p.eps()));

  // Slow curve from a start two chart units further out.
  const VectorField field = family_field(fam);
  const double far = sgn * (std::max(std::abs(from), std::abs(to)) + 2.0 * fam.blow_down);
  const Vec u_far = start_point(field, side == ManifoldSide::Attracting ? fam.x0 : -fam.x0, far);
  const Section plane{"sigma0", [](const Vec& u) { return u[2]; }, 0};
  const SectionHit ref = integrate_to_section(field, u_far, plane, typical_time(field, u_far), opts.tol);
  for (const auto& [t, u] : ref.trajectory.resample(20000)) {
    fam.slow_curve.push_back((Vec(3) << u[2], u[0], u[1]).finished());
  }
  std::sort(fam.slow_curve.begin(), fam.slow_curve.end(),
            [](const Vec& a, const Vec& b) { return a[0] < b[0]; });
  fam.center = ref.event.state.head(2);

  const double dir = to > from ? 1.0 : -1.0;
  fam.members.push_back(solve_member(fam, from));
  double h = std::min(opts.step, opts.max_step);
  while (dir * (to - fam.members.back().start) > 1e-15 &&
         static_cast<int>(fam.members.size()) < opts.max_members) {
    const ManifoldMember& last = fam.members.back();
    const double next = last.start + dir * std::min(h, std::abs(to - last.start));
    ManifoldMember m;
    bool ok = false;
    try {
      m = solve_member(fam, next, &last.segment);
      ok = true;
    } catch (const Error&) {
      try {
        m = solve_member(fam, next);
        ok = true;
      } catch (const Error&) {
        ok = false;
      }
    }
    double da = 0.0, dr = 0.0;
    if (ok) {
      align(m, last.start_angle);
      da = std::abs(m.end_angle - last.end_angle);
      dr = std::abs(m.log_radius - last.log_radius);
      ok = da <= opts.max_angle_change && dr <= opts.max_log_radius_change;
    }
    if (!ok) {
      h *= 0.5;
      if (h < opts.min_step) {
        fam.stalled = true;
        std::ostringstream os;
        os << "sweep_manifold: step underflow at start parameter " << last.start;
        fam.message = os.str();
        break;
      }
      continue;
    }
    fam.members.push_back(std::move(m));
    if (da < 0.5 * opts.max_angle_change && dr < 0.5 * opts.max_log_radius_change) {
      h = std::min(1.5 * h, opts.max_step);
    }
  }
  auto& trace = fam.traces["sigma0"];
  for (const ManifoldMember& m : fam.members) trace.push_back(m.end);
  return fam;
}

namespace {

struct TracePoint {
  double rho = 0.0;
  double theta = 0.0;
};

// End point in (log radius, unwrapped angle) about `c`.
TracePoint recenter(const ManifoldMember& m, const Vec& c) {
  const Vec d = m.end - c;
  return {std::log(d.norm()), m.end_angle + wrap(std::atan2(d[1], d[0]) - m.end_angle)};
}

bool segment_hit(const TracePoint& p, const TracePoint& q, const TracePoint& r,
                 const TracePoint& s, double& t, double& u) {
  const double d0 = q.rho - p.rho, d1 = q.theta - p.theta;
  const double e0 = s.rho - r.rho, e1 = s.theta - r.theta;
  const double den = d0 * e1 - d1 * e0;
  if (den == 0.0) return false;
  const double w0 = r.rho - p.rho, w1 = r.theta - p.theta;
  t = (w0 * e1 - w1 * e0) / den;
  u = (w0 * d1 - w1 * d0) / den;
  return t >= 0.0 && t < 1.0 && u >= 0.0 && u < 1.0;
}

struct Evaluated {
  ManifoldMember member;
  TracePoint point;
};

// Member at `start`, solved from the nearest member of the family.
Evaluated evaluate(const ManifoldFamily& fam, double start, const Vec& c) {
  const auto& ms = fam.members;
  std::size_t best = 0;
  for (std::size_t k = 1; k < ms.size(); ++k) {
    if (std::abs(ms[k].start - start) < std::abs(ms[best].start - start)) best = k;
  }
  Evaluated ev{solve_member(fam, start, &ms[best].segment), {}};
  align(ev.member, ms[best].start_angle);
  ev.point = recenter(ev.member, c);
  return ev;
}

}  // namespace

std::vector<CanardIntersection> detect_canards(const ManifoldFamily& a, const ManifoldFamily& r,
                                               const CanardOptions& opts) {
  if (a.side != ManifoldSide::Attracting || r.side != ManifoldSide::Repelling) {
    throw InvalidParameter("detect_canards: expected an attracting and a repelling family");
  }
  if (a.tag != r.tag || a.params.eps() != r.params.eps() || a.params.delta() != r.params.delta()) {
    throw InvalidParameter("detect_canards: families come from different fields");
  }
  if (a.members.size() < 2 || r.members.size() < 2) {
    throw DomainError("detect_canards: traces too coarse (fewer than two members)");
  }
  const Vec& c = a.center;
  std::vector<TracePoint> pa, pr;
  for (const auto& m : a.members) pa.push_back(recenter(m, c));
  for (const auto& m : r.members) pr.push_back(recenter(m, c));

  auto bounds = [](const std::vector<TracePoint>& v) {
    double lo = v.front().theta, hi = lo;
    for (const auto& q : v) {
      lo = std::min(lo, q.theta);
      hi = std::max(hi, q.theta);
    }
    return std::pair{lo, hi};
  };
  const auto [alo, ahi] = bounds(pa);
  const auto [rlo, rhi] = bounds(pr);
  const int m_lo = static_cast<int>(std::floor((alo - rhi) / kTwoPi)) - 1;
  const int m_hi = static_cast<int>(std::ceil((ahi - rlo) / kTwoPi)) + 1;

  std::vector<CanardIntersection> out;
  for (int m = m_lo; m <= m_hi; ++m) {
    const double shift = kTwoPi * m;
    for (std::size_t i = 0; i + 1 < pa.size(); ++i) {
      const TracePoint& p = pa[i];
      const TracePoint& q = pa[i + 1];
      const double rho_lo = std::min(p.rho, q.rho), rho_hi = std::max(p.rho, q.rho);
      const double th_lo = std::min(p.theta, q.theta), th_hi = std::max(p.theta, q.theta);
      for (std::size_t j = 0; j + 1 < pr.size(); ++j) {
        TracePoint s0 = pr[j], s1 = pr[j + 1];
        s0.theta += shift;
        s1.theta += shift;
        if (std::max(s0.rho, s1.rho) < rho_lo || std::min(s0.rho, s1.rho) > rho_hi) continue;
        if (std::max(s0.theta, s1.theta) < th_lo || std::min(s0.theta, s1.theta) > th_hi) continue;
        double t = 0.0, u = 0.0;
        if (!segment_hit(p, q, s0, s1, t, u)) continue;

        CanardIntersection ci;
        double xa = a.members[i].start + t * (a.members[i + 1].start - a.members[i].start);
        double xr = r.members[j].start + u * (r.members[j + 1].start - r.members[j].start);
        const double sa = a.members[i].start_angle + t * (a.members[i + 1].start_angle - a.members[i].start_angle);
        const double sr = r.members[j].start_angle + u * (r.members[j + 1].start_angle - r.members[j].start_angle);
        double start_a = sa, start_r = sr;
        Vec loc = (1.0 - t) * a.members[i].end + t * a.members[i + 1].end;

        if (opts.refine) {
          // Newton in (start_a, start_r) on the matching conditions; the
          // two traces depend on separate unknowns.
          const double ha = 1e-3 * std::max(std::abs(a.members[i + 1].start - a.members[i].start), 1e-8);
          const double hr = 1e-3 * std::max(std::abs(r.members[j + 1].start - r.members[j].start), 1e-8);
          try {
            for (int it = 0; it < opts.max_refine; ++it) {
              const Evaluated ea = evaluate(a, xa, c);
              const Evaluated er = evaluate(r, xr, c);
              const double g0 = ea.point.rho - er.point.rho;
              const double g1 = ea.point.theta - (er.point.theta + shift);
              start_a = ea.member.start_angle;
              start_r = er.member.start_angle;
              loc = ea.member.end;
              if (std::hypot(g0, g1) < opts.tol) {
                ci.refined = true;
                break;
              }
              const Evaluated ea2 = evaluate(a, xa + ha, c);
              const Evaluated er2 = evaluate(r, xr + hr, c);
              const double a0 = (ea2.point.rho - ea.point.rho) / ha;
              const double a1 = (ea2.point.theta - ea.point.theta) / ha;
              const double b0 = -(er2.point.rho - er.point.rho) / hr;
              const double b1 = -(er2.point.theta - er.point.theta) / hr;
              const double det = a0 * b1 - a1 * b0;
              if (det == 0.0) break;
              const double dxa = -(g0 * b1 - g1 * b0) / det;
              const double dxr = -(a0 * g1 - a1 * g0) / det;
              xa += dxa;
              xr += dxr;
              // Stay near the bracketing segments.
              const double wa = std::abs(a.members[i + 1].start - a.members[i].start);
              const double wr = std::abs(r.members[j + 1].start - r.members[j].start);
              const double amin = std::min(a.members[i].start, a.members[i + 1].start) - wa;
              const double amax = std::max(a.members[i].start, a.members[i + 1].start) + wa;
              const double rmin = std::min(r.members[j].start, r.members[j + 1].start) - wr;
              const double rmax = std::max(r.members[j].start, r.members[j + 1].start) + wr;
              if (xa < amin || xa > amax || xr < rmin || xr > rmax) break;
            }
          } catch (const Error&) {
            ci.refined = false;
          }
          if (!ci.refined) {
            xa = a.members[i].start + t * (a.members[i + 1].start - a.members[i].start);
            xr = r.members[j].start + u * (r.members[j + 1].start - r.members[j].start);
            start_a = sa;
            start_r = sr;
            loc = (1.0 - t) * a.members[i].end + t * a.members[i + 1].end;
          }
        }
        ci.location = loc;
        ci.start_attracting = xa;
        ci.start_repelling = xr;
        ci.X = xa * a.blow_down;
        ci.winding = std::abs(shift + start_r - start_a);
        ci.rotation = static_cast<int>(std::floor(ci.winding / kTwoPi));
        out.push_back(ci);
      }
    }
  }
  std::sort(out.begin(), out.end(), [](const CanardIntersection& x, const CanardIntersection& y) {
    return x.start_attracting > y.start_attracting;
  });
  // Crossings found twice at a shared polyline vertex.
  std::vector<CanardIntersection> uniq;
  for (const auto& ci : out) {
    if (!uniq.empty() && uniq.back().rotation == ci.rotation &&
        std::abs(uniq.back().start_attracting - ci.start_attracting) < 1e-9 * (1.0 + std::abs(ci.start_attracting))) {
      continue;
    }
    uniq.push_back(ci);
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t k = 0; k < uniq.size(); ++k) {
    uniq[k].gap_prev = k > 0 ? std::abs(uniq[k].X - uniq[k - 1].X) : nan;
    uniq[k].gap_next = k + 1 < uniq.size() ? std::abs(uniq[k + 1].X - uniq[k].X) : nan;
  }
  return uniq;
}

double median_spacing(const std::vector<CanardIntersection>& canards, double lo, double hi) {
  std::vector<double> xs;
  for (const auto& c : canards) {
    if (c.X >= lo && c.X <= hi) xs.push_back(c.X);
  }
  if (xs.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  std::sort(xs.begin(), xs.end());
  std::vector<double> gaps;
  for (std::size_t k = 1; k < xs.size(); ++k) gaps.push_back(xs[k] - xs[k - 1]);
  std::sort(gaps.begin(), gaps.end());
  const std::size_t n = gaps.size();
  return n % 2 == 1 ? gaps[n / 2] : 0.5 * (gaps[n / 2 - 1] + gaps[n / 2]);
}

SectorCount count_sector_rotations(const ParameterSet& p, double X0, const Tolerances& tol) {
  if (!(X0 < 0.0)) throw InvalidParameter("count_sector_rotations: X0 must be negative");
  const VectorField k2 = build_field(FieldTag::ChartK2, p);
  const double A = WiwoCoefficients::from(p).A;
  // (x2, y2, X2, tangent angle, log growth)
  auto rhs = [k2](const Vec& u, Vec& du) {
    Vec f(3);
    Mat J(3, 3);
    const Vec z = u.head(3);
    k2.eval(z, f);
    k2.jacobian(z, J);
    const double c = std::cos(u[3]), s = std::sin(u[3]);
    const double j0 = J(0, 0) * c + J(0, 1) * s;
    const double j1 = J(1, 0) * c + J(1, 1) * s;
    du.head(3) = f;
    du[3] = -s * j0 + c * j1;
    du[4] = c * j0 + s * j1;
  };
  const VectorField field = make_custom_field(5, rhs);
  Vec u0 = Vec::Zero(5);
  u0.head(3) = k2_critical_point(X0, A);
  Vec du(3);
  k2.eval(u0.head(3), du);
  const double T = 4.0 * std::abs(X0) / std::max(du[2], 1e-12) + 100.0;
  const Section growth{"growth", [](const Vec& u) { return u[4]; }, +1};
  const SectionHit hit = integrate_to_section(field, u0, growth, T, tol);
  SectorCount out;
  out.X0 = X0;
  out.X_exit = hit.event.state[2];
  out.turns = std::abs(hit.event.state[3]) / kTwoPi;
  out.k = static_cast<int>(std::floor(out.turns));
  return out;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw InvalidParameter("loglog_slope: need at least two (x, y) pairs");
  }
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const double n = static_cast<double>(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (!(x[k] > 0.0) || !(y[k] > 0.0)) throw DomainError("loglog_slope: non-positive data");
    const double lx = std::log(x[k]), ly = std::log(y[k]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double den = n * sxx - sx * sx;
  if (den == 0.0) throw DomainError("loglog_slope: x values coincide");
  return (n * sxy - sx * sy) / den;
}

}  // namespace phantom
