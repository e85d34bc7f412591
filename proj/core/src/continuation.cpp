#include "phantom/continuation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <sstream>

#include "phantom/error.hpp"
#include "phantom/model.hpp"

namespace phantom {

std::string_view to_string(BranchMeasure m) {
  switch (m) {
    case BranchMeasure::MaxY:
      return "max_y";
    case BranchMeasure::MeanX:
      return "mean_x";
    case BranchMeasure::L2:
      return "l2";
  }
  return "?";
}

BranchMeasure branch_measure_from_string(std::string_view name) {
  if (name == "max_y") return BranchMeasure::MaxY;
  if (name == "mean_x") return BranchMeasure::MeanX;
  if (name == "l2") return BranchMeasure::L2;
  throw InvalidParameter("unknown branch measure '" + std::string(name) +
                         "' (expected max_y, mean_x or l2)");
}

namespace {

// Quadrature of a pointwise function over the Gauss stages.
template <class F>
double stage_integral(const PiecewisePolynomial& path, F&& fn) {
  const GaussTableau& g = GaussTableau::get(path.stages_per_interval());
  double acc = 0.0;
  for (int j = 0; j < path.intervals(); ++j) {
    const double h = path.mesh()[j + 1] - path.mesh()[j];
    for (int i = 0; i < g.m; ++i) acc += h * g.b[i] * fn(path.stages()[j * g.m + i]);
  }
  return acc;
}

// Full4D fields for nearby parameter values; the two most recent are kept
// so that residual and finite-difference evaluations do not rebuild.
class FieldFamily {
 public:
  FieldFamily(ParameterSet base, std::string key) : base_(std::move(base)), key_(std::move(key)) {}

  const VectorField& at(double value) {
    for (auto& e : cache_) {
      if (e.first == value) return *e.second;
    }
    auto f = std::make_shared<VectorField>(build_field(FieldTag::Full4D, base_.with(key_, value)));
    cache_[next_] = {value, f};
    next_ = 1 - next_;
    return *f;
  }
  ParameterSet params(double value) const { return base_.with(key_, value); }

 private:
  ParameterSet base_;
  std::string key_;
  std::pair<double, std::shared_ptr<VectorField>> cache_[2] = {
      {std::nan(""), nullptr}, {std::nan(""), nullptr}};
  int next_ = 0;
};

// Periodic problem with the parameter free; the last side condition is
// added by the caller.
BvpProblem family_problem(const std::shared_ptr<FieldFamily>& fam, const OrbitSegment& reference,
                          double lam0) {
  BvpProblem P = periodic_problem(fam->at(lam0), reference);
  P.n_params = 1;
  P.rhs = [fam](const Vec& u, const Vec& lam, Vec& f) { fam->at(lam[0]).eval(u, f); };
  P.jac_u = [fam](const Vec& u, const Vec& lam, Mat& J) { fam->at(lam[0]).jacobian(u, J); };
  P.jac_lam = [fam](const Vec& u, const Vec& lam, Mat& J) {
    const double h = 1e-6 * std::max(1.0, std::abs(lam[0]));
    Vec fp(u.size()), fm(u.size());
    fam->at(lam[0] + h).eval(u, fp);
    fam->at(lam[0] - h).eval(u, fm);
    J.col(0) = (fp - fm) / (2.0 * h);
  };
  return P;
}

IntegralCondition fix_parameter(double value) {
  IntegralCondition ic;
  ic.weight = [](double) { return Vec::Zero(4).eval(); };
  ic.coef_params = Vec::Ones(1);
  ic.rhs = value;
  return ic;
}

// Tangent in the product space (stage values, T, parameter).
struct Tangent {
  PiecewisePolynomial path;
  double T = 0.0;
  double lam = 0.0;
};

double inner(const PiecewisePolynomial& a, const PiecewisePolynomial& b) {
  const GaussTableau& g = GaussTableau::get(a.stages_per_interval());
  double acc = 0.0;
  for (int j = 0; j < a.intervals(); ++j) {
    const double h = a.mesh()[j + 1] - a.mesh()[j];
    for (int i = 0; i < g.m; ++i) acc += h * g.b[i] * a.stages()[j * g.m + i].dot(b.stages()[j * g.m + i]);
  }
  return acc;
}

PiecewisePolynomial axpy(double alpha, const PiecewisePolynomial& x, const PiecewisePolynomial& y) {
  PiecewisePolynomial r = y;
  for (std::size_t k = 0; k < r.nodes().size(); ++k) r.nodes()[k] += alpha * x.nodes()[k];
  for (std::size_t k = 0; k < r.stages().size(); ++k) r.stages()[k] += alpha * x.stages()[k];
  return r;
}

// Normalised secant z1 - z0 with z0 on the mesh of z1.
Tangent secant(const OrbitSegment& z0, const OrbitSegment& z1) {
  Tangent t;
  t.path = axpy(-1.0, z0.path.remesh(z1.path.mesh()), z1.path);
  t.T = z1.T - z0.T;
  t.lam = z1.params[0] - z0.params[0];
  const double nrm = std::sqrt(inner(t.path, t.path) + t.T * t.T + t.lam * t.lam);
  if (!(nrm > 0.0)) throw DomainError("continuation: zero secant");
  t.path = axpy(1.0 / nrm - 1.0, t.path, t.path);
  t.T /= nrm;
  t.lam /= nrm;
  return t;
}

IntegralCondition arclength(const Tangent& t, const OrbitSegment& z1, double ds) {
  auto path = std::make_shared<PiecewisePolynomial>(t.path);
  IntegralCondition ic;
  ic.weight = [path](double tau) { return path->eval(tau); };
  ic.coef_T = t.T;
  ic.coef_params = Vec::Constant(1, t.lam);
  ic.rhs = inner(z1.path, t.path) + z1.T * t.T + z1.params[0] * t.lam + ds;
  return ic;
}

OrbitSegment predict(const Tangent& t, const OrbitSegment& z1, double ds) {
  OrbitSegment z = z1;
  z.path = axpy(ds, t.path, z1.path);
  z.T += ds * t.T;
  z.params[0] += ds * t.lam;
  return z;
}

BranchPoint describe(const OrbitSegment& z, const ParameterSet& p, const ContinuationOptions& opts) {
  BranchPoint bp;
  bp.param = z.params[0];
  bp.period = z.T;
  bp.max_y = orbit_max_y(z, opts.classify_samples);
  bp.mean_x = orbit_mean_x(z);
  bp.l2 = orbit_l2(z);
  switch (opts.measure) {
    case BranchMeasure::MaxY:
      bp.measure = bp.max_y;
      break;
    case BranchMeasure::MeanX:
      bp.measure = bp.mean_x;
      break;
    case BranchMeasure::L2:
      bp.measure = bp.l2;
      break;
  }
  bp.collocation_residual = z.collocation_residual;
  bp.boundary_residual = z.boundary_residual;

  // One period starting where the surge ends, as for the return map, so
  // that no pulse is cut.
  const auto samples = z.sample(opts.classify_samples + 1);
  const double y_surge = opts.thresholds.surge_factor * geometry(p).y_f;
  std::size_t kmax = 0;
  for (std::size_t k = 0; k + 1 < samples.size(); ++k) {
    if (samples[k].second[1] > samples[kmax].second[1]) kmax = k;
  }
  std::size_t k0 = kmax;
  for (std::size_t k = 0; k + 1 < samples.size(); ++k) {
    const std::size_t i = (kmax + k) % (samples.size() - 1);
    if (samples[i].second[1] < y_surge) {
      k0 = i;
      break;
    }
  }
  const std::size_t n = samples.size() - 1;
  std::vector<double> t(n + 1);
  std::vector<Vec> u(n + 1);
  for (std::size_t k = 0; k <= n; ++k) {
    const std::size_t src = (k0 + k) % n;
    t[k] = samples[src].first + (k0 + k >= n ? z.T : 0.0);
    u[k] = samples[src].second;
  }
  bp.signature = classify(t, u, geometry(p), opts.thresholds);
  return bp;
}

OrbitSegment start_orbit(const ParameterSet& p, const Vec& seed, const ContinuationOptions& opts) {
  const PeriodicOrbit orb = find_periodic(p, seed, opts.periodic);
  return solve_periodic(p, orb.orbit, opts.colloc);
}

}  // namespace

double orbit_max_y(const OrbitSegment& s, std::size_t samples) {
  double m = -std::numeric_limits<double>::infinity();
  for (const auto& [t, u] : s.sample(samples)) m = std::max(m, u[1]);
  for (const Vec& u : s.path.nodes()) m = std::max(m, u[1]);
  for (const Vec& u : s.path.stages()) m = std::max(m, u[1]);
  return m;
}

double orbit_mean_x(const OrbitSegment& s) {
  return stage_integral(s.path, [](const Vec& u) { return u[0]; });
}

double orbit_l2(const OrbitSegment& s) {
  return std::sqrt(stage_integral(s.path, [](const Vec& u) { return u.squaredNorm(); }));
}

void mark_explosions(Branch& branch, const ContinuationOptions& opts) {
  auto& pts = branch.points;
  branch.explosions.clear();
  for (std::size_t k = 0; k < pts.size(); ++k) {
    pts[k].explosion = false;
    pts[k].transition.clear();
    if (k == 0) continue;
    const BranchPoint& a = pts[k - 1];
    BranchPoint& b = pts[k];
    b.explosion = std::abs(b.param - a.param) < opts.explosion_dparam &&
                  std::abs(b.measure - a.measure) > opts.explosion_dmeasure;
    if (a.signature.p != b.signature.p || a.signature.s != b.signature.s) {
      std::ostringstream os;
      os << "(" << a.signature.p << "," << a.signature.s << ")->(" << b.signature.p << ","
         << b.signature.s << ")";
      b.transition = os.str();
    }
  }
  for (std::size_t k = 1; k < pts.size(); ++k) {
    if (!pts[k].explosion) continue;
    std::size_t last = k;
    while (last + 1 < pts.size() && pts[last + 1].explosion) ++last;
    // The run may end inside the family; the signature settles on the
    // first unmarked point after it.
    const std::size_t after = std::min(last + 1, pts.size() - 1);
    Explosion e;
    e.first = k;
    e.last = last;
    e.p_before = pts[k - 1].signature.p;
    e.s_before = pts[k - 1].signature.s;
    e.p_after = pts[after].signature.p;
    e.s_after = pts[after].signature.s;
    e.param = 0.5 * (pts[k].param + pts[last].param);
    const int dp = e.p_after - e.p_before;
    const int ds = e.s_after - e.s_before;
    e.canonical = (std::abs(dp) == 1 && ds == 0) || (std::abs(dp) == 1 && ds == -dp);
    branch.explosions.push_back(e);
    k = last;
  }
}

Branch continue_branch(const ParameterSet& p, const std::string& parameter, double from, double to,
                       const ContinuationOptions& opts, bool keep_orbits) {
  if (!(opts.ds > 0.0) || !(opts.ds_min > 0.0) || opts.ds_min > opts.ds_max) {
    throw InvalidParameter("continuation: need 0 < ds_min <= ds_max and ds > 0");
  }
  if (from == to) throw InvalidParameter("continuation: empty parameter range");
  (void)p.get(parameter);  // rejects unknown keys
  const double dir = to > from ? 1.0 : -1.0;
  auto fam = std::make_shared<FieldFamily>(p, parameter);
  CollocationOptions step_opts = opts.colloc;
  step_opts.max_newton = std::min(step_opts.max_newton, 15);
  step_opts.adapt_passes = 0;

  Branch br;
  br.parameter = parameter;
  auto accept = [&](OrbitSegment z, double ds, bool restart) {
    BranchPoint bp = describe(z, fam->params(z.params[0]), opts);
    bp.defect = collocation_defect(family_problem(fam, z, z.params[0]), z);
    bp.ds = ds;
    bp.restart = restart;
    br.points.push_back(std::move(bp));
    if (keep_orbits) br.orbits.push_back(std::move(z));
  };
  auto inside = [&](double lam) { return dir * (lam - to) <= 0.0; };

  // Natural step at fixed parameter from a converged orbit.
  auto natural = [&](const OrbitSegment& ref, double lam) {
    BvpProblem P = family_problem(fam, ref, lam);
    P.integral.push_back(fix_parameter(lam));
    OrbitSegment guess = ref;
    guess.params = Vec::Constant(1, lam);
    return solve_collocation(P, guess, step_opts);
  };

  OrbitSegment z1 = start_orbit(fam->params(from), Vec::Zero(4), opts);
  z1.params = Vec::Constant(1, from);
  const int N = z1.path.intervals();
  accept(z1, 0.0, false);

  double ds = std::clamp(opts.ds, opts.ds_min, opts.ds_max);
  OrbitSegment z0 = z1;
  bool have_secant = false;
  int since_remesh = 0;
  int restarts = 0;

  while (static_cast<int>(br.points.size()) < opts.max_points) {
    OrbitSegment z;
    bool ok = false;
    if (!have_secant) {
      // First step in the parameter direction.
      const double lam = z1.params[0] + dir * std::min(ds, 1e-3 * (1.0 + std::abs(from)));
      try {
        z = natural(z1, lam);
        ok = true;
      } catch (const Error&) {
        ok = false;
      }
      if (!ok) {
        ds *= 0.5;
        if (ds < opts.ds_min) throw ConvergenceError("continuation: first step failed");
        continue;
      }
    } else {
      if (opts.remesh_every > 0 && since_remesh >= opts.remesh_every) {
        // Interpolate the last point onto a mesh equidistributed for it;
        // the step then solves on the new mesh.
        since_remesh = 0;
        z1.path = z1.path.remesh(equidistributed_mesh(z1.path, N));
      }
      const Tangent t = secant(z0, z1);
      BvpProblem P = family_problem(fam, z1, z1.params[0]);
      P.integral.push_back(arclength(t, z1, ds));
      try {
        z = solve_collocation(P, predict(t, z1, ds), step_opts);
        // The new secant must keep the orientation of the old one;
        // otherwise Newton fell back onto the part already traced.
        const Tangent t2 = secant(z1, z);
        ok = inner(t.path, t2.path) + t.T * t2.T + t.lam * t2.lam > 0.5;
      } catch (const Error&) {
        ok = false;
      }
      if (!ok) {
        ds *= 0.5;
        if (ds >= opts.ds_min) continue;
        // Step underflow: jump past the obstruction and restart from a
        // freshly located orbit.
        if (++restarts > 20) break;
        const double lam =
            z1.params[0] + dir * opts.restart_jump * std::max(1.0, std::abs(z1.params[0]));
        if (!inside(lam)) break;
        try {
          z = start_orbit(fam->params(lam), z1.start(), opts);
        } catch (const Error&) {
          break;
        }
        z.params = Vec::Constant(1, lam);
        accept(z, 0.0, true);
        z1 = z;
        have_secant = false;
        ds = std::clamp(opts.ds, opts.ds_min, opts.ds_max);
        continue;
      }
    }
    const double used = ds;
    if (z.newton_iterations <= 4) ds = std::min(ds * 1.5, opts.ds_max);
    if (z.newton_iterations >= 9) ds = std::max(ds * 0.6, opts.ds_min);
    if (!inside(z.params[0])) break;
    z0 = z1;
    z1 = z;
    have_secant = true;
    restarts = 0;
    accept(z1, used, false);

    ++since_remesh;
  }
  mark_explosions(br, opts);
  return br;
}

}  // namespace phantom
