#include "phantom/mmo.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "phantom/error.hpp"

namespace phantom {

std::string_view to_string(PhaseKind kind) {
  switch (kind) {
    case PhaseKind::Pulsatility:
      return "Pulsatility";
    case PhaseKind::Surge:
      return "Surge";
    case PhaseKind::Pause:
      return "Pause";
    case PhaseKind::Transition:
      return "Transition";
  }
  return "?";
}

namespace {

struct Peak {
  std::size_t index;
  std::size_t left;   // index of the left base
  std::size_t right;  // index of the right base
  double prominence;
};

// Local maxima of v with topographic prominence; plateaus count once at
// their left edge.
std::vector<Peak> find_peaks(const std::vector<double>& v, double min_prominence) {
  std::vector<Peak> peaks;
  const std::size_t n = v.size();
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (!(v[i] > v[i - 1])) continue;
    std::size_t j = i;
    while (j + 1 < n && v[j + 1] == v[i]) ++j;
    if (j + 1 >= n || !(v[j + 1] < v[i])) continue;
    std::size_t l = i;
    std::size_t lmin = i;
    while (l > 0 && v[l - 1] <= v[i]) {
      --l;
      if (v[l] < v[lmin]) lmin = l;
    }
    std::size_t r = j;
    std::size_t rmin = j;
    while (r + 1 < n && v[r + 1] <= v[i]) {
      ++r;
      if (v[r] < v[rmin]) rmin = r;
    }
    const double prom = v[i] - std::max(v[lmin], v[rmin]);
    if (prom > min_prominence) peaks.push_back({i, lmin, rmin, prom});
    i = j;
  }
  return peaks;
}

}  // namespace

MmoSignature classify(const std::vector<double>& t, const std::vector<Vec>& u,
                      const FoldGeometry& geom, const ClassifierThresholds& thr) {
  const std::size_t n = t.size();
  if (n < 3 || u.size() != n) throw DomainError("classify: trajectory too short");
  if (!(t.back() > t.front())) throw DomainError("classify: trajectory too short");
  for (const Vec& s : u) {
    if (s.size() != 4) throw InvalidParameter("classify: expected states (x, y, X, Y)");
  }
  const double yf = geom.y_f;
  const double y_surge = thr.surge_factor * yf;
  const double a_pulse = thr.pulse_factor * yf;
  const double a_small = thr.small_factor * yf;
  const double r_pause = thr.pause_radius * yf;

  MmoSignature sig;
  std::vector<double> x(n), y(n);
  double Xlo = u[0][2], Xhi = u[0][2];
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = u[i][0];
    y[i] = u[i][1];
    Xlo = std::min(Xlo, u[i][2]);
    Xhi = std::max(Xhi, u[i][2]);
  }
  sig.full_cycle = Xlo < -geom.gamma && Xhi > geom.gamma;
  if (!sig.full_cycle) sig.warnings.push_back("trajectory does not cover a full Regulator cycle");

  std::vector<PhaseKind> label(n, PhaseKind::Transition);
  for (std::size_t i = 0; i < n; ++i) {
    if (y[i] > y_surge) label[i] = PhaseKind::Surge;
  }

  // Pulses and small oscillations from the maxima of x.
  std::vector<bool> pulse_mark(n, false);
  for (const Peak& pk : find_peaks(x, 0.5 * a_small)) {
    if (label[pk.index] == PhaseKind::Surge) continue;
    // The oscillation spans the adjacent minima of x, which may lie inside
    // the prominence bases. Rises below the detection floor (ripples of
    // an interpolant at a jump) do not end the walk.
    const double floor = 0.5 * a_small;
    std::size_t l = pk.index;
    for (std::size_t i = pk.index; i > pk.left && x[i - 1] <= x[l] + floor; --i) {
      if (x[i - 1] < x[l]) l = i - 1;
    }
    std::size_t r = pk.index;
    for (std::size_t i = pk.index; i < pk.right && x[i + 1] <= x[r] + floor; ++i) {
      if (x[i + 1] < x[r]) r = i + 1;
    }
    // A ripple that runs into the surge without reaching the right branch
    // belongs to the surge onset; the window of a genuine pulse is cut
    // where the surge begins.
    bool touches = false;
    std::size_t cut = l;
    while (cut < r && label[cut + 1] != PhaseKind::Surge) ++cut;
    for (std::size_t i = l; i <= r; ++i) touches = touches || label[i] == PhaseKind::Surge;
    if (touches && (pk.prominence < a_pulse || x[pk.index] < geom.x_f)) continue;
    r = cut;
    const auto [lo, hi] = std::minmax_element(y.begin() + static_cast<std::ptrdiff_t>(l),
                                              y.begin() + static_cast<std::ptrdiff_t>(r) + 1);
    Oscillation osc{t[pk.index], x[pk.index], pk.prominence, *hi - *lo, t[l], t[r]};
    if (osc.y_amplitude > a_pulse) {
      // A ripple in x carried along by the slow drift of y is no pulse.
      if (pk.prominence < a_pulse) continue;
      sig.pulses.push_back(osc);
      for (std::size_t i = l; i <= r; ++i) pulse_mark[i] = true;
    } else if (osc.y_amplitude < a_small) {
      sig.small.push_back(osc);
    } else {
      sig.unclassified.push_back(osc);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (pulse_mark[i] && label[i] != PhaseKind::Surge) label[i] = PhaseKind::Pulsatility;
  }

  // Pause: near the fold point outside pulse and surge windows.
  for (std::size_t i = 0; i < n; ++i) {
    if (label[i] != PhaseKind::Transition) continue;
    if (std::abs(x[i] - geom.x_f) < r_pause && std::abs(y[i] - yf) < r_pause) {
      label[i] = PhaseKind::Pause;
    }
  }
  sig.ambiguous = static_cast<int>(sig.unclassified.size());
  if (sig.ambiguous > 0) {
    std::ostringstream os;
    os << sig.ambiguous << " oscillation(s) with amplitude between A_small and A_pulse";
    sig.warnings.push_back(os.str());
  }

  // Runs of equal labels; each interval ends where the next one starts.
  std::size_t start = 0;
  for (std::size_t i = 1; i <= n; ++i) {
    if (i < n && label[i] == label[start]) continue;
    PhaseInterval iv;
    iv.kind = label[start];
    iv.t_start = t[start];
    iv.t_end = i < n ? t[i] : t[n - 1];
    const auto [lo, hi] = std::minmax_element(y.begin() + static_cast<std::ptrdiff_t>(start),
                                              y.begin() + static_cast<std::ptrdiff_t>(i));
    iv.y_min = *lo;
    iv.y_max = *hi;
    sig.intervals.push_back(iv);
    start = i;
  }

  auto locate = [&](double tp) -> PhaseInterval* {
    for (PhaseInterval& iv : sig.intervals) {
      if (tp >= iv.t_start && tp < iv.t_end) return &iv;
    }
    return &sig.intervals.back();
  };
  for (const Oscillation& o : sig.pulses) {
    PhaseInterval* iv = locate(o.t_peak);
    iv->mean_amplitude += o.y_amplitude;
    ++iv->oscillations;
  }
  std::vector<Oscillation> pause_small;
  for (const Oscillation& o : sig.small) {
    PhaseInterval* iv = locate(o.t_peak);
    if (iv->kind != PhaseKind::Pause) continue;
    iv->mean_amplitude += o.y_amplitude;
    ++iv->oscillations;
    pause_small.push_back(o);
  }
  for (PhaseInterval& iv : sig.intervals) {
    if (iv.oscillations > 0) iv.mean_amplitude /= iv.oscillations;
  }
  sig.small = std::move(pause_small);
  sig.p = static_cast<int>(sig.pulses.size());
  sig.s = static_cast<int>(sig.small.size());
  return sig;
}

MmoSignature classify(const Trajectory& traj, const FoldGeometry& geom,
                      const ClassifierThresholds& thr, std::size_t n) {
  if (traj.size() < 2) throw DomainError("classify: trajectory too short");
  std::vector<double> t;
  std::vector<Vec> u;
  t.reserve(n);
  u.reserve(n);
  for (auto& [ti, ui] : traj.resample(n)) {
    t.push_back(ti);
    u.push_back(std::move(ui));
  }
  return classify(t, u, geom, thr);
}

double section_distance(const Vec& a, const Vec& b) { return (a - b).norm() / (1.0 + a.norm()); }

ReturnResult return_map(const Vec& state, const ParameterSet& p, const ReturnOptions& opts) {
  if (state.size() != 4) throw InvalidParameter("return_map: expected a 4D state");
  const VectorField field = build_field(FieldTag::Full4D, p);
  const Section target = section_endsurge(p, opts.eta, +1);
  const std::vector<Section> logged = {section_in(p, opts.eta), section_f(p),
                                       section_surge(p, opts.eta)};
  SectionHit hit = integrate_to_section(field, state, target, opts.max_time, opts.tol, logged);
  ReturnResult r;
  r.state = hit.event.state;
  r.state[0] = x_sing(geometry(p).gamma, p) - opts.eta;
  r.time = hit.event.t;
  r.trajectory = std::move(hit.trajectory);
  return r;
}

PeriodicOrbit find_periodic(const ParameterSet& p, const Vec& seed, const PeriodicOptions& opts) {
  if (seed.size() != 4) throw InvalidParameter("find_periodic: expected a 4D seed");
  const double level = x_sing(geometry(p).gamma, p) - opts.ret.eta;
  Vec a = seed;
  if (std::abs(seed[0] - level) > 1e-12) a = return_map(seed, p, opts.ret).state;

  PeriodicOrbit orb;
  ReturnResult step = return_map(a, p, opts.ret);
  bool converged = false;
  for (int it = 0; it < opts.max_iterations; ++it) {
    const double d = section_distance(a, step.state);
    orb.history.push_back(d);
    a = step.state;
    step = return_map(a, p, opts.ret);
    if (d < opts.tol) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    std::ostringstream os;
    os << "find_periodic: no convergence after " << opts.max_iterations
       << " iterations (last distance " << orb.history.back() << ")";
    throw ConvergenceError(os.str());
  }
  orb.anchor = a;
  orb.period = step.time;
  orb.orbit = std::move(step.trajectory);

  // Finite-difference derivative of the return map in the section
  // coordinates (y, X, Y).
  Eigen::Matrix3d D;
  const Vec base = return_map(a, p, opts.ret).state;
  for (int j = 0; j < 3; ++j) {
    Vec b = a;
    const double h = opts.probe * (1.0 + std::abs(a[j + 1]));
    b[j + 1] += h;
    const Vec img = return_map(b, p, opts.ret).state;
    for (int i = 0; i < 3; ++i) D(i, j) = (img[i + 1] - base[i + 1]) / h;
  }
  orb.contraction = D.eigenvalues().cwiseAbs().maxCoeff();
  orb.signature = classify(orb.orbit, geometry(p), opts.thresholds);
  return orb;
}

}  // namespace phantom
