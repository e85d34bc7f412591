#include "phantom/integrator.hpp"

#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <sstream>

#include "phantom/error.hpp"

namespace phantom {

namespace {

const double kSq6 = std::sqrt(6.0);
const double kC1 = (4.0 - kSq6) / 10.0;
const double kC2 = (4.0 + kSq6) / 10.0;
const std::array<double, 3> kC{kC1, kC2, 1.0};

const std::array<std::array<double, 3>, 3> kA{{
    {(88.0 - 7.0 * kSq6) / 360.0, (296.0 - 169.0 * kSq6) / 1800.0, (-2.0 + 3.0 * kSq6) / 225.0},
    {(296.0 + 169.0 * kSq6) / 1800.0, (88.0 + 7.0 * kSq6) / 360.0, (-2.0 - 3.0 * kSq6) / 225.0},
    {(16.0 - kSq6) / 36.0, (16.0 + kSq6) / 36.0, 1.0 / 9.0},
}};

// Embedded error estimator.
const double kDD1 = -(13.0 + 7.0 * kSq6) / 3.0;
const double kDD2 = (-13.0 + 7.0 * kSq6) / 3.0;
const double kDD3 = -1.0 / 3.0;
const double kU1 = 30.0 / (6.0 + std::cbrt(81.0) - std::cbrt(9.0));

constexpr double kSafe = 0.9;
constexpr double kFacL = 5.0;
constexpr double kFacR = 0.125;
constexpr int kMaxNewton = 7;
constexpr double kUround = 1e-16;

double lagrange(double theta, int i) {
  // Nodes 0, c1, c2, 1; basis polynomial of node i (1..3).
  const std::array<double, 4> tau{0.0, kC1, kC2, 1.0};
  double v = 1.0;
  for (int j = 0; j < 4; ++j) {
    if (j == i) continue;
    v *= (theta - tau[j]) / (tau[i] - tau[j]);
  }
  return v;
}

double rms(const Vec& v, const Vec& scal) {
  const auto n = scal.size();
  double s = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double q = v[i] / scal[i % n];
    s += q * q;
  }
  return std::sqrt(s / static_cast<double>(v.size()));
}

std::string describe_state(double t, const Vec& u) {
  std::ostringstream os;
  os.precision(10);
  os << "t = " << t << ", state = (";
  for (Eigen::Index i = 0; i < u.size(); ++i) os << (i ? ", " : "") << u[i];
  os << ")";
  return os.str();
}

bool all_finite(const Vec& v) { return v.allFinite(); }

}  // namespace

Vec DenseStep::eval(double t) const {
  const double theta = (t - t0) / h;
  return y0 + lagrange(theta, 1) * z1 + lagrange(theta, 2) * z2 + lagrange(theta, 3) * z3;
}

Trajectory::Trajectory(FieldTag tag, int dimension, Tolerances tol)
    : tag_(tag), dim_(dimension), tol_(tol) {}

void Trajectory::push(double t, const Vec& u) {
  if (!t_.empty() && !(t > t_.back())) {
    throw Error("Trajectory: times must be strictly increasing");
  }
  t_.push_back(t);
  u_.push_back(u);
}

void Trajectory::push_step(DenseStep step) { steps_.push_back(std::move(step)); }
void Trajectory::push_event(SectionEvent ev) { events_.push_back(std::move(ev)); }

Vec Trajectory::at(double t) const {
  if (t_.empty()) throw DomainError("Trajectory::at: empty trajectory");
  const double span = std::max(1.0, std::abs(t_.back()));
  if (t < t_.front() - 1e-14 * span || t > t_.back() + 1e-14 * span) {
    std::ostringstream os;
    os << "Trajectory::at: t = " << t << " outside [" << t_.front() << ", " << t_.back() << "]";
    throw DomainError(os.str());
  }
  if (steps_.empty()) {
    // Piecewise linear fallback.
    auto it = std::upper_bound(t_.begin(), t_.end(), t);
    if (it == t_.begin()) return u_.front();
    if (it == t_.end()) return u_.back();
    const auto i = static_cast<std::size_t>(it - t_.begin());
    const double w = (t - t_[i - 1]) / (t_[i] - t_[i - 1]);
    return (1.0 - w) * u_[i - 1] + w * u_[i];
  }
  auto it = std::upper_bound(steps_.begin(), steps_.end(), t,
                             [](double v, const DenseStep& s) { return v < s.t0; });
  if (it != steps_.begin()) --it;
  return it->eval(t);
}

std::vector<std::pair<double, Vec>> Trajectory::resample(std::size_t n) const {
  if (n < 2) throw InvalidParameter("resample: need at least two samples");
  std::vector<std::pair<double, Vec>> out;
  out.reserve(n);
  const double a = t_begin();
  const double b = t_end();
  for (std::size_t i = 0; i < n; ++i) {
    const double t = (i + 1 == n) ? b : a + (b - a) * static_cast<double>(i) / (n - 1);
    out.emplace_back(t, at(t));
  }
  return out;
}

namespace {

struct Pending {
  std::size_t section;
  SectionEvent event;
};

// Locates directed zero crossings of each section on one step.
std::vector<Pending> find_events(const std::vector<Section>& sections, const DenseStep& step,
                                 std::vector<double>& g_start) {
  constexpr int kSub = 4;
  std::vector<Pending> found;
  const double t0 = step.t0;
  const double t1 = step.t0 + step.h;
  for (std::size_t s = 0; s < sections.size(); ++s) {
    const Section& sec = sections[s];
    double ta = t0;
    double ga = g_start[s];
    for (int k = 1; k <= kSub; ++k) {
      const double tb = (k == kSub) ? t1 : t0 + step.h * k / kSub;
      const Vec ub = (k == kSub) ? Vec(step.y0 + step.z3) : step.eval(tb);
      const double gb = sec.fn(ub);
      const bool crossed = ga != 0.0 && (ga * gb < 0.0 || gb == 0.0);
      if (crossed) {
        const int dir = ga < 0.0 ? 1 : -1;
        if (sec.direction == 0 || sec.direction == dir) {
          double tz = tb;
          Vec uz = ub;
          if (gb != 0.0) {
            auto fn = [&](double t) { return sec.fn(step.eval(t)); };
            std::uintmax_t iters = 100;
            const auto [lo, hi] = boost::math::tools::toms748_solve(
                fn, ta, tb, ga, gb, boost::math::tools::eps_tolerance<double>(50), iters);
            const double flo = fn(lo);
            const double fhi = fn(hi);
            tz = std::abs(flo) <= std::abs(fhi) ? lo : hi;
            uz = step.eval(tz);
          }
          found.push_back({s, {sec.id, tz, uz, dir}});
        }
      }
      ta = tb;
      ga = gb;
    }
    g_start[s] = ga;
  }
  std::stable_sort(found.begin(), found.end(),
                   [](const Pending& a, const Pending& b) { return a.event.t < b.event.t; });
  return found;
}

}  // namespace

Trajectory integrate(const VectorField& field, const Vec& u0, double t0, double t1,
                     const Tolerances& tol, const IntegrateOptions& opts) {
  const int n = field.dimension();
  if (u0.size() != n) throw InvalidParameter("integrate: initial state has the wrong dimension");
  if (!(tol.abs > 0.0) || !(tol.rel > 0.0)) {
    throw InvalidParameter("integrate: tolerances must be positive");
  }
  if (!(t1 > t0)) throw InvalidParameter("integrate: t_end must exceed t_start");
  if (!all_finite(u0)) throw DomainError("integrate: initial state is not finite");

  Trajectory traj(field.tag(), n, tol);
  IntegratorStats& st = traj.mutable_stats();
  traj.push(t0, u0);

  std::vector<bool> terminal(opts.sections.size(), false);
  for (std::size_t s = 0; s < opts.sections.size(); ++s) {
    for (const auto& id : opts.terminal) terminal[s] = terminal[s] || id == opts.sections[s].id;
  }
  std::vector<double> g_start(opts.sections.size());
  for (std::size_t s = 0; s < opts.sections.size(); ++s) g_start[s] = opts.sections[s].fn(u0);

  auto F = [&](const Vec& u, Vec& du) {
    ++st.rhs_evals;
    field.eval(u, du);
  };

  Vec y = u0;
  double t = t0;
  Vec f0(n);
  F(y, f0);
  Vec scal = (tol.abs + tol.rel * y.array().abs()).matrix();

  const double fnewt = std::max(10.0 * kUround / tol.rel, std::min(0.03, std::sqrt(tol.rel)));

  double h = tol.h_init;
  if (!(h > 0.0)) {
    const double d0 = rms(y, scal);
    const double d1 = rms(f0, scal);
    h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h = std::min(h, 1e-3 * (t1 - t0));
  }
  h = std::min({h, tol.h_max, t1 - t0});

  Mat J(n, n);
  bool need_jac = true;
  bool first = true;
  bool reject = false;
  double hacc = h;
  double erracc = 1e-2;
  double faccon = 1.0;
  std::optional<DenseStep> prev;

  const int m = 3 * n;
  Mat M(m, m);
  Vec Z(m), dZ(m), R(m), Fs(m);
  Vec ytmp(n), ftmp(n);
  Mat E1(n, n);

  long steps = 0;
  while (t < t1) {
    if (++steps > tol.max_steps) {
      throw ConvergenceError("integrate: maximum number of steps exceeded at " +
                             describe_state(t, y));
    }
    const double remaining = t1 - t;
    if (1.05 * h >= remaining) h = remaining;
    h = std::min(h, tol.h_max);
    const double hmin = 1e-14 * std::max(1.0, std::abs(t));
    if (h < hmin) {
      throw ConvergenceError("integrate: step size underflow at " + describe_state(t, y) +
                             " (likely a singular locus or blow-up)");
    }

    if (need_jac) {
      field.jacobian(y, J);
      ++st.jacobian_evals;
      need_jac = false;
    }
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        M.block(i * n, j * n, n, n) = -h * kA[i][j] * J;
      }
      M.block(i * n, i * n, n, n).diagonal().array() += 1.0;
    }
    Eigen::PartialPivLU<Mat> lu(M);
    ++st.decompositions;

    // Starting guess: extrapolated collocation polynomial of the last step.
    if (prev && !reject) {
      for (int i = 0; i < 3; ++i) Z.segment(i * n, n) = prev->eval(t + kC[i] * h) - y;
    } else {
      Z.setZero();
    }

    bool converged = false;
    int newt = 0;
    double old_norm = 0.0;
    double theta = 0.0;
    try {
      for (newt = 0; newt < kMaxNewton; ++newt) {
        for (int i = 0; i < 3; ++i) {
          ytmp = y + Z.segment(i * n, n);
          F(ytmp, ftmp);
          Fs.segment(i * n, n) = ftmp;
        }
        if (!Fs.allFinite()) break;
        for (int i = 0; i < 3; ++i) {
          Vec acc = -Z.segment(i * n, n);
          for (int j = 0; j < 3; ++j) acc += h * kA[i][j] * Fs.segment(j * n, n);
          R.segment(i * n, n) = acc;
        }
        dZ = lu.solve(R);
        const double norm = rms(dZ, scal);
        if (newt >= 1) {
          theta = norm / old_norm;
          if (theta >= 0.99) break;
          faccon = theta / (1.0 - theta);
          if (std::pow(theta, kMaxNewton - 1 - newt) / (1.0 - theta) * norm > fnewt) break;
        } else {
          faccon = std::pow(std::max(faccon, kUround), 0.8);
        }
        old_norm = std::max(norm, kUround);
        Z += dZ;
        if (faccon * norm <= fnewt) {
          converged = true;
          ++newt;
          break;
        }
      }
    } catch (const DomainError&) {
      converged = false;
    }
    if (!converged || !Z.allFinite()) {
      ++st.newton_failures;
      h *= 0.5;
      reject = true;
      faccon = 1.0;
      continue;
    }

    // Error estimate.
    const Vec z1 = Z.segment(0, n);
    const Vec z2 = Z.segment(n, n);
    const Vec z3 = Z.segment(2 * n, n);
    const Vec f2 = (kDD1 * z1 + kDD2 * z2 + kDD3 * z3) / h;
    E1 = -J;
    E1.diagonal().array() += kU1 / h;
    Eigen::PartialPivLU<Mat> lu1(E1);
    Vec errv = lu1.solve(Vec(f2 + f0));
    double err = std::max(rms(errv, scal), 1e-10);
    if (err >= 1.0 && (first || reject)) {
      try {
        ytmp = y + errv;
        F(ytmp, ftmp);
        if (ftmp.allFinite()) {
          errv = lu1.solve(Vec(ftmp + f2));
          err = std::max(rms(errv, scal), 1e-10);
        }
      } catch (const DomainError&) {
      }
    }
    if (!std::isfinite(err)) err = 1e10;

    const double fac = std::min(kSafe, kSafe * (1 + 2 * kMaxNewton) / (newt + 2 * kMaxNewton));
    double quot = std::max(kFacR, std::min(kFacL, std::pow(err, 0.25) / fac));
    double hnew = h / quot;

    if (err < 1.0) {
      const Vec ynew = y + z3;
      Vec fnew(n);
      try {
        F(ynew, fnew);
      } catch (const DomainError&) {
        ++st.newton_failures;
        h *= 0.5;
        reject = true;
        continue;
      }
      if (!first) {
        double facgus = (hacc / h) * std::pow(err * err / erracc, 0.25) / kSafe;
        facgus = std::max(kFacR, std::min(kFacL, facgus));
        quot = std::max(quot, facgus);
        hnew = h / quot;
      }
      hacc = h;
      erracc = std::max(1e-2, err);

      DenseStep step{t, h, y, z1, z2, z3};
      ++st.accepted;
      st.h_min = std::min(st.h_min, h);
      st.h_max = std::max(st.h_max, h);

      bool stop = false;
      double t_stop = t + h;
      Vec y_stop = ynew;
      if (!opts.sections.empty()) {
        auto found = find_events(opts.sections, step, g_start);
        for (auto& pe : found) {
          traj.push_event(pe.event);
          if (terminal[pe.section]) {
            stop = true;
            t_stop = pe.event.t;
            y_stop = pe.event.state;
            break;
          }
        }
      }
      if (opts.dense) traj.push_step(step);
      prev = step;
      if (stop) {
        if (t_stop > t) traj.push(t_stop, y_stop);
        return traj;
      }
      t = (h == remaining) ? t1 : t + h;
      y = ynew;
      f0 = fnew;
      traj.push(t, y);
      scal = (tol.abs + tol.rel * y.array().abs()).matrix();
      if (reject) hnew = std::min(hnew, h);
      reject = false;
      first = false;
      need_jac = true;
      h = hnew;
    } else {
      ++st.rejected;
      h = first ? 0.1 * h : hnew;
      reject = true;
    }
  }
  return traj;
}

SectionHit integrate_to_section(const VectorField& field, const Vec& u0, const Section& section,
                                double max_time, const Tolerances& tol,
                                std::vector<Section> logged, double t0) {
  IntegrateOptions opts;
  opts.sections = std::move(logged);
  opts.sections.push_back(section);
  opts.terminal = {section.id};
  Trajectory traj = integrate(field, u0, t0, t0 + max_time, tol, opts);
  for (auto it = traj.events().rbegin(); it != traj.events().rend(); ++it) {
    if (it->id == section.id) {
      SectionEvent ev = *it;
      return {std::move(traj), std::move(ev)};
    }
  }
  std::ostringstream os;
  os << "integrate_to_section: no crossing of section '" << section.id << "' within time "
     << max_time;
  throw DomainError(os.str());
}

Section section_in(const ParameterSet& p, double eta, int direction) {
  const double level = f_cubic(geometry(p).x_f, p) - eta;
  return {"in", [level](const Vec& u) { return u[1] - level; }, direction};
}

Section section_f(const ParameterSet& p, int direction) {
  const double level = geometry(p).x_f;
  return {"f", [level](const Vec& u) { return u[0] - level; }, direction};
}

Section section_surge(const ParameterSet& p, double eta, int direction) {
  const double level = x_sing(geometry(p).X_max, p) + eta;
  return {"surge", [level](const Vec& u) { return u[0] - level; }, direction};
}

Section section_endsurge(const ParameterSet& p, double eta, int direction) {
  const double level = x_sing(geometry(p).gamma, p) - eta;
  return {"endsurge", [level](const Vec& u) { return u[0] - level; }, direction};
}

}  // namespace phantom
