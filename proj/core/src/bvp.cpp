#include "phantom/bvp.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>

#include "phantom/error.hpp"

namespace phantom {

namespace {

template <int M>
std::vector<double> gauss_nodes_01() {
  using Rule = boost::math::quadrature::gauss<double, M>;
  const auto& x = Rule::abscissa();
  std::vector<double> nodes;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] == 0.0) {
      nodes.push_back(0.5);
    } else {
      nodes.push_back(0.5 * (1.0 - x[i]));
      nodes.push_back(0.5 * (1.0 + x[i]));
    }
  }
  std::sort(nodes.begin(), nodes.end());
  return nodes;
}

std::vector<double> gauss_nodes(int m) {
  switch (m) {
    case 1: return gauss_nodes_01<1>();
    case 2: return gauss_nodes_01<2>();
    case 3: return gauss_nodes_01<3>();
    case 4: return gauss_nodes_01<4>();
    case 5: return gauss_nodes_01<5>();
    case 6: return gauss_nodes_01<6>();
    case 7: return gauss_nodes_01<7>();
    default: break;
  }
  throw InvalidParameter("collocation: stages must be between 1 and 7");
}

// Lagrange basis polynomial k on the given points, evaluated at s.
double lagrange(const std::vector<double>& pts, std::size_t k, double s) {
  double v = 1.0;
  for (std::size_t l = 0; l < pts.size(); ++l) {
    if (l != k) v *= (s - pts[l]) / (pts[k] - pts[l]);
  }
  return v;
}

double lagrange_derivative(const std::vector<double>& pts, std::size_t k, double s) {
  double sum = 0.0;
  for (std::size_t l = 0; l < pts.size(); ++l) {
    if (l == k) continue;
    double term = 1.0 / (pts[k] - pts[l]);
    for (std::size_t q = 0; q < pts.size(); ++q) {
      if (q != k && q != l) term *= (s - pts[q]) / (pts[k] - pts[q]);
    }
    sum += term;
  }
  return sum;
}

// Interpolation points {0, c_1, ..., c_m} of one interval.
std::vector<double> interval_points(const GaussTableau& g) {
  std::vector<double> pts{0.0};
  pts.insert(pts.end(), g.c.begin(), g.c.end());
  return pts;
}

}  // namespace

const GaussTableau& GaussTableau::get(int m) {
  static std::mutex mtx;
  static std::map<int, std::unique_ptr<GaussTableau>> cache;
  std::lock_guard<std::mutex> lock(mtx);
  auto it = cache.find(m);
  if (it != cache.end()) return *it->second;
  auto g = std::make_unique<GaussTableau>();
  g->m = m;
  g->c = gauss_nodes(m);
  g->b.assign(m, 0.0);
  g->a = Mat::Zero(m, m);
  // The basis has degree m - 1, so the m-point rule itself integrates it
  // exactly; its weights on [0, 1] follow from the moment equations.
  const std::vector<double>& c = g->c;
  Mat V(m, m);
  Vec mom(m);
  for (int r = 0; r < m; ++r) {
    for (int q = 0; q < m; ++q) V(r, q) = std::pow(c[q], r);
    mom[r] = 1.0 / (r + 1);
  }
  const Vec w = V.colPivHouseholderQr().solve(mom);
  for (int k = 0; k < m; ++k) {
    for (int q = 0; q < m; ++q) g->b[k] += w[q] * lagrange(c, k, c[q]);
    for (int i = 0; i < m; ++i) {
      // Rule mapped to [0, c_i].
      double aik = 0.0;
      for (int q = 0; q < m; ++q) aik += c[i] * w[q] * lagrange(c, k, c[i] * c[q]);
      g->a(i, k) = aik;
    }
  }
  auto [pos, inserted] = cache.emplace(m, std::move(g));
  (void)inserted;
  return *pos->second;
}

PiecewisePolynomial::PiecewisePolynomial(std::vector<double> mesh, std::vector<Vec> nodes,
                                         std::vector<Vec> stages, int m)
    : mesh_(std::move(mesh)), nodes_(std::move(nodes)), stages_(std::move(stages)), m_(m) {
  if (mesh_.size() < 2 || nodes_.size() != mesh_.size() ||
      stages_.size() != static_cast<std::size_t>(m_) * (mesh_.size() - 1)) {
    throw InvalidParameter("PiecewisePolynomial: inconsistent sizes");
  }
}

int PiecewisePolynomial::locate(double tau) const {
  const auto it = std::upper_bound(mesh_.begin(), mesh_.end(), tau);
  int j = static_cast<int>(it - mesh_.begin()) - 1;
  return std::clamp(j, 0, intervals() - 1);
}

Vec PiecewisePolynomial::eval(double tau) const {
  const GaussTableau& g = GaussTableau::get(m_);
  const std::vector<double> pts = interval_points(g);
  const int j = locate(tau);
  const double h = mesh_[j + 1] - mesh_[j];
  const double s = (tau - mesh_[j]) / h;
  Vec v = lagrange(pts, 0, s) * nodes_[j];
  for (int i = 0; i < m_; ++i) v += lagrange(pts, i + 1, s) * stages_[j * m_ + i];
  return v;
}

Vec PiecewisePolynomial::derivative(double tau) const {
  const GaussTableau& g = GaussTableau::get(m_);
  const std::vector<double> pts = interval_points(g);
  const int j = locate(tau);
  const double h = mesh_[j + 1] - mesh_[j];
  const double s = (tau - mesh_[j]) / h;
  Vec v = lagrange_derivative(pts, 0, s) * nodes_[j];
  for (int i = 0; i < m_; ++i) v += lagrange_derivative(pts, i + 1, s) * stages_[j * m_ + i];
  return v / h;
}

Vec PiecewisePolynomial::top_derivative(int j) const {
  const GaussTableau& g = GaussTableau::get(m_);
  const std::vector<double> pts = interval_points(g);
  const double h = mesh_[j + 1] - mesh_[j];
  double fact = 1.0;
  for (int k = 2; k <= m_; ++k) fact *= k;
  Vec v = Vec::Zero(nodes_[j].size());
  for (std::size_t k = 0; k < pts.size(); ++k) {
    double denom = 1.0;
    for (std::size_t l = 0; l < pts.size(); ++l) {
      if (l != k) denom *= pts[k] - pts[l];
    }
    const Vec& val = k == 0 ? nodes_[j] : stages_[j * m_ + static_cast<int>(k) - 1];
    v += val / denom;
  }
  return v * fact / std::pow(h, m_);
}

PiecewisePolynomial PiecewisePolynomial::remesh(const std::vector<double>& mesh) const {
  const GaussTableau& g = GaussTableau::get(m_);
  std::vector<Vec> nodes;
  std::vector<Vec> stages;
  nodes.reserve(mesh.size());
  for (double t : mesh) nodes.push_back(eval(t));
  for (std::size_t j = 0; j + 1 < mesh.size(); ++j) {
    const double h = mesh[j + 1] - mesh[j];
    for (int i = 0; i < m_; ++i) stages.push_back(eval(mesh[j] + g.c[i] * h));
  }
  return {mesh, std::move(nodes), std::move(stages), m_};
}

std::vector<std::pair<double, Vec>> OrbitSegment::sample(std::size_t n) const {
  if (n < 2) throw InvalidParameter("sample: need at least two points");
  std::vector<std::pair<double, Vec>> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double tau = static_cast<double>(k) / static_cast<double>(n - 1);
    out.emplace_back(tau * T, path.eval(tau));
  }
  return out;
}

namespace {

struct Layout {
  int n = 0;
  int m = 0;
  int N = 0;
  int n_params = 0;
  bool free_T = true;

  int node(int j) const { return j < N ? j * (m + 1) * n : N * (m + 1) * n; }
  int stage(int j, int i) const { return j * (m + 1) * n + (i + 1) * n; }
  int T_index() const { return N * (m + 1) * n + n; }
  int param(int p) const { return T_index() + (free_T ? 1 : 0) + p; }
  int unknowns() const { return param(n_params); }
  int colloc_equations() const { return N * (m + 1) * n; }
};

Vec pack(const Layout& L, const OrbitSegment& s) {
  Vec z(L.unknowns());
  for (int j = 0; j <= L.N; ++j) z.segment(L.node(j), L.n) = s.path.nodes()[j];
  for (int j = 0; j < L.N; ++j) {
    for (int i = 0; i < L.m; ++i) z.segment(L.stage(j, i), L.n) = s.path.stages()[j * L.m + i];
  }
  if (L.free_T) z[L.T_index()] = s.T;
  for (int p = 0; p < L.n_params; ++p) z[L.param(p)] = s.params[p];
  return z;
}

void unpack(const Layout& L, const Vec& z, OrbitSegment& s) {
  for (int j = 0; j <= L.N; ++j) s.path.nodes()[j] = z.segment(L.node(j), L.n);
  for (int j = 0; j < L.N; ++j) {
    for (int i = 0; i < L.m; ++i) s.path.stages()[j * L.m + i] = z.segment(L.stage(j, i), L.n);
  }
  if (L.free_T) s.T = z[L.T_index()];
  for (int p = 0; p < L.n_params; ++p) s.params[p] = z[L.param(p)];
}

void jac_u_of(const BvpProblem& P, const Vec& u, const Vec& lam, Mat& J) {
  J.resize(P.dim, P.dim);
  if (P.jac_u) {
    P.jac_u(u, lam, J);
    return;
  }
  finite_difference_jacobian([&](const Vec& v, Vec& f) { P.rhs(v, lam, f); }, u, J);
}

void jac_lam_of(const BvpProblem& P, const Vec& u, const Vec& lam, Mat& J) {
  J.resize(P.dim, P.n_params);
  if (P.n_params == 0) return;
  if (P.jac_lam) {
    P.jac_lam(u, lam, J);
    return;
  }
  Vec f0(P.dim), f1(P.dim);
  P.rhs(u, lam, f0);
  for (int p = 0; p < P.n_params; ++p) {
    Vec l = lam;
    const double h = 1e-7 * std::max(1.0, std::abs(lam[p]));
    l[p] += h;
    P.rhs(u, l, f1);
    J.col(p) = (f1 - f0) / h;
  }
}

struct Residual {
  Vec r;
  double colloc = 0.0;
  double boundary = 0.0;
};

// Residual and, when trips != nullptr, the Jacobian.
Residual assemble(const BvpProblem& P, const Layout& L, const GaussTableau& g,
                  const std::vector<double>& mesh, const OrbitSegment& s,
                  std::vector<Eigen::Triplet<double>>* trips) {
  const int n = L.n;
  const int m = L.m;
  Residual out;
  const int n_eq = L.colloc_equations() + P.n_bc + static_cast<int>(P.integral.size());
  out.r = Vec::Zero(n_eq);
  const double T = s.T;
  const Vec& lam = s.params;
  std::vector<Vec> f(m, Vec(n));
  std::vector<Mat> Ju(m);
  std::vector<Mat> Jl(m);
  auto add = [&](int r, int c, double v) {
    if (v != 0.0) trips->emplace_back(r, c, v);
  };
  for (int j = 0; j < L.N; ++j) {
    const double h = mesh[j + 1] - mesh[j];
    for (int k = 0; k < m; ++k) {
      const Vec& U = s.path.stages()[j * m + k];
      P.rhs(U, lam, f[k]);
      if (trips) {
        jac_u_of(P, U, lam, Ju[k]);
        jac_lam_of(P, U, lam, Jl[k]);
      }
    }
    const Vec& uj = s.path.nodes()[j];
    const int row0 = j * (m + 1) * n;
    for (int i = 0; i < m; ++i) {
      Vec acc = Vec::Zero(n);
      for (int k = 0; k < m; ++k) acc += g.a(i, k) * f[k];
      out.r.segment(row0 + i * n, n) = s.path.stages()[j * m + i] - uj - h * T * acc;
      if (!trips) continue;
      for (int r = 0; r < n; ++r) {
        const int row = row0 + i * n + r;
        add(row, L.node(j) + r, -1.0);
        for (int k = 0; k < m; ++k) {
          for (int c = 0; c < n; ++c) {
            const double v = (i == k && r == c ? 1.0 : 0.0) - h * T * g.a(i, k) * Ju[k](r, c);
            add(row, L.stage(j, k) + c, v);
          }
        }
        if (L.free_T) add(row, L.T_index(), -h * acc[r]);
        for (int p = 0; p < L.n_params; ++p) {
          double v = 0.0;
          for (int k = 0; k < m; ++k) v += g.a(i, k) * Jl[k](r, p);
          add(row, L.param(p), -h * T * v);
        }
      }
    }
    Vec acc = Vec::Zero(n);
    for (int k = 0; k < m; ++k) acc += g.b[k] * f[k];
    const int crow = row0 + m * n;
    out.r.segment(crow, n) = s.path.nodes()[j + 1] - uj - h * T * acc;
    if (!trips) continue;
    for (int r = 0; r < n; ++r) {
      const int row = crow + r;
      add(row, L.node(j + 1) + r, 1.0);
      add(row, L.node(j) + r, -1.0);
      for (int k = 0; k < m; ++k) {
        for (int c = 0; c < n; ++c) add(row, L.stage(j, k) + c, -h * T * g.b[k] * Ju[k](r, c));
      }
      if (L.free_T) add(row, L.T_index(), -h * acc[r]);
      for (int p = 0; p < L.n_params; ++p) {
        double v = 0.0;
        for (int k = 0; k < m; ++k) v += g.b[k] * Jl[k](r, p);
        add(row, L.param(p), -h * T * v);
      }
    }
  }
  out.colloc = out.r.head(L.colloc_equations()).cwiseAbs().maxCoeff();

  // Boundary conditions with a central-difference Jacobian.
  const Vec u0 = s.path.nodes().front();
  const Vec u1 = s.path.nodes().back();
  const int brow = L.colloc_equations();
  const Vec g0 = P.bc(u0, u1, T, lam);
  if (g0.size() != P.n_bc) throw InvalidParameter("bvp: boundary function size mismatch");
  out.r.segment(brow, P.n_bc) = g0;
  if (trips) {
    auto column = [&](int col, const Vec& gp, const Vec& gm, double hh) {
      for (int r = 0; r < P.n_bc; ++r) add(brow + r, col, (gp[r] - gm[r]) / (2.0 * hh));
    };
    for (int c = 0; c < n; ++c) {
      const double hh = 1e-6 * std::max(1.0, std::abs(u0[c]));
      Vec a = u0, b = u0;
      a[c] += hh;
      b[c] -= hh;
      column(L.node(0) + c, P.bc(a, u1, T, lam), P.bc(b, u1, T, lam), hh);
    }
    for (int c = 0; c < n; ++c) {
      const double hh = 1e-6 * std::max(1.0, std::abs(u1[c]));
      Vec a = u1, b = u1;
      a[c] += hh;
      b[c] -= hh;
      column(L.node(L.N) + c, P.bc(u0, a, T, lam), P.bc(u0, b, T, lam), hh);
    }
    if (L.free_T) {
      const double hh = 1e-6 * std::max(1.0, std::abs(T));
      column(L.T_index(), P.bc(u0, u1, T + hh, lam), P.bc(u0, u1, T - hh, lam), hh);
    }
    for (int p = 0; p < L.n_params; ++p) {
      const double hh = 1e-6 * std::max(1.0, std::abs(lam[p]));
      Vec a = lam, b = lam;
      a[p] += hh;
      b[p] -= hh;
      column(L.param(p), P.bc(u0, u1, T, a), P.bc(u0, u1, T, b), hh);
    }
  }

  // Integral conditions by the Gauss rule of each interval.
  for (std::size_t q = 0; q < P.integral.size(); ++q) {
    const IntegralCondition& ic = P.integral[q];
    const int row = brow + P.n_bc + static_cast<int>(q);
    double val = ic.coef_T * T - ic.rhs;
    for (int p = 0; p < L.n_params && p < ic.coef_params.size(); ++p) {
      val += ic.coef_params[p] * lam[p];
      if (trips) add(row, L.param(p), ic.coef_params[p]);
    }
    if (trips && L.free_T) add(row, L.T_index(), ic.coef_T);
    for (int j = 0; j < L.N; ++j) {
      const double h = mesh[j + 1] - mesh[j];
      for (int i = 0; i < m; ++i) {
        const Vec w = ic.weight(mesh[j] + g.c[i] * h) * (h * g.b[i]);
        val += w.dot(s.path.stages()[j * m + i]);
        if (trips) {
          for (int c = 0; c < n; ++c) add(row, L.stage(j, i) + c, w[c]);
        }
      }
    }
    out.r[row] = val;
  }
  const int n_side = P.n_bc + static_cast<int>(P.integral.size());
  out.boundary = n_side > 0 ? out.r.tail(n_side).cwiseAbs().maxCoeff() : 0.0;
  return out;
}

}  // namespace

OrbitSegment solve_collocation(const BvpProblem& P, const OrbitSegment& guess,
                               const CollocationOptions& opts) {
  const GaussTableau& g = GaussTableau::get(guess.path.stages_per_interval());
  Layout L;
  L.n = P.dim;
  L.m = g.m;
  L.N = guess.path.intervals();
  L.n_params = P.n_params;
  L.free_T = P.free_T;
  if (guess.path.dimension() != P.dim) throw InvalidParameter("bvp: guess dimension mismatch");
  if (guess.params.size() != P.n_params) throw InvalidParameter("bvp: guess parameter count");
  const int n_side = P.n_bc + static_cast<int>(P.integral.size());
  if (n_side != P.dim + (P.free_T ? 1 : 0) + P.n_params) {
    std::ostringstream os;
    os << "bvp: " << n_side << " boundary/integral conditions for "
       << P.dim + (P.free_T ? 1 : 0) + P.n_params << " free quantities";
    throw InvalidParameter(os.str());
  }

  OrbitSegment s = guess;
  s.tag = P.tag;
  const std::vector<double> mesh = guess.path.mesh();
  const int nz = L.unknowns();
  Eigen::SparseMatrix<double> J(nz, nz);
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  bool analyzed = false;
  std::vector<Eigen::Triplet<double>> trips;

  Residual res = assemble(P, L, g, mesh, s, nullptr);
  double norm = res.r.norm();
  for (int it = 1; it <= opts.max_newton; ++it) {
    trips.clear();
    res = assemble(P, L, g, mesh, s, &trips);
    J.setFromTriplets(trips.begin(), trips.end());
    if (!analyzed) {
      lu.analyzePattern(J);
      analyzed = true;
    }
    lu.factorize(J);
    if (lu.info() != Eigen::Success) {
      throw DomainError("bvp: singular collocation Jacobian");
    }
    const Vec dz = lu.solve(-res.r);
    if (lu.info() != Eigen::Success || !dz.allFinite()) {
      throw DomainError("bvp: singular collocation Jacobian");
    }
    const Vec z0 = pack(L, s);
    double lambda = 1.0;
    OrbitSegment trial = s;
    Residual tr;
    for (int damp = 0; damp < 12; ++damp) {
      unpack(L, z0 + lambda * dz, trial);
      bool finite = true;
      try {
        tr = assemble(P, L, g, mesh, trial, nullptr);
        finite = tr.r.allFinite();
      } catch (const DomainError&) {
        finite = false;
      }
      if (finite && (tr.r.norm() < norm || damp == 11 || lambda * dz.cwiseAbs().maxCoeff() < 1e-14)) {
        break;
      }
      lambda *= 0.5;
    }
    if (!tr.r.allFinite()) throw ConvergenceError("bvp: Newton produced non-finite values");
    s = trial;
    norm = tr.r.norm();
    res = tr;
    s.newton_iterations = it;
    const double step = lambda * dz.cwiseAbs().maxCoeff() / (1.0 + z0.cwiseAbs().maxCoeff());
    if (lambda == 1.0 && step < opts.tol && std::max(res.colloc, res.boundary) < opts.residual_target) {
      break;
    }
    if (std::max(res.colloc, res.boundary) < 1e-3 * opts.residual_target && lambda == 1.0) break;
    if (it == opts.max_newton) {
      std::ostringstream os;
      os << "bvp: Newton did not converge in " << opts.max_newton
         << " iterations (residual " << std::max(res.colloc, res.boundary) << ")";
      throw ConvergenceError(os.str());
    }
  }
  s.collocation_residual = res.colloc;
  s.boundary_residual = res.boundary;
  if (std::max(res.colloc, res.boundary) > opts.residual_target) {
    std::ostringstream os;
    os << "bvp: final residual " << std::max(res.colloc, res.boundary) << " above target "
       << opts.residual_target;
    throw ConvergenceError(os.str());
  }
  return s;
}

std::vector<double> equidistributed_mesh(const PiecewisePolynomial& path, int intervals) {
  const int N = path.intervals();
  const int m = path.stages_per_interval();
  const std::vector<double>& mesh = path.mesh();
  std::vector<double> rho(N);
  for (int j = 0; j < N; ++j) {
    rho[j] = std::pow(path.top_derivative(j).cwiseAbs().maxCoeff(), 1.0 / m);
  }
  // Smooth over neighbours so single quiet intervals inside a layer keep
  // their resolution.
  std::vector<double> sm(N);
  for (int j = 0; j < N; ++j) {
    double v = rho[j];
    if (j > 0) v = std::max(v, 0.5 * rho[j - 1]);
    if (j + 1 < N) v = std::max(v, 0.5 * rho[j + 1]);
    sm[j] = v;
  }
  double total = 0.0;
  for (int j = 0; j < N; ++j) total += sm[j] * (mesh[j + 1] - mesh[j]);
  // A uniform share keeps the smooth parts resolved.
  const double floor_density = std::max(0.1 * total, 1e-300);
  std::vector<double> cum(N + 1, 0.0);
  for (int j = 0; j < N; ++j) {
    cum[j + 1] = cum[j] + (sm[j] + floor_density) * (mesh[j + 1] - mesh[j]);
  }
  std::vector<double> out(intervals + 1);
  out.front() = 0.0;
  out.back() = 1.0;
  int j = 0;
  for (int k = 1; k < intervals; ++k) {
    const double target = cum[N] * k / intervals;
    while (j < N - 1 && cum[j + 1] < target) ++j;
    const double frac = (target - cum[j]) / (cum[j + 1] - cum[j]);
    out[k] = mesh[j] + frac * (mesh[j + 1] - mesh[j]);
  }
  for (int k = 1; k <= intervals; ++k) {
    if (!(out[k] > out[k - 1])) throw DomainError("equidistributed_mesh: degenerate mesh");
  }
  return out;
}

OrbitSegment solve_adaptive(const BvpProblem& P, const OrbitSegment& guess,
                            const CollocationOptions& opts) {
  OrbitSegment s = solve_collocation(P, guess, opts);
  for (int pass = 0; pass < opts.adapt_passes; ++pass) {
    OrbitSegment g = s;
    g.path = s.path.remesh(equidistributed_mesh(s.path, opts.intervals));
    s = solve_collocation(P, g, opts);
  }
  return s;
}

double collocation_defect(const BvpProblem& P, const OrbitSegment& seg) {
  const std::vector<double>& mesh = seg.path.mesh();
  double worst = 0.0;
  Vec f(P.dim);
  for (int j = 0; j < seg.path.intervals(); ++j) {
    const double tau = 0.5 * (mesh[j] + mesh[j + 1]);
    P.rhs(seg.path.eval(tau), seg.params, f);
    const Vec tf = seg.T * f;
    const double d = (seg.path.derivative(tau) - tf).cwiseAbs().maxCoeff();
    worst = std::max(worst, d / (1.0 + tf.cwiseAbs().maxCoeff()));
  }
  return worst;
}

OrbitSegment guess_from_trajectory(const Trajectory& traj, int intervals, int stages, FieldTag tag) {
  if (traj.size() < 2) throw DomainError("guess_from_trajectory: trajectory too short");
  if (intervals < 1) throw InvalidParameter("guess_from_trajectory: intervals must be >= 1");
  const GaussTableau& g = GaussTableau::get(stages);
  const std::vector<double>& times = traj.times();
  const double t0 = times.front();
  const double t1 = times.back();
  const double S = static_cast<double>(times.size() - 1);
  std::vector<double> mesh(intervals + 1);
  for (int k = 0; k <= intervals; ++k) {
    const double pos = S * k / intervals;
    const auto i = static_cast<std::size_t>(std::min(std::floor(pos), S - 1.0));
    const double frac = pos - static_cast<double>(i);
    const double t = times[i] + frac * (times[i + 1] - times[i]);
    mesh[k] = (t - t0) / (t1 - t0);
  }
  mesh.front() = 0.0;
  mesh.back() = 1.0;
  for (int k = 1; k <= intervals; ++k) {
    if (!(mesh[k] > mesh[k - 1])) throw DomainError("guess_from_trajectory: degenerate mesh");
  }
  std::vector<Vec> nodes;
  std::vector<Vec> st;
  auto at = [&](double tau) { return traj.at(std::clamp(t0 + tau * (t1 - t0), t0, t1)); };
  for (double tau : mesh) nodes.push_back(at(tau));
  for (int j = 0; j < intervals; ++j) {
    const double h = mesh[j + 1] - mesh[j];
    for (int i = 0; i < stages; ++i) st.push_back(at(mesh[j] + g.c[i] * h));
  }
  OrbitSegment s;
  s.tag = tag;
  s.path = PiecewisePolynomial(std::move(mesh), std::move(nodes), std::move(st), stages);
  s.T = t1 - t0;
  return s;
}

OrbitSegment guess_from_function(const std::function<Vec(double)>& u, double T, int intervals,
                                 int stages) {
  const GaussTableau& g = GaussTableau::get(stages);
  std::vector<double> mesh(intervals + 1);
  for (int k = 0; k <= intervals; ++k) mesh[k] = static_cast<double>(k) / intervals;
  std::vector<Vec> nodes;
  std::vector<Vec> st;
  for (double tau : mesh) nodes.push_back(u(tau));
  for (int j = 0; j < intervals; ++j) {
    const double h = mesh[j + 1] - mesh[j];
    for (int i = 0; i < stages; ++i) st.push_back(u(mesh[j] + g.c[i] * h));
  }
  OrbitSegment s;
  s.path = PiecewisePolynomial(std::move(mesh), std::move(nodes), std::move(st), stages);
  s.T = T;
  return s;
}

namespace {

BvpProblem field_problem(const VectorField& field) {
  BvpProblem P;
  P.dim = field.dimension();
  P.tag = field.tag();
  P.rhs = [field](const Vec& u, const Vec&, Vec& f) { field.eval(u, f); };
  P.jac_u = [field](const Vec& u, const Vec&, Mat& J) { field.jacobian(u, J); };
  return P;
}

}  // namespace

OrbitSegment solve_segment(const VectorField& field, const StartCondition& start,
                           const EndPlane& end, const OrbitSegment& guess,
                           const CollocationOptions& opts) {
  const int n = field.dimension();
  if (start.point.size() != n || end.normal.size() != n) {
    throw InvalidParameter("solve_segment: boundary data dimension mismatch");
  }
  BvpProblem P = field_problem(field);
  P.n_bc = n + 1;
  P.bc = [start, end, n](const Vec& u0, const Vec& u1, double, const Vec&) {
    Vec r(n + 1);
    r.head(n) = u0 - start.point;
    r[n] = end.normal.dot(u1) - end.offset;
    return r;
  };
  return solve_adaptive(P, guess, opts);
}

OrbitSegment segment_guess(const VectorField& field, const StartCondition& start,
                           const EndPlane& end, double max_time, int intervals,
                           const Tolerances& tol) {
  const Vec nrm = end.normal;
  const double off = end.offset;
  const Section plane{"end", [nrm, off](const Vec& u) { return nrm.dot(u) - off; }, 0};
  const SectionHit hit = integrate_to_section(field, start.point, plane, max_time, tol);
  return guess_from_trajectory(hit.trajectory, intervals, 4, field.tag());
}

BvpProblem periodic_problem(const VectorField& field, const OrbitSegment& reference) {
  BvpProblem P = field_problem(field);
  const int n = P.dim;
  P.n_bc = n;
  P.bc = [](const Vec& u0, const Vec& u1, double, const Vec&) { return Vec(u1 - u0); };
  auto ref = std::make_shared<PiecewisePolynomial>(reference.path);
  IntegralCondition phase;
  phase.weight = [ref](double tau) { return ref->derivative(tau); };
  // The reference satisfies the condition exactly on its own mesh.
  const GaussTableau& g = GaussTableau::get(ref->stages_per_interval());
  double self = 0.0;
  for (int j = 0; j < ref->intervals(); ++j) {
    const double h = ref->mesh()[j + 1] - ref->mesh()[j];
    for (int i = 0; i < g.m; ++i) {
      const double tau = ref->mesh()[j] + g.c[i] * h;
      self += h * g.b[i] * ref->derivative(tau).dot(ref->stages()[j * g.m + i]);
    }
  }
  phase.rhs = self;
  P.integral.push_back(phase);
  return P;
}

BvpProblem periodic_problem(const ParameterSet& p, const OrbitSegment& reference) {
  return periodic_problem(build_field(FieldTag::Full4D, p), reference);
}

OrbitSegment solve_periodic(const VectorField& field, const Trajectory& seed,
                            const CollocationOptions& opts) {
  if (seed.size() < 2) throw DomainError("solve_periodic: seed too short");
  const Vec& a = seed.states().front();
  const Vec& b = seed.back();
  const double gap = (b - a).norm() / (1.0 + a.norm());
  if (!(gap < 0.1)) {
    std::ostringstream os;
    os << "solve_periodic: seed endpoint gap " << gap << " is not below 0.1";
    throw DomainError(os.str());
  }
  OrbitSegment guess = guess_from_trajectory(seed, opts.intervals, opts.stages, field.tag());
  const BvpProblem P = periodic_problem(field, guess);
  return solve_adaptive(P, guess, opts);
}

OrbitSegment solve_periodic(const ParameterSet& p, const Trajectory& seed,
                            const CollocationOptions& opts) {
  return solve_periodic(build_field(FieldTag::Full4D, p), seed, opts);
}

}  // namespace phantom
