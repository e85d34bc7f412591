// phantom: command-line front end to the phantom-bursting toolkit.
//
// Every subcommand prints a JSON summary on stdout and writes its CSV/JSON
// files plus manifest.json into the output directory. Exit status: 0 on
// success, 1 on domain/convergence errors, 2 on usage errors.

#include <atomic>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "config.hpp"
#include "output.hpp"
#include "phantom/bvp.hpp"
#include "phantom/canard.hpp"
#include "phantom/continuation.hpp"
#include "phantom/error.hpp"
#include "phantom/folded.hpp"
#include "phantom/integrator.hpp"
#include "phantom/mmo.hpp"
#include "phantom/reductions.hpp"

namespace {

using namespace phantom;
using namespace phantom::cli;
using nlohmann::ordered_json;

struct Common {
  std::string config;
  std::vector<std::string> params;
  std::optional<double> eps;
  std::optional<double> delta;
  std::optional<double> tol;
  std::string out;
  bool no_files = false;
};

struct Context {
  RunConfig cfg;
  ParameterSet p = ParameterSet::reference();
  OutputSink sink{"", false};
};

Context make_context(const Common& c) {
  Context ctx;
  if (!c.config.empty()) ctx.cfg = RunConfig::load(c.config);
  apply_overrides(ctx.cfg, c.params);
  if (c.eps) ctx.cfg.params.eps = *c.eps;
  if (c.delta) ctx.cfg.params.delta = *c.delta;
  if (c.tol) ctx.cfg.tol = {*c.tol, *c.tol};
  if (!c.out.empty()) ctx.cfg.output_dir = c.out;
  ctx.cfg.validate();
  ctx.p = ctx.cfg.parameter_set();
  ctx.sink = OutputSink(resolve_output_dir(ctx.cfg), !c.no_files);
  return ctx;
}

void add_common(CLI::App* sub, Common& c, const std::string& override_flag) {
  sub->add_option("--config", c.config, "JSON run configuration")->check(CLI::ExistingFile);
  sub->add_option(override_flag, c.params, "parameter override key=value (repeatable)");
  sub->add_option("--eps", c.eps, "singular parameter eps");
  sub->add_option("--delta", c.delta, "singular parameter delta");
  sub->add_option("--tol", c.tol, "absolute and relative integration tolerance");
  sub->add_option("--out", c.out, "output directory (PHANTOM_OUTPUT_DIR overrides)");
  sub->add_flag("--no-files", c.no_files, "print the JSON summary only");
}

Vec parse_vector(const std::string& text) {
  std::vector<double> vals;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    char* end = nullptr;
    const double v = std::strtod(item.c_str(), &end);
    if (item.empty() || *end != '\0') throw InvalidParameter("not a number list: '" + text + "'");
    vals.push_back(v);
  }
  return Eigen::Map<Vec>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

std::vector<double> to_std(const Vec& v) { return {v.data(), v.data() + v.size()}; }

ordered_json signature_json(const MmoSignature& s) {
  ordered_json j;
  j["p"] = s.p;
  j["s"] = s.s;
  j["full_cycle"] = s.full_cycle;
  j["ambiguous"] = s.ambiguous;
  ordered_json iv = ordered_json::array();
  for (const auto& i : s.intervals) {
    iv.push_back({{"kind", to_string(i.kind)},
                  {"t_start", i.t_start},
                  {"t_end", i.t_end},
                  {"oscillations", i.oscillations},
                  {"y_min", i.y_min},
                  {"y_max", i.y_max},
                  {"mean_amplitude", i.mean_amplitude}});
  }
  j["intervals"] = iv;
  auto osc = [](const std::vector<Oscillation>& v) {
    ordered_json a = ordered_json::array();
    for (const auto& o : v) {
      a.push_back({{"t_peak", o.t_peak},
                   {"x_peak", o.x_peak},
                   {"prominence", o.prominence},
                   {"y_amplitude", o.y_amplitude}});
    }
    return a;
  };
  j["pulses"] = osc(s.pulses);
  j["small"] = osc(s.small);
  j["unclassified"] = osc(s.unclassified);
  j["warnings"] = s.warnings;
  return j;
}

ordered_json hypotheses_json(const HypothesisReport& h) {
  auto one = [](const HypothesisCheck& c) { return ordered_json{{"holds", c.holds}, {"margin", c.margin}}; };
  ordered_json j;
  j["H1"] = one(h.h1);
  j["H2"] = one(h.h2);
  j["H3"] = one(h.h3);
  j["H4"] = one(h.h4);
  j["H1_gap"] = h.h1_gap;
  j["H1_warning"] = h.h1_warning ? ordered_json(*h.h1_warning) : ordered_json(nullptr);
  j["all"] = h.all();
  return j;
}

ordered_json h5_json(const H5Report& r) {
  return {{"holds", r.holds},  {"C3", r.C3},         {"C4", r.C4},
          {"lhs", r.lhs},      {"rhs", r.rhs},       {"margin", r.margin},
          {"delta_star", r.delta_star}};
}

ordered_json folded_json(const FoldedSingularity& f) {
  auto cx = [](std::complex<double> z) { return ordered_json{z.real(), z.imag()}; };
  auto opt = [](const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); };
  return {{"kind", to_string(f.kind)},
          {"X_eval", f.X_eval},
          {"xi_plus", cx(f.xi_plus)},
          {"xi_minus", cx(f.xi_minus)},
          {"phi", f.phi},
          {"psi", f.psi},
          {"A", f.A},
          {"complex_window", f.complex_window},
          {"X1_plus", opt(f.X1_plus)},
          {"X1_minus", opt(f.X1_minus)},
          {"delta", f.delta}};
}

ordered_json geometry_json(const FoldGeometry& g) {
  return {{"x_f", g.x_f},         {"y_f", g.y_f},       {"gamma", g.gamma},
          {"X_f", g.X_f},         {"X_SN", g.X_SN},     {"alpha", g.alpha},
          {"phi", g.phi},         {"psi", g.psi},       {"x_cminus", g.x_cminus},
          {"x_cplus", g.x_cplus}, {"X_min", g.X_min},   {"X_max", g.X_max},
          {"x_c_squared", g.x_c_squared}};
}

void emit(Context& ctx, const std::string& command, const std::vector<std::string>& args,
          const ordered_json& summary) {
  ctx.sink.write_json(command + ".json", summary);
  ctx.sink.write_manifest(command, args, ctx.cfg);
  std::cout << summary.dump(2) << '\n';
}

// simulate

struct SimulateOpts {
  std::string field = "Full4D";
  double t_end = 60.0;
  std::string state;
  std::size_t samples = 0;
  std::optional<double> frozen_Y;
};

void run_simulate(Context& ctx, const SimulateOpts& o, const std::vector<std::string>& args) {
  const FieldTag tag = field_tag_from_string(o.field);
  if (tag == FieldTag::Custom) throw InvalidParameter("simulate: the Custom tag needs user code");
  FieldExtras extras;
  extras.frozen_Y = o.frozen_Y;
  const VectorField field = build_field(tag, ctx.p, extras);
  Vec u0 = o.state.empty() ? Vec::Zero(field.dimension()) : parse_vector(o.state);
  if (u0.size() != field.dimension()) {
    throw InvalidParameter("simulate: state needs " + std::to_string(field.dimension()) + " components");
  }
  if (!(o.t_end > 0.0)) throw InvalidParameter("simulate: --t-end must be > 0");
  IntegrateOptions io;
  if (tag == FieldTag::Full4D) {
    io.sections = {section_in(ctx.p, ctx.cfg.eta), section_f(ctx.p), section_surge(ctx.p, ctx.cfg.eta),
                   section_endsurge(ctx.p, ctx.cfg.eta)};
  }
  const Trajectory tr = integrate(field, u0, 0.0, o.t_end, ctx.cfg.tol, io);

  std::vector<std::string> header{"t"};
  for (const auto& v : field.variables()) header.push_back(v);
  std::vector<std::vector<double>> rows;
  auto push = [&](double t, const Vec& u) {
    std::vector<double> r{t};
    for (int i = 0; i < u.size(); ++i) r.push_back(u[i]);
    rows.push_back(std::move(r));
  };
  if (o.samples >= 2) {
    for (const auto& [t, u] : tr.resample(o.samples)) push(t, u);
  } else {
    for (std::size_t i = 0; i < tr.size(); ++i) push(tr.times()[i], tr.states()[i]);
  }
  ctx.sink.write_csv("trajectory.csv", header, rows);

  ordered_json events = ordered_json::array();
  for (const auto& e : tr.events()) {
    events.push_back({{"section", e.id}, {"t", e.t}, {"state", to_std(e.state)}, {"direction", e.direction}});
  }
  ctx.sink.write_json("events.json", events);
  const auto& st = tr.stats();
  ordered_json j{{"field", to_string(tag)},
                 {"variables", field.variables()},
                 {"t_end", tr.t_end()},
                 {"final_state", to_std(tr.back())},
                 {"accepted", st.accepted},
                 {"rejected", st.rejected},
                 {"rhs_evals", st.rhs_evals},
                 {"events", events.size()}};
  emit(ctx, "simulate", args, j);
}

// reduce

struct ReduceOpts {
  std::string tag = "Full4D";
  std::vector<std::string> points;
  std::string points_file;
  std::optional<double> frozen_Y;
};

void run_reduce(Context& ctx, const ReduceOpts& o, const std::vector<std::string>& args) {
  const FieldTag tag = field_tag_from_string(o.tag);
  FieldExtras extras;
  extras.frozen_Y = o.frozen_Y;
  const VectorField field = build_field(tag, ctx.p, extras);
  std::vector<Vec> pts;
  for (const auto& s : o.points) pts.push_back(parse_vector(s));
  if (!o.points_file.empty()) {
    std::ifstream in(o.points_file);
    if (!in) throw InvalidParameter("reduce: cannot read '" + o.points_file + "'");
    const auto j = nlohmann::json::parse(in);
    if (!j.is_array()) throw InvalidParameter("reduce: points file must hold an array of arrays");
    for (const auto& row : j) {
      const auto v = row.get<std::vector<double>>();
      pts.push_back(Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())));
    }
  }
  ordered_json evals = ordered_json::array();
  for (const Vec& u : pts) {
    if (u.size() != field.dimension()) {
      throw InvalidParameter("reduce: point needs " + std::to_string(field.dimension()) + " components");
    }
    ordered_json e{{"u", to_std(u)}};
    try {
      e["du"] = to_std(field(u));
    } catch (const DomainError& err) {
      e["du"] = nullptr;
      e["error"] = err.what();
    }
    evals.push_back(e);
  }
  ordered_json coeffs;
  for (const auto& [k, v] : field.coefficients()) coeffs[k] = v;
  ordered_json loci = ordered_json::array();
  for (const auto& l : field.singular_loci()) loci.push_back(l.description);
  ordered_json j{{"tag", to_string(tag)},
                 {"dimension", field.dimension()},
                 {"variables", field.variables()},
                 {"coefficients", coeffs},
                 {"singular_loci", loci},
                 {"evaluations", evals}};
  emit(ctx, "reduce", args, j);
}

// folded-singularity family

struct SamplesOpts {
  std::vector<double> X0;
  int samples = 10;
  double upper = -0.05;
  bool chart_k2 = false;
  bool simulate = false;
};

std::vector<double> sample_X0(const SamplesOpts& o, const WiwoCoefficients& k) {
  if (!o.X0.empty()) return o.X0;
  if (o.samples < 1) throw InvalidParameter("--samples must be >= 1");
  const double lo = -k.window();
  std::vector<double> xs;
  for (int i = 0; i < o.samples; ++i) xs.push_back(lo + (o.upper - lo) * (i + 1.0) / (o.samples + 1.0));
  return xs;
}

WiwoCoefficients coefficients(const Context& ctx, const SamplesOpts& o) {
  return o.chart_k2 ? WiwoCoefficients::chart_k2(ctx.p, ctx.p.eps()) : WiwoCoefficients::from(ctx.p);
}

void run_wiwo(Context& ctx, const SamplesOpts& o, const std::vector<std::string>& args) {
  const WiwoCoefficients k = coefficients(ctx, o);
  std::vector<std::vector<double>> rows;
  ordered_json list = ordered_json::array();
  for (double X0 : sample_X0(o, k)) {
    const double Xs = wiwo(X0, k);
    rows.push_back({X0, Xs});
    list.push_back({{"X0", X0}, {"Xstar", Xs}});
  }
  ctx.sink.write_csv("wiwo.csv", {"X0", "Xstar"}, rows);
  ordered_json j{{"phi", k.phi}, {"psi", k.psi}, {"window", k.window()}, {"values", list}};
  emit(ctx, "wiwo", args, j);
}

void run_sectors(Context& ctx, const SamplesOpts& o, const std::vector<std::string>& args) {
  SamplesOpts so = o;
  if (so.simulate) so.chart_k2 = true;
  const WiwoCoefficients k = coefficients(ctx, so);
  const double delta = ctx.p.delta();
  std::vector<std::string> header{"X0", "Xstar", "R", "k"};
  if (so.simulate) header.insert(header.end(), {"k_simulated", "turns", "X_exit"});
  std::vector<std::vector<double>> rows;
  ordered_json list = ordered_json::array();
  int worst = 0;
  for (double X0 : sample_X0(so, k)) {
    const WiwoResult r = rotation_sector(X0, k, delta);
    ordered_json e{{"X0", X0}, {"Xstar", r.Xstar}, {"R", r.R}, {"k", r.k},
                   {"R_printed", r.R_printed ? ordered_json(*r.R_printed) : ordered_json(nullptr)}};
    std::vector<double> row{X0, r.Xstar, r.R, static_cast<double>(r.k)};
    if (so.simulate) {
      const SectorCount c = count_sector_rotations(ctx.p, X0, ctx.cfg.tol);
      e["k_simulated"] = c.k;
      e["turns"] = c.turns;
      e["X_exit"] = c.X_exit;
      row.insert(row.end(), {static_cast<double>(c.k), c.turns, c.X_exit});
      worst = std::max(worst, std::abs(c.k - r.k));
    }
    rows.push_back(row);
    list.push_back(e);
  }
  ctx.sink.write_csv("sectors.csv", header, rows);
  ordered_json j{{"delta", delta}, {"coefficients", so.chart_k2 ? "chart_k2" : "normal_form"},
                 {"phi", k.phi},   {"psi", k.psi},
                 {"sectors", list}};
  if (so.simulate) j["max_abs_k_difference"] = worst;
  emit(ctx, "sectors", args, j);
}

ordered_json dual_quadrature(const std::function<double(QuadratureRule)>& f) {
  const double gk = f(QuadratureRule::GaussKronrod);
  const double ts = f(QuadratureRule::TanhSinh);
  return {{"value", gk}, {"gauss_kronrod", gk}, {"tanh_sinh", ts},
          {"relative_difference", std::abs(gk - ts) / std::abs(gk)}};
}

void run_c3(Context& ctx, const std::vector<std::string>& args) {
  emit(ctx, "c3", args, dual_quadrature([&](QuadratureRule r) { return contraction_c3(ctx.p, r); }));
}

void run_c4(Context& ctx, const std::vector<std::string>& args) {
  emit(ctx, "c4", args, dual_quadrature([&](QuadratureRule r) { return expansion_c4(ctx.p, r); }));
}

void run_h5(Context& ctx, const std::vector<std::string>& args) {
  ordered_json j = h5_json(check_h5(ctx.p));
  j["eps"] = ctx.p.eps();
  j["delta"] = ctx.p.delta();
  emit(ctx, "h5", args, j);
}

void run_folded_classify(Context& ctx, const std::vector<std::string>& args) {
  emit(ctx, "folded_classify", args, folded_json(classify_folded(ctx.p, ctx.p.delta())));
}

void run_geometry(Context& ctx, const std::vector<std::string>& args) {
  ordered_json j = geometry_json(geometry(ctx.p));
  const FoldedSingularity f = classify_folded(ctx.p, ctx.p.delta());
  j["X_eval"] = f.X_eval;
  j["kind"] = to_string(f.kind);
  j["folded"] = folded_json(f);
  emit(ctx, "geometry", args, j);
}

void run_check(Context& ctx, const std::vector<std::string>& args) {
  ordered_json j = hypotheses_json(check_hypotheses(ctx.p));
  try {
    j["H5"] = h5_json(check_h5(ctx.p));
  } catch (const Error& e) {
    j["H5"] = {{"error", e.what()}};
  }
  emit(ctx, "check", args, j);
}

// classify

struct ClassifyOpts {
  std::string input;
  double transient = 0.0;
};

void run_classify(Context& ctx, const ClassifyOpts& o, const std::vector<std::string>& args) {
  std::ifstream in(o.input);
  if (!in) throw InvalidParameter("classify: cannot read '" + o.input + "'");
  std::string line;
  std::getline(in, line);  // header
  std::vector<double> t;
  std::vector<Vec> u;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const Vec row = parse_vector(line);
    if (row.size() != 5) {
      throw InvalidParameter("classify: line " + std::to_string(lineno) + " needs t,x,y,X,Y");
    }
    if (row[0] < o.transient) continue;
    t.push_back(row[0]);
    u.push_back(row.tail(4));
  }
  const MmoSignature s = classify(t, u, geometry(ctx.p), ctx.cfg.thresholds);
  emit(ctx, "classify", args, signature_json(s));
}

// periodic

struct PeriodicCmd {
  std::string seed;
  bool collocation = true;
  int intervals = 300;
  std::size_t samples = 2000;
};

void run_periodic(Context& ctx, const PeriodicCmd& o, const std::vector<std::string>& args) {
  const Vec seed = o.seed.empty() ? Vec::Zero(4) : parse_vector(o.seed);
  if (seed.size() != 4) throw InvalidParameter("periodic: seed needs 4 components");
  PeriodicOptions po;
  po.ret.tol = ctx.cfg.tol;
  po.ret.eta = ctx.cfg.eta;
  po.thresholds = ctx.cfg.thresholds;
  const PeriodicOrbit orb = find_periodic(ctx.p, seed, po);
  ordered_json j{{"period", orb.period},
                 {"anchor", to_std(orb.anchor)},
                 {"contraction", orb.contraction},
                 {"iterations", orb.history.size()},
                 {"history", orb.history},
                 {"signature", signature_json(orb.signature)}};
  std::vector<std::vector<double>> rows;
  if (o.collocation) {
    CollocationOptions co;
    co.intervals = o.intervals;
    const OrbitSegment seg = solve_periodic(ctx.p, orb.orbit, co);
    j["collocation"] = {{"period", seg.T},
                        {"intervals", seg.path.intervals()},
                        {"collocation_residual", seg.collocation_residual},
                        {"boundary_residual", seg.boundary_residual},
                        {"newton_iterations", seg.newton_iterations}};
    for (const auto& [t, u] : seg.sample(o.samples)) rows.push_back({t, u[0], u[1], u[2], u[3]});
  } else {
    for (const auto& [t, u] : orb.orbit.resample(o.samples)) {
      rows.push_back({t - orb.orbit.t_begin(), u[0], u[1], u[2], u[3]});
    }
  }
  ctx.sink.write_csv("periodic_orbit.csv", {"t", "x", "y", "X", "Y"}, rows);
  emit(ctx, "periodic", args, j);
}

// manifolds and canards

struct ManifoldCmd {
  std::string side = "both";
  std::string field = "ChartK2";
  double from = 0.35;
  double to = 0.005;
  double step = 0.01;
  int intervals = 200;
  bool segments = false;
  double window_lo = -1e300;
  double window_hi = 1e300;
};

SweepOptions sweep_options(const Context& ctx, const ManifoldCmd& o) {
  SweepOptions so;
  so.x0 = ctx.cfg.rho;
  so.step = o.step;
  so.colloc.intervals = o.intervals;
  return so;
}

FieldTag manifold_tag(const ManifoldCmd& o) {
  const FieldTag tag = field_tag_from_string(o.field);
  if (tag != FieldTag::ChartK2 && tag != FieldTag::NormalFormLocal) {
    throw InvalidParameter("--field must be ChartK2 or NormalFormLocal");
  }
  return tag;
}

ManifoldFamily sweep_side(const Context& ctx, const ManifoldCmd& o, ManifoldSide side) {
  if (!(o.from > 0.0) || !(o.to > 0.0)) {
    throw InvalidParameter("--from and --to are distances |X| from the section and must be > 0");
  }
  const double s = side == ManifoldSide::Attracting ? -1.0 : 1.0;
  return sweep_manifold(ctx.p, manifold_tag(o), side, s * o.from, s * o.to, sweep_options(ctx, o));
}

ordered_json family_json(Context& ctx, const ManifoldFamily& fam, bool segments) {
  const std::string side(to_string(fam.side));
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < fam.members.size(); ++i) {
    const ManifoldMember& m = fam.members[i];
    rows.push_back({m.start, m.end[0], m.end[1], m.log_radius, m.start_angle, m.end_angle,
                    m.segment.T, m.segment.collocation_residual});
    if (segments) {
      std::vector<std::vector<double>> seg;
      for (const auto& [t, u] : m.segment.sample(400)) seg.push_back({t, u[0], u[1], u[2]});
      ctx.sink.write_csv("manifold_" + side + "_" + std::to_string(i) + ".csv", {"t", "x", "y", "X"}, seg);
    }
  }
  const std::string trace = "manifold_" + side + ".csv";
  ctx.sink.write_csv(trace,
                     {"start", "x_end", "y_end", "log_radius", "start_angle", "end_angle", "T",
                      "collocation_residual"},
                     rows);
  return {{"side", side},
          {"field", to_string(fam.tag)},
          {"x0", fam.x0},
          {"blow_down", fam.blow_down},
          {"center", to_std(fam.center)},
          {"members", fam.members.size()},
          {"stalled", fam.stalled},
          {"message", fam.message},
          {"trace", trace}};
}

void run_manifolds(Context& ctx, const ManifoldCmd& o, const std::vector<std::string>& args) {
  if (o.side != "attracting" && o.side != "repelling" && o.side != "both") {
    throw InvalidParameter("--side must be attracting, repelling or both");
  }
  ordered_json fams = ordered_json::array();
  if (o.side != "repelling") fams.push_back(family_json(ctx, sweep_side(ctx, o, ManifoldSide::Attracting), o.segments));
  if (o.side != "attracting") fams.push_back(family_json(ctx, sweep_side(ctx, o, ManifoldSide::Repelling), o.segments));
  emit(ctx, "manifolds", args, {{"eps", ctx.p.eps()}, {"delta", ctx.p.delta()}, {"families", fams}});
}

void run_canards(Context& ctx, const ManifoldCmd& o, const std::vector<std::string>& args) {
  const ManifoldFamily a = sweep_side(ctx, o, ManifoldSide::Attracting);
  const ManifoldFamily r = sweep_side(ctx, o, ManifoldSide::Repelling);
  const auto canards = detect_canards(a, r);
  std::vector<std::vector<double>> rows;
  ordered_json list = ordered_json::array();
  bool consecutive = true;
  for (std::size_t i = 0; i < canards.size(); ++i) {
    const auto& c = canards[i];
    if (i > 0 && std::abs(c.rotation - canards[i - 1].rotation) != 1) consecutive = false;
    rows.push_back({static_cast<double>(c.rotation), c.X, c.start_attracting, c.start_repelling,
                    c.location[0], c.location[1], c.winding, c.gap_prev, c.gap_next,
                    c.refined ? 1.0 : 0.0});
    list.push_back({{"rotation", c.rotation},
                    {"X", c.X},
                    {"start_attracting", c.start_attracting},
                    {"start_repelling", c.start_repelling},
                    {"location", to_std(c.location)},
                    {"winding", c.winding},
                    {"gap_prev", c.gap_prev},
                    {"gap_next", c.gap_next},
                    {"refined", c.refined}});
  }
  ctx.sink.write_csv("canards.csv",
                     {"rotation", "X", "start_attracting", "start_repelling", "x", "y", "winding",
                      "gap_prev", "gap_next", "refined"},
                     rows);
  const double med = median_spacing(canards, o.window_lo, o.window_hi);
  ordered_json j{{"eps", ctx.p.eps()},
                 {"delta", ctx.p.delta()},
                 {"attracting_members", a.members.size()},
                 {"repelling_members", r.members.size()},
                 {"count", canards.size()},
                 {"consecutive_rotations", consecutive},
                 {"median_spacing", std::isnan(med) ? ordered_json(nullptr) : ordered_json(med)},
                 {"canards", list}};
  emit(ctx, "canards", args, j);
}

// continuation

struct ContinueCmd {
  std::string param = "a2";
  double from = 0.75;
  double to = 0.85;
  double ds = 0.05;
  double ds_max = 0.5;
  int max_points = 5000;
  int intervals = 200;
  std::string measure = "max_y";
  bool orbits = false;
};

void run_continue(Context& ctx, const ContinueCmd& o, const std::vector<std::string>& args) {
  ContinuationOptions co;
  co.ds = o.ds;
  co.ds_max = o.ds_max;
  co.max_points = o.max_points;
  co.colloc.intervals = o.intervals;
  co.measure = branch_measure_from_string(o.measure);
  co.thresholds = ctx.cfg.thresholds;
  co.periodic.ret.tol = ctx.cfg.tol;
  co.periodic.ret.eta = ctx.cfg.eta;
  co.periodic.thresholds = ctx.cfg.thresholds;
  const Branch b = continue_branch(ctx.p, o.param, o.from, o.to, co, o.orbits);

  std::vector<std::vector<std::string>> rows;
  double worst = 0.0;
  for (const auto& pt : b.points) {
    worst = std::max(worst, pt.collocation_residual);
    rows.push_back({format_double(pt.param), format_double(pt.max_y), format_double(pt.mean_x),
                    format_double(pt.l2), format_double(pt.period), std::to_string(pt.signature.p),
                    std::to_string(pt.signature.s), format_double(pt.ds), pt.explosion ? "1" : "0",
                    pt.restart ? "1" : "0", format_double(pt.collocation_residual),
                    format_double(pt.boundary_residual), format_double(pt.defect), pt.transition});
  }
  ctx.sink.write_csv_text("branch.csv",
                          {o.param, "max_y", "mean_x", "l2", "period", "p", "s", "ds", "explosion",
                           "restart", "collocation_residual", "boundary_residual", "defect", "transition"},
                          rows);
  if (o.orbits) {
    for (std::size_t i = 0; i < b.orbits.size(); ++i) {
      std::vector<std::vector<double>> seg;
      for (const auto& [t, u] : b.orbits[i].sample(1000)) seg.push_back({t, u[0], u[1], u[2], u[3]});
      ctx.sink.write_csv("orbit_" + std::to_string(i) + ".csv", {"t", "x", "y", "X", "Y"}, seg);
    }
  }
  ordered_json ex = ordered_json::array();
  for (const auto& e : b.explosions) {
    ex.push_back({{"first", e.first},
                  {"last", e.last},
                  {"param", e.param},
                  {"before", {e.p_before, e.s_before}},
                  {"after", {e.p_after, e.s_after}},
                  {"canonical", e.canonical}});
  }
  ordered_json tr = ordered_json::array();
  for (std::size_t i = 0; i < b.points.size(); ++i) {
    if (!b.points[i].transition.empty()) {
      tr.push_back({{"index", i}, {"param", b.points[i].param}, {"transition", b.points[i].transition}});
    }
  }
  ordered_json j{{"parameter", b.parameter},
                 {"from", o.from},
                 {"to", o.to},
                 {"measure", o.measure},
                 {"points", b.points.size()},
                 {"max_collocation_residual", worst},
                 {"explosions", ex},
                 {"transitions", tr},
                 {"branch", "branch.csv"}};
  emit(ctx, "continue", args, j);
}

// sweep

struct CellResult {
  std::vector<std::string> cols;
};

CellResult run_cell(const RunConfig& cfg, const std::vector<std::pair<std::string, double>>& at) {
  CellResult out;
  for (const auto& [k, v] : at) out.cols.push_back(format_double(v));
  try {
    ParameterSet p = cfg.parameter_set();
    for (const auto& [k, v] : at) p = p.with(k, v);
    const HypothesisReport h = check_hypotheses(p);
    const FoldedSingularity f = classify_folded(p, p.delta());
    std::string h5 = "error";
    try {
      h5 = check_h5(p).holds ? "1" : "0";
    } catch (const Error&) {
    }
    const VectorField field = build_field(FieldTag::Full4D, p);
    const Trajectory tr = integrate(field, Vec::Zero(4), 0.0, cfg.sweep.t_end, cfg.tol);
    std::vector<double> t;
    std::vector<Vec> u;
    for (const auto& [ti, ui] : tr.resample(20000)) {
      if (ti < cfg.sweep.transient) continue;
      t.push_back(ti);
      u.push_back(ui);
    }
    const MmoSignature s = classify(t, u, geometry(p), cfg.thresholds);
    std::string warn;
    for (const auto& w : s.warnings) warn += (warn.empty() ? "" : "; ") + w;
    if (h.h1_warning) warn += (warn.empty() ? "" : "; ") + *h.h1_warning;
    out.cols.insert(out.cols.end(),
                    {std::to_string(s.p), std::to_string(s.s), h.h1.holds ? "1" : "0",
                     h.h2.holds ? "1" : "0", h.h3.holds ? "1" : "0", h.h4.holds ? "1" : "0", h5,
                     std::string(to_string(f.kind)), format_double(f.X_eval), "\"" + warn + "\"", ""});
  } catch (const Error& e) {
    for (int i = 0; i < 10; ++i) out.cols.push_back("");
    out.cols.push_back("\"" + std::string(e.what()) + "\"");
  }
  return out;
}

void run_sweep(Context& ctx, const std::vector<std::string>& args) {
  const auto& axes = ctx.cfg.sweep.axes;
  if (axes.empty()) throw InvalidParameter("sweep: config has no sweep.axes");
  std::vector<std::vector<std::pair<std::string, double>>> cells{{}};
  for (const auto& ax : axes) {
    std::vector<std::vector<std::pair<std::string, double>>> next;
    for (const auto& c : cells) {
      for (double v : ax.values()) {
        auto d = c;
        d.emplace_back(ax.param, v);
        next.push_back(std::move(d));
      }
    }
    cells = std::move(next);
  }
  std::vector<CellResult> results(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) results[i] = run_cell(ctx.cfg, cells[i]);
  };
  std::vector<std::thread> pool;
  const int n = std::min<int>(ctx.cfg.sweep.workers, static_cast<int>(cells.size()));
  for (int w = 0; w < n; ++w) pool.emplace_back(worker);
  for (auto& th : pool) th.join();

  std::vector<std::string> header;
  for (const auto& ax : axes) header.push_back(ax.param);
  header.insert(header.end(), {"p", "s", "H1", "H2", "H3", "H4", "H5", "kind", "X_eval", "warnings", "error"});
  std::vector<std::vector<std::string>> rows;
  std::size_t failed = 0;
  for (const auto& r : results) {
    rows.push_back(r.cols);
    if (r.cols.back() != "") ++failed;
  }
  ctx.sink.write_csv_text("sweep.csv", header, rows);
  emit(ctx, "sweep", args, {{"cells", cells.size()}, {"failed", failed}, {"workers", n}, {"table", "sweep.csv"}});
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"phantom: three-time-scale phantom bursting toolkit"};
  app.require_subcommand(1);
  app.fallthrough(false);

  std::vector<std::string> args(argv + 1, argv + argc);
  std::function<void()> action;
  Common common;

  // `continue` uses --param for the continuation parameter; its overrides
  // go through --set.
  auto sub = [&](CLI::App* parent, const std::string& name, const std::string& help) {
    CLI::App* s = parent->add_subcommand(name, help);
    add_common(s, common, name == "continue" ? "--set" : "--param");
    return s;
  };
  auto bind = [&](CLI::App* s, std::function<void(Context&)> fn) {
    s->callback([&, fn] {
      action = [&, fn] {
        Context ctx = make_context(common);
        fn(ctx);
      };
    });
  };

  SimulateOpts sim;
  auto* s_sim = sub(&app, "simulate", "integrate a field and write the trajectory");
  s_sim->add_option("--field", sim.field, "field tag");
  s_sim->add_option("--t-end", sim.t_end, "final time");
  s_sim->add_option("--state", sim.state, "initial state, comma separated (default zero)");
  s_sim->add_option("--samples", sim.samples, "resample to n points (default: accepted steps)");
  s_sim->add_option("--frozen-Y", sim.frozen_Y, "frozen Y of the boundary-layer field");
  bind(s_sim, [&](Context& c) { run_simulate(c, sim, args); });

  ReduceOpts red;
  auto* s_red = sub(&app, "reduce", "coefficients of a reduced field and evaluations");
  s_red->add_option("--tag", red.tag, "field tag");
  s_red->add_option("--point", red.points, "evaluation point, comma separated (repeatable)");
  s_red->add_option("--points", red.points_file, "JSON file with an array of points");
  s_red->add_option("--frozen-Y", red.frozen_Y, "frozen Y of the boundary-layer field");
  bind(s_red, [&](Context& c) { run_reduce(c, red, args); });

  bind(sub(&app, "geometry", "fold geometry and folded-singularity type"),
       [&](Context& c) { run_geometry(c, args); });
  bind(sub(&app, "check", "hypotheses H1-H5 with margins"), [&](Context& c) { run_check(c, args); });

  SamplesOpts samp;
  auto add_samples = [&](CLI::App* s, bool sectors) {
    s->add_option("--X0", samp.X0, "entry values (repeatable)");
    s->add_option("--samples", samp.samples, "number of entry values across the window");
    s->add_option("--upper", samp.upper, "upper end of the sampled window");
    s->add_flag("--chart-k2", samp.chart_k2, "use the drift of the transition chart");
    if (sectors) s->add_flag("--simulate", samp.simulate, "count rotations along ChartK2 integrations");
  };
  auto add_folded_ops = [&](CLI::App* parent) {
    auto* w = sub(parent, "wiwo", "way-in/way-out function");
    add_samples(w, false);
    bind(w, [&](Context& c) { run_wiwo(c, samp, args); });
    auto* se = sub(parent, "sectors", "rotation sectors");
    add_samples(se, true);
    bind(se, [&](Context& c) { run_sectors(c, samp, args); });
    bind(sub(parent, "c3", "surge contraction constant"), [&](Context& c) { run_c3(c, args); });
    bind(sub(parent, "c4", "canard expansion constant"), [&](Context& c) { run_c4(c, args); });
    bind(sub(parent, "h5", "global contraction condition"), [&](Context& c) { run_h5(c, args); });
  };
  auto* s_fold = app.add_subcommand("folded", "folded-singularity operations");
  s_fold->require_subcommand(1);
  bind(sub(s_fold, "classify", "folded-singularity classification"),
       [&](Context& c) { run_folded_classify(c, args); });
  add_folded_ops(s_fold);
  add_folded_ops(&app);

  ClassifyOpts cls;
  auto* s_cls = sub(&app, "classify", "(p, s) signature of a trajectory CSV");
  s_cls->add_option("--input", cls.input, "CSV with columns t,x,y,X,Y")->required()->check(CLI::ExistingFile);
  s_cls->add_option("--transient", cls.transient, "drop samples before this time");
  bind(s_cls, [&](Context& c) { run_classify(c, cls, args); });

  PeriodicCmd per;
  auto* s_per = sub(&app, "periodic", "periodic MMO orbit through the end-of-surge return map");
  s_per->add_option("--seed", per.seed, "seed state x,y,X,Y (default zero)");
  s_per->add_option("--intervals", per.intervals, "collocation intervals");
  s_per->add_option("--samples", per.samples, "samples of the written period");
  s_per->add_flag("!--no-collocation", per.collocation, "skip the collocation refinement");
  bind(s_per, [&](Context& c) { run_periodic(c, per, args); });

  ManifoldCmd man;
  auto add_manifold = [&](CLI::App* s, bool canards) {
    s->add_option("--field", man.field, "ChartK2 or NormalFormLocal");
    s->add_option("--from", man.from, "farthest |X| of the start curve (field units)");
    s->add_option("--to", man.to, "nearest |X| of the start curve (field units)");
    s->add_option("--step", man.step, "initial sweep step");
    s->add_option("--intervals", man.intervals, "collocation intervals per segment");
    if (canards) {
      s->add_option("--window-lo", man.window_lo, "spacing window, lower X (normal-form units)");
      s->add_option("--window-hi", man.window_hi, "spacing window, upper X (normal-form units)");
    } else {
      s->add_option("--side", man.side, "attracting, repelling or both");
      s->add_flag("--segments", man.segments, "write every segment as CSV");
    }
  };
  auto* s_man = sub(&app, "manifolds", "sweep slow manifolds to the section through the fold");
  add_manifold(s_man, false);
  bind(s_man, [&](Context& c) { run_manifolds(c, man, args); });
  auto* s_can = sub(&app, "canards", "secondary canards as manifold intersections");
  add_manifold(s_can, true);
  bind(s_can, [&](Context& c) { run_canards(c, man, args); });

  ContinueCmd con;
  auto* s_con = sub(&app, "continue", "continue the periodic orbit in one parameter");
  s_con->add_option("--param", con.param, "continuation parameter");
  s_con->add_option("--from", con.from, "start value");
  s_con->add_option("--to", con.to, "end value");
  s_con->add_option("--ds", con.ds, "initial pseudo-arclength step");
  s_con->add_option("--ds-max", con.ds_max, "largest step");
  s_con->add_option("--max-points", con.max_points, "point budget");
  s_con->add_option("--intervals", con.intervals, "collocation intervals");
  s_con->add_option("--measure", con.measure, "max_y, mean_x or l2");
  s_con->add_flag("--orbits", con.orbits, "write every orbit as CSV");
  bind(s_con, [&](Context& c) { run_continue(c, con, args); });

  bind(sub(&app, "sweep", "parameter grid from the config"), [&](Context& c) { run_sweep(c, args); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  try {
    if (action) action();
    return 0;
  } catch (const InvalidParameter& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
