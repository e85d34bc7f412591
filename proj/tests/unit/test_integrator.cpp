#include "doctest.h"

#include <cmath>
#include <numbers>

#include "phantom/error.hpp"
#include "phantom/integrator.hpp"

using namespace phantom;

namespace {

VectorField decay() {
  return make_custom_field(1, [](const Vec& u, Vec& du) { du[0] = -u[0]; });
}

VectorField rotation() {
  return make_custom_field(
      2, [](const Vec& u, Vec& du) { du[0] = u[1]; du[1] = -u[0]; },
      [](const Vec&, Mat& J) { J << 0, 1, -1, 0; });
}

Vec vec2(double a, double b) {
  Vec u(2);
  u << a, b;
  return u;
}

}  // namespace

TEST_CASE("linear test equation") {
  Vec u0(1);
  u0 << 1.0;
  Tolerances tol;
  tol.abs = tol.rel = 1e-10;
  const Trajectory tr = integrate(decay(), u0, 0.0, 1.0, tol);
  CHECK(tr.t_end() == 1.0);
  CHECK(std::abs(tr.back()[0] - std::exp(-1.0)) < 1e-9);
  for (double t : {0.13, 0.5, 0.77}) CHECK(std::abs(tr.at(t)[0] - std::exp(-t)) < 1e-8);
}

TEST_CASE("planar rotation closes after 2 pi") {
  for (double tl : {1e-6, 1e-8, 1e-10}) {
    Tolerances tol;
    tol.abs = tol.rel = tl;
    const Trajectory tr = integrate(rotation(), vec2(1.0, 0.0), 0.0, 2.0 * std::numbers::pi, tol);
    CHECK((tr.back() - vec2(1.0, 0.0)).norm() < 10.0 * tl);
  }
}

TEST_CASE("trajectory invariants") {
  const Trajectory tr = integrate(rotation(), vec2(1.0, 0.0), 0.0, 10.0);
  for (std::size_t i = 1; i < tr.size(); ++i) CHECK(tr.times()[i] > tr.times()[i - 1]);
  for (std::size_t i = 0; i < tr.size(); ++i) {
    CHECK((tr.at(tr.times()[i]) - tr.states()[i]).norm() < 1e-12);
  }
  CHECK_THROWS_AS(tr.at(11.0), DomainError);
}

TEST_CASE("observed order on the rotation problem") {
  // Fixed steps via h_init = h_max and loose tolerances, measured on the
  // rotation problem over one period.
  auto run = [](double h) {
    Tolerances tol;
    tol.abs = tol.rel = 1.0;  // accept every step
    tol.h_init = h;
    tol.h_max = h;
    const Trajectory tr = integrate(rotation(), vec2(1.0, 0.0), 0.0, 2.0 * std::numbers::pi, tol);
    return (tr.back() - vec2(1.0, 0.0)).norm();
  };
  const double e1 = run(2.0 * std::numbers::pi / 16);
  const double e2 = run(2.0 * std::numbers::pi / 32);
  const double order = std::log2(e1 / e2);
  CHECK(order == doctest::Approx(5.0).epsilon(0.3 / 5.0));
}

TEST_CASE("section crossings") {
  // Constant velocity through x = 0.3.
  const VectorField drift =
      make_custom_field(2, [](const Vec&, Vec& du) { du[0] = 2.0; du[1] = 0.5; });
  const Section plane{"plane", [](const Vec& u) { return u[0] - 0.3; }, +1};
  const SectionHit hit = integrate_to_section(drift, vec2(-0.5, 0.0), plane, 10.0);
  CHECK(hit.event.t == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(hit.event.direction == 1);
  CHECK(std::abs(hit.event.state[0] - 0.3) < 1e-10);
  CHECK(hit.trajectory.t_end() == doctest::Approx(0.4).epsilon(1e-12));

  // Rotation to {v = 0} decreasing: half a turn.
  const Section vsec{"v", [](const Vec& u) { return u[1]; }, -1};
  Tolerances tol;
  tol.abs = tol.rel = 1e-10;
  const SectionHit half = integrate_to_section(rotation(), vec2(0.0, 1.0), vsec, 10.0, tol);
  CHECK(half.event.t == doctest::Approx(std::numbers::pi / 2).epsilon(1e-8));
  const Section start{"start", [](const Vec& u) { return u[1]; }, 0};
  const SectionHit from_zero = integrate_to_section(rotation(), vec2(1.0, 0.0), start, 10.0, tol);
  CHECK(from_zero.event.t == doctest::Approx(std::numbers::pi).epsilon(1e-8));

  const Section never{"never", [](const Vec& u) { return u[0] - 5.0; }, 0};
  CHECK_THROWS_AS(integrate_to_section(rotation(), vec2(1.0, 0.0), never, 3.0), DomainError);
}

TEST_CASE("Full4D self-convergence and stiffness") {
  const ParameterSet p = ParameterSet::reference().with_singular(0.05, 0.1);
  const VectorField f = build_field(FieldTag::Full4D, p);
  Vec u0(4);
  u0 << 0.5, 0.2, -1.0, g_cubic(-1.0, p);
  Tolerances coarse;
  coarse.abs = coarse.rel = 1e-6;
  Tolerances fine;
  fine.abs = fine.rel = 1e-7;
  Tolerances ref;
  ref.abs = ref.rel = 1e-11;
  const Vec a = integrate(f, u0, 0.0, 5.0, coarse).back();
  const Vec b = integrate(f, u0, 0.0, 5.0, fine).back();
  const Vec c = integrate(f, u0, 0.0, 5.0, ref).back();
  const double err_coarse = (a - c).norm();
  const double change = (a - b).norm();
  CHECK(change <= std::max(err_coarse, 1e-12) * 1.5);
  CHECK(err_coarse < 1e-3);
}

TEST_CASE("steps exceed the fastest time scale on slow segments") {
  const ParameterSet p = ParameterSet::reference().with_singular(0.02, 0.02);
  const VectorField f = build_field(FieldTag::Full4D, p);
  Vec u0(4);
  u0 << 0.8, f_cubic(0.8, p), -2.0, g_cubic(-2.0, p);
  Tolerances tol;
  tol.abs = tol.rel = 1e-6;
  const Trajectory tr = integrate(f, u0, 0.0, 5.0, tol);
  CHECK(tr.stats().h_max > 10.0 * 0.02 * 0.02);
}

TEST_CASE("end-of-surge section on Full4D") {
  const ParameterSet p = ParameterSet::reference().with_singular(0.05, 0.1);
  const VectorField f = build_field(FieldTag::Full4D, p);
  const double X0 = 2.0;
  const double x0 = x_sing(2.2, p) - 0.3;
  Vec u0(4);
  u0 << x0, f_cubic(x0, p), X0, g_cubic(X0, p);
  const Section es = section_endsurge(p, 0.1, +1);
  Tolerances tol;
  tol.abs = tol.rel = 1e-9;
  const SectionHit hit = integrate_to_section(f, u0, es, 20.0, tol);
  CHECK(std::abs(hit.event.state[0] - (x_sing(geometry(p).gamma, p) - 0.1)) < 1e-9);

  // Determinism.
  const SectionHit again = integrate_to_section(f, u0, es, 20.0, tol);
  CHECK(again.event.t == hit.event.t);
  CHECK((again.event.state - hit.event.state).norm() == 0.0);
}

TEST_CASE("singular locus halts integration") {
  const ParameterSet p = ParameterSet::reference();
  const VectorField f = build_field(FieldTag::SurgePlanar, p);
  // x runs into the fold f'(x) = 0 where the field blows up.
  Vec u0(2);
  u0 << -0.5, 0.0;
  CHECK_THROWS_AS(integrate(f, u0, 0.0, 50.0), Error);
}
