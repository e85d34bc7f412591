#include "doctest.h"

#include <cmath>

#include "phantom/error.hpp"
#include "phantom/reductions.hpp"

using namespace phantom;

namespace {

Vec vec(std::initializer_list<double> v) {
  Vec u(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double d : v) u[i++] = d;
  return u;
}

}  // namespace

TEST_CASE("tag names round trip") {
  for (FieldTag t : all_field_tags()) {
    CHECK(field_tag_from_string(to_string(t)) == t);
    CHECK(build_field(t, ParameterSet::reference()).dimension() == field_dimension(t));
  }
  CHECK_THROWS_AS(field_tag_from_string("Bogus"), InvalidParameter);
}

TEST_CASE("desingularized reduced system vanishes at the folded singularity") {
  const ParameterSet p = ParameterSet::reference();
  const FoldGeometry g = geometry(p);
  const VectorField f = build_field(FieldTag::DesingularizedReduced, p);
  const Vec d = f(vec({g.x_f, g.X_f}));
  CHECK(std::abs(d[0]) < 1e-14);
  CHECK(std::abs(d[1]) < 1e-14);
}

TEST_CASE("three-scale regulator drift") {
  const ParameterSet p = ParameterSet::reference();
  const VectorField f = build_field(FieldTag::ThreeScale3D, p);
  CHECK(f(vec({0.0, 0.0, -2.0}))[2] == doctest::Approx(0.35).epsilon(1e-14));
  const double gamma = geometry(p).gamma;
  CHECK_THROWS_AS(f(vec({0.0, 0.0, gamma})), DomainError);
  CHECK_THROWS_AS(build_field(FieldTag::DesingularizedReduced, p)(vec({0.0, -gamma})), DomainError);
}

TEST_CASE("surge planar system") {
  const ParameterSet p = ParameterSet::reference();
  const VectorField f = build_field(FieldTag::SurgePlanar, p);
  for (double x : {-3.0, -2.2, -1.8}) {
    CHECK(std::abs(f(vec({x, f_tilde(x, p)}))[0]) < 1e-12);
  }
  CHECK_THROWS_AS(f(vec({geometry(p).x_f, 0.3})), DomainError);
}

TEST_CASE("three-scale field matches the Secretor components of Full4D on Y = g(X)") {
  const ParameterSet p = ParameterSet::reference().with_singular(1e-3, 1e-3);
  const VectorField full = build_field(FieldTag::Full4D, p);
  const VectorField red = build_field(FieldTag::ThreeScale3D, p);
  for (double X : {-2.0, -0.5, 0.4, 2.0}) {
    const Vec a = full(vec({0.3, 0.1, X, g_cubic(X, p)}));
    const Vec b = red(vec({0.3, 0.1, X}));
    CHECK(a[0] == b[0]);
    CHECK(a[1] == b[1]);
    CHECK(a[2] == 0.0);
  }
}

TEST_CASE("boundary-layer field uses the frozen Y") {
  const ParameterSet p = ParameterSet::reference();
  FieldExtras ex;
  ex.frozen_Y = 1.25;
  const VectorField f = build_field(FieldTag::BoundaryLayer3D, p, ex);
  CHECK(f(vec({0.0, 0.0, 0.0}))[2] == doctest::Approx(-1.25));
  CHECK(f.coefficients().at("Y") == 1.25);
  const VectorField d = build_field(FieldTag::BoundaryLayer3D, p);
  CHECK(d.coefficients().at("Y") == doctest::Approx(g_cubic(geometry(p).gamma, p)));
}

TEST_CASE("desingularized orbits reverse orientation on the repelling sheet") {
  const ParameterSet p = ParameterSet::reference();
  const VectorField d = build_field(FieldTag::DesingularizedReduced, p);
  for (double x : {-1.2, -0.3, 0.2, 0.6, 0.9, 1.4}) {
    const double X = -1.7;
    // Reduced slow flow on y = f(x): f'(x) x' = (a0 x + a1 f + a2 + c X)/delta.
    const double xdot =
        (p.a0() * x + p.a1() * f_cubic(x, p) + p.a2() + p.c() * X) / (p.delta() * df_cubic(x, p));
    const double Xdot = regulator_drift(X, p);
    const Vec v = d(vec({x, X}));
    const double cross = v[0] * Xdot - v[1] * xdot;
    const double dot = v[0] * xdot + v[1] * Xdot;
    CHECK(std::abs(cross) < 1e-10 * std::abs(dot));
    CHECK((dot < 0.0) == (df_cubic(x, p) > 0.0));
  }
}

TEST_CASE("analytic Jacobians agree with finite differences") {
  const ParameterSet p = ParameterSet::reference();
  FieldExtras ex;
  ex.eps = 0.01;
  for (FieldTag t : all_field_tags()) {
    const VectorField f = build_field(t, p, ex);
    if (!f.has_analytic_jacobian()) continue;
    Vec u(f.dimension());
    for (int i = 0; i < f.dimension(); ++i) u[i] = -0.31 + 0.17 * i;
    const Mat ja = f.jacobian(u);
    Mat jf;
    finite_difference_jacobian([&](const Vec& a, Vec& b) { f.eval(a, b); }, u, jf);
    CHECK_MESSAGE((ja - jf).norm() <= 1e-5 * (1.0 + ja.norm()), to_string(t));
  }
}

TEST_CASE("time reversal negates the field") {
  const ParameterSet p = ParameterSet::reference();
  const VectorField f = build_field(FieldTag::NormalFormLocal, p);
  const VectorField r = f.time_reversed();
  const Vec u = vec({0.1, -0.2, 0.3});
  CHECK((f(u) + r(u)).norm() == 0.0);
  CHECK(r.reversed());
  CHECK_FALSE(r.time_reversed().reversed());
}

TEST_CASE("ChartK2 critical manifold at eps = 0") {
  const ParameterSet p = ParameterSet::reference();
  FieldExtras ex;
  ex.eps = 0.0;
  const VectorField f = build_field(FieldTag::ChartK2, p, ex);
  const double A = f.coefficients().at("A");
  CHECK(A == doctest::Approx(geometry(p).alpha * p.c() / p.a0()));
  for (double X2 : {-2.0, -0.5, 0.0, 0.7}) {
    const Vec d = f(k2_critical_point(X2, A));
    CHECK(std::abs(d[0]) < 1e-13);
    CHECK(std::abs(d[1]) < 1e-13);
  }
}

TEST_CASE("chart transition maps") {
  const ChartK2Point a = k1_to_k2({1.0, 0.3, 0.0, 1.0});
  CHECK(a.x2 == 1.0);
  CHECK(a.y2 == -1.0);
  CHECK(a.X2 == 0.0);
  const ChartK2Point b = k1_to_k2({0.5, 0.2, 0.0, 0.25});
  CHECK(b.x2 == doctest::Approx(1.0));
  CHECK(b.y2 == doctest::Approx(-4.0));

  for (double e1 : {0.1, 0.5, 2.0, 10.0}) {
    const ChartK1Point k1{0.7, 0.05, -0.4, e1};
    const ChartK1Point back = k2_to_k1(k1_to_k2(k1));
    CHECK(std::abs(back.x1 - k1.x1) < 1e-14);
    CHECK(std::abs(back.r1 - k1.r1) < 1e-14);
    CHECK(std::abs(back.X1 - k1.X1) < 1e-14);
    CHECK(std::abs(back.eps1 - k1.eps1) < 1e-14);

    const NormalFormPoint d1 = blow_down(k1);
    const NormalFormPoint d2 = blow_down(k1_to_k2(k1));
    CHECK(std::abs(d1.x - d2.x) < 1e-12);
    CHECK(std::abs(d1.y - d2.y) < 1e-12);
    CHECK(std::abs(d1.X - d2.X) < 1e-12);
    CHECK(std::abs(d1.eps - d2.eps) < 1e-12);
  }
  CHECK_THROWS_AS(k1_to_k2({1.0, 0.1, 0.0, 0.0}), DomainError);
  CHECK_THROWS_AS(k2_to_k1({1.0, 0.5, 0.0, 0.01}), DomainError);

  const NormalFormPoint z = blow_down(ChartK1Point{0.4, 0.0, 0.3, 2.0});
  CHECK(z.x == 0.0);
  CHECK(z.y == 0.0);
  CHECK(z.X == 0.0);
  CHECK(z.eps == 0.0);
  const NormalFormPoint k2 = blow_down(ChartK2Point{1.0, -1.0, 2.0, 0.01});
  CHECK(k2.x == doctest::Approx(0.1));
  CHECK(k2.y == doctest::Approx(-0.01));
  CHECK(k2.X == doctest::Approx(0.2));
}

TEST_CASE("local coordinates") {
  const ParameterSet p = ParameterSet::reference();
  const FoldGeometry g = geometry(p);
  const LocalPoint o = to_local(g.x_f, g.y_f, g.X_f, g);
  CHECK(o.x == 0.0);
  CHECK(o.y == 0.0);
  CHECK(o.X == 0.0);
  CHECK(to_local(g.x_f + 0.1, g.y_f, g.X_f, g).x == doctest::Approx(0.212132).epsilon(1e-6));
  const LocalPoint q = to_local(0.3, -0.8, 1.7, g);
  const LocalPoint r = from_local(q, g);
  CHECK(std::abs(r.x - 0.3) < 1e-14);
  CHECK(std::abs(r.y + 0.8) < 1e-14);
  CHECK(std::abs(r.X - 1.7) < 1e-14);
}

TEST_CASE("normal form is the local expansion of the three-scale field") {
  // With time scaled by delta, the translated and rescaled ThreeScale3D
  // field differs from NormalFormLocal only by the dropped remainders.
  const ParameterSet p = ParameterSet::reference().with_singular(0.05, 0.1);
  const FoldGeometry g = geometry(p);
  const VectorField full = build_field(FieldTag::ThreeScale3D, p);
  const VectorField nf = build_field(FieldTag::NormalFormLocal, p);
  const LocalPoint loc{0.02, -0.01, 0.01};
  const LocalPoint s = from_local(loc, g);
  const Vec d = full(vec({s.x, s.y, s.X}));
  const Vec e = nf(vec({loc.x, loc.y, loc.X}));
  CHECK(g.alpha * d[0] * p.delta() == doctest::Approx(e[0]).epsilon(1e-9));
  CHECK(g.alpha * d[1] * p.delta() == doctest::Approx(e[1]).epsilon(1e-9));
  CHECK(d[2] * p.delta() == doctest::Approx(e[2]).epsilon(1e-3));
}

TEST_CASE("custom fields") {
  const VectorField f = make_custom_field(1, [](const Vec& u, Vec& du) { du[0] = -u[0]; });
  CHECK(f.tag() == FieldTag::Custom);
  CHECK(f(vec({2.0}))[0] == -2.0);
  CHECK_THROWS_AS(build_field(FieldTag::Custom, ParameterSet::reference()), InvalidParameter);
}
