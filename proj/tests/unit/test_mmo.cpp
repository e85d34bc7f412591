#include "doctest.h"

#include <cmath>
#include <numbers>

#include "phantom/error.hpp"
#include "phantom/mmo.hpp"

using namespace phantom;

namespace {

constexpr double kPi = std::numbers::pi;

// Two small oscillations near the fold point, three pulses and one surge,
// while X ramps across the whole Regulator cycle.
void synthetic_cycle(const FoldGeometry& g, std::vector<double>& t, std::vector<Vec>& u) {
  const double T = 4 * kPi + 6 * kPi + 2 * kPi;
  const int n = 24000;
  for (int i = 0; i <= n; ++i) {
    const double s = T * i / n;
    double x = g.x_f, y = g.y_f;
    if (s < 4 * kPi) {
      x += 0.05 * std::sin(s);
      y += 0.01 * std::sin(s);
    } else if (s < 10 * kPi) {
      const double b = 0.5 * (1.0 - std::cos(s - 4 * kPi));
      x += 0.8 * b;
      y += 0.5 * b;
    } else {
      const double b = 0.5 * (1.0 - std::cos(s - 10 * kPi));
      x += 1.5 * b;
      y += 6.0 * b;
    }
    Vec w(4);
    w << x, y, -2.0 + 4.0 * s / T, 0.0;
    t.push_back(s);
    u.push_back(w);
  }
}

}  // namespace

TEST_CASE("synthetic (3,2) signal") {
  const FoldGeometry g = geometry(ParameterSet::reference());
  std::vector<double> t;
  std::vector<Vec> u;
  synthetic_cycle(g, t, u);
  const MmoSignature sig = classify(t, u, g);
  CHECK(sig.p == 3);
  CHECK(sig.s == 2);
  CHECK(sig.full_cycle);
  CHECK(sig.ambiguous == 0);
  bool surge = false, pause = false;
  for (const PhaseInterval& iv : sig.intervals) {
    surge = surge || iv.kind == PhaseKind::Surge;
    if (iv.kind == PhaseKind::Pause && iv.oscillations > 0) pause = true;
  }
  CHECK(surge);
  CHECK(pause);
  for (std::size_t i = 1; i < sig.intervals.size(); ++i) {
    CHECK(sig.intervals[i].t_start == sig.intervals[i - 1].t_end);
  }
}

TEST_CASE("constant trajectory has no oscillations") {
  const FoldGeometry g = geometry(ParameterSet::reference());
  std::vector<double> t;
  std::vector<Vec> u;
  for (int i = 0; i < 100; ++i) {
    Vec w(4);
    w << g.x_f, g.y_f, 0.0, 0.0;
    t.push_back(i);
    u.push_back(w);
  }
  const MmoSignature sig = classify(t, u, g);
  CHECK(sig.p == 0);
  CHECK(sig.s == 0);
  CHECK_FALSE(sig.full_cycle);
  CHECK_FALSE(sig.warnings.empty());
}

TEST_CASE("classifier input validation") {
  const FoldGeometry g = geometry(ParameterSet::reference());
  CHECK_THROWS_AS(classify(std::vector<double>{0.0}, std::vector<Vec>{Vec::Zero(4)}, g), DomainError);
  std::vector<double> t{0, 1, 2};
  std::vector<Vec> u(3, Vec::Zero(3));
  CHECK_THROWS_AS(classify(t, u, g), InvalidParameter);
}

TEST_CASE("return map and periodic orbit") {
  const ParameterSet p = ParameterSet::reference().with_singular(0.05, 0.1);
  const PeriodicOrbit orb = find_periodic(p, Vec::Zero(4));
  CHECK(orb.period == doctest::Approx(9.0364183).epsilon(1e-6));
  CHECK(orb.contraction < 0.5);
  CHECK(orb.signature.p == 6);
  CHECK(orb.signature.s == 0);
  CHECK(orb.history.back() < 1e-8);
  const ReturnResult r = return_map(orb.anchor, p);
  CHECK(section_distance(orb.anchor, r.state) < 1e-7);
  CHECK_THROWS_AS(return_map(Vec::Zero(3), p), InvalidParameter);
}
