#include "doctest.h"

#include <cmath>

#include "phantom/canard.hpp"
#include "phantom/error.hpp"
#include "phantom/folded.hpp"

using namespace phantom;

TEST_CASE("slope of a power law") {
  const std::vector<double> x{1.0, 2.0, 4.0};
  const std::vector<double> y{3.0, 12.0, 48.0};
  CHECK(loglog_slope(x, y) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("median spacing") {
  std::vector<CanardIntersection> c(4);
  c[0].X = -0.10;
  c[1].X = -0.11;
  c[2].X = -0.13;
  c[3].X = -0.30;
  CHECK(median_spacing(c, -0.2, 0.0) == doctest::Approx(0.015));
  CHECK(std::isnan(median_spacing(c, -1.0, -0.2)));
}

TEST_CASE("direct rotation count follows the sector prediction") {
  const ParameterSet p = ParameterSet::reference().with_singular(0.01, 0.05);
  const WiwoCoefficients k = WiwoCoefficients::chart_k2(p, 0.01);
  for (double X0 : {-0.6, -0.3, -0.1}) {
    const SectorCount s = count_sector_rotations(p, X0);
    CHECK(s.X_exit > 0.0);
    CHECK(s.k == static_cast<int>(std::floor(s.turns)));
    CHECK(std::abs(s.k - rotation_sector(X0, k, 0.05).k) <= 1);
  }
}

TEST_CASE("canards in a small window have consecutive rotation numbers") {
  const ParameterSet p = ParameterSet::reference().with_singular(0.01, 0.08);
  SweepOptions so;
  so.x0 = 1.0;
  const ManifoldFamily a =
      sweep_manifold(p, FieldTag::ChartK2, ManifoldSide::Attracting, -0.2, -0.02, so);
  const ManifoldFamily r =
      sweep_manifold(p, FieldTag::ChartK2, ManifoldSide::Repelling, 0.2, 0.02, so);
  CHECK_FALSE(a.stalled);
  CHECK_FALSE(r.stalled);
  for (const ManifoldMember& m : a.members) CHECK(m.segment.collocation_residual < 1e-9);
  const auto c = detect_canards(a, r);
  REQUIRE(c.size() >= 2);
  for (std::size_t i = 1; i < c.size(); ++i) {
    CHECK(std::abs(c[i].rotation - c[i - 1].rotation) == 1);
    CHECK(c[i].start_attracting < c[i - 1].start_attracting);
  }
}

TEST_CASE("sweep arguments are validated") {
  const ParameterSet p = ParameterSet::reference().with_singular(0.01, 0.08);
  CHECK_THROWS_AS(sweep_manifold(p, FieldTag::ChartK2, ManifoldSide::Attracting, 0.2, 0.02),
                  InvalidParameter);
  CHECK_THROWS_AS(sweep_manifold(p, FieldTag::Full4D, ManifoldSide::Attracting, -0.2, -0.02),
                  InvalidParameter);
}
