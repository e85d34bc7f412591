#include "phantom/reductions.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "phantom/error.hpp"

namespace phantom {

namespace {

constexpr double kLocusTol = 1e-12;

struct TagInfo {
  FieldTag tag;
  const char* name;
  int dim;
};

constexpr TagInfo kTags[] = {
    {FieldTag::Full4D, "Full4D", 4},
    {FieldTag::ThreeScale3D, "ThreeScale3D", 3},
    {FieldTag::SurgePlanar, "SurgePlanar", 2},
    {FieldTag::BoundaryLayer3D, "BoundaryLayer3D", 3},
    {FieldTag::DesingularizedReduced, "DesingularizedReduced", 2},
    {FieldTag::NormalFormLocal, "NormalFormLocal", 3},
    {FieldTag::ChartK1, "ChartK1", 4},
    {FieldTag::ChartK1CenterManifold, "ChartK1CenterManifold", 3},
    {FieldTag::ChartK2, "ChartK2", 3},
    {FieldTag::RectifiedK2, "RectifiedK2", 3},
    {FieldTag::Custom, "Custom", 0},
};

const TagInfo& info(FieldTag tag) {
  for (const auto& t : kTags) {
    if (t.tag == tag) return t;
  }
  throw InvalidParameter("unknown field tag");
}

}  // namespace

std::string_view to_string(FieldTag tag) { return info(tag).name; }

FieldTag field_tag_from_string(std::string_view name) {
  for (const auto& t : kTags) {
    if (name == t.name) return t.tag;
  }
  throw InvalidParameter("unknown field tag '" + std::string(name) + "'");
}

const std::vector<FieldTag>& all_field_tags() {
  static const std::vector<FieldTag> tags = [] {
    std::vector<FieldTag> v;
    for (const auto& t : kTags) {
      if (t.tag != FieldTag::Custom) v.push_back(t.tag);
    }
    return v;
  }();
  return tags;
}

int field_dimension(FieldTag tag) { return info(tag).dim; }

VectorField::VectorField(FieldTag tag, int dimension, std::vector<std::string> variables,
                         Rhs rhs, Jac jac, std::vector<SingularLocus> loci,
                         std::map<std::string, double> coefficients)
    : tag_(tag),
      dim_(dimension),
      variables_(std::move(variables)),
      rhs_(std::move(rhs)),
      jac_(std::move(jac)),
      loci_(std::move(loci)),
      coeffs_(std::move(coefficients)) {
  if (static_cast<int>(variables_.size()) != dim_) {
    throw InvalidParameter("VectorField: variable names do not match the dimension");
  }
}

void VectorField::check_domain(const Vec& u) const {
  for (const auto& locus : loci_) {
    const double v = locus.value(u);
    if (std::abs(v) <= kLocusTol) {
      std::ostringstream os;
      os << to_string(tag_) << ": evaluation on singular locus (" << locus.description << ")";
      throw DomainError(os.str());
    }
  }
}

void VectorField::eval(const Vec& u, Vec& du) const {
  if (u.size() != dim_) {
    throw InvalidParameter("VectorField: state has the wrong dimension");
  }
  check_domain(u);
  du.resize(dim_);
  rhs_(u, du);
  if (sign_ < 0.0) du = -du;
}

Vec VectorField::operator()(const Vec& u) const {
  Vec du(dim_);
  eval(u, du);
  return du;
}

void finite_difference_jacobian(const VectorField::Rhs& rhs, const Vec& u, Mat& jac) {
  const auto n = u.size();
  jac.resize(n, n);
  Vec f0(n);
  Vec f1(n);
  rhs(u, f0);
  Vec up = u;
  const double root_eps = std::sqrt(std::numeric_limits<double>::epsilon());
  for (Eigen::Index j = 0; j < n; ++j) {
    const double h = root_eps * std::max(std::abs(u[j]), 1.0);
    up[j] = u[j] + h;
    rhs(up, f1);
    jac.col(j) = (f1 - f0) / (up[j] - u[j]);
    up[j] = u[j];
  }
}

void VectorField::jacobian(const Vec& u, Mat& jac) const {
  check_domain(u);
  if (jac_) {
    jac.resize(dim_, dim_);
    jac_(u, jac);
  } else {
    finite_difference_jacobian(rhs_, u, jac);
  }
  if (sign_ < 0.0) jac = -jac;
}

Mat VectorField::jacobian(const Vec& u) const {
  Mat j;
  jacobian(u, j);
  return j;
}

VectorField VectorField::time_reversed() const {
  VectorField r = *this;
  r.sign_ = -sign_;
  return r;
}

namespace {

double drift_derivative(double X, const ParameterSet& p) {
  const double g = g_cubic(X, p);
  const double dg = dg_cubic(X, p);
  const double ddg = 6.0 * p.mu3() * X;
  const double num = X + p.b1() * g + p.b2();
  return ((1.0 + p.b1() * dg) * dg - num * ddg) / (dg * dg);
}

SingularLocus dg_locus(const ParameterSet& p, int index) {
  return {"g'(X) = 0", [p, index](const Vec& u) { return dg_cubic(u[index], p); }};
}

}  // namespace

VectorField build_field(FieldTag tag, const ParameterSet& p, const FieldExtras& extras) {
  const double eps = extras.eps.value_or(p.eps());
  const double delta = extras.delta.value_or(p.delta());
  if (!(eps >= 0.0) || !(delta >= 0.0)) {
    throw InvalidParameter("build_field: eps and delta overrides must be non-negative");
  }
  const FoldGeometry geo = geometry(p);
  const double a0 = p.a0();
  const double a1 = p.a1();

  const double c = p.c();
  const double l1 = p.lambda1();
  const double alpha = geo.alpha;
  const double phi = geo.phi;
  const double psi = geo.psi;
  const double A = alpha * c / a0;
  const double se = std::sqrt(eps);

  std::map<std::string, double> coeffs{{"eps", eps}, {"delta", delta}};
  auto local_coeffs = [&] {
    coeffs["alpha"] = alpha;
    coeffs["phi"] = phi;
    coeffs["psi"] = psi;
    coeffs["A"] = A;
    coeffs["x_f"] = geo.x_f;
    coeffs["y_f"] = geo.y_f;
    coeffs["X_f"] = geo.X_f;
  };

  switch (tag) {
    case FieldTag::Full4D: {
      if (eps <= 0.0 || delta <= 0.0) throw InvalidParameter("Full4D requires eps, delta > 0");
      const double ed = eps * delta;
      auto rhs = [p, ed, delta](const Vec& u, Vec& du) {
        du[0] = (-u[1] + f_cubic(u[0], p)) / ed;
        du[1] = (p.a0() * u[0] + p.a1() * u[1] + p.a2() + p.c() * u[2]) / delta;
        du[2] = (-u[3] + g_cubic(u[2], p)) / delta;
        du[3] = u[2] + p.b1() * u[3] + p.b2();
      };
      auto jac = [p, ed, delta](const Vec& u, Mat& J) {
        J.setZero();
        J(0, 0) = df_cubic(u[0], p) / ed;
        J(0, 1) = -1.0 / ed;
        J(1, 0) = p.a0() / delta;
        J(1, 1) = p.a1() / delta;
        J(1, 2) = p.c() / delta;
        J(2, 2) = dg_cubic(u[2], p) / delta;
        J(2, 3) = -1.0 / delta;
        J(3, 2) = 1.0;
        J(3, 3) = p.b1();
      };
      return {tag, 4, {"x", "y", "X", "Y"}, rhs, jac, {}, coeffs};
    }
    case FieldTag::ThreeScale3D: {
      if (eps <= 0.0 || delta <= 0.0) {
        throw InvalidParameter("ThreeScale3D requires eps, delta > 0");
      }
      const double ed = eps * delta;
      auto rhs = [p, ed, delta](const Vec& u, Vec& du) {
        du[0] = (-u[1] + f_cubic(u[0], p)) / ed;
        du[1] = (p.a0() * u[0] + p.a1() * u[1] + p.a2() + p.c() * u[2]) / delta;
        du[2] = regulator_drift(u[2], p);
      };
      auto jac = [p, ed, delta](const Vec& u, Mat& J) {
        J.setZero();
        J(0, 0) = df_cubic(u[0], p) / ed;
        J(0, 1) = -1.0 / ed;
        J(1, 0) = p.a0() / delta;
        J(1, 1) = p.a1() / delta;
        J(1, 2) = p.c() / delta;
        J(2, 2) = drift_derivative(u[2], p);
      };
      return {tag, 3, {"x", "y", "X"}, rhs, jac, {dg_locus(p, 2)}, coeffs};
    }
    case FieldTag::SurgePlanar: {
      if (delta <= 0.0) throw InvalidParameter("SurgePlanar requires delta > 0");
      auto rhs = [p, delta](const Vec& u, Vec& du) {
        const double x = u[0];
        du[0] = (p.a0() * x + p.a1() * f_cubic(x, p) + p.a2() + p.c() * u[1]) /
                (delta * df_cubic(x, p));
        du[1] = regulator_drift(u[1], p);
      };
      std::vector<SingularLocus> loci{
          {"f'(x) = 0", [p](const Vec& u) { return df_cubic(u[0], p); }}, dg_locus(p, 1)};
      return {tag, 2, {"x", "X"}, rhs, nullptr, std::move(loci), coeffs};
    }
    case FieldTag::BoundaryLayer3D: {
      if (eps <= 0.0) throw InvalidParameter("BoundaryLayer3D requires eps > 0");
      const double Y = extras.frozen_Y.value_or(g_cubic(geo.gamma, p));
      coeffs["Y"] = Y;
      auto rhs = [p, eps, Y](const Vec& u, Vec& du) {
        du[0] = (-u[1] + f_cubic(u[0], p)) / eps;
        du[1] = p.a0() * u[0] + p.a1() * u[1] + p.a2() + p.c() * u[2];
        du[2] = -Y + g_cubic(u[2], p);
      };
      auto jac = [p, eps](const Vec& u, Mat& J) {
        J.setZero();
        J(0, 0) = df_cubic(u[0], p) / eps;
        J(0, 1) = -1.0 / eps;
        J(1, 0) = p.a0();
        J(1, 1) = p.a1();
        J(1, 2) = p.c();
        J(2, 2) = dg_cubic(u[2], p);
      };
      return {tag, 3, {"x", "y", "X"}, rhs, jac, {}, coeffs};
    }
    case FieldTag::DesingularizedReduced: {
      auto rhs = [p, delta](const Vec& u, Vec& du) {
        const double x = u[0];
        du[0] = -(p.a0() * x + p.a1() * f_cubic(x, p) + p.a2() + p.c() * u[1]);
        du[1] = -delta * regulator_drift(u[1], p) * df_cubic(x, p);
      };
      auto jac = [p, delta](const Vec& u, Mat& J) {
        const double x = u[0];
        J(0, 0) = -(p.a0() + p.a1() * df_cubic(x, p));
        J(0, 1) = -p.c();
        J(1, 0) = -delta * regulator_drift(u[1], p) * 6.0 * p.lambda3() * x;
        J(1, 1) = -delta * drift_derivative(u[1], p) * df_cubic(x, p);
      };
      return {tag, 2, {"x", "X"}, rhs, jac, {dg_locus(p, 1)}, coeffs};
    }
    case FieldTag::NormalFormLocal: {
      if (eps <= 0.0) throw InvalidParameter("NormalFormLocal requires eps > 0");
      local_coeffs();
      auto rhs = [=](const Vec& u, Vec& du) {
        const double x = u[0];
        du[0] = (-u[1] - x * x - x * x * x / (3.0 * l1)) / eps;
        du[1] = a0 * x + a1 * u[1] + alpha * c * u[2];
        du[2] = delta * (phi + psi * u[2]);
      };
      auto jac = [=](const Vec& u, Mat& J) {
        const double x = u[0];
        J.setZero();
        J(0, 0) = (-2.0 * x - x * x / l1) / eps;
        J(0, 1) = -1.0 / eps;
        J(1, 0) = a0;
        J(1, 1) = a1;
        J(1, 2) = alpha * c;
        J(2, 2) = delta * psi;
      };
      return {tag, 3, {"x", "y", "X"}, rhs, jac, {}, coeffs};
    }
    case FieldTag::ChartK1: {
      local_coeffs();
      auto rhs = [=](const Vec& u, Vec& du) {
        const double x1 = u[0], r1 = u[1], X1 = u[2], e1 = u[3];
        const double F = -a0 * x1 + a1 * r1 - alpha * c * X1;
        du[0] = -0.5 * x1 * e1 * F - (-1.0 + x1 * x1 + r1 * x1 * x1 * x1 / (3.0 * l1));
        du[1] = 0.5 * r1 * e1 * F;
        du[2] = -0.5 * X1 * e1 * F + e1 * delta * (phi + psi * r1 * X1);
        du[3] = -e1 * e1 * F;
      };
      return {tag, 4, {"x1", "r1", "X1", "eps1"}, rhs, nullptr, {}, coeffs};
    }
    case FieldTag::ChartK1CenterManifold: {
      local_coeffs();
      const double kr = a1 + a0 / (6.0 * l1);
      coeffs["F_r1"] = kr;
      auto rhs = [=](const Vec& u, Vec& du) {
        const double r1 = u[0], X1 = u[1], e1 = u[2];
        const double F = -a0 + kr * r1 - alpha * c * X1;
        du[0] = 0.5 * r1 * F;
        du[1] = -0.5 * X1 * F + delta * (phi + psi * r1 * X1);
        du[2] = -e1 * F;
      };
      return {tag, 3, {"r1", "X1", "eps1"}, rhs, nullptr, {}, coeffs};
    }
    case FieldTag::ChartK2: {
      if (!extras.eps && !(p.eps() > 0.0)) {
        throw InvalidParameter("ChartK2 requires eps");
      }
      local_coeffs();
      auto rhs = [=](const Vec& u, Vec& du) {
        const double x2 = u[0];
        du[0] = -u[1] - x2 * x2 - se * x2 * x2 * x2 / (3.0 * l1);
        du[1] = a0 * x2 + alpha * c * u[2] + a1 * se * u[1];
        du[2] = delta * (phi + se * psi * u[2]);
      };
      auto jac = [=](const Vec& u, Mat& J) {
        const double x2 = u[0];
        J.setZero();
        J(0, 0) = -2.0 * x2 - se * x2 * x2 / l1;
        J(0, 1) = -1.0;
        J(1, 0) = a0;
        J(1, 1) = a1 * se;
        J(1, 2) = alpha * c;
        J(2, 2) = delta * se * psi;
      };
      return {tag, 3, {"x2", "y2", "X2"}, rhs, jac, {}, coeffs};
    }
    case FieldTag::RectifiedK2: {
      local_coeffs();
      auto rhs = [=](const Vec& u, Vec& du) {
        const double x = u[0], X = u[2];
        du[0] = -u[1] + 2.0 * A * X * x - x * x;
        du[1] = a0 * x;
        du[2] = delta * (phi + psi * X);
      };
      auto jac = [=](const Vec& u, Mat& J) {
        const double x = u[0], X = u[2];
        J.setZero();
        J(0, 0) = 2.0 * A * X - 2.0 * x;
        J(0, 1) = -1.0;
        J(0, 2) = 2.0 * A * x;
        J(1, 0) = a0;
        J(2, 2) = delta * psi;
      };
      return {tag, 3, {"x", "y", "X"}, rhs, jac, {}, coeffs};
    }
    case FieldTag::Custom:
      throw InvalidParameter("build_field: Custom fields are built with make_custom_field");
  }
  throw InvalidParameter("unknown field tag");
}

VectorField make_custom_field(int dimension, VectorField::Rhs rhs, VectorField::Jac jac) {
  if (dimension <= 0) throw InvalidParameter("make_custom_field: dimension must be positive");
  std::vector<std::string> names;
  for (int i = 0; i < dimension; ++i) names.push_back("u" + std::to_string(i));
  return {FieldTag::Custom, dimension, std::move(names), std::move(rhs), std::move(jac), {}, {}};
}

ChartK2Point k1_to_k2(const ChartK1Point& pt) {
  if (!(pt.eps1 > 0.0)) throw DomainError("k1_to_k2: outside chart overlap (eps1 <= 0)");
  const double s = std::sqrt(pt.eps1);
  return {pt.x1 / s, -1.0 / pt.eps1, pt.X1 / s, pt.r1 * pt.r1 * pt.eps1};
}

ChartK1Point k2_to_k1(const ChartK2Point& pt) {
  if (!(pt.y2 < 0.0)) throw DomainError("k2_to_k1: outside chart overlap (y2 >= 0)");
  const double s = std::sqrt(-pt.y2);
  return {pt.x2 / s, std::sqrt(pt.eps * -pt.y2), pt.X2 / s, -1.0 / pt.y2};
}

NormalFormPoint blow_down(const ChartK1Point& pt) {
  return {pt.r1 * pt.x1, -pt.r1 * pt.r1, pt.r1 * pt.X1, pt.r1 * pt.r1 * pt.eps1};
}

NormalFormPoint blow_down(const ChartK2Point& pt) {
  const double s = std::sqrt(pt.eps);
  return {s * pt.x2, pt.eps * pt.y2, s * pt.X2, pt.eps};
}

LocalPoint to_local(double x, double y, double X, const FoldGeometry& geo) {
  return {geo.alpha * (x - geo.x_f), geo.alpha * (y - geo.y_f), X - geo.X_f};
}

LocalPoint from_local(const LocalPoint& local, const FoldGeometry& geo) {
  return {local.x / geo.alpha + geo.x_f, local.y / geo.alpha + geo.y_f, local.X + geo.X_f};
}

Vec k2_critical_point(double X2, double A) {
  Vec u(3);
  u << -A * X2, -(A * X2) * (A * X2), X2;
  return u;
}

}  // namespace phantom
