#pragma once

// Reduced vector fields and local coordinate changes.
//
// Every field is autonomous and evaluated as du = F(u). Remainder terms
// of order delta, sqrt(eps) or X^2 that the local analysis drops are set
// to zero here; the Full4D field is always available for comparison.

#include <Eigen/Dense>

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "phantom/model.hpp"

namespace phantom {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class FieldTag {
  Full4D,
  ThreeScale3D,
  SurgePlanar,
  BoundaryLayer3D,
  DesingularizedReduced,
  NormalFormLocal,
  ChartK1,
  ChartK1CenterManifold,
  ChartK2,
  RectifiedK2,
  Custom,  // user-supplied field of any dimension
};

std::string_view to_string(FieldTag tag);
/// Throws InvalidParameter on unknown names.
FieldTag field_tag_from_string(std::string_view name);
const std::vector<FieldTag>& all_field_tags();
/// Dimension fixed by the tag; 0 for Custom.
int field_dimension(FieldTag tag);

/// Tag-specific closure values.
struct FieldExtras {
  std::optional<double> frozen_Y;  // BoundaryLayer3D (defaults to g(gamma))
  std::optional<double> eps;       // overrides p.eps() (ChartK2, NormalFormLocal, ...)
  std::optional<double> delta;     // overrides p.delta()
};

/// Scalar function whose zero set bounds the domain of a field.
struct SingularLocus {
  std::string description;
  std::function<double(const Vec&)> value;
};

/// An evaluable, immutable vector field together with its closure.
class VectorField {
 public:
  using Rhs = std::function<void(const Vec& u, Vec& du)>;
  using Jac = std::function<void(const Vec& u, Mat& jac)>;

  VectorField(FieldTag tag, int dimension, std::vector<std::string> variables, Rhs rhs,
              Jac jac, std::vector<SingularLocus> loci,
              std::map<std::string, double> coefficients);

  FieldTag tag() const noexcept { return tag_; }
  int dimension() const noexcept { return dim_; }
  const std::vector<std::string>& variables() const noexcept { return variables_; }
  const std::vector<SingularLocus>& singular_loci() const noexcept { return loci_; }
  const std::map<std::string, double>& coefficients() const noexcept { return coeffs_; }
  bool reversed() const noexcept { return sign_ < 0.0; }

  /// Throws DomainError when u lies on a singular locus.
  Vec operator()(const Vec& u) const;
  void eval(const Vec& u, Vec& du) const;
  /// Analytic Jacobian when available, forward differences otherwise.
  void jacobian(const Vec& u, Mat& jac) const;
  Mat jacobian(const Vec& u) const;
  bool has_analytic_jacobian() const noexcept { return static_cast<bool>(jac_); }

  /// Same field with time reversed.
  VectorField time_reversed() const;

 private:
  void check_domain(const Vec& u) const;

  FieldTag tag_;
  int dim_;
  std::vector<std::string> variables_;
  Rhs rhs_;
  Jac jac_;
  std::vector<SingularLocus> loci_;
  std::map<std::string, double> coeffs_;
  double sign_ = 1.0;
};

/// Throws InvalidParameter for FieldTag::Custom.
VectorField build_field(FieldTag tag, const ParameterSet& p, const FieldExtras& extras = {});

/// Wraps an arbitrary autonomous field (tag Custom).
VectorField make_custom_field(int dimension, VectorField::Rhs rhs, VectorField::Jac jac = nullptr);

/// Forward-difference Jacobian with step sqrt(machine eps) * max(|u_j|, 1).
void finite_difference_jacobian(const VectorField::Rhs& rhs, const Vec& u, Mat& jac);

// Blow-up charts around the folded singularity of the local normal form.

struct ChartK1Point {
  double x1 = 0.0;
  double r1 = 0.0;
  double X1 = 0.0;
  double eps1 = 0.0;
};

struct ChartK2Point {
  double x2 = 0.0;
  double y2 = 0.0;
  double X2 = 0.0;
  double eps = 0.0;  // shared singular parameter, eps = r2^2
};

/// Point of the normal form (x, y, X) together with eps.
struct NormalFormPoint {
  double x = 0.0;
  double y = 0.0;
  double X = 0.0;
  double eps = 0.0;
};

/// Requires eps1 > 0; throws DomainError("outside chart overlap") otherwise.
ChartK2Point k1_to_k2(const ChartK1Point& pt);
/// Requires y2 < 0; throws DomainError("outside chart overlap") otherwise.
ChartK1Point k2_to_k1(const ChartK2Point& pt);

NormalFormPoint blow_down(const ChartK1Point& pt);
NormalFormPoint blow_down(const ChartK2Point& pt);

/// Translation to the folded singularity and rescaling by alpha:
/// (alpha (x - x_f), alpha (y - f(x_f)), X - X_f).
struct LocalPoint {
  double x = 0.0;
  double y = 0.0;
  double X = 0.0;
};

LocalPoint to_local(double x, double y, double X, const FoldGeometry& geo);
LocalPoint from_local(const LocalPoint& local, const FoldGeometry& geo);

/// Critical manifold of ChartK2 at eps = 0: x2 = -A X2, y2 = -(A X2)^2.
Vec k2_critical_point(double X2, double A);

}  // namespace phantom
