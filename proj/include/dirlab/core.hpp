#pragma once

#include <array>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace dirlab {

/// Chart coordinates. Spaces of dimension < 3 leave the trailing slots at 0.
using Point = std::array<double, 3>;

class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an iterative method fails or a numerical invariant breaks.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Unsupported : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// dirichlet_form: A = Δ (energy ∫|∇f|²). probabilist: A = ½Δ.
enum class GeneratorScale { dirichlet_form, probabilist };

/// Factor multiplying the dirichlet_form generator.
constexpr double generator_factor(GeneratorScale s) {
  return s == GeneratorScale::dirichlet_form ? 1.0 : 0.5;
}

std::string to_string(GeneratorScale s);
GeneratorScale generator_scale_from_string(const std::string& s);

enum class SpaceKind { euclidean, heisenberg3, su2_chart, gasket };

std::string to_string(SpaceKind k);

struct SpaceModel {
  SpaceKind kind = SpaceKind::euclidean;
  int dim = 1;
  int level = 0;
  GeneratorScale scale = GeneratorScale::dirichlet_form;

  static SpaceModel euclidean(int n, GeneratorScale s = GeneratorScale::dirichlet_form);
  static SpaceModel heisenberg(GeneratorScale s = GeneratorScale::dirichlet_form);
  static SpaceModel su2(GeneratorScale s = GeneratorScale::dirichlet_form);
  static SpaceModel gasket(int level);

  SpaceModel with_scale(GeneratorScale s) const {
    SpaceModel m = *this;
    m.scale = s;
    return m;
  }
};

// Heisenberg group in exponential coordinates with [X, Y] = Z:
// (x, y, z)·(x', y', z') = (x + x', y + y', z + z' + (x y' − y x') / 2).
Point heisenberg_mul(const Point& p, const Point& q);
Point heisenberg_inv(const Point& p);

enum class GaugeKind { euclidean_norm, koranyi, chart_radius };

std::string to_string(GaugeKind k);
GaugeKind gauge_kind_from_string(const std::string& s);

/// Homogeneous norm used in place of metric balls.
///
/// koranyi and chart_radius both evaluate ((x²+y²)² + 16z²)^{1/4}; the latter
/// reads (x, y, z) as the cylindrical chart of SU(2) (see su2.hpp). Both are
/// 1-homogeneous under δ_r(x, y, z) = (rx, ry, r²z); euclidean_norm under
/// δ_r(p) = rp.
struct Gauge {
  GaugeKind kind = GaugeKind::euclidean_norm;
  double scale = 1.0;

  double operator()(const Point& p) const;
  Point dilate(const Point& p, double r) const;
};

/// Quasi-distance gauge(p⁻¹·q) on group charts; exact Euclidean distance on euclidean.
/// Not defined on the gasket (treated spectrally only).
double chart_distance(const SpaceModel& space, const Point& p, const Point& q);

// ---------------------------------------------------------------------------
// Shapes

struct ShapeSpec;
using ShapePtr = std::shared_ptr<const ShapeSpec>;

struct IntervalShape {
  double a = 0.0;
  double b = 1.0;
};
struct BoxShape {
  Point lo{};
  Point hi{};
};
struct BallShape {
  Gauge gauge;
  double radius = 1.0;
  Point center{};
};
struct PolygonShape {
  std::vector<std::array<double, 2>> vertices;
};
/// Annular cylinder r_in < sqrt(x²+y²) < r_out, z_lo < z < z_hi.
struct AnnulusShape {
  double r_in = 0.0;
  double r_out = 1.0;
  double z_lo = -1.0;
  double z_hi = 1.0;
};
struct UnionShape {
  ShapePtr left;
  ShapePtr right;
  bool connected = true;
};
struct DifferenceShape {
  ShapePtr left;
  ShapePtr right;
  bool connected = true;
};
struct GasketCellsShape {
  int level = 1;
};

struct ShapeSpec {
  std::variant<IntervalShape, BoxShape, BallShape, PolygonShape, AnnulusShape, UnionShape,
               DifferenceShape, GasketCellsShape>
      node;
};

ShapePtr interval(double a, double b);
ShapePtr box(const Point& lo, const Point& hi);
ShapePtr ball(const Gauge& gauge, double radius, const Point& center = {});
ShapePtr polygon(std::vector<std::array<double, 2>> vertices);
ShapePtr annulus(double r_in, double r_out, double z_lo, double z_hi);
ShapePtr shape_union(ShapePtr a, ShapePtr b, bool connected);
ShapePtr shape_difference(ShapePtr a, ShapePtr b, bool connected);
ShapePtr gasket_cells(int level);

/// A smooth boundary piece used for boundary-distance queries.
struct Face {
  enum class Kind { plane, sphere, segment };
  Kind kind = Kind::plane;
  Point a{};
  Point b{};
  double c = 0.0;

  double distance(const Point& p) const;
  Point project(const Point& p) const;
};

struct BoundingBox {
  Point lo{};
  Point hi{};
};

class Domain {
 public:
  Domain(SpaceModel space, ShapePtr shape, std::string label);

  bool contains(const Point& p) const;

  const SpaceModel& space() const { return space_; }
  const ShapeSpec& shape() const { return *shape_; }
  const BoundingBox& bounding_box() const { return bbox_; }
  bool connected() const { return connected_; }
  const std::string& label() const { return label_; }

  /// Boundary pieces; empty when the shape has no Euclidean face description.
  const std::vector<Face>& faces() const { return faces_; }

  /// Brownian-bridge probability of staying off every face between p0 and p1,
  /// each face approximated by its tangent half-space.
  double bridge_survival(const Point& p0, const Point& p1, double variance) const;

  /// Nearest boundary point among the faces, if any faces are known.
  std::optional<Point> project_to_boundary(const Point& p) const;

 private:
  SpaceModel space_;
  ShapePtr shape_;
  std::string label_;
  BoundingBox bbox_;
  bool connected_ = true;
  std::vector<Face> faces_;
};

/// Image of a shape under δ_r: isotropic on euclidean, (rx, ry, r²z) on heisenberg3.
ShapePtr dilate_shape(const ShapePtr& shape, const SpaceModel& space, double r);
Domain dilate_domain(const Domain& domain, double r);

/// Validates the shape against the space and rejects shapes with no grid point
/// inside at the coarsest supported resolution (16 cells per axis).
Domain make_domain(const SpaceModel& space, ShapePtr shape, std::string label = {});

}  // namespace dirlab
