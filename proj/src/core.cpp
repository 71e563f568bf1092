#include "dirlab/core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dirlab/su2.hpp"

namespace dirlab {

std::string to_string(GeneratorScale s) {
  return s == GeneratorScale::dirichlet_form ? "dirichlet_form" : "probabilist";
}

GeneratorScale generator_scale_from_string(const std::string& s) {
  if (s == "dirichlet_form") return GeneratorScale::dirichlet_form;
  if (s == "probabilist") return GeneratorScale::probabilist;
  throw InvalidArgument("unknown generator scale '" + s + "'");
}

std::string to_string(SpaceKind k) {
  switch (k) {
    case SpaceKind::euclidean: return "euclidean";
    case SpaceKind::heisenberg3: return "heisenberg3";
    case SpaceKind::su2_chart: return "su2_chart";
    case SpaceKind::gasket: return "gasket";
  }
  return "?";
}

SpaceModel SpaceModel::euclidean(int n, GeneratorScale s) {
  if (n < 1 || n > 3) throw InvalidArgument("euclidean dimension must be 1, 2 or 3");
  return {SpaceKind::euclidean, n, 0, s};
}

SpaceModel SpaceModel::heisenberg(GeneratorScale s) { return {SpaceKind::heisenberg3, 3, 0, s}; }

SpaceModel SpaceModel::su2(GeneratorScale s) { return {SpaceKind::su2_chart, 3, 0, s}; }

SpaceModel SpaceModel::gasket(int level) {
  if (level < 0) throw InvalidArgument("gasket level must be >= 0");
  return {SpaceKind::gasket, 2, level, GeneratorScale::dirichlet_form};
}

Point heisenberg_mul(const Point& p, const Point& q) {
  return {p[0] + q[0], p[1] + q[1], p[2] + q[2] + 0.5 * (p[0] * q[1] - p[1] * q[0])};
}

Point heisenberg_inv(const Point& p) { return {-p[0], -p[1], -p[2]}; }

std::string to_string(GaugeKind k) {
  switch (k) {
    case GaugeKind::euclidean_norm: return "euclidean_norm";
    case GaugeKind::koranyi: return "koranyi";
    case GaugeKind::chart_radius: return "chart_radius";
  }
  return "?";
}

GaugeKind gauge_kind_from_string(const std::string& s) {
  if (s == "euclidean_norm") return GaugeKind::euclidean_norm;
  if (s == "koranyi") return GaugeKind::koranyi;
  if (s == "chart_radius") return GaugeKind::chart_radius;
  throw InvalidArgument("unknown gauge '" + s + "'");
}

double Gauge::operator()(const Point& p) const {
  if (kind == GaugeKind::euclidean_norm) {
    return scale * std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
  }
  const double r2 = p[0] * p[0] + p[1] * p[1];
  return scale * std::pow(r2 * r2 + 16.0 * p[2] * p[2], 0.25);
}

Point Gauge::dilate(const Point& p, double r) const {
  if (kind == GaugeKind::euclidean_norm) return {r * p[0], r * p[1], r * p[2]};
  return {r * p[0], r * p[1], r * r * p[2]};
}

double chart_distance(const SpaceModel& space, const Point& p, const Point& q) {
  switch (space.kind) {
    case SpaceKind::euclidean: {
      double s = 0.0;
      for (int i = 0; i < 3; ++i) s += (p[i] - q[i]) * (p[i] - q[i]);
      return std::sqrt(s);
    }
    case SpaceKind::heisenberg3:
      return Gauge{GaugeKind::koranyi, 1.0}(heisenberg_mul(heisenberg_inv(p), q));
    case SpaceKind::su2_chart: {
      const auto g = su2::conjugate(su2::from_chart(p)) * su2::from_chart(q);
      return Gauge{GaugeKind::chart_radius, 1.0}(su2::to_chart(g));
    }
    case SpaceKind::gasket:
      throw Unsupported("chart_distance is not defined on the gasket");
  }
  return 0.0;
}

// ---------------------------------------------------------------------------

namespace {

ShapePtr make(auto node) {
  auto s = std::make_shared<ShapeSpec>();
  s->node = std::move(node);
  return s;
}

bool point_in_polygon(const std::vector<std::array<double, 2>>& v, double x, double y) {
  bool inside = false;
  const std::size_t n = v.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const double xi = v[i][0], yi = v[i][1], xj = v[j][0], yj = v[j][1];
    if ((yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi) inside = !inside;
  }
  return inside;
}

// Points in the closed level-m gasket, by descending into the corner subtriangle
// that contains the point in barycentric coordinates.
bool in_gasket(double x, double y, int level) {
  const double s3 = std::sqrt(3.0);
  double l2 = 2.0 * y / s3;
  double l1 = x - 0.5 * l2;
  const double eps = 1e-12;
  for (int m = 0; m <= level; ++m) {
    const double l0 = 1.0 - l1 - l2;
    if (l0 < -eps || l1 < -eps || l2 < -eps) return false;
    if (m == level) return true;
    if (l1 >= 0.5 - eps) {
      l1 = 2.0 * l1 - 1.0;
      l2 = 2.0 * l2;
    } else if (l2 >= 0.5 - eps) {
      l1 = 2.0 * l1;
      l2 = 2.0 * l2 - 1.0;
    } else if (l0 >= 0.5 - eps) {
      l1 = 2.0 * l1;
      l2 = 2.0 * l2;
    } else {
      return false;
    }
  }
  return true;
}

bool shape_contains(const ShapeSpec& s, const Point& p) {
  return std::visit(
      [&](const auto& n) -> bool {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, IntervalShape>) {
          return p[0] > n.a && p[0] < n.b;
        } else if constexpr (std::is_same_v<T, BoxShape>) {
          for (int i = 0; i < 3; ++i)
            if (n.hi[i] > n.lo[i] && !(p[i] > n.lo[i] && p[i] < n.hi[i])) return false;
          return true;
        } else if constexpr (std::is_same_v<T, BallShape>) {
          Point d;
          if (n.gauge.kind == GaugeKind::koranyi) {
            d = heisenberg_mul(heisenberg_inv(n.center), p);
          } else {
            d = {p[0] - n.center[0], p[1] - n.center[1], p[2] - n.center[2]};
          }
          return n.gauge(d) < n.radius;
        } else if constexpr (std::is_same_v<T, PolygonShape>) {
          return point_in_polygon(n.vertices, p[0], p[1]);
        } else if constexpr (std::is_same_v<T, AnnulusShape>) {
          const double r = std::hypot(p[0], p[1]);
          return r > n.r_in && r < n.r_out && p[2] > n.z_lo && p[2] < n.z_hi;
        } else if constexpr (std::is_same_v<T, UnionShape>) {
          return shape_contains(*n.left, p) || shape_contains(*n.right, p);
        } else if constexpr (std::is_same_v<T, DifferenceShape>) {
          return shape_contains(*n.left, p) && !shape_contains(*n.right, p);
        } else {
          return in_gasket(p[0], p[1], n.level);
        }
      },
      s.node);
}

BoundingBox shape_bbox(const ShapeSpec& s) {
  return std::visit(
      [&](const auto& n) -> BoundingBox {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, IntervalShape>) {
          return {{n.a, 0, 0}, {n.b, 0, 0}};
        } else if constexpr (std::is_same_v<T, BoxShape>) {
          return {n.lo, n.hi};
        } else if constexpr (std::is_same_v<T, BallShape>) {
          const double R = n.radius / n.gauge.scale;
          const Point& c = n.center;
          if (n.gauge.kind == GaugeKind::euclidean_norm)
            return {{c[0] - R, c[1] - R, c[2] - R}, {c[0] + R, c[1] + R, c[2] + R}};
          // |x|,|y| ≤ R and |z| ≤ R²/4 in group coordinates around c.
          const double dz = 0.25 * R * R + 0.5 * (std::abs(c[0]) + std::abs(c[1])) * R;
          return {{c[0] - R, c[1] - R, c[2] - dz}, {c[0] + R, c[1] + R, c[2] + dz}};
        } else if constexpr (std::is_same_v<T, PolygonShape>) {
          BoundingBox b{{1e300, 1e300, 0}, {-1e300, -1e300, 0}};
          for (const auto& v : n.vertices) {
            for (int i = 0; i < 2; ++i) {
              b.lo[i] = std::min(b.lo[i], v[i]);
              b.hi[i] = std::max(b.hi[i], v[i]);
            }
          }
          return b;
        } else if constexpr (std::is_same_v<T, AnnulusShape>) {
          return {{-n.r_out, -n.r_out, n.z_lo}, {n.r_out, n.r_out, n.z_hi}};
        } else if constexpr (std::is_same_v<T, UnionShape>) {
          const auto a = shape_bbox(*n.left);
          const auto b = shape_bbox(*n.right);
          BoundingBox r;
          for (int i = 0; i < 3; ++i) {
            r.lo[i] = std::min(a.lo[i], b.lo[i]);
            r.hi[i] = std::max(a.hi[i], b.hi[i]);
          }
          return r;
        } else if constexpr (std::is_same_v<T, DifferenceShape>) {
          return shape_bbox(*n.left);
        } else {
          return {{0, 0, 0}, {1, std::sqrt(3.0) / 2, 0}};
        }
      },
      s.node);
}

bool shape_connected(const ShapeSpec& s) {
  if (auto u = std::get_if<UnionShape>(&s.node)) return u->connected;
  if (auto d = std::get_if<DifferenceShape>(&s.node)) return d->connected;
  return true;
}

std::vector<Face> shape_faces(const ShapeSpec& s, int dim) {
  std::vector<Face> f;
  if (auto n = std::get_if<IntervalShape>(&s.node)) {
    f.push_back({Face::Kind::plane, {1, 0, 0}, {}, n->a});
    f.push_back({Face::Kind::plane, {1, 0, 0}, {}, n->b});
  } else if (auto b = std::get_if<BoxShape>(&s.node)) {
    for (int i = 0; i < dim; ++i) {
      Point e{};
      e[i] = 1.0;
      f.push_back({Face::Kind::plane, e, {}, b->lo[i]});
      f.push_back({Face::Kind::plane, e, {}, b->hi[i]});
    }
  } else if (auto ball = std::get_if<BallShape>(&s.node)) {
    if (ball->gauge.kind == GaugeKind::euclidean_norm) {
      f.push_back({Face::Kind::sphere, ball->center, {}, ball->radius / ball->gauge.scale});
    }
  } else if (auto poly = std::get_if<PolygonShape>(&s.node)) {
    const auto& v = poly->vertices;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const auto& a = v[i];
      const auto& c = v[(i + 1) % v.size()];
      f.push_back({Face::Kind::segment, {a[0], a[1], 0}, {c[0], c[1], 0}, 0.0});
    }
  }
  return f;
}

void validate(const SpaceModel& space, const ShapeSpec& s) {
  const auto fail = [](const std::string& m) { throw InvalidArgument("invalid shape: " + m); };
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        const bool eu = space.kind == SpaceKind::euclidean;
        const bool group = space.kind == SpaceKind::heisenberg3 || space.kind == SpaceKind::su2_chart;
        if constexpr (std::is_same_v<T, IntervalShape>) {
          if (!(eu && space.dim == 1)) fail("interval requires euclidean(1)");
          if (!(n.b > n.a)) fail("interval needs a < b");
        } else if constexpr (std::is_same_v<T, BoxShape>) {
          if (!(eu || group)) fail("box requires a euclidean or group chart");
          for (int i = 0; i < space.dim; ++i)
            if (!(n.hi[i] > n.lo[i])) fail("box needs lo < hi on every axis");
        } else if constexpr (std::is_same_v<T, BallShape>) {
          if (!(n.radius > 0) || !(n.gauge.scale > 0)) fail("ball needs positive radius and gauge scale");
          if (eu && n.gauge.kind != GaugeKind::euclidean_norm) fail("euclidean space needs euclidean_norm balls");
          if (space.kind == SpaceKind::heisenberg3 && n.gauge.kind != GaugeKind::koranyi)
            fail("heisenberg3 needs koranyi balls");
          if (space.kind == SpaceKind::su2_chart) {
            if (n.gauge.kind != GaugeKind::chart_radius) fail("su2_chart needs chart_radius balls");
            if (n.center != Point{0, 0, 0}) throw Unsupported("chart_radius balls are centered at the identity");
          }
          if (space.kind == SpaceKind::gasket) fail("balls are not defined on the gasket");
        } else if constexpr (std::is_same_v<T, PolygonShape>) {
          if (!(eu && space.dim == 2)) fail("polygon requires euclidean(2)");
          if (n.vertices.size() < 3) fail("polygon needs at least 3 vertices");
        } else if constexpr (std::is_same_v<T, AnnulusShape>) {
          if (!group) fail("annulus requires heisenberg3 or su2_chart");
          if (!(n.r_out > n.r_in && n.r_in >= 0 && n.z_hi > n.z_lo)) fail("annulus ranges are empty");
        } else if constexpr (std::is_same_v<T, UnionShape> || std::is_same_v<T, DifferenceShape>) {
          if (!n.left || !n.right) fail("composite shape with a missing operand");
          validate(space, *n.left);
          validate(space, *n.right);
        } else {
          if (space.kind != SpaceKind::gasket) fail("gasket_cells requires the gasket space");
          if (n.level != space.level) fail("gasket_cells level differs from the space level");
        }
      },
      s.node);
}

}  // namespace

ShapePtr interval(double a, double b) { return make(IntervalShape{a, b}); }
ShapePtr box(const Point& lo, const Point& hi) { return make(BoxShape{lo, hi}); }
ShapePtr ball(const Gauge& gauge, double radius, const Point& center) {
  return make(BallShape{gauge, radius, center});
}
ShapePtr polygon(std::vector<std::array<double, 2>> vertices) {
  return make(PolygonShape{std::move(vertices)});
}
ShapePtr annulus(double r_in, double r_out, double z_lo, double z_hi) {
  return make(AnnulusShape{r_in, r_out, z_lo, z_hi});
}
ShapePtr shape_union(ShapePtr a, ShapePtr b, bool connected) {
  return make(UnionShape{std::move(a), std::move(b), connected});
}
ShapePtr shape_difference(ShapePtr a, ShapePtr b, bool connected) {
  return make(DifferenceShape{std::move(a), std::move(b), connected});
}
ShapePtr gasket_cells(int level) { return make(GasketCellsShape{level}); }

double Face::distance(const Point& p) const {
  switch (kind) {
    case Kind::plane:
      return std::abs(a[0] * p[0] + a[1] * p[1] + a[2] * p[2] - c);
    case Kind::sphere: {
      const double r = std::sqrt((p[0] - a[0]) * (p[0] - a[0]) + (p[1] - a[1]) * (p[1] - a[1]) +
                                 (p[2] - a[2]) * (p[2] - a[2]));
      return std::abs(r - c);
    }
    case Kind::segment: {
      const Point q = project(p);
      return std::hypot(p[0] - q[0], p[1] - q[1]);
    }
  }
  return 0.0;
}

Point Face::project(const Point& p) const {
  switch (kind) {
    case Kind::plane: {
      const double s = a[0] * p[0] + a[1] * p[1] + a[2] * p[2] - c;
      return {p[0] - s * a[0], p[1] - s * a[1], p[2] - s * a[2]};
    }
    case Kind::sphere: {
      Point d{p[0] - a[0], p[1] - a[1], p[2] - a[2]};
      const double r = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
      if (r == 0.0) return {a[0] + c, a[1], a[2]};
      return {a[0] + c * d[0] / r, a[1] + c * d[1] / r, a[2] + c * d[2] / r};
    }
    case Kind::segment: {
      const double ex = b[0] - a[0], ey = b[1] - a[1];
      const double len2 = ex * ex + ey * ey;
      double s = len2 > 0 ? ((p[0] - a[0]) * ex + (p[1] - a[1]) * ey) / len2 : 0.0;
      s = std::clamp(s, 0.0, 1.0);
      return {a[0] + s * ex, a[1] + s * ey, 0.0};
    }
  }
  return p;
}

Domain::Domain(SpaceModel space, ShapePtr shape, std::string label)
    : space_(space), shape_(std::move(shape)), label_(std::move(label)) {
  if (!shape_) throw InvalidArgument("domain needs a shape");
  bbox_ = shape_bbox(*shape_);
  connected_ = shape_connected(*shape_);
  if (space_.kind == SpaceKind::euclidean) faces_ = shape_faces(*shape_, space_.dim);
}

bool Domain::contains(const Point& p) const { return shape_contains(*shape_, p); }

double Domain::bridge_survival(const Point& p0, const Point& p1, double variance) const {
  double s = 1.0;
  for (const auto& f : faces_) {
    const double d0 = f.distance(p0);
    const double d1 = f.distance(p1);
    s *= 1.0 - std::exp(-2.0 * d0 * d1 / variance);
  }
  return s;
}

std::optional<Point> Domain::project_to_boundary(const Point& p) const {
  if (faces_.empty()) return std::nullopt;
  double best = 1e300;
  Point q = p;
  for (const auto& f : faces_) {
    const double d = f.distance(p);
    if (d < best) {
      best = d;
      q = f.project(p);
    }
  }
  return q;
}

ShapePtr dilate_shape(const ShapePtr& shape, const SpaceModel& space, double r) {
  if (!(r > 0.0)) throw InvalidArgument("dilation factor must be positive");
  bool aniso = false;
  if (space.kind == SpaceKind::heisenberg3) aniso = true;
  else if (space.kind != SpaceKind::euclidean) throw Unsupported("no exact dilation on " + to_string(space.kind));
  const auto dp = [&](const Point& p) { return Point{r * p[0], r * p[1], (aniso ? r * r : r) * p[2]}; };
  return std::visit(
      [&](const auto& n) -> ShapePtr {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, IntervalShape>) {
          return interval(r * n.a, r * n.b);
        } else if constexpr (std::is_same_v<T, BoxShape>) {
          return box(dp(n.lo), dp(n.hi));
        } else if constexpr (std::is_same_v<T, BallShape>) {
          return ball(n.gauge, r * n.radius, dp(n.center));
        } else if constexpr (std::is_same_v<T, PolygonShape>) {
          auto v = n.vertices;
          for (auto& q : v) q = {r * q[0], r * q[1]};
          return polygon(std::move(v));
        } else if constexpr (std::is_same_v<T, AnnulusShape>) {
          return annulus(r * n.r_in, r * n.r_out, r * r * n.z_lo, r * r * n.z_hi);
        } else if constexpr (std::is_same_v<T, UnionShape>) {
          return shape_union(dilate_shape(n.left, space, r), dilate_shape(n.right, space, r), n.connected);
        } else if constexpr (std::is_same_v<T, DifferenceShape>) {
          return shape_difference(dilate_shape(n.left, space, r), dilate_shape(n.right, space, r), n.connected);
        } else {
          throw Unsupported("gasket cells have no continuous dilation");
        }
      },
      shape->node);
}

Domain dilate_domain(const Domain& domain, double r) {
  auto s = std::make_shared<ShapeSpec>(domain.shape());
  return make_domain(domain.space(), dilate_shape(s, domain.space(), r), domain.label());
}

Domain make_domain(const SpaceModel& space, ShapePtr shape, std::string label) {
  if (!shape) throw InvalidArgument("make_domain: null shape");
  validate(space, *shape);
  Domain d(space, std::move(shape), std::move(label));
  if (space.kind == SpaceKind::gasket) return d;

  const auto& b = d.bounding_box();
  const int dim = space.dim;
  constexpr int cells = 16;
  int n[3] = {1, 1, 1};
  for (int i = 0; i < dim; ++i) n[i] = cells;
  for (int k = 0; k < n[2]; ++k) {
    for (int j = 0; j < n[1]; ++j) {
      for (int i = 0; i < n[0]; ++i) {
        const int idx[3] = {i, j, k};
        Point p{};
        for (int a = 0; a < dim; ++a) p[a] = b.lo[a] + (idx[a] + 0.5) * (b.hi[a] - b.lo[a]) / cells;
        if (d.contains(p)) return d;
      }
    }
  }
  std::ostringstream msg;
  msg << "empty interior: no node of the " << cells << "-per-axis grid over the bounding box [";
  for (int a = 0; a < dim; ++a) msg << (a ? " x " : "") << b.lo[a] << ", " << b.hi[a];
  msg << "] lies inside the shape";
  throw InvalidArgument(msg.str());
}

}  // namespace dirlab
