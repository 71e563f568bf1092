#include "dirlab/discrete.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>

namespace dirlab {

namespace {

constexpr double kPi = std::numbers::pi;

using Idx = std::array<int, 3>;

// Second-order part ∂_a(w ∂_a) along one grid axis; w sampled at edge midpoints.
struct AxisTerm {
  int axis;
  std::function<double(const Point&)> weight;
};

// |V f|² with V = Σ c_a(x) ∂_a, averaged over forward and backward differences
// so that no checkerboard mode escapes the energy.
struct FieldTerm {
  std::function<Point(const Point&)> coeff;
  std::function<double(const Point&)> weight;
};

struct GridProblem {
  SpaceModel space;
  std::shared_ptr<const Domain> domain;
  GridSpec grid;
  NodeCoordinates coordinates;
  std::function<bool(const Point&)> inside;  // in grid coordinates
  std::function<double(const Point&)> density;
  std::vector<AxisTerm> axis_terms;
  std::vector<FieldTerm> field_terms;
  double h;
};

class GridIndexer {
 public:
  explicit GridIndexer(const GridSpec& g) : g_(g) {}

  // Wraps periodic axes; returns false if the index is off-grid.
  bool normalize(Idx& idx) const {
    bool on = true;
    for (int a = 0; a < 3; ++a) {
      if (g_.periodic[a]) {
        idx[a] = ((idx[a] % g_.count[a]) + g_.count[a]) % g_.count[a];
      } else if (idx[a] < 0 || idx[a] >= g_.count[a]) {
        on = false;
      }
    }
    return on;
  }

  std::int64_t linear(const Idx& idx) const {
    return idx[0] + static_cast<std::int64_t>(g_.count[0]) * (idx[1] + static_cast<std::int64_t>(g_.count[1]) * idx[2]);
  }

  // Key for indices in [−1, count] on every axis.
  std::int64_t key(const Idx& idx) const {
    const std::int64_t n0 = g_.count[0] + 2, n1 = g_.count[1] + 2;
    return (idx[0] + 1) + n0 * ((idx[1] + 1) + n1 * static_cast<std::int64_t>(idx[2] + 1));
  }

  Idx from_key(std::int64_t k) const {
    const std::int64_t n0 = g_.count[0] + 2, n1 = g_.count[1] + 2;
    Idx idx;
    idx[0] = static_cast<int>(k % n0) - 1;
    k /= n0;
    idx[1] = static_cast<int>(k % n1) - 1;
    idx[2] = static_cast<int>(k / n1) - 1;
    return idx;
  }

  std::size_t total() const {
    return static_cast<std::size_t>(g_.count[0]) * g_.count[1] * g_.count[2];
  }

 private:
  const GridSpec& g_;
};

OperatorMesh assemble_grid(const GridProblem& P) {
  const GridSpec& g = P.grid;
  GridIndexer ix(g);
  OperatorMesh mesh;
  mesh.space = P.space;
  mesh.domain = P.domain;
  mesh.coordinates = P.coordinates;
  mesh.h = P.h;
  mesh.grid = g;
  mesh.lookup.assign(ix.total(), -1);

  const double vol = g.cell_volume();
  for (int k = 0; k < g.count[2]; ++k) {
    for (int j = 0; j < g.count[1]; ++j) {
      for (int i = 0; i < g.count[0]; ++i) {
        const Idx idx{i, j, k};
        const Point p = g.coord(idx);
        if (!P.inside(p)) continue;
        mesh.lookup[ix.linear(idx)] = static_cast<std::int64_t>(mesh.nodes.size());
        mesh.nodes.push_back(p);
        mesh.grid_index.push_back(idx);
        mesh.weights.push_back(P.density(p) * vol);
      }
    }
  }
  const std::size_t n = mesh.nodes.size();
  if (n == 0) throw InvalidArgument("mesh has no interior node; refine h or enlarge the domain");

  const double factor = generator_factor(P.space.scale);
  std::vector<Eigen::Triplet<double>> trip;

  auto column = [&](Idx idx) -> std::int64_t {
    if (!ix.normalize(idx)) return -1;
    return mesh.lookup[ix.linear(idx)];
  };

  for (const auto& term : P.axis_terms) {
    const int a = term.axis;
    const double ha = g.spacing[a];
    for (std::size_t r = 0; r < n; ++r) {
      for (int dir : {+1, -1}) {
        Idx nb = mesh.grid_index[r];
        nb[a] += dir;
        Point mid = mesh.nodes[r];
        mid[a] += 0.5 * dir * ha;
        const double c = factor * term.weight(mid) * vol / (ha * ha);
        trip.emplace_back(r, r, c);
        const std::int64_t col = column(nb);
        if (col >= 0 && dir == +1) {
          trip.emplace_back(r, col, -c);
          trip.emplace_back(col, r, -c);
        }
      }
    }
  }

  for (const auto& term : P.field_terms) {
    // Axes along which the field has a component somewhere on the grid.
    std::array<bool, 3> active{false, false, false};
    for (std::size_t r = 0; r < n; ++r) {
      const Point c = term.coeff(mesh.nodes[r]);
      for (int a = 0; a < 3; ++a) active[a] = active[a] || c[a] != 0.0;
    }
    for (int sign : {+1, -1}) {
      std::vector<std::int64_t> keys;
      for (std::size_t r = 0; r < n; ++r) {
        const Idx& base = mesh.grid_index[r];
        keys.push_back(ix.key(base));
        for (int a = 0; a < 3; ++a) {
          if (!active[a]) continue;
          Idx m = base;
          m[a] -= sign;
          if (g.periodic[a]) ix.normalize(m);
          keys.push_back(ix.key(m));
        }
      }
      std::sort(keys.begin(), keys.end());
      keys.erase(std::unique(keys.begin(), keys.end()), keys.end());

      std::vector<std::pair<std::int64_t, double>> row;
      for (std::int64_t key : keys) {
        const Idx at = ix.from_key(key);
        const Point x = g.coord(at);
        const Point c = term.coeff(x);
        row.clear();
        double diag = 0.0;
        for (int a = 0; a < 3; ++a) {
          if (c[a] == 0.0) continue;
          const double s = c[a] / g.spacing[a];
          diag += s;
          Idx nb = at;
          nb[a] += sign;
          const std::int64_t col = column(nb);
          if (col >= 0) row.emplace_back(col, sign * s);
        }
        const std::int64_t self = column(at);
        if (self >= 0) row.emplace_back(self, -sign * diag);
        if (row.empty()) continue;
        const double w = 0.5 * factor * term.weight(x) * vol;
        for (const auto& [ci, vi] : row)
          for (const auto& [cj, vj] : row) trip.emplace_back(ci, cj, w * vi * vj);
      }
    }
  }

  mesh.stiffness.resize(n, n);
  mesh.stiffness.setFromTriplets(trip.begin(), trip.end());
  mesh.stiffness.makeCompressed();
  return mesh;
}

void check_h(double h) {
  if (!(h > 0.0) || !std::isfinite(h)) throw InvalidArgument("mesh spacing h must be positive");
}

int axis_count(double lo, double hi, double h) {
  return static_cast<int>(std::floor((hi - lo) / h + 1e-9)) + 1;
}

}  // namespace

Point GridSpec::coord(const std::array<int, 3>& idx) const {
  Point p{};
  for (int a = 0; a < 3; ++a) p[a] = origin[a] + idx[a] * spacing[a];
  return p;
}

double GridSpec::cell_volume() const {
  double v = 1.0;
  for (int a = 0; a < dim; ++a) v *= spacing[a];
  return v;
}

Eigen::VectorXd OperatorMesh::weight_vector() const {
  return Eigen::Map<const Eigen::VectorXd>(weights.data(), static_cast<Eigen::Index>(weights.size()));
}

Eigen::VectorXd OperatorMesh::apply(const Eigen::VectorXd& u) const {
  return (stiffness * u).cwiseQuotient(weight_vector());
}

SparseMatrix OperatorMesh::operator_matrix() const {
  Eigen::VectorXd inv = weight_vector().cwiseInverse();
  return inv.asDiagonal() * stiffness;
}

double OperatorMesh::energy(const Eigen::VectorXd& u) const { return u.dot(stiffness * u); }

double OperatorMesh::inner(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const {
  return (u.cwiseProduct(weight_vector())).dot(v);
}

double OperatorMesh::measure() const {
  double s = 0.0;
  for (double w : weights) s += w;
  return s;
}

OperatorMesh OperatorMesh::with_scale(GeneratorScale s) const {
  OperatorMesh m = *this;
  m.stiffness *= generator_factor(s) / generator_factor(space.scale);
  m.space.scale = s;
  return m;
}

std::int64_t OperatorMesh::find(const std::array<int, 3>& idx) const {
  if (!grid) return -1;
  GridIndexer ix(*grid);
  Idx i = idx;
  if (!ix.normalize(i)) return -1;
  return lookup[ix.linear(i)];
}

// ---------------------------------------------------------------------------

OperatorMesh assemble_euclidean(const Domain& domain, double h) {
  check_h(h);
  const SpaceModel& space = domain.space();
  if (space.kind != SpaceKind::euclidean) throw InvalidArgument("assemble_euclidean needs a euclidean domain");
  const auto& b = domain.bounding_box();
  GridSpec g;
  g.dim = space.dim;
  for (int a = 0; a < space.dim; ++a) {
    g.origin[a] = b.lo[a];
    g.spacing[a] = h;
    g.count[a] = axis_count(b.lo[a], b.hi[a], h);
    if (g.count[a] < 5) throw InvalidArgument("fewer than 3 interior nodes along an axis; decrease h");
  }
  GridProblem P{space, std::make_shared<Domain>(domain), g, NodeCoordinates::cartesian,
                [&](const Point& p) { return domain.contains(p); },
                [](const Point&) { return 1.0; }, {}, {}, h};
  for (int a = 0; a < space.dim; ++a) P.axis_terms.push_back({a, [](const Point&) { return 1.0; }});
  return assemble_grid(P);
}

OperatorMesh assemble_heisenberg(const Domain& domain, double h, double h_z) {
  check_h(h);
  if (h_z == 0.0) h_z = h;
  check_h(h_z);
  const SpaceModel& space = domain.space();
  if (space.kind != SpaceKind::heisenberg3) throw InvalidArgument("assemble_heisenberg needs a heisenberg3 domain");
  const auto& b = domain.bounding_box();
  GridSpec g;
  g.dim = 3;
  const double sp[3] = {h, h, h_z};
  for (int a = 0; a < 3; ++a) {
    g.origin[a] = b.lo[a];
    g.spacing[a] = sp[a];
    g.count[a] = axis_count(b.lo[a], b.hi[a], sp[a]);
    if (g.count[a] < 5) throw InvalidArgument("fewer than 5 nodes along an axis; decrease h");
  }
  GridProblem P{space, std::make_shared<Domain>(domain), g, NodeCoordinates::cartesian,
                [&](const Point& p) { return domain.contains(p); },
                [](const Point&) { return 1.0; }, {}, {}, h};
  const auto one = [](const Point&) { return 1.0; };
  P.field_terms.push_back({[](const Point& p) { return Point{1.0, 0.0, -0.5 * p[1]}; }, one});
  P.field_terms.push_back({[](const Point& p) { return Point{0.0, 1.0, 0.5 * p[0]}; }, one});
  return assemble_grid(P);
}

LrCoefficients lr_coefficients(double r, double rho) {
  if (r == 0.0) return lh_coefficients(rho);
  const double T = std::tan(r * rho);
  const double cot = 1.0 / T;
  return {2.0 * r / std::tan(2.0 * r * rho), 2.0 * r * r + r * r * cot * cot + r * r * T * T, T * T / (r * r),
          2.0 * (1.0 + T * T)};
}

LrCoefficients lh_coefficients(double rho) { return {1.0 / rho, 1.0 / (rho * rho), rho * rho, 2.0}; }

CylindricalGrid default_cylindrical_grid(const Domain& domain, double h) {
  check_h(h);
  const auto& b = domain.bounding_box();
  double rmax = 0.0;
  for (double x : {b.lo[0], b.hi[0]})
    for (double y : {b.lo[1], b.hi[1]}) rmax = std::max(rmax, std::hypot(x, y));
  rmax = std::min(rmax, std::max({std::abs(b.lo[0]), std::abs(b.hi[0]), std::abs(b.lo[1]), std::abs(b.hi[1])}));
  int nt = static_cast<int>(std::ceil(2.0 * kPi * rmax / h));
  nt = std::max(8, nt + (nt % 2));
  return {h, nt, h};
}

namespace {

OperatorMesh assemble_cylindrical(double r, const Domain& domain, const CylindricalGrid& cg, SpaceModel space) {
  check_h(cg.h_rho);
  check_h(cg.h_z);
  if (cg.n_theta < 4 || cg.n_theta % 2 != 0) throw InvalidArgument("n_theta must be even and >= 4");
  if (r < 0.0 || r > 1.0) throw InvalidArgument("contraction scale r must lie in [0, 1]");
  if (domain.space().kind != SpaceKind::heisenberg3 && domain.space().kind != SpaceKind::su2_chart)
    throw InvalidArgument("cylindrical assembly needs a heisenberg3 or su2_chart domain");
  const auto& b = domain.bounding_box();
  const double rho_min = 2.0 * cg.h_rho;
  double rho_max = 0.0;
  for (double x : {b.lo[0], b.hi[0]})
    for (double y : {b.lo[1], b.hi[1]}) rho_max = std::max(rho_max, std::hypot(x, y));

  GridSpec g;
  g.dim = 3;
  g.origin = {rho_min, 0.0, b.lo[2]};
  g.spacing = {cg.h_rho, 2.0 * kPi / cg.n_theta, cg.h_z};
  g.count = {axis_count(rho_min, rho_max, cg.h_rho), cg.n_theta, axis_count(b.lo[2], b.hi[2], cg.h_z)};
  g.periodic = {false, true, false};

  const auto cart = [](const Point& c) { return Point{c[0] * std::cos(c[1]), c[0] * std::sin(c[1]), c[2]}; };
  // A node on a ρ-boundary would be in or out depending on the rounding of
  // cos/sin at its θ; probing ρ ± δ keeps the node set rotation invariant.
  const double delta = 1e-9 * cg.h_rho;
  const auto inside = [&, cart](const Point& c) {
    return c[0] >= rho_min - 1e-12 && domain.contains(cart({c[0] - delta, c[1], c[2]})) &&
           domain.contains(cart({c[0] + delta, c[1], c[2]}));
  };

  // Reject meshes whose interior reaches the tan/cot blowup.
  for (int i = 0; i < g.count[0]; ++i) {
    const double rho = rho_min + i * cg.h_rho;
    if (r * rho < 0.5 * kPi) continue;
    for (int j = 0; j < g.count[1]; ++j)
      for (int k = 0; k < g.count[2]; ++k)
        if (inside(g.coord({i, j, k}))) throw InvalidArgument("r*rho >= pi/2 inside the domain");
  }

  std::function<double(const Point&)> w;
  std::function<Point(const Point&)> field;
  if (r == 0.0) {
    w = [](const Point& c) { return c[0]; };
    field = [](const Point& c) { return Point{0.0, 1.0 / c[0], c[0]}; };
  } else {
    w = [r](const Point& c) { return std::sin(2.0 * r * c[0]) / (2.0 * r); };
    field = [r](const Point& c) {
      const double T = std::tan(r * c[0]);
      return Point{0.0, r * (1.0 + T * T) / T, T / r};
    };
  }
  GridProblem P{space, std::make_shared<Domain>(domain), g, NodeCoordinates::cylindrical, inside, w, {}, {},
                cg.h_rho};
  P.axis_terms.push_back({0, w});
  P.field_terms.push_back({field, w});
  return assemble_grid(P);
}

}  // namespace

OperatorMesh assemble_su2_rescaled(double r, const Domain& domain, const CylindricalGrid& grid) {
  if (!(r > 0.0)) throw InvalidArgument("assemble_su2_rescaled needs r > 0");
  return assemble_cylindrical(r, domain, grid, SpaceModel::su2(domain.space().scale));
}

OperatorMesh assemble_su2_rescaled(double r, const Domain& domain, double h) {
  return assemble_su2_rescaled(r, domain, default_cylindrical_grid(domain, h));
}

OperatorMesh assemble_heisenberg_cylindrical(const Domain& domain, const CylindricalGrid& grid) {
  return assemble_cylindrical(0.0, domain, grid, SpaceModel::heisenberg(domain.space().scale));
}

// ---------------------------------------------------------------------------

OperatorMesh assemble_gasket(int level) {
  if (level < 1 || level > 8) throw InvalidArgument("gasket level must lie in [1, 8]");
  const int n = 1 << level;
  // Vertices on the triangular lattice u·e₁ + v·e₂ scaled by 2^{−m}.
  std::map<std::pair<int, int>, int> id;
  std::vector<std::pair<int, int>> verts;
  std::vector<std::pair<int, int>> edges;
  auto vid = [&](int u, int v) {
    auto [it, fresh] = id.try_emplace({u, v}, static_cast<int>(verts.size()));
    if (fresh) verts.push_back({u, v});
    return it->second;
  };
  std::function<void(int, int, int)> cell = [&](int u, int v, int s) {
    if (s == 1) {
      const int a = vid(u, v), b = vid(u + 1, v), c = vid(u, v + 1);
      edges.push_back({a, b});
      edges.push_back({b, c});
      edges.push_back({a, c});
      return;
    }
    const int hs = s / 2;
    cell(u, v, hs);
    cell(u + hs, v, hs);
    cell(u, v + hs, hs);
  };
  cell(0, 0, n);

  const auto is_corner = [&](int i) {
    const auto [u, v] = verts[i];
    return (u == 0 && v == 0) || (u == n && v == 0) || (u == 0 && v == n);
  };
  std::vector<int> row(verts.size(), -1);
  OperatorMesh mesh;
  mesh.space = SpaceModel::gasket(level);
  mesh.coordinates = NodeCoordinates::gasket;
  mesh.h = 1.0 / n;
  const double w = std::pow(3.0, -level);
  const double s3 = std::sqrt(3.0);
  // Deterministic node order: lattice order (v, then u).
  std::vector<int> order(verts.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return std::pair(verts[a].second, verts[a].first) < std::pair(verts[b].second, verts[b].first);
  });
  for (int i : order) {
    if (is_corner(i)) continue;
    row[i] = static_cast<int>(mesh.nodes.size());
    const auto [u, v] = verts[i];
    mesh.nodes.push_back({(u + 0.5 * v) / n, s3 * 0.5 * v / n, 0.0});
    mesh.weights.push_back(w);
  }
  const double c = w * std::pow(5.0, level);
  std::vector<Eigen::Triplet<double>> trip;
  for (auto [a, b] : edges) {
    if (row[a] >= 0) trip.emplace_back(row[a], row[a], c);
    if (row[b] >= 0) trip.emplace_back(row[b], row[b], c);
    if (row[a] >= 0 && row[b] >= 0) {
      trip.emplace_back(row[a], row[b], -c);
      trip.emplace_back(row[b], row[a], -c);
    }
  }
  const auto N = static_cast<Eigen::Index>(mesh.nodes.size());
  mesh.stiffness.resize(N, N);
  mesh.stiffness.setFromTriplets(trip.begin(), trip.end());
  mesh.stiffness.makeCompressed();
  mesh.domain = std::make_shared<Domain>(make_domain(mesh.space, gasket_cells(level), "gasket"));
  return mesh;
}

SignReport offdiag_sign_report(const OperatorMesh& mesh) {
  SignReport rep;
  double max_diag = 0.0;
  const SparseMatrix M = mesh.operator_matrix();
  for (int k = 0; k < M.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(M, k); it; ++it) {
      if (it.row() == it.col()) {
        max_diag = std::max(max_diag, it.value());
      } else if (it.value() > 0.0) {
        ++rep.positive_offdiag;
        rep.max_positive = std::max(rep.max_positive, it.value());
      }
    }
  }
  rep.max_positive_relative = max_diag > 0 ? rep.max_positive / max_diag : 0.0;
  return rep;
}

// ---------------------------------------------------------------------------

namespace {

std::string coord_name(NodeCoordinates c) {
  switch (c) {
    case NodeCoordinates::cartesian: return "cartesian";
    case NodeCoordinates::cylindrical: return "cylindrical";
    case NodeCoordinates::gasket: return "gasket";
  }
  return "?";
}

}  // namespace

void write_mesh(std::ostream& os, const OperatorMesh& mesh) {
  const SparseMatrix M = mesh.operator_matrix();
  std::ostringstream out;
  out.imbue(std::locale::classic());
  out.precision(17);
  out << "dirlab-operator-mesh 1\n";
  out << "space " << to_string(mesh.space.kind) << " dim " << mesh.space.dim << " level " << mesh.space.level
      << " scale " << to_string(mesh.space.scale) << " coordinates " << coord_name(mesh.coordinates) << "\n";
  out << "h " << mesh.h << "\n";
  out << "nodes " << mesh.size() << " entries " << M.nonZeros() << "\n";
  for (int k = 0; k < M.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(M, k); it; ++it)
      out << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
  for (std::size_t i = 0; i < mesh.size(); ++i) {
    const auto& p = mesh.nodes[i];
    out << p[0] << ' ' << p[1] << ' ' << p[2] << ' ' << mesh.weights[i] << '\n';
  }
  os << out.str();
}

OperatorMesh read_mesh(std::istream& is) {
  is.imbue(std::locale::classic());
  std::string tag, word, kind, scale, coords;
  int version = 0;
  OperatorMesh mesh;
  const auto expect = [&](const char* w) {
    is >> word;
    if (word != w) throw InvalidArgument(std::string("mesh file: expected '") + w + "', found '" + word + "'");
  };
  is >> tag >> version;
  if (tag != "dirlab-operator-mesh" || version != 1) throw InvalidArgument("mesh file: bad header");
  expect("space");
  is >> kind;
  expect("dim");
  is >> mesh.space.dim;
  expect("level");
  is >> mesh.space.level;
  expect("scale");
  is >> scale;
  expect("coordinates");
  is >> coords;
  expect("h");
  is >> mesh.h;
  std::size_t n = 0, nnz = 0;
  expect("nodes");
  is >> n;
  expect("entries");
  is >> nnz;
  if (!is) throw InvalidArgument("mesh file: truncated header");

  static const std::map<std::string, SpaceKind> kinds{{"euclidean", SpaceKind::euclidean},
                                                      {"heisenberg3", SpaceKind::heisenberg3},
                                                      {"su2_chart", SpaceKind::su2_chart},
                                                      {"gasket", SpaceKind::gasket}};
  if (!kinds.count(kind)) throw InvalidArgument("mesh file: unknown space '" + kind + "'");
  mesh.space.kind = kinds.at(kind);
  mesh.space.scale = generator_scale_from_string(scale);
  mesh.coordinates = coords == "cylindrical" ? NodeCoordinates::cylindrical
                     : coords == "gasket"    ? NodeCoordinates::gasket
                                             : NodeCoordinates::cartesian;

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(nnz);
  for (std::size_t e = 0; e < nnz; ++e) {
    long i, j;
    double v;
    is >> i >> j >> v;
    trip.emplace_back(i, j, v);
  }
  mesh.nodes.resize(n);
  mesh.weights.resize(n);
  for (std::size_t i = 0; i < n; ++i) is >> mesh.nodes[i][0] >> mesh.nodes[i][1] >> mesh.nodes[i][2] >> mesh.weights[i];
  if (!is) throw InvalidArgument("mesh file: truncated body");
  SparseMatrix M(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  M.setFromTriplets(trip.begin(), trip.end());
  mesh.stiffness = mesh.weight_vector().asDiagonal() * M;
  mesh.stiffness.makeCompressed();
  return mesh;
}

}  // namespace dirlab
