#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "dirlab/core.hpp"

namespace dirlab {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Tensor grid over a chart. Nodes sit at origin + i·spacing; periodic axes wrap.
struct GridSpec {
  int dim = 1;
  Point origin{};
  Point spacing{1.0, 1.0, 1.0};
  std::array<int, 3> count{1, 1, 1};
  std::array<bool, 3> periodic{false, false, false};

  Point coord(const std::array<int, 3>& idx) const;
  double cell_volume() const;
};

enum class NodeCoordinates { cartesian, cylindrical, gasket };

/// Discrete −A_U with zero extension outside the domain.
///
/// The generator acts as M = W⁻¹K where K (stiffness) is symmetric positive
/// semidefinite and W = diag(weights). M is self-adjoint in ⟨u,v⟩_w = Σ wᵢuᵢvᵢ.
struct OperatorMesh {
  SpaceModel space;
  std::shared_ptr<const Domain> domain;
  NodeCoordinates coordinates = NodeCoordinates::cartesian;
  std::vector<Point> nodes;
  std::vector<double> weights;
  SparseMatrix stiffness;
  double h = 0.0;
  std::optional<GridSpec> grid;
  std::vector<std::array<int, 3>> grid_index;

  std::size_t size() const { return nodes.size(); }
  Eigen::VectorXd weight_vector() const;
  Eigen::VectorXd apply(const Eigen::VectorXd& u) const;
  SparseMatrix operator_matrix() const;
  double energy(const Eigen::VectorXd& u) const;
  double inner(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const;
  double measure() const;

  /// Same mesh with the generator rescaled to `s`.
  OperatorMesh with_scale(GeneratorScale s) const;

  /// Row index of a grid node, or −1 for exterior / off-grid nodes.
  std::int64_t find(const std::array<int, 3>& idx) const;

  std::vector<std::int64_t> lookup;
};

/// Euclidean Laplacian, 2n+1-point stencil, weights hⁿ.
OperatorMesh assemble_euclidean(const Domain& domain, double h);

/// Level-m gasket graph Laplacian with Dirichlet corners: M = 5^m·L, weights 3^{−m}.
OperatorMesh assemble_gasket(int level);

/// −(X² + Y²) with X = ∂x − (y/2)∂z, Y = ∂y + (x/2)∂z on a Cartesian grid of
/// spacings (h, h, h_z); h_z defaults to h.
OperatorMesh assemble_heisenberg(const Domain& domain, double h, double h_z = 0.0);

/// Cylindrical (ρ, θ, z) grid; ρ-nodes at ρ_min + i·h_ρ with ρ_min = 2h.
struct CylindricalGrid {
  double h_rho = 0.05;
  int n_theta = 64;
  double h_z = 0.05;
};

/// r²·L on SU(2) in the cylindrical chart (the rescaled operator L^r):
///   L^r = ∂ρ² + 2r cot(2rρ)∂ρ + V², V = α(ρ)∂θ + γ(ρ)∂z,
///   α = r(1 + tan²(rρ))/tan(rρ), γ = tan(rρ)/r,
/// in divergence form with density w(ρ) = sin(2rρ)/(2r). r = 0 gives the
/// Heisenberg operator in cylindrical coordinates (w = ρ, α = 1/ρ, γ = ρ).
OperatorMesh assemble_su2_rescaled(double r, const Domain& domain, const CylindricalGrid& grid);

/// Default cylindrical grid: h_ρ = h_z = h and an even θ-count close to 2π·ρ_max/h.
OperatorMesh assemble_su2_rescaled(double r, const Domain& domain, double h);

/// Heisenberg operator on the same cylindrical grid (limit r → 0).
OperatorMesh assemble_heisenberg_cylindrical(const Domain& domain, const CylindricalGrid& grid);

CylindricalGrid default_cylindrical_grid(const Domain& domain, double h);

/// Coefficients of L^r = ∂ρ² + a₁∂ρ + a₂∂θ² + a₃∂z² + a₄∂θ∂z.
struct LrCoefficients {
  double d_rho;      // 2r cot(2rρ)
  double d_theta2;   // 2r² + r²cot²(rρ) + r²tan²(rρ)
  double d_z2;       // r^{−2}tan²(rρ)
  double d_thetaz;   // 2(1 + tan²(rρ))
};
LrCoefficients lr_coefficients(double r, double rho);
LrCoefficients lh_coefficients(double rho);

/// Off-diagonal entries with the wrong sign for an M-matrix.
struct SignReport {
  std::size_t positive_offdiag = 0;
  double max_positive = 0.0;
  double max_positive_relative = 0.0;  // relative to the largest diagonal entry
};
SignReport offdiag_sign_report(const OperatorMesh& mesh);

/// Sparse triplet text format:
///   dirlab-operator-mesh 1
///   space <kind> dim <n> level <m> scale <scale> coordinates <c>
///   h <h>
///   nodes <N> entries <nnz>
///   <i> <j> <value>            nnz lines, entries of M = W⁻¹K, 0-based
///   <x> <y> <z> <weight>       N lines
void write_mesh(std::ostream& os, const OperatorMesh& mesh);
OperatorMesh read_mesh(std::istream& is);

}  // namespace dirlab
