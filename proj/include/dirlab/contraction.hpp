#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "dirlab/discrete.hpp"
#include "dirlab/spectral.hpp"
#include "dirlab/stochastic.hpp"
#include "dirlab/su2.hpp"

namespace dirlab {

/// Contraction of SU(2) onto the Heisenberg group in the cylindrical chart.
/// Chart points are Cartesian triples (ρ cosθ, ρ sinθ, z).
struct ContractionMaps {
  /// Φ_ε: (ρ, θ, z) ↦ (√ε ρ, θ, εz).
  static Point phi(double eps, const Point& p);
  static Point phi_inverse(double eps, const Point& p);
  /// U_ε: (a, b, c) ↦ √ε aX + √ε bY + εcZ, as Milnor coefficients.
  static std::array<double, 3> u(double eps, const std::array<double, 3>& v);
  static std::array<double, 3> u_inverse(double eps, const std::array<double, 3>& v);
};

/// ‖U_ε⁻¹[U_ε v, U_ε w] − (0, 0, a₁b₂ − b₁a₂)‖.
double bracket_defect(double eps, const std::array<double, 3>& v, const std::array<double, 3>& w);

/// Least-squares slope of log y against log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

struct CoefficientRow {
  double r;
  double rho;
  std::array<double, 5> value;  // ∂ρ², ∂ρ, ∂θ², ∂z², ∂θ∂z coefficients of L^r
  std::array<double, 5> limit;  // same for L^H: 1, 1/ρ, 1/ρ², ρ², 2
  double max_deviation;
};

struct CoefficientTable {
  std::vector<CoefficientRow> rows;
  std::vector<double> r_values;
  std::vector<double> max_deviation;  // per r
  double rate;                        // log-log slope of max_deviation against r
};

/// Throws InvalidArgument unless rρ < π/2 on the whole grid.
CoefficientTable coefficient_convergence(const std::vector<double>& r_list, const std::vector<double>& rho_grid);

struct HaarRow {
  double r;
  double rho;
  double ratio;  // sin(2rρ)/(2rρ)
};

struct HaarTable {
  std::vector<HaarRow> rows;
  std::vector<double> r_values;
  std::vector<double> max_deviation;
  double rate;
};

double haar_ratio(double r, double rho);
HaarTable haar_density_ratio(const std::vector<double>& r_list, const std::vector<double>& rho_grid);

/// How the SU(2) gauge ball B_r is defined before pulling it back through the chart.
///   chart_gauge: Korányi gauge of the cylindrical chart coordinates (the pullback
///     is then exactly a Korányi ball).
///   exponential_gauge: Korányi gauge of the exponential coordinates log g ∈ su(2);
///     the chart and exponential coordinates differ at third order.
enum class SandwichModel { chart_gauge, exponential_gauge };

struct SandwichReport {
  double r;
  double eps_tol;
  double min_gauge;  // inner radius of δ_{1/r}Φ⁻¹(B_r) in the Heisenberg gauge
  double max_gauge;  // outer radius
  double margin;     // max(1 − min_gauge, max_gauge − 1)
  bool contained;    // B_{1−ε} ⊂ region ⊂ B_{1+ε}
  Point witness_min{};
  Point witness_max{};
};

/// Bisection along dilation rays s ↦ δ_s(p) from `samples` directions on the
/// unit Korányi sphere.
SandwichReport ball_sandwich_check(double r, double eps_tol, SandwichModel model = SandwichModel::exponential_gauge,
                                   int samples = 4000);

struct ContractionRow {
  double r;  // r = 0 marks the Heisenberg limit row
  int n;
  double eigenvalue;
  double gap_to_limit;  // |λ_n(r) − λ_n^H| / λ_n^H
  double rate_estimate; // log-log slope of the gap between this r and the previous one
};

struct ContractionTable {
  std::vector<ContractionRow> rows;
  std::vector<double> limit;             // λ_n^H
  std::vector<std::vector<double>> eig;  // per r
  std::vector<double> r_values;
  bool monotone;          // gap non-increasing in r for n ≤ 3
  bool ordered;           // ascending eigenvalues on every row
  double final_gap_max;   // max over n ≤ 3 of the gap at the smallest r
  std::vector<int> limit_clusters;  // cluster sizes of the limit spectrum
  bool clusters_reproduced;         // same clusters at the smallest r
};

/// r²λ_n^r on D for each r (decreasing), and the Heisenberg limit row.
ContractionTable eigenvalue_contraction_experiment(const std::vector<double>& r_list, const Domain& domain,
                                                   const CylindricalGrid& grid, int k = 5);

/// Eigenvalue clusters with relative tolerance `tol`.
std::vector<int> cluster_sizes(const std::vector<double>& values, double tol);

struct SmallDeviationConfig {
  std::vector<double> epsilons{0.5, 0.4, 0.3};
  double t = 1.0;
  std::uint64_t particles = 20000;  // per replicate
  int replicates = 8;
  double h_rel = 2e-3;       // time step h_t = h_rel·ε²
  double stage_rel = 0.5;    // stage length in units of ε²
  std::uint64_t seed = 1;
  GeneratorScale scale = GeneratorScale::probabilist;
};

struct SmallDeviationExperimentRow {
  std::string process;
  double eps;
  double probability;
  double neg_log;       // −ε² log P̂
  double neg_log_ci95;  // ε²·log_ci95
  double decay;         // ε²·(decay rate of the surviving population)
  double decay_ci95;
  std::uint64_t chart_exits;
};

struct SmallDeviationExperiment {
  double lambda_h;
  std::vector<SmallDeviationExperimentRow> su2;
  std::vector<SmallDeviationExperimentRow> heisenberg;
  bool su2_flat;         // literal −ε² log P̂
  bool heisenberg_flat;
  bool su2_decay_flat;   // decay-rate column
  bool heisenberg_decay_flat;
  double su2_max_rel_error;         // max |neg_log − λ₁^H| / λ₁^H
  double heisenberg_max_rel_error;
};

/// −ε² log P(sup_{s≤t} gauge(g_s) < ε) for the SU(2) diffusion in the chart-gauge
/// ball and, as a control, for Heisenberg BM in the Korányi ball.
SmallDeviationExperiment su2_small_deviation_experiment(const SmallDeviationConfig& cfg, double lambda_h);

/// Flat: every pair of values differs by at most the root-sum-square of their CIs.
bool flat_within_ci(const std::vector<double>& values, const std::vector<double>& ci95);

}  // namespace dirlab
