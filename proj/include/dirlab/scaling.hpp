#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dirlab/discrete.hpp"
#include "dirlab/spectral.hpp"
#include "dirlab/stochastic.hpp"

namespace dirlab {

enum class DilationGroup { positive_reals, integer_powers };

/// Group element: r for positive_reals, r₀ⁿ for integer_powers.
struct DilationElement {
  double r = 1.0;
  int n = 0;
};

/// Dilation structure with J_g = r^{−α}, κ = 1 − β/α and ℓ_g = J_g^{κ−1} = r^β.
struct DilationStructure {
  DilationGroup group = DilationGroup::positive_reals;
  double r0 = 1.0;         // generator of integer_powers
  double hausdorff = 1.0;  // α
  double walk = 2.0;       // β
  SpaceModel space;

  DilationElement element(double r) const;
  DilationElement power(int n) const;
  DilationElement compose(const DilationElement& a, const DilationElement& b) const;
  DilationElement identity() const;

  double factor(const DilationElement& g) const;
  Point action(const DilationElement& g, const Point& p) const;
  double jacobian(const DilationElement& g) const;
  double kappa(const DilationElement& g) const;
  double ell(const DilationElement& g) const;
};

DilationStructure euclidean_dilation(int n);
DilationStructure carnot_dilation(double Q = 4.0);
/// Gasket: r₀ = 1/2 toward the corner at the origin, α = log3/log2, β = log5/log2.
DilationStructure gasket_dilation();

struct EnergyScalingReport {
  double r;
  double expected;  // r^{−α+β}
  double ratio_min;
  double ratio_max;
  double ratio_mean;
  bool pass;  // every ratio within 2% of expected
};

/// E_small(f∘δ_r)/E_large(f) over random f for meshes related by δ_r node by node.
EnergyScalingReport verify_energy_scaling(const DilationStructure& ds, const OperatorMesh& small,
                                          const OperatorMesh& large, double r, int samples = 100,
                                          std::uint64_t seed = 1);

struct FactorizationReport {
  double r;
  double t;
  double ell;
  double max_relative_deviation;
  std::vector<double> eigen_ratio;  // λ_n(large)·ℓ / λ_n(small), n ≤ 5
  bool pass;                        // deviation < 2% and eigen ratios within 2% of 1
};

/// e^{−M_small t}f against the pullback of e^{−M_large ℓt} applied to the pushed-forward f.
FactorizationReport verify_semigroup_factorization(const DilationStructure& ds, const OperatorMesh& small,
                                                   const OperatorMesh& large, double r, double t,
                                                   int samples = 20, std::uint64_t seed = 2);

struct GasketLevelRow {
  int level;
  std::size_t nodes;
  std::vector<double> renormalized;  // eigenvalues of 5^m·L
  std::vector<double> graph;         // eigenvalues of L
};

struct GasketScalingReport {
  std::vector<GasketLevelRow> levels;
  std::vector<double> graph_ratio;         // λ₁^L(m)/λ₁^L(m+1), tends to 5
  std::vector<double> renormalized_ratio;  // λ₁(m+1)/λ₁(m), tends to 1
  std::vector<double> decimation_ratio;    // ratio predicted by λ = λ'(5 − λ')
  double envelope_c;                       // smallest c with c⁻¹5^m ≤ λ₁^{(m)}/λ₁^{(0)} ≤ c5^m
};

/// Decimation scaling across gasket levels; the envelope uses subcells of the
/// finest level (a level-m subcell of a level-M gasket is a level-(M−m) gasket).
GasketScalingReport gasket_eigen_scaling(const std::vector<int>& levels, int k = 3);

/// λ' with λ = λ'(5 − λ') on the branch continuing the bottom of the spectrum.
double decimation_preimage(double lambda);

struct OrchestratorConfig {
  DilationStructure ds;
  Process process;
  Point x{};
  double t = 1.0;
  std::vector<int> exponents;    // rows Φ_{gⁿ}(U), g = r₀ (integer_powers)
  std::vector<double> epsilons;  // rows δ_ε(U)
  std::uint64_t N = 100000;
  double h_t = 1e-3;
  std::uint64_t seed = 1;
  bool bridge_correction = true;
};

struct OrchestratorRow {
  std::string key;  // "n" or "eps"
  double value;
  double r;
  double ell;
  double probability;
  double ci95;
  double scaled;      // e^{λ₁t/ℓ}·P̂
  double scaled_ci95;
  double target;      // c₁φ₁(x)
  double series;      // survival series on the base mesh at time t/ℓ
};

struct OrchestratorResult {
  double lambda1;
  double target;
  std::vector<OrchestratorRow> rows;
};

/// Spectral data on U, MC survival of δ(x) in δ(U) at fixed t, scaled by e^{λ₁t/ℓ}.
OrchestratorResult small_deviation_orchestrator(const OrchestratorConfig& cfg, const Domain& base,
                                                const SpectralData& sd);

}  // namespace dirlab
