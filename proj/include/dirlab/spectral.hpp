#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "dirlab/discrete.hpp"
#include "dirlab/kernels.hpp"

namespace dirlab {

struct EigensolveOptions {
  int dense_threshold = 2000;
  int block_size = 0;  // 0: k + 8
  int max_basis = 400;
  int max_restarts = 60;
  double residual_tol = 1e-8;  // ‖Mφ − λφ‖_w ≤ tol·λ
  std::uint64_t seed = 20240611;
};

struct SpectralData {
  std::shared_ptr<const OperatorMesh> mesh;
  int k = 0;
  std::vector<double> eigenvalues;
  Eigen::MatrixXd eigenfunctions;  // column n: φ_n at the mesh nodes
  std::vector<double> coefficients;  // c_n = Σ wᵢ φ_n(i)
  std::vector<double> residuals;     // ‖Mφ_n − λ_nφ_n‖_w
  bool dense = true;
};

std::shared_ptr<const OperatorMesh> share(OperatorMesh mesh);

/// k smallest eigenpairs. Dense solve up to `dense_threshold` nodes, otherwise
/// shift-invert block Krylov with full reorthogonalization in the weighted inner
/// product. Throws NumericalError (with achieved residuals) on non-convergence.
SpectralData eigensolve(std::shared_ptr<const OperatorMesh> mesh, int k, const EigensolveOptions& opt = {});

/// Multiplicity clustering tolerance (relative).
inline constexpr double kTolGap = 1e-6;

/// Number of eigenvalues within kTolGap·λ₁ of λ₁.
int ground_multiplicity(const SpectralData& sd);

struct GroundStateReport {
  bool simple;
  double gap;
  bool positive_after_sign_fix;
  double min_value;          // min φ₁ / ‖φ₁‖_∞ after the sign fix
  double min_abs_interior;   // min |φ₁| / ‖φ₁‖_∞
};
GroundStateReport ground_state_audit(const SpectralData& sd);

struct SeriesValue {
  double value;
  double tail_bound;
  bool warning;  // tail bound above 10% of the partial sum
  bool clipped = false;
};

/// Σ_{n≤k} e^{−λ_n t}φ_n(p)φ_n(q), with the tail bound (N−k)e^{−λ_k t}/√(w_p w_q).
SeriesValue dirichlet_kernel_expansion(const SpectralData& sd, double t, std::size_t p, std::size_t q);

/// Σ_{n≤k} e^{−λ_n t}c_nφ_n(p), clipped to [0, 1].
SeriesValue survival_series(const SpectralData& sd, double t, std::size_t p);

struct HeatContent {
  double Q;
  double asymptote;
  int multiplicity;
};
HeatContent heat_content_series(const SpectralData& sd, double t);

struct LpAuditRow {
  int n;
  double lambda;
  double sup_norm;
  double l1_norm;
  double C_lambda;
  double sup_bound;   // μ^{1/2} C(λ)
  double l1_bound;    // μ^{5/2} C(λ)²
  double l2_bound;    // μ C(λ), compared against ‖φ‖₂ = 1
  bool sup_pass;
  bool l1_pass;
  bool l2_pass;
};
std::vector<LpAuditRow> lp_bound_audit(const SpectralData& sd, const KernelBound& bound, int n_max = 0);

/// e^{−Mt}f via the eigen decomposition (all eigenpairs required: k = N).
Eigen::VectorXd semigroup_apply(const SpectralData& sd, double t, const Eigen::VectorXd& f);

/// Binary eigenfunction file, little-endian:
///   char[8] "DLEIGF01", uint64 N, uint64 k, float64 λ[k], float64 φ[k][N] (φ_1 first).
void write_eigenfunctions(std::ostream& os, const SpectralData& sd);
struct EigenfunctionFile {
  std::vector<double> eigenvalues;
  Eigen::MatrixXd eigenfunctions;
};
EigenfunctionFile read_eigenfunctions(std::istream& is);

}  // namespace dirlab
