#include "dirlab/spectral.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include <Eigen/SparseCholesky>

namespace dirlab {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

void sign_fix(const VectorXd& w, Eigen::Ref<VectorXd> phi) {
  const double mean = w.dot(phi);
  const double scale = w.dot(phi.cwiseAbs());
  if (mean < -1e-12 * scale) {
    phi = -phi;
  } else if (std::abs(mean) <= 1e-12 * scale) {
    const double tiny = 1e-12 * phi.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < phi.size(); ++i) {
      if (std::abs(phi[i]) > tiny) {
        if (phi[i] < 0) phi = -phi;
        break;
      }
    }
  }
}

void finish(SpectralData& sd) {
  const OperatorMesh& m = *sd.mesh;
  const VectorXd w = m.weight_vector();
  sd.coefficients.resize(sd.k);
  sd.residuals.resize(sd.k);
  for (int n = 0; n < sd.k; ++n) {
    auto phi = sd.eigenfunctions.col(n);
    sign_fix(w, phi);
    sd.coefficients[n] = w.dot(phi);
    const VectorXd r = m.apply(phi) - sd.eigenvalues[n] * phi;
    sd.residuals[n] = std::sqrt(r.cwiseProduct(w).dot(r));
  }
}

SpectralData dense_solve(std::shared_ptr<const OperatorMesh> mesh, int k) {
  const VectorXd d = mesh->weight_vector().cwiseSqrt().cwiseInverse();
  const MatrixXd S = d.asDiagonal() * MatrixXd(mesh->stiffness) * d.asDiagonal();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (S + S.transpose()));
  if (es.info() != Eigen::Success) throw NumericalError("dense eigensolver failed");
  SpectralData sd;
  sd.mesh = std::move(mesh);
  sd.k = k;
  sd.dense = true;
  sd.eigenvalues.assign(es.eigenvalues().data(), es.eigenvalues().data() + k);
  sd.eigenfunctions = d.asDiagonal() * es.eigenvectors().leftCols(k);
  return sd;
}

// Orthonormalize the columns of Z against Q (twice) and among themselves.
// Collapsed columns are replaced by fresh random directions.
void orthonormalize_block(const MatrixXd& Q, MatrixXd& Z, std::mt19937_64& rng) {
  std::normal_distribution<double> N01;
  for (Eigen::Index c = 0; c < Z.cols(); ++c) {
    for (int attempt = 0; attempt < 4; ++attempt) {
      auto z = Z.col(c);
      const double before = z.norm();
      for (int pass = 0; pass < 2; ++pass) {
        if (Q.cols() > 0) z -= Q * (Q.transpose() * z);
        if (c > 0) z -= Z.leftCols(c) * (Z.leftCols(c).transpose() * z);
      }
      const double after = z.norm();
      if (after > 1e-10 * before && after > 0.0) {
        z /= after;
        break;
      }
      for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = N01(rng);
    }
  }
}

SpectralData krylov_solve(std::shared_ptr<const OperatorMesh> mesh, int k, const EigensolveOptions& opt) {
  const OperatorMesh& m = *mesh;
  const Eigen::Index n = static_cast<Eigen::Index>(m.size());
  const VectorXd sw = m.weight_vector().cwiseSqrt();
  const VectorXd d = sw.cwiseInverse();
  const SparseMatrix S = d.asDiagonal() * m.stiffness * d.asDiagonal();

  Eigen::SimplicialLDLT<SparseMatrix> ldlt(m.stiffness);
  if (ldlt.info() != Eigen::Success) throw NumericalError("sparse factorization of the stiffness matrix failed");
  const auto applyT = [&](const MatrixXd& X) -> MatrixXd {
    MatrixXd Y = ldlt.solve(sw.asDiagonal() * X);
    return sw.asDiagonal() * Y;
  };

  const int b = opt.block_size > 0 ? opt.block_size : k + 8;
  const int max_basis = std::max<int>(opt.max_basis, 3 * b);
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> N01;
  MatrixXd X(n, b);
  for (Eigen::Index j = 0; j < X.cols(); ++j)
    for (Eigen::Index i = 0; i < n; ++i) X(i, j) = N01(rng);

  std::vector<double> best_res;
  for (int restart = 0; restart <= opt.max_restarts; ++restart) {
    MatrixXd Q(n, 0), TQ(n, 0), H(0, 0);
    MatrixXd block = X;
    orthonormalize_block(Q, block, rng);
    while (true) {
      const MatrixXd Tblock = applyT(block);
      const Eigen::Index m0 = Q.cols(), nb = block.cols();
      Q.conservativeResize(n, m0 + nb);
      Q.rightCols(nb) = block;
      TQ.conservativeResize(n, m0 + nb);
      TQ.rightCols(nb) = Tblock;
      H.conservativeResize(m0 + nb, m0 + nb);
      const MatrixXd cross = Q.transpose() * Tblock;
      H.rightCols(nb) = cross;
      H.bottomRows(nb) = cross.transpose();

      Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (H + H.transpose()));
      const Eigen::Index mm = H.cols();
      if (mm >= k) {
        // Largest θ ⇔ smallest λ = 1/θ.
        MatrixXd U = es.eigenvectors().rightCols(k).rowwise().reverse();
        VectorXd theta = es.eigenvalues().tail(k).reverse();
        MatrixXd Y = Q * U;
        std::vector<double> res(k);
        bool ok = true;
        for (int j = 0; j < k; ++j) {
          const double lam = 1.0 / theta[j];
          res[j] = (S * Y.col(j) - lam * Y.col(j)).norm();
          if (!(theta[j] > 0.0) || res[j] > opt.residual_tol * lam) ok = false;
        }
        best_res = res;
        if (ok) {
          SpectralData sd;
          sd.mesh = mesh;
          sd.k = k;
          sd.dense = false;
          for (int j = 0; j < k; ++j) sd.eigenvalues.push_back(1.0 / theta[j]);
          sd.eigenfunctions = d.asDiagonal() * Y;
          return sd;
        }
      }
      if (mm + nb > max_basis || mm + nb > n) {
        const Eigen::Index keep = std::min<Eigen::Index>(b, mm);
        X = Q * es.eigenvectors().rightCols(keep);
        break;
      }
      block = Tblock;
      orthonormalize_block(Q, block, rng);
    }
  }
  std::ostringstream msg;
  msg << "eigensolve did not converge after " << opt.max_restarts << " restarts; residuals:";
  for (double r : best_res) msg << ' ' << r;
  throw NumericalError(msg.str());
}

}  // namespace

std::shared_ptr<const OperatorMesh> share(OperatorMesh mesh) {
  return std::make_shared<const OperatorMesh>(std::move(mesh));
}

SpectralData eigensolve(std::shared_ptr<const OperatorMesh> mesh, int k, const EigensolveOptions& opt) {
  if (!mesh) throw InvalidArgument("eigensolve: null mesh");
  const int n = static_cast<int>(mesh->size());
  if (k < 1 || k > n) throw InvalidArgument("eigensolve: k must lie in [1, mesh size]");
  SpectralData sd;
  if (n <= opt.dense_threshold || 3 * (k + 8) >= n) {
    sd = dense_solve(std::move(mesh), k);
  } else {
    sd = krylov_solve(std::move(mesh), k, opt);
  }
  finish(sd);
  for (int j = 0; j < sd.k; ++j) {
    if (sd.residuals[j] > opt.residual_tol * std::max(sd.eigenvalues[j], 1e-300) && !sd.dense) {
      std::ostringstream msg;
      msg << "eigenpair " << j + 1 << " residual " << sd.residuals[j] << " above tolerance";
      throw NumericalError(msg.str());
    }
  }
  return sd;
}

int ground_multiplicity(const SpectralData& sd) {
  int m = 1;
  while (m < sd.k && sd.eigenvalues[m] - sd.eigenvalues[0] <= kTolGap * sd.eigenvalues[0]) ++m;
  return m;
}

GroundStateReport ground_state_audit(const SpectralData& sd) {
  if (sd.k < 2) throw InvalidArgument("ground_state_audit needs k >= 2");
  const double l1 = sd.eigenvalues[0], l2 = sd.eigenvalues[1];
  const auto phi = sd.eigenfunctions.col(0);
  const double sup = phi.cwiseAbs().maxCoeff();
  GroundStateReport r;
  r.gap = l2 - l1;
  r.simple = r.gap > kTolGap * l1;
  r.min_value = phi.minCoeff() / sup;
  r.min_abs_interior = phi.cwiseAbs().minCoeff() / sup;
  r.positive_after_sign_fix = phi.minCoeff() > -1e-8 * sup;
  return r;
}

SeriesValue dirichlet_kernel_expansion(const SpectralData& sd, double t, std::size_t p, std::size_t q) {
  if (!(t > 0.0)) throw InvalidArgument("expansion needs t > 0");
  const auto& m = *sd.mesh;
  if (p >= m.size() || q >= m.size()) throw InvalidArgument("node index out of range");
  double s = 0.0;
  for (int n = 0; n < sd.k; ++n)
    s += std::exp(-sd.eigenvalues[n] * t) * sd.eigenfunctions(p, n) * sd.eigenfunctions(q, n);
  const double rest = static_cast<double>(m.size() - sd.k);
  const double tail = rest * std::exp(-sd.eigenvalues[sd.k - 1] * t) / std::sqrt(m.weights[p] * m.weights[q]);
  return {s, tail, tail > 0.1 * std::abs(s)};
}

SeriesValue survival_series(const SpectralData& sd, double t, std::size_t p) {
  if (!(t > 0.0)) throw InvalidArgument("survival_series needs t > 0");
  const auto& m = *sd.mesh;
  if (p >= m.size()) throw InvalidArgument("node index out of range");
  double s = 0.0;
  for (int n = 0; n < sd.k; ++n) s += std::exp(-sd.eigenvalues[n] * t) * sd.coefficients[n] * sd.eigenfunctions(p, n);
  // |c_n φ_n(p)| ≤ √μ(U) / √w_p
  const double rest = static_cast<double>(m.size() - sd.k);
  const double tail = rest * std::exp(-sd.eigenvalues[sd.k - 1] * t) * std::sqrt(m.measure() / m.weights[p]);
  SeriesValue v{s, tail, tail > 0.1 * std::abs(s)};
  if (s < 0.0 || s > 1.0) {
    v.value = std::clamp(s, 0.0, 1.0);
    v.clipped = true;
  }
  return v;
}

HeatContent heat_content_series(const SpectralData& sd, double t) {
  if (!(t >= 0.0)) throw InvalidArgument("heat_content_series needs t >= 0");
  HeatContent h{0.0, 0.0, ground_multiplicity(sd)};
  for (int n = 0; n < sd.k; ++n) h.Q += std::exp(-sd.eigenvalues[n] * t) * sd.coefficients[n] * sd.coefficients[n];
  for (int n = 0; n < h.multiplicity; ++n) h.asymptote += sd.coefficients[n] * sd.coefficients[n];
  return h;
}

std::vector<LpAuditRow> lp_bound_audit(const SpectralData& sd, const KernelBound& bound, int n_max) {
  if (n_max <= 0 || n_max > sd.k) n_max = sd.k;
  const auto& m = *sd.mesh;
  const VectorXd w = m.weight_vector();
  const double mu = m.measure();
  std::vector<LpAuditRow> rows;
  for (int n = 0; n < n_max; ++n) {
    LpAuditRow r;
    r.n = n + 1;
    r.lambda = sd.eigenvalues[n];
    const auto phi = sd.eigenfunctions.col(n);
    r.sup_norm = phi.cwiseAbs().maxCoeff();
    r.l1_norm = w.dot(phi.cwiseAbs());
    r.C_lambda = lambda_envelope_constant(bound, r.lambda).value;
    r.sup_bound = std::sqrt(mu) * r.C_lambda;
    r.l1_bound = std::pow(mu, 2.5) * r.C_lambda * r.C_lambda;
    r.l2_bound = mu * r.C_lambda;
    r.sup_pass = r.sup_norm <= r.sup_bound;
    r.l1_pass = r.l1_norm <= r.l1_bound;
    r.l2_pass = 1.0 <= r.l2_bound;
    rows.push_back(r);
  }
  return rows;
}

VectorXd semigroup_apply(const SpectralData& sd, double t, const VectorXd& f) {
  const auto& m = *sd.mesh;
  if (sd.k != static_cast<int>(m.size())) throw InvalidArgument("semigroup_apply needs the full spectrum");
  const VectorXd a = sd.eigenfunctions.transpose() * f.cwiseProduct(m.weight_vector());
  VectorXd e(sd.k);
  for (int n = 0; n < sd.k; ++n) e[n] = std::exp(-sd.eigenvalues[n] * t) * a[n];
  return sd.eigenfunctions * e;
}

// ---------------------------------------------------------------------------

namespace {

void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& os, double x) { put_u64(os, std::bit_cast<std::uint64_t>(x)); }

std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw InvalidArgument("eigenfunction file truncated");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }

constexpr char kMagic[8] = {'D', 'L', 'E', 'I', 'G', 'F', '0', '1'};

}  // namespace

void write_eigenfunctions(std::ostream& os, const SpectralData& sd) {
  os.write(kMagic, 8);
  const auto N = static_cast<std::uint64_t>(sd.eigenfunctions.rows());
  put_u64(os, N);
  put_u64(os, static_cast<std::uint64_t>(sd.k));
  for (double l : sd.eigenvalues) put_f64(os, l);
  for (int n = 0; n < sd.k; ++n)
    for (std::uint64_t i = 0; i < N; ++i) put_f64(os, sd.eigenfunctions(static_cast<Eigen::Index>(i), n));
}

EigenfunctionFile read_eigenfunctions(std::istream& is) {
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) throw InvalidArgument("not an eigenfunction file");
  const auto N = get_u64(is);
  const auto k = get_u64(is);
  EigenfunctionFile f;
  for (std::uint64_t n = 0; n < k; ++n) f.eigenvalues.push_back(get_f64(is));
  f.eigenfunctions.resize(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(k));
  for (std::uint64_t n = 0; n < k; ++n)
    for (std::uint64_t i = 0; i < N; ++i)
      f.eigenfunctions(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(n)) = get_f64(is);
  return f;
}

}  // namespace dirlab
