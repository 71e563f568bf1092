#include "dirlab/scaling.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace dirlab {

DilationElement DilationStructure::element(double r) const {
  if (group != DilationGroup::positive_reals) throw InvalidArgument("integer_powers elements are r0^n; use power()");
  if (!(r > 0.0)) throw InvalidArgument("dilation factor must be positive");
  return {r, 0};
}

DilationElement DilationStructure::power(int n) const {
  if (group == DilationGroup::integer_powers) return {std::pow(r0, n), n};
  return {std::pow(r0, n), 0};
}

DilationElement DilationStructure::compose(const DilationElement& a, const DilationElement& b) const {
  if (group == DilationGroup::integer_powers) return power(a.n + b.n);
  return {a.r * b.r, 0};
}

DilationElement DilationStructure::identity() const { return {1.0, 0}; }

double DilationStructure::factor(const DilationElement& g) const {
  return group == DilationGroup::integer_powers ? std::pow(r0, g.n) : g.r;
}

Point DilationStructure::action(const DilationElement& g, const Point& p) const {
  const double r = factor(g);
  if (space.kind == SpaceKind::heisenberg3) return {r * p[0], r * p[1], r * r * p[2]};
  return {r * p[0], r * p[1], r * p[2]};
}

double DilationStructure::jacobian(const DilationElement& g) const { return std::pow(factor(g), -hausdorff); }

double DilationStructure::kappa(const DilationElement&) const { return 1.0 - walk / hausdorff; }

double DilationStructure::ell(const DilationElement& g) const {
  return std::pow(jacobian(g), kappa(g) - 1.0);
}

DilationStructure euclidean_dilation(int n) {
  if (n < 1) throw InvalidArgument("dimension must be >= 1");
  DilationStructure d;
  d.group = DilationGroup::positive_reals;
  d.r0 = 2.0;
  d.hausdorff = n;
  d.walk = 2.0;
  d.space = SpaceModel{SpaceKind::euclidean, n, 0, GeneratorScale::dirichlet_form};
  return d;
}

DilationStructure carnot_dilation(double Q) {
  if (!(Q >= 3.0)) throw InvalidArgument("homogeneous dimension must be >= 3");
  DilationStructure d;
  d.group = DilationGroup::positive_reals;
  d.r0 = 2.0;
  d.hausdorff = Q;
  d.walk = 2.0;
  d.space = SpaceModel::heisenberg();
  return d;
}

DilationStructure gasket_dilation() {
  DilationStructure d;
  d.group = DilationGroup::integer_powers;
  d.r0 = 0.5;
  d.hausdorff = std::log(3.0) / std::log(2.0);
  d.walk = std::log(5.0) / std::log(2.0);
  d.space = SpaceModel::gasket(0);
  return d;
}

namespace {

void check_pair(const DilationStructure& ds, const OperatorMesh& small, const OperatorMesh& large, double r) {
  if (small.size() != large.size()) throw InvalidArgument("meshes have different node counts");
  const DilationElement g{r, 0};
  for (std::size_t i = 0; i < small.size(); ++i) {
    const Point p = ds.action(g, small.nodes[i]);
    const auto& q = large.nodes[i];
    const double scale = 1.0 + std::abs(q[0]) + std::abs(q[1]) + std::abs(q[2]);
    if (std::abs(p[0] - q[0]) + std::abs(p[1] - q[1]) + std::abs(p[2] - q[2]) > 1e-9 * scale)
      throw InvalidArgument("meshes are not related by the dilation node by node");
  }
}

}  // namespace

EnergyScalingReport verify_energy_scaling(const DilationStructure& ds, const OperatorMesh& small,
                                          const OperatorMesh& large, double r, int samples, std::uint64_t seed) {
  check_pair(ds, small, large, r);
  EnergyScalingReport rep{r, std::pow(r, -ds.hausdorff + ds.walk), INFINITY, -INFINITY, 0.0, true};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  Eigen::VectorXd f(static_cast<Eigen::Index>(small.size()));
  for (int s = 0; s < samples; ++s) {
    for (Eigen::Index i = 0; i < f.size(); ++i) f[i] = U(rng);
    // A function f on the large mesh pulls back to the same nodal vector on the small one.
    const double ratio = small.energy(f) / large.energy(f);
    rep.ratio_min = std::min(rep.ratio_min, ratio);
    rep.ratio_max = std::max(rep.ratio_max, ratio);
    rep.ratio_mean += ratio / samples;
    if (std::abs(ratio / rep.expected - 1.0) > 0.02) rep.pass = false;
  }
  return rep;
}

FactorizationReport verify_semigroup_factorization(const DilationStructure& ds, const OperatorMesh& small,
                                                   const OperatorMesh& large, double r, double t, int samples,
                                                   std::uint64_t seed) {
  check_pair(ds, small, large, r);
  if (small.size() > 2000) throw InvalidArgument("factorization check is limited to 2000 nodes");
  FactorizationReport rep;
  rep.r = r;
  rep.t = t;
  rep.ell = std::pow(r, ds.walk);
  const int N = static_cast<int>(small.size());
  const SpectralData a = eigensolve(share(small), N);
  const SpectralData b = eigensolve(share(large), N);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  Eigen::VectorXd f(N);
  rep.max_relative_deviation = 0.0;
  for (int s = 0; s < samples; ++s) {
    for (int i = 0; i < N; ++i) f[i] = U(rng);
    const Eigen::VectorXd lhs = semigroup_apply(a, t, f);
    const Eigen::VectorXd rhs = semigroup_apply(b, rep.ell * t, f);
    rep.max_relative_deviation =
        std::max(rep.max_relative_deviation, (lhs - rhs).lpNorm<Eigen::Infinity>() / lhs.lpNorm<Eigen::Infinity>());
  }
  rep.pass = rep.max_relative_deviation < 0.02;
  for (int n = 0; n < std::min(5, N); ++n) {
    rep.eigen_ratio.push_back(b.eigenvalues[n] * rep.ell / a.eigenvalues[n]);
    if (std::abs(rep.eigen_ratio.back() - 1.0) > 0.02) rep.pass = false;
  }
  return rep;
}

double decimation_preimage(double lambda) {
  if (!(lambda >= 0.0 && lambda <= 6.25)) throw InvalidArgument("decimation preimage needs 0 <= lambda <= 25/4");
  return 0.5 * (5.0 - std::sqrt(25.0 - 4.0 * lambda));
}

GasketScalingReport gasket_eigen_scaling(const std::vector<int>& levels, int k) {
  if (levels.empty()) throw InvalidArgument("no gasket levels given");
  GasketScalingReport rep;
  for (int m : levels) {
    const auto mesh = share(assemble_gasket(m));
    const int kk = std::min<int>(k, static_cast<int>(mesh->size()));
    const SpectralData sd = eigensolve(mesh, kk);
    GasketLevelRow row{m, mesh->size(), sd.eigenvalues, {}};
    for (double l : sd.eigenvalues) row.graph.push_back(l / std::pow(5.0, m));
    rep.levels.push_back(row);
  }
  for (std::size_t i = 0; i + 1 < rep.levels.size(); ++i) {
    const auto& a = rep.levels[i];
    const auto& b = rep.levels[i + 1];
    if (b.level != a.level + 1) throw InvalidArgument("gasket levels must be consecutive");
    rep.graph_ratio.push_back(a.graph[0] / b.graph[0]);
    rep.renormalized_ratio.push_back(b.renormalized[0] / a.renormalized[0]);
    rep.decimation_ratio.push_back(a.graph[0] / decimation_preimage(a.graph[0]));
  }
  // Subcells of depth m inside the finest gasket: λ₁^{(m)}/λ₁^{(0)} = λ₁^L(M−m)/λ₁^L(M).
  const int M = rep.levels.back().level;
  const double base = rep.levels.back().graph[0];
  rep.envelope_c = 1.0;
  for (const auto& row : rep.levels) {
    const int m = M - row.level;
    if (m <= 0) continue;
    const double q = (row.graph[0] / base) / std::pow(5.0, m);
    rep.envelope_c = std::max({rep.envelope_c, q, 1.0 / q});
  }
  return rep;
}

OrchestratorResult small_deviation_orchestrator(const OrchestratorConfig& cfg, const Domain& base,
                                                const SpectralData& sd) {
  const OperatorMesh& mesh = *sd.mesh;
  std::size_t node = 0;
  double best = INFINITY;
  for (std::size_t i = 0; i < mesh.size(); ++i) {
    const auto& p = mesh.nodes[i];
    const double d = std::hypot(p[0] - cfg.x[0], p[1] - cfg.x[1], p[2] - cfg.x[2]);
    if (d < best) best = d, node = i;
  }
  OrchestratorResult res;
  res.lambda1 = sd.eigenvalues[0];
  res.target = sd.coefficients[0] * sd.eigenfunctions(static_cast<Eigen::Index>(node), 0);

  std::vector<std::pair<std::string, double>> keys;
  for (int n : cfg.exponents) keys.emplace_back("n", n);
  for (double e : cfg.epsilons) keys.emplace_back("eps", e);
  std::uint64_t stream = 0;
  for (const auto& [key, value] : keys) {
    const DilationElement g =
        key == "n" ? cfg.ds.power(static_cast<int>(value)) : DilationElement{value, 0};
    const double r = cfg.ds.factor(g);
    const double ell = std::pow(r, cfg.ds.walk);
    const Domain dom = r == 1.0 ? base : dilate_domain(base, r);
    const Point x = cfg.ds.action(g, cfg.x);
    const ExitBatch b =
        survival_estimate(cfg.process, x, dom, cfg.t, cfg.N, cfg.h_t * ell, cfg.bridge_correction, cfg.seed, stream);
    stream += cfg.N;
    OrchestratorRow row;
    row.key = key;
    row.value = value;
    row.r = r;
    row.ell = ell;
    row.probability = b.estimate;
    row.ci95 = b.ci95;
    const double amp = std::exp(res.lambda1 * cfg.t / ell);
    row.scaled = amp * b.estimate;
    row.scaled_ci95 = amp * b.ci95;
    row.target = res.target;
    row.series = survival_series(sd, cfg.t / ell, node).value;
    res.rows.push_back(row);
  }
  return res;
}

}  // namespace dirlab
