#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "doctest.h"
#include "dirlab/discrete.hpp"
#include "dirlab/spectral.hpp"

using namespace dirlab;
using doctest::Approx;

namespace {

constexpr double kPi = std::numbers::pi;

Eigen::VectorXd random_vector(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  for (auto& x : v) x = g(rng);
  return v;
}

void check_self_adjoint_psd(const OperatorMesh& m) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto u = random_vector(m.size(), 2 * s + 1), v = random_vector(m.size(), 2 * s + 2);
    const double a = m.inner(m.apply(u), v), b = m.inner(u, m.apply(v));
    CHECK(std::abs(a - b) <= 1e-10 * std::max(std::abs(a), 1.0));
    CHECK(m.inner(m.apply(u), u) / m.inner(u, u) >= -1e-10);
  }
}

}  // namespace

TEST_CASE("interval tridiagonal spectrum") {
  const Domain d = make_domain(SpaceModel::euclidean(1), interval(0, 1));
  const auto m = share(assemble_euclidean(d, 0.25));
  REQUIRE(m->size() == 3);
  const auto sd = eigensolve(m, 3);
  // (4/h²)sin²(kπh/2) with h = 1/4
  for (int k = 1; k <= 3; ++k)
    CHECK(sd.eigenvalues[k - 1] == Approx(64 * std::pow(std::sin(k * kPi / 8), 2)).epsilon(1e-12));
  const auto p = share(m->with_scale(GeneratorScale::probabilist));
  const auto sp = eigensolve(p, 3);
  for (int k = 0; k < 3; ++k) CHECK(sp.eigenvalues[k] * 2 == Approx(sd.eigenvalues[k]).epsilon(1e-13));
}

TEST_CASE("euclidean assembly is self-adjoint and PSD") {
  check_self_adjoint_psd(assemble_euclidean(make_domain(SpaceModel::euclidean(1), interval(0, 1)), 1.0 / 64));
  check_self_adjoint_psd(
      assemble_euclidean(make_domain(SpaceModel::euclidean(2), ball(Gauge{}, 1.0)), 0.05));
  check_self_adjoint_psd(
      assemble_euclidean(make_domain(SpaceModel::euclidean(3), box({0, 0, 0}, {1, 1, 1})), 0.1));
}

TEST_CASE("rows only touch interior nodes") {
  const Domain d = make_domain(SpaceModel::euclidean(2), polygon({{0, 0}, {2, 0}, {0, 1.5}}));
  const auto m = assemble_euclidean(d, 0.05);
  for (const auto& p : m.nodes) CHECK(d.contains(p));
  CHECK(m.stiffness.rows() == static_cast<Eigen::Index>(m.size()));
  // measure against the triangle area
  CHECK(m.measure() == Approx(1.5).epsilon(0.1));
  CHECK(m.measure() > 0);
}

TEST_CASE("gasket level 1 dense oracle") {
  const auto m = assemble_gasket(1);
  REQUIRE(m.size() == 3);
  // Level-1 graph: three interior nodes, each with 4 neighbours (2 interior, 2 corners).
  Eigen::Matrix3d L;
  L << 4, -1, -1, -1, 4, -1, -1, -1, 4;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(5.0 * L);
  const auto sd = eigensolve(share(m), 3);
  CHECK(es.eigenvalues()(0) == Approx(10.0));
  for (int k = 0; k < 3; ++k) CHECK(sd.eigenvalues[k] == Approx(es.eigenvalues()(k)).epsilon(1e-14));
  CHECK(sd.eigenvalues[1] == Approx(25.0));
  CHECK(sd.eigenvalues[2] == Approx(25.0));
}

TEST_CASE("gasket constants only feel the corners") {
  for (int level : {2, 3}) {
    const auto m = assemble_gasket(level);
    check_self_adjoint_psd(m);
    const Eigen::VectorXd one = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(m.size()));
    const Eigen::VectorXd r = m.stiffness * one;
    const Eigen::VectorXd mr = m.apply(one);
    int support = 0;
    for (Eigen::Index i = 0; i < r.size(); ++i)
      if (std::abs(r(i)) > 1e-12) {
        ++support;
        CHECK(mr(i) == Approx(std::pow(5.0, level)));  // one corner neighbour each
      }
    CHECK(support == 6);  // two neighbours per corner
  }
}

TEST_CASE("heisenberg operator on polynomials") {
  // L = X² + Y² with X = ∂x − (y/2)∂z, Y = ∂y + (x/2)∂z; M = −L (dirichlet_form).
  //   L x = 0, L z = 0, L x² = 2, L z² = (x² + y²)/2, L xz = −y
  const Domain d = make_domain(SpaceModel::heisenberg(), box({-1, -1, -1}, {1, 1, 1}));
  std::vector<double> errs;
  for (double h : {0.1, 0.05}) {
    const auto m = assemble_heisenberg(d, h);
    check_self_adjoint_psd(m);
    const auto eval = [&](auto f) {
      Eigen::VectorXd v(static_cast<Eigen::Index>(m.size()));
      for (std::size_t i = 0; i < m.size(); ++i) v(static_cast<Eigen::Index>(i)) = f(m.nodes[i]);
      return v;
    };
    const auto x = eval([](const Point& p) { return p[0]; });
    const auto z = eval([](const Point& p) { return p[2]; });
    const auto xx = eval([](const Point& p) { return p[0] * p[0]; });
    const auto zz = eval([](const Point& p) { return p[2] * p[2]; });
    const auto xz = eval([](const Point& p) { return p[0] * p[2]; });
    const auto Mx = m.apply(x), Mz = m.apply(z), Mxx = m.apply(xx), Mzz = m.apply(zz), Mxz = m.apply(xz);
    double err = 0;
    for (std::size_t i = 0; i < m.size(); ++i) {
      const auto& p = m.nodes[i];
      if (std::max({std::abs(p[0]), std::abs(p[1]), std::abs(p[2])}) > 0.6) continue;
      const auto k = static_cast<Eigen::Index>(i);
      err = std::max({err, std::abs(Mx(k)), std::abs(Mz(k)), std::abs(Mxx(k) + 2.0),
                      std::abs(Mzz(k) + 0.5 * (p[0] * p[0] + p[1] * p[1])), std::abs(Mxz(k) - p[1])});
    }
    errs.push_back(err);
    CHECK(err <= 2.0 * h * h);
  }
  CHECK(errs[1] <= errs[0] / 3.0 + 1e-12);
}

TEST_CASE("L^r coefficients") {
  const auto c = lr_coefficients(0.01, 1.0);
  CHECK(c.d_rho == Approx(0.02 / std::tan(0.02)).epsilon(1e-15));
  CHECK(c.d_rho == Approx(0.9998667).epsilon(1e-7));
  CHECK(c.d_z2 == Approx(1.0000667).epsilon(1e-7));
  CHECK(lr_coefficients(0.01, 2.0).d_z2 == Approx(4.001067).epsilon(1e-6));
  const auto h = lh_coefficients(2.0);
  CHECK(h.d_rho == 0.5);
  CHECK(h.d_z2 == 4.0);
  CHECK(h.d_theta2 == 0.25);
  CHECK(h.d_thetaz == 2.0);
  // divergence form: (1/w)∂ρ(w ∂ρ) with w = sin(2rρ)/(2r) gives the first-order coefficient w'/w
  const double r = 0.3, rho = 0.8, e = 1e-6;
  const auto w = [&](double s) { return std::sin(2 * r * s) / (2 * r); };
  CHECK(lr_coefficients(r, rho).d_rho == Approx((w(rho + e) - w(rho - e)) / (2 * e) / w(rho)).epsilon(1e-8));
}

TEST_CASE("L^r converges to the cylindrical heisenberg operator entrywise") {
  const Domain d = make_domain(SpaceModel::heisenberg(), annulus(0.3, 1.0, -0.5, 0.5));
  CylindricalGrid g{0.1, 32, 0.1};
  const SparseMatrix H = assemble_heisenberg_cylindrical(d, g).operator_matrix();
  std::vector<double> diff;
  for (double r : {0.1, 0.05, 0.025}) {
    const auto m = assemble_su2_rescaled(r, d, g);
    REQUIRE(m.size() == static_cast<std::size_t>(H.rows()));
    diff.push_back((SparseMatrix(m.operator_matrix() - H)).coeffs().cwiseAbs().maxCoeff());
  }
  CHECK(std::log2(diff[0] / diff[1]) == Approx(2.0).epsilon(0.1));
  CHECK(std::log2(diff[1] / diff[2]) == Approx(2.0).epsilon(0.1));
  check_self_adjoint_psd(assemble_su2_rescaled(0.2, d, g));
}

TEST_CASE("cylindrical membership is rotation invariant") {
  const Domain d = make_domain(SpaceModel::heisenberg(), annulus(0.3, 1.0, -0.5, 0.5));
  const auto m = assemble_heisenberg_cylindrical(d, CylindricalGrid{0.05, 40, 0.05});
  REQUIRE(m.size() % 40 == 0);
}

TEST_CASE("sign report") {
  const auto e = assemble_euclidean(make_domain(SpaceModel::euclidean(2), ball(Gauge{}, 1.0)), 0.1);
  CHECK(offdiag_sign_report(e).positive_offdiag == 0);
  const auto h = assemble_heisenberg(make_domain(SpaceModel::heisenberg(), box({-1, -1, -1}, {1, 1, 1})), 0.1);
  const auto s = offdiag_sign_report(h);
  CHECK(s.positive_offdiag > 0);  // the mixed xz / yz terms are not an M-matrix stencil
  CHECK(s.max_positive_relative > 0);
}

TEST_CASE("mesh text format round-trips") {
  const auto m = assemble_euclidean(make_domain(SpaceModel::euclidean(2), polygon({{0, 0}, {1, 0}, {0, 1}})), 0.1);
  std::stringstream ss;
  write_mesh(ss, m);
  const auto r = read_mesh(ss);
  REQUIRE(r.size() == m.size());
  CHECK((SparseMatrix(r.operator_matrix() - m.operator_matrix())).norm() == 0.0);
  for (std::size_t i = 0; i < m.size(); ++i) CHECK(r.weights[i] == m.weights[i]);
  std::stringstream bad("dirlab-operator-mesh 9\n");
  CHECK_THROWS_AS(read_mesh(bad), InvalidArgument);
}

TEST_CASE("invalid spacing rejected") {
  const Domain d = make_domain(SpaceModel::euclidean(1), interval(0, 1));
  CHECK_THROWS_AS(assemble_euclidean(d, 0.0), InvalidArgument);
  CHECK_THROWS_AS(assemble_euclidean(d, -1.0), InvalidArgument);
  CHECK_THROWS_AS(assemble_gasket(0), InvalidArgument);
}
