#include <omp.h>

#include <cmath>
#include <numbers>

#include "doctest.h"
#include "dirlab/stochastic.hpp"

using namespace dirlab;
using doctest::Approx;

namespace {

constexpr double kPi = std::numbers::pi;
const auto kBM1 = Process::euclidean(1, GeneratorScale::probabilist);

// P^x(sup_{s≤t}|B_s| < ε) by the odd-harmonic series
double interval_survival(double x, double eps, double t) {
  double s = 0;
  for (int k = 0; k < 400; ++k) {
    const double n = 2 * k + 1;
    s += (4 / kPi) * (k % 2 ? -1.0 : 1.0) / n * std::cos(n * kPi * x / (2 * eps)) *
         std::exp(-n * n * kPi * kPi * t / (8 * eps * eps));
  }
  return s;
}

// Dirichlet kernel of (0, 1) for ½Δ by images
double interval_kernel(double x, double y, double t) {
  const auto g = [&](double d) { return std::exp(-d * d / (2 * t)) / std::sqrt(2 * kPi * t); };
  double s = 0;
  for (int m = -30; m <= 30; ++m) s += g(x - y + 2 * m) - g(x + y + 2 * m);
  return s;
}

double det_minus_one(const su2::Quaternion& q) { return std::abs(su2::to_matrix(q).determinant() - 1.0); }
double unitarity(const su2::Quaternion& q) {
  const auto m = su2::to_matrix(q);
  return (m.adjoint() * m - su2::Matrix2c::Identity()).norm();
}

}  // namespace

TEST_CASE("brownian variance and heisenberg symmetry") {
  const int N = 100000;
  double s2 = 0, z = 0, z2 = 0;
  for (int i = 0; i < N; ++i) {
    const auto p = simulate(kBM1, {0, 0, 0}, 1.0, 0.05, 9, i);
    s2 += p.states.back()[0] * p.states.back()[0];
    const auto q = simulate(Process::heisenberg(GeneratorScale::probabilist), {0, 0, 0}, 1.0, 0.05, 10, i);
    z += q.states.back()[2];
    z2 += q.states.back()[2] * q.states.back()[2];
  }
  CHECK(std::abs(s2 / N - 1) <= 3 * std::sqrt(2.0 / N));
  const double mz = z / N, sz = std::sqrt((z2 / N - mz * mz) / N);
  CHECK(std::abs(mz) <= 3 * sz);
}

TEST_CASE("su2 stays in the group") {
  const auto p = simulate(Process::su2(GeneratorScale::probabilist), {0.1, 0.2, 0.0}, 10.0, 1e-3, 3, 0);
  REQUIRE(p.group_states.size() == 10001);
  for (const auto& g : p.group_states) {
    CHECK(det_minus_one(g) <= 1e-9);
    CHECK(unitarity(g) <= 1e-9);
  }
}

TEST_CASE("exit time is a stopping time") {
  const Domain d = make_domain(kBM1.space(), interval(-0.5, 0.5));
  for (std::uint64_t s = 0; s < 200; ++s) {
    const auto p = simulate(kBM1, {0.1, 0, 0}, 1.0, 0.01, 4, s, &d);
    for (std::size_t k = 0; k < p.states.size(); ++k) {
      const double tk = k * p.h_t;
      if (tk < p.exit_time - 1e-12) CHECK(d.contains(p.states[k]));
    }
    if (p.exit_time != kNeverExited) {
      const auto k = static_cast<std::size_t>(std::llround(p.exit_time / p.h_t));
      CHECK_FALSE(d.contains(p.states[k]));
    }
  }
}

TEST_CASE("survival on (-1, 1) against the series") {
  const Domain d = make_domain(kBM1.space(), interval(-1, 1));
  const auto b = survival_estimate(kBM1, {0, 0, 0}, d, 1.0, 1000000, 0.01, true, 17);
  CHECK(b.estimate == Approx(0.3714).epsilon(0.005));
  CHECK(std::abs(b.estimate - interval_survival(0, 1, 1)) <= 0.0015);
  CHECK(b.ci95 == Approx(1.96 * std::sqrt(b.estimate * (1 - b.estimate) / 1e6)));
  CHECK(survival_estimate(kBM1, {0, 0, 0}, d, 0.0, 1000, 0.01, true, 1).estimate == 1.0);
  const Domain huge = make_domain(kBM1.space(), ball(Gauge{}, 1000.0));
  CHECK(survival_estimate(kBM1, {0, 0, 0}, huge, 1.0, 10000, 0.01, true, 1).estimate == 1.0);
}

TEST_CASE("parallel and serial estimates agree for any worker count") {
  const Domain d = make_domain(Process::heisenberg().space(), ball(Gauge{GaugeKind::koranyi, 1.0}, 1.0));
  const auto p = Process::heisenberg();
  const auto ref = survival_estimate_ref(p, {0.1, 0, 0}, d, 0.2, 20000, 0.01, false, 5, 100);
  for (int w : {1, 2, 3}) {
    omp_set_num_threads(w);
    const auto b = survival_estimate(p, {0.1, 0, 0}, d, 0.2, 20000, 0.01, false, 5, 100);
    CHECK(b.survived == ref.survived);
  }
  const auto again = survival_estimate_ref(p, {0.1, 0, 0}, d, 0.2, 20000, 0.01, false, 5, 100);
  CHECK(again.survived == ref.survived);
  const Domain i = make_domain(kBM1.space(), interval(0, 1));
  const BoundingBox cell{{0.49, 0, 0}, {0.51, 0, 0}};
  const auto a = dynkin_hunt_estimate(kBM1, {0.5, 0, 0}, i, 0.1, cell, 20000, 1e-3, 3);
  const auto r = dynkin_hunt_estimate_ref(kBM1, {0.5, 0, 0}, i, 0.1, cell, 20000, 1e-3, 3);
  CHECK(a.value == r.value);
  omp_set_num_threads(1);
}

TEST_CASE("dynkin-hunt density") {
  const Domain d = make_domain(kBM1.space(), interval(0, 1));
  const BoundingBox cell{{0.495, 0, 0}, {0.505, 0, 0}};
  const auto e = dynkin_hunt_estimate(kBM1, {0.5, 0, 0}, d, 0.1, cell, 200000, 1e-4, 21);
  const double oracle = interval_kernel(0.5, 0.5, 0.1);
  CHECK(std::abs(e.value - oracle) <= std::max(3 * e.std_error, 0.03 * oracle));
  const auto early = dynkin_hunt_estimate(kBM1, {0.5, 0, 0}, d, 0.002, cell, 20000, 1e-4, 22);
  CHECK(early.value == Approx(early.free_kernel).epsilon(1e-6));
  const BoundingBox edge{{0.03, 0, 0}, {0.05, 0, 0}};
  const auto near = dynkin_hunt_estimate(kBM1, {0.04, 0, 0}, d, 0.05, edge, 20000, 1e-4, 23);
  CHECK(near.value < near.free_kernel);
  CHECK(near.value == Approx(interval_kernel(0.04, 0.04, 0.05)).epsilon(0.05));
  CHECK_THROWS_AS(dynkin_hunt_estimate(Process::heisenberg(), {0, 0, 0},
                                       make_domain(SpaceModel::heisenberg(), ball(Gauge{GaugeKind::koranyi, 1}, 1)),
                                       0.1, cell, 10, 1e-3, 1),
                  Unsupported);
}

TEST_CASE("small deviation scaling law") {
  // P(sup_{s≤t}|B| < ε) = P(sup_{s≤t/ε²}|B| < 1)
  const Gauge g{};
  const auto a = small_deviation_estimate(kBM1, {0, 0, 0}, g, 1.0, {0.5}, 400000, 0.0025, kPi * kPi / 8, 2, 31);
  const auto b = small_deviation_estimate(kBM1, {0, 0, 0}, g, 4.0, {1.0}, 400000, 0.01, kPi * kPi / 8, 2, 32);
  CHECK(std::abs(a[0].probability - b[0].probability) <= std::hypot(a[0].ci95, b[0].ci95) * 1.5);
  CHECK(a[0].scaled == Approx(4 / kPi).epsilon(0.05));
  CHECK_THROWS_AS(small_deviation_estimate(kBM1, {0, 0, 0}, g, 1.0, {0.4, 0.5}, 10, 0.01, 1, 2, 1), InvalidArgument);
}

TEST_CASE("heat content estimate") {
  const Domain d = make_domain(kBM1.space(), interval(-1, 1));
  std::vector<Point> nodes;
  std::vector<double> w;
  const int n = 33;
  for (int i = 1; i <= n; ++i) {
    nodes.push_back({-1 + 2.0 * i / (n + 1), 0, 0});
    w.push_back(2.0 / (n + 1));
  }
  const auto q0 = heat_content_estimate(kBM1, d, nodes, w, 0.0, 100, 0.01, 1);
  CHECK(q0.Q == Approx(2.0 * n / (n + 1)).epsilon(1e-14));
  double series = 0;
  for (int k = 0; k < 50; ++k) {
    const double m = 2 * k + 1;
    series += 16 / (kPi * kPi * m * m) * std::exp(-m * m * kPi * kPi / 8);
  }
  const auto q = heat_content_estimate(kBM1, d, nodes, w, 1.0, 20000, 0.01, 2);
  CHECK(q.Q == Approx(series).epsilon(0.03));
  CHECK(series == Approx(16 / (kPi * kPi) * std::exp(-kPi * kPi / 8)).epsilon(1e-3));
}

TEST_CASE("exit scaling") {
  const Domain disk = make_domain(SpaceModel::euclidean(2, GeneratorScale::probabilist), ball(Gauge{}, 1.0));
  const auto p2 = Process::euclidean(2, GeneratorScale::probabilist);
  const auto c = exit_scaling_check(p2, disk, {0.2, 0.1, 0}, 2.0, 1.0, 100000, 0.004, 3);
  CHECK(c.ell == 4.0);
  CHECK(std::abs(c.difference) <= 1.5 * c.joint_ci95);
  const auto one = exit_scaling_check(p2, disk, {0.2, 0.1, 0}, 1.0, 0.3, 100000, 0.004, 3);
  CHECK(std::abs(one.difference) <= 1.5 * one.joint_ci95);
  const Domain kb = make_domain(SpaceModel::heisenberg(GeneratorScale::probabilist), ball(Gauge{GaugeKind::koranyi, 1}, 1));
  const auto h = exit_scaling_check(Process::heisenberg(GeneratorScale::probabilist), kb, {0.1, 0, 0.02}, 2.0, 0.8,
                                    50000, 0.004, 4);
  CHECK(std::abs(h.difference) <= 1.5 * h.joint_ci95);
}

TEST_CASE("mean exit time") {
  // E^x τ = 1 − x² on (−1, 1) for ½Δ
  const Domain d = make_domain(kBM1.space(), interval(-1, 1));
  const auto m = mean_exit_time(kBM1, {0.5, 0, 0}, d, 100000, 1e-4, 20, 5);
  CHECK(m.censored == 0);
  CHECK(m.mean == Approx(0.75).epsilon(0.02));
}

TEST_CASE("resampled survival") {
  const double eps = 0.6;
  const Domain d = make_domain(kBM1.space(), interval(-eps, eps));
  const double h = 0.01 * eps * eps;
  const auto r = survival_resampled(kBM1, {0, 0, 0}, d, 1.0, 20000, h, 6, 8, 1, true);
  const double oracle = interval_survival(0, eps, 1.0);
  CHECK(std::abs(std::log(r.estimate / oracle)) <= 3 * r.log_ci95);
  // late-stage decay rate is λ₁ = π²/(8ε²)
  CHECK(r.decay_rate == Approx(kPi * kPi / (8 * eps * eps)).epsilon(0.05));
  CHECK(r.replicate_estimates.size() == 8);
  const auto again = survival_resampled(kBM1, {0, 0, 0}, d, 1.0, 20000, h, 6, 8, 1, true);
  CHECK(again.estimate == r.estimate);
  omp_set_num_threads(2);
  const auto two = survival_resampled(kBM1, {0, 0, 0}, d, 1.0, 20000, h, 6, 8, 1, true);
  omp_set_num_threads(1);
  CHECK(two.estimate == r.estimate);
  CHECK_THROWS_AS(survival_resampled(kBM1, {0, 0, 0}, d, 1.0, 100, h, 6, 1, 1), InvalidArgument);
  CHECK_THROWS_AS(survival_resampled(kBM1, {0, 0, 0}, d, 1.0, 100, 0.5, 6, 2, 1), InvalidArgument);
}

TEST_CASE("su2 resampled run keeps the chart") {
  const auto p = Process::su2(GeneratorScale::probabilist);
  const Domain b = make_domain(p.space(), ball(Gauge{GaugeKind::chart_radius, 1.0}, 0.5), "chart_ball");
  const auto r = survival_resampled(p, {0, 0, 0}, b, 0.25, 2000, 0.25 * 2e-3, 2, 2, 1);
  CHECK(r.estimate > 0);
  CHECK(r.chart_exits == 0);
}

TEST_CASE("invalid inputs") {
  const Domain d = make_domain(kBM1.space(), interval(-1, 1));
  CHECK_THROWS_AS(survival_estimate(kBM1, {2, 0, 0}, d, 1.0, 10, 0.01, true, 1), InvalidArgument);
  CHECK_THROWS_AS(survival_estimate(kBM1, {0, 0, 0}, d, 1.0, 10, 0.0, true, 1), InvalidArgument);
  CHECK_THROWS_AS(Process::euclidean(4), InvalidArgument);
}
