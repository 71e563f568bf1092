#include <cmath>
#include <numbers>

#include "doctest.h"
#include "dirlab/kernels.hpp"

using namespace dirlab;
using doctest::Approx;

namespace {

constexpr double kE = std::numbers::e;

double grid_min(auto f, double lo, double hi, int n = 2000000) {
  double best = INFINITY;
  const double ll = std::log(lo), lh = std::log(hi);
  for (int i = 0; i <= n; ++i) best = std::min(best, f(std::exp(ll + (lh - ll) * i / n)));
  return best;
}

double grid_max(auto f, double lo, double hi, int n = 2000000) {
  return -grid_min([&](double t) { return -f(t); }, lo, hi, n);
}

}  // namespace

TEST_CASE("gaussian kernel normalization") {
  const Point o{};
  CHECK(gaussian_heat_kernel(1, o, o, 1, GeneratorScale::probabilist) == Approx(0.3989422804014327).epsilon(1e-15));
  CHECK(gaussian_heat_kernel(1, o, o, 1, GeneratorScale::dirichlet_form) == Approx(0.28209479177387814).epsilon(1e-15));
  for (auto s : {GeneratorScale::probabilist, GeneratorScale::dirichlet_form}) {
    const double h = 1e-3;
    double mass = 0;
    for (int i = -20000; i <= 20000; ++i) mass += h * gaussian_heat_kernel(0.7, o, {i * h, 0, 0}, 1, s);
    CHECK(mass == Approx(1.0).epsilon(1e-6));
  }
  CHECK_THROWS_AS(gaussian_heat_kernel(0, o, o, 1, GeneratorScale::probabilist), InvalidArgument);
}

TEST_CASE("envelope plug-ins") {
  const auto sg = KernelBound::sub_gaussian(1, 1, 1, 1, 2, 2);
  CHECK(envelope(sg, 1, 0).lower == Approx(1.0));
  CHECK(envelope(sg, 1, 0).upper == Approx(1.0));
  const auto pn = KernelBound::polynomial_nonlocal(1, 1, 1, 0.5);
  CHECK(envelope(pn, 1, 1).upper == Approx(std::pow(2.0, -1.5)).epsilon(1e-14));
  const auto lg = KernelBound::lie_group(1, 1, 1, 1, 3);
  CHECK(envelope(lg, 1, 0).upper == Approx(kE).epsilon(1e-14));
}

TEST_CASE("family constraints rejected at construction") {
  CHECK_THROWS_AS(KernelBound::sub_gaussian(1, 1, 1, 1, 2, 1.5), InvalidArgument);
  CHECK_THROWS_AS(KernelBound::polynomial_nonlocal(1, 1, 1, 2.5), InvalidArgument);
  CHECK_THROWS_AS(KernelBound::gaussian_ahlfors(-1, 1, 1, 1, 1), InvalidArgument);
}

TEST_CASE("envelopes ordered and decreasing in d") {
  const std::vector<KernelBound> fams{
      KernelBound::gaussian_ahlfors(2, 0.5, 4, 1, 2), KernelBound::sub_gaussian(0.5, 2, 2, 1, 1.5, 2.3),
      KernelBound::polynomial_nonlocal(2, 1, 1, 0.5), KernelBound::lie_group(1.5, 0.5, 2, 1, 3)};
  for (const auto& b : fams) {
    for (double t : {0.01, 0.1, 1.0, 10.0}) {
      double prev_u = INFINITY, prev_l = INFINITY;
      for (double d = 0; d <= 5; d += 0.25) {
        const auto e = envelope(b, t, d);
        CHECK(e.lower <= e.upper);
        CHECK(e.upper <= prev_u);
        CHECK(e.lower <= prev_l);
        prev_u = e.upper;
        prev_l = e.lower;
      }
    }
  }
}

TEST_CASE("sup kernel") {
  CHECK(sup_kernel(KernelBound::gaussian_ahlfors(1, 1, 1, 1, 2), 4) == Approx(0.25));
  CHECK(sup_kernel(KernelBound::lie_group(1, 1, 1, 1, 4), 1) == Approx(kE));
  CHECK(sup_kernel(KernelBound::sub_gaussian(1, 1, 2, 1, 3, 3), 8) == Approx(0.25));
}

TEST_CASE("lambda envelope constant") {
  const auto c = lambda_envelope_constant(PowerLaw{1.0, 0.5}, 1.0);
  CHECK(c.value == Approx(std::sqrt(2 * kE)).epsilon(1e-14));
  CHECK(c.t_star == Approx(0.5));
  for (double gamma : {0.3, 1.0, 2.5}) {
    for (double lam : {0.2, 1.0, 7.0}) {
      const auto m = lambda_envelope_constant(PowerLaw{1.7, gamma}, lam);
      const double g = grid_min([&](double t) { return 1.7 * std::pow(t, -gamma) * std::exp(lam * t); }, 1e-4, 1e3);
      CHECK(m.value == Approx(g).epsilon(1e-10));
    }
  }
  const auto lg = lambda_envelope_constant(KernelBound::lie_group(1, 1, 1, 1, 2), 1.0);
  CHECK(lg.value == Approx(2 * kE).epsilon(1e-10));
  CHECK(lg.t_star == Approx(0.5).epsilon(1e-6));
  CHECK_THROWS_AS(lambda_envelope_constant(PowerLaw{1, 1}, 0.0), InvalidArgument);
}

TEST_CASE("good set threshold") {
  const auto oracle = [](double k, double nu) {
    // sup of f(t) = κ⁻¹t^{ν/2}e^{−κt}, then V = sup f^{1/2}
    return std::sqrt(grid_max([&](double t) { return std::pow(t, nu / 2) * std::exp(-k * t) / k; }, 1e-4, 1e3));
  };
  CHECK(good_set_threshold(1, 4) == Approx(2 / kE).epsilon(1e-14));
  CHECK(good_set_threshold(1, 2) == Approx(std::sqrt(1 / kE)).epsilon(1e-14));
  CHECK(good_set_threshold(4, 4) == Approx(1 / (4 * kE)).epsilon(1e-14));
  for (auto [k, nu] : {std::pair{1.0, 4.0}, {1.0, 2.0}, {4.0, 4.0}, {0.5, 3.0}})
    CHECK(good_set_threshold(k, nu) == Approx(oracle(k, nu)).epsilon(1e-8));
}

TEST_CASE("spectral gap condition") {
  const auto ga = spectral_gap_condition(KernelBound::gaussian_ahlfors(1, 1, 1, 1, 2), 10);
  REQUIRE(ga.satisfied);
  CHECK(sup_kernel(KernelBound::gaussian_ahlfors(1, 1, 1, 1, 2), *ga.witness_t) < 1e-2);
  const auto lg = KernelBound::lie_group(1, 1, 1, 1, 4);
  const auto ok = spectral_gap_condition(lg, 0.5);
  REQUIRE(ok.satisfied);
  CHECK(*ok.witness_t == Approx(2.0));
  CHECK(sup_kernel(lg, *ok.witness_t) < 1 / 0.25);
  const auto no = spectral_gap_condition(lg, 1.0);
  CHECK_FALSE(no.satisfied);
  CHECK_FALSE(no.witness_t.has_value());
}

TEST_CASE("irreducibility windows") {
  const auto dlog = [](auto F, double t) {
    const double h = 1e-6 * t;
    return (std::log(F(t + h)) - std::log(F(t - h))) / (2 * h);
  };
  SUBCASE("sub-gaussian") {
    const auto w = irreducibility_window(KernelBound::sub_gaussian(1, 1, 1, 1, 2, 2), 1.0, 2.0);
    CHECK(w.t0 == Approx(1.0));
    const double s = 0.3;
    const auto F = [&](double t) { return (s / t) * std::exp(-1.0 / t + w.b / s); };
    CHECK(dlog(F, 0.5) > 0);
    CHECK(dlog(F, 2.0) < 0);
    CHECK(std::abs(dlog(F, 1.0)) < 1e-6);
    CHECK(comparison_function(w, s, 0.7) == Approx(F(0.7)));
  }
  SUBCASE("polynomial") {
    const auto w = irreducibility_window(KernelBound::polynomial_nonlocal(1, 1, 1, 0.5), 1.0, 2.0);
    CHECK(w.t0 == Approx(std::sqrt(0.5)).epsilon(1e-14));
    const double s = 0.2;
    const auto F = [&](double t) { return std::pow(t / s, 2.0 / 3.0) * (s * s + w.b) / (t * t + 1.0); };
    CHECK(std::abs(dlog(F, w.t0)) < 1e-6);
    CHECK(dlog(F, 0.5 * w.t0) > 0);
    CHECK(dlog(F, 2 * w.t0) < 0);
  }
  SUBCASE("lie group") {
    const auto w = irreducibility_window_raw("lie_group", 3, 0, 1, 1);
    CHECK(w.t0 == Approx(0.5));
    const auto F = [](double t) { return std::pow(1 / t, 1.5) * std::exp(-t - 1 / t); };
    CHECK(std::abs(dlog(F, 0.5)) < 1e-6);
  }
}

TEST_CASE("kappa estimate") {
  const auto e = kappa_estimate(1.0 / 27.0, 3, 2, 1, 1);
  CHECK(e.center == Approx(1.0 / 3.0));
  CHECK(e.radius == 0.0);
  const auto f = kappa_estimate(kE * kE, 2, 2, 1, kE);
  CHECK(f.center == Approx(0.0));
  CHECK(f.radius == Approx(0.5));
  for (int n = 1; n <= 5; ++n)
    CHECK(kappa_estimate(std::pow(kE * kE, n), 2, 2, 1, kE).radius == Approx(0.5 / n));
}

TEST_CASE("power law forms") {
  const auto p = power_law(KernelBound::gaussian_ahlfors(3, 1, 1, 1, 2));
  REQUIRE(p.has_value());
  CHECK(p->C == 3.0);
  CHECK(p->gamma == 1.0);
  CHECK_FALSE(power_law(KernelBound::lie_group(1, 1, 1, 1, 3)).has_value());
}
