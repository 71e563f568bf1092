#include "dirlab/kernels.hpp"

#include <cmath>
#include <numbers>

namespace dirlab {

namespace {

constexpr double kE = std::numbers::e;
constexpr double kPi = std::numbers::pi;

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) throw InvalidArgument(std::string(name) + " must be positive");
}

void require_time(double t) {
  if (!(t > 0.0)) throw InvalidArgument("time must be positive");
}

}  // namespace

double gaussian_heat_kernel(double t, const Point& p, const Point& q, int n, GeneratorScale scale) {
  require_time(t);
  double r2 = 0.0;
  for (int i = 0; i < n; ++i) r2 += (p[i] - q[i]) * (p[i] - q[i]);
  // variance per unit time: 2 for Δ, 1 for ½Δ
  const double v = scale == GeneratorScale::dirichlet_form ? 2.0 : 1.0;
  return std::pow(2.0 * kPi * v * t, -0.5 * n) * std::exp(-r2 / (2.0 * v * t));
}

KernelBound KernelBound::gaussian_ahlfors(double C1, double C2, double K1, double K2, double alpha) {
  for (auto [v, n] : {std::pair{C1, "C1"}, {C2, "C2"}, {K1, "K1"}, {K2, "K2"}, {alpha, "alpha"}})
    require_positive(v, n);
  if (C2 > C1 || K2 > K1) throw InvalidArgument("gaussian_ahlfors needs C2 <= C1 and K2 <= K1");
  return KernelBound(GaussianAhlfors{C1, C2, K1, K2, alpha});
}

KernelBound KernelBound::sub_gaussian(double c1, double c2, double c3, double c4, double alpha,
                                      double beta) {
  for (auto [v, n] : {std::pair{c1, "c1"}, {c2, "c2"}, {c3, "c3"}, {c4, "c4"}, {alpha, "alpha"}})
    require_positive(v, n);
  if (!(beta >= 2.0)) throw InvalidArgument("sub_gaussian needs beta >= 2");
  if (c1 > c3 || c4 > c2) throw InvalidArgument("sub_gaussian needs c1 <= c3 and c4 <= c2");
  return KernelBound(SubGaussian{c1, c2, c3, c4, alpha, beta});
}

KernelBound KernelBound::polynomial_nonlocal(double c1, double c2, double alpha, double beta) {
  for (auto [v, n] : {std::pair{c1, "c1"}, {c2, "c2"}, {alpha, "alpha"}, {beta, "beta"}})
    require_positive(v, n);
  if (!(beta < 2.0)) throw InvalidArgument("polynomial_nonlocal needs beta < 2");
  if (c2 > c1) throw InvalidArgument("polynomial_nonlocal needs c2 <= c1");
  return KernelBound(PolynomialNonlocal{c1, c2, alpha, beta});
}

KernelBound KernelBound::lie_group(double kappa, double c1, double c2, double c3, double nu) {
  for (auto [v, n] : {std::pair{kappa, "kappa"}, {c1, "c1"}, {c2, "c2"}, {c3, "c3"}, {nu, "nu"}})
    require_positive(v, n);
  if (c1 > kappa || c3 > c2) throw InvalidArgument("lie_group needs c1 <= kappa and c3 <= c2");
  return KernelBound(LieGroupBound{kappa, c1, c2, c3, nu});
}

std::string KernelBound::family() const {
  switch (p_.index()) {
    case 0: return "gaussian_ahlfors";
    case 1: return "sub_gaussian";
    case 2: return "polynomial_nonlocal";
    default: return "lie_group";
  }
}

Envelope envelope(const KernelBound& b, double t, double d) {
  require_time(t);
  if (!(d >= 0.0)) throw InvalidArgument("distance must be nonnegative");
  return std::visit(
      [&](const auto& p) -> Envelope {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, GaussianAhlfors>) {
          const double pre = std::pow(t, -0.5 * p.alpha);
          return {p.C2 * pre * std::exp(-d * d / (p.K2 * t)), p.C1 * pre * std::exp(-d * d / (p.K1 * t))};
        } else if constexpr (std::is_same_v<T, SubGaussian>) {
          const double pre = std::pow(t, -p.alpha / p.beta);
          const double x = std::pow(std::pow(d, p.beta) / t, 1.0 / (p.beta - 1.0));
          return {p.c1 * pre * std::exp(-p.c2 * x), p.c3 * pre * std::exp(-p.c4 * x)};
        } else if constexpr (std::is_same_v<T, PolynomialNonlocal>) {
          const double pre = std::pow(t, -p.alpha / p.beta);
          const double x = d / std::pow(t, 1.0 / p.beta);
          const double e = -(p.alpha + p.beta);
          return {pre * std::pow(1.0 + p.c1 * x, e), pre * std::pow(1.0 + p.c2 * x, e)};
        } else {
          const double pre = std::pow(t, -0.5 * p.nu);
          return {p.c1 * pre * std::exp(-p.c2 * t - p.c2 * d * d / t),
                  p.kappa * pre * std::exp(p.kappa * t - p.c3 * d * d / t)};
        }
      },
      b.params());
}

double sup_kernel(const KernelBound& b, double t) { return envelope(b, t, 0.0).upper; }

std::optional<PowerLaw> power_law(const KernelBound& b) {
  return std::visit(
      [](const auto& p) -> std::optional<PowerLaw> {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, GaussianAhlfors>) return PowerLaw{p.C1, 0.5 * p.alpha};
        else if constexpr (std::is_same_v<T, SubGaussian>) return PowerLaw{p.c3, p.alpha / p.beta};
        else if constexpr (std::is_same_v<T, PolynomialNonlocal>) return PowerLaw{1.0, p.alpha / p.beta};
        else return std::nullopt;
      },
      b.params());
}

LambdaConstant lambda_envelope_constant(const PowerLaw& m, double lambda) {
  if (!(lambda > 0.0)) throw InvalidArgument("lambda must be positive");
  const double t_star = m.gamma / lambda;
  return {m.C * std::pow(kE * lambda / m.gamma, m.gamma), t_star};
}

LambdaConstant lambda_envelope_constant(const KernelBound& b, double lambda) {
  if (!(lambda > 0.0)) throw InvalidArgument("lambda must be positive");
  if (auto m = power_law(b)) return lambda_envelope_constant(*m, lambda);
  const auto& p = std::get<LieGroupBound>(b.params());
  const auto f = [&](double t) { return p.kappa * std::pow(t, -0.5 * p.nu) * std::exp((p.kappa + lambda) * t); };
  const double t_star = 0.5 * p.nu / (p.kappa + lambda);
  const double v = f(t_star);
  if (std::isfinite(v)) return {v, t_star};
  // Log grid fallback; the first minimum wins ties.
  LambdaConstant best{INFINITY, 0.0};
  for (int i = 0; i <= 10000; ++i) {
    const double t = std::pow(10.0, -6.0 + 12.0 * i / 10000.0);
    const double ft = f(t);
    if (ft < best.value) best = {ft, t};
  }
  return best;
}

double good_set_threshold(double kappa, double nu) {
  require_positive(kappa, "kappa");
  require_positive(nu, "nu");
  return std::pow(kappa, -0.5) * std::pow(nu / (2.0 * kappa * kE), 0.25 * nu);
}

GapCondition spectral_gap_condition(const KernelBound& b, double volume) {
  require_positive(volume, "volume");
  const double target = 1.0 / (volume * volume);
  if (auto m = power_law(b)) {
    // C t^{−γ} < target for t > (C/target)^{1/γ}; report a comfortable witness.
    const double t = 10.0 * std::pow(m->C / target, 1.0 / m->gamma);
    return {sup_kernel(b, t) < target, t};
  }
  const auto& p = std::get<LieGroupBound>(b.params());
  const double t = 0.5 * p.nu / p.kappa;  // minimizer of κ t^{−ν/2} e^{κt}
  if (sup_kernel(b, t) < target) return {true, t};
  return {false, std::nullopt};
}

IrreducibilityWindow irreducibility_window_raw(const std::string& family, double nu, double mu, double a,
                                               double b, double d) {
  IrreducibilityWindow w{family, 0.0, false, nu, mu, a, b, d};
  if (family == "sub_gaussian") {
    w.t0 = std::pow(a * mu / nu, 1.0 / mu);
    w.r_condition = b > a;
  } else if (family == "polynomial_nonlocal") {
    if (!(mu > nu)) throw InvalidArgument("polynomial window needs mu > nu");
    w.t0 = std::pow(a * nu / (mu - nu), 1.0 / mu);
    w.r_condition = b > a;
  } else if (family == "lie_group") {
    w.t0 = (std::sqrt(nu * nu + 16.0 * a * b) - nu) / (4.0 * a);
    w.r_condition = d > b;
  } else {
    throw InvalidArgument("unknown window family '" + family + "'");
  }
  return w;
}

IrreducibilityWindow irreducibility_window(const KernelBound& bound, double d_xy, double d_boundary) {
  require_positive(d_xy, "d_xy");
  require_positive(d_boundary, "d_boundary");
  return std::visit(
      [&](const auto& p) -> IrreducibilityWindow {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, GaussianAhlfors> || std::is_same_v<T, SubGaussian>) {
          double alpha, beta, c2, c4;
          if constexpr (std::is_same_v<T, GaussianAhlfors>) {
            alpha = p.alpha, beta = 2.0, c2 = 1.0 / p.K2, c4 = 1.0 / p.K1;
          } else {
            alpha = p.alpha, beta = p.beta, c2 = p.c2, c4 = p.c4;
          }
          const double q = beta / (beta - 1.0);
          auto w = irreducibility_window_raw("sub_gaussian", alpha / beta, 1.0 / (beta - 1.0),
                                             c2 * std::pow(d_xy, q), c4 * std::pow(d_boundary, q));
          return w;
        } else if constexpr (std::is_same_v<T, PolynomialNonlocal>) {
          return irreducibility_window_raw("polynomial_nonlocal", 1.0 / (p.alpha + p.beta), 1.0 / p.beta,
                                           p.c1 * d_xy, p.c2 * d_boundary);
        } else {
          return irreducibility_window_raw("lie_group", p.nu, 0.0, p.c2, p.c2 * d_xy * d_xy,
                                           p.c3 * d_boundary * d_boundary);
        }
      },
      bound.params());
}

double comparison_function(const IrreducibilityWindow& w, double s, double t, double kappa) {
  if (w.family == "sub_gaussian")
    return std::pow(s / t, w.nu) * std::exp(-w.a / std::pow(t, w.mu) + w.b / std::pow(s, w.mu));
  if (w.family == "polynomial_nonlocal")
    return std::pow(t / s, w.nu) * (std::pow(s, w.mu) + w.b) / (std::pow(t, w.mu) + w.a);
  return std::pow(s / t, 0.5 * w.nu) * std::exp(-w.a * t - w.b / t + w.d / s - kappa * s);
}

KappaEstimate kappa_estimate(double J_g, double alpha, double beta, double c1, double c3) {
  require_positive(J_g, "J_g");
  require_positive(alpha, "alpha");
  require_positive(beta, "beta");
  require_positive(c1, "c1");
  if (c3 < c1) throw InvalidArgument("kappa_estimate needs c3 >= c1");
  if (J_g == 1.0) throw InvalidArgument("kappa_estimate is degenerate at J_g = 1");
  return {1.0 - beta / alpha, (beta / alpha) * std::log(c3 / c1) / std::abs(std::log(J_g))};
}

}  // namespace dirlab
