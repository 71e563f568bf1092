#include "dirlab/contraction.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace dirlab {

namespace {

constexpr double kPi = std::numbers::pi;

void check_eps(double eps) {
  if (!(eps > 0.0 && eps <= 1.0)) throw InvalidArgument("contraction parameter must lie in (0, 1]");
}

double koranyi(double x, double y, double z) {
  const double q = x * x + y * y;
  return std::pow(q * q + 16.0 * z * z, 0.25);
}

}  // namespace

Point ContractionMaps::phi(double eps, const Point& p) {
  check_eps(eps);
  const double s = std::sqrt(eps);
  return {s * p[0], s * p[1], eps * p[2]};
}

Point ContractionMaps::phi_inverse(double eps, const Point& p) {
  check_eps(eps);
  const double s = std::sqrt(eps);
  return {p[0] / s, p[1] / s, p[2] / eps};
}

std::array<double, 3> ContractionMaps::u(double eps, const std::array<double, 3>& v) {
  const Point p = phi(eps, {v[0], v[1], v[2]});
  return {p[0], p[1], p[2]};
}

std::array<double, 3> ContractionMaps::u_inverse(double eps, const std::array<double, 3>& v) {
  const Point p = phi_inverse(eps, {v[0], v[1], v[2]});
  return {p[0], p[1], p[2]};
}

double bracket_defect(double eps, const std::array<double, 3>& v, const std::array<double, 3>& w) {
  const auto b = ContractionMaps::u_inverse(eps, su2::bracket(ContractionMaps::u(eps, v), ContractionMaps::u(eps, w)));
  const double zh = v[0] * w[1] - v[1] * w[0];
  return std::hypot(b[0], b[1], b[2] - zh);
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidArgument("loglog_slope needs two or more pairs");
  double mx = 0.0, my = 0.0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0 && y[i] > 0.0)) throw InvalidArgument("loglog_slope needs positive values");
    mx += std::log(x[i]) / n;
    my += std::log(y[i]) / n;
  }
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  if (sxx == 0.0) throw InvalidArgument("loglog_slope needs distinct x values");
  return sxy / sxx;
}

CoefficientTable coefficient_convergence(const std::vector<double>& r_list, const std::vector<double>& rho_grid) {
  if (r_list.empty() || rho_grid.empty()) throw InvalidArgument("empty r list or ρ grid");
  CoefficientTable t;
  for (double r : r_list) {
    if (!(r > 0.0)) throw InvalidArgument("r must be positive");
    double worst = 0.0;
    for (double rho : rho_grid) {
      if (!(rho > 0.0)) throw InvalidArgument("ρ grid must be positive");
      if (!(r * rho < 0.5 * kPi)) throw InvalidArgument("grid violates rρ < π/2");
      const LrCoefficients a = lr_coefficients(r, rho);
      const LrCoefficients b = lh_coefficients(rho);
      CoefficientRow row{r, rho, {1.0, a.d_rho, a.d_theta2, a.d_z2, a.d_thetaz},
                         {1.0, b.d_rho, b.d_theta2, b.d_z2, b.d_thetaz}, 0.0};
      for (int i = 0; i < 5; ++i) row.max_deviation = std::max(row.max_deviation, std::abs(row.value[i] - row.limit[i]));
      worst = std::max(worst, row.max_deviation);
      t.rows.push_back(row);
    }
    t.r_values.push_back(r);
    t.max_deviation.push_back(worst);
  }
  t.rate = r_list.size() >= 2 ? loglog_slope(t.r_values, t.max_deviation) : NAN;
  return t;
}

double haar_ratio(double r, double rho) {
  const double x = 2.0 * r * rho;
  if (std::abs(x) < 1e-8) return 1.0 - x * x / 6.0;
  return std::sin(x) / x;
}

HaarTable haar_density_ratio(const std::vector<double>& r_list, const std::vector<double>& rho_grid) {
  if (r_list.empty() || rho_grid.empty()) throw InvalidArgument("empty r list or ρ grid");
  HaarTable t;
  for (double r : r_list) {
    if (!(r > 0.0)) throw InvalidArgument("r must be positive");
    double worst = 0.0;
    for (double rho : rho_grid) {
      if (!(rho >= 0.0)) throw InvalidArgument("ρ grid must be nonnegative");
      if (!(r * rho < 0.5 * kPi)) throw InvalidArgument("grid violates rρ < π/2");
      const double q = haar_ratio(r, rho);
      worst = std::max(worst, std::abs(q - 1.0));
      t.rows.push_back({r, rho, q});
    }
    t.r_values.push_back(r);
    t.max_deviation.push_back(worst);
  }
  t.rate = r_list.size() >= 2 ? loglog_slope(t.r_values, t.max_deviation) : NAN;
  return t;
}

SandwichReport ball_sandwich_check(double r, double eps_tol, SandwichModel model, int samples) {
  if (!(r > 0.0 && r <= 1.0)) throw InvalidArgument("ball_sandwich_check needs r in (0, 1]");
  if (samples < 4) throw InvalidArgument("too few samples");
  // Gauge of the SU(2) element at chart point p, scaled by 1/r.
  const auto gauge = [&](const Point& p) {
    if (model == SandwichModel::chart_gauge) return koranyi(p[0], p[1], p[2]) / r;
    const auto v = su2::log_algebra(su2::from_chart(p));
    return koranyi(v[0], v[1], v[2]) / r;
  };
  SandwichReport rep{r, eps_tol, INFINITY, -INFINITY, 0.0, false, {}, {}};
  const int n_theta = std::max(2, static_cast<int>(std::sqrt(static_cast<double>(samples))));
  const int n_psi = std::max(2, samples / n_theta);
  for (int i = 0; i < n_psi; ++i) {
    const double psi = -0.5 * kPi + kPi * (i + 0.5) / n_psi;
    const double rho = std::sqrt(std::cos(psi));
    const double z = 0.25 * std::sin(psi);
    for (int j = 0; j < n_theta; ++j) {
      const double th = 2.0 * kPi * j / n_theta;
      const Point p{rho * std::cos(th), rho * std::sin(th), z};
      // F(s) = gauge(δ_{rs} p) − 1 along the Heisenberg dilation ray.
      const auto F = [&](double s) {
        const double rs = r * s;
        return gauge({rs * p[0], rs * p[1], rs * rs * p[2]}) - 1.0;
      };
      double lo = 0.0, hi = 0.0;
      for (double s = 0.02; s <= 4.0; s += 0.02) {
        if (F(s) >= 0.0) {
          hi = s;
          break;
        }
        lo = s;
      }
      if (hi == 0.0) throw NumericalError("ball_sandwich_check: boundary not found along a ray");
      for (int it = 0; it < 60; ++it) {
        const double m = 0.5 * (lo + hi);
        (F(m) >= 0.0 ? hi : lo) = m;
      }
      const double s = 0.5 * (lo + hi);
      const Point w{s * p[0], s * p[1], s * s * p[2]};
      if (s < rep.min_gauge) rep.min_gauge = s, rep.witness_min = w;
      if (s > rep.max_gauge) rep.max_gauge = s, rep.witness_max = w;
    }
  }
  rep.margin = std::max(1.0 - rep.min_gauge, rep.max_gauge - 1.0);
  rep.contained = rep.min_gauge >= 1.0 - eps_tol && rep.max_gauge <= 1.0 + eps_tol;
  return rep;
}

std::vector<int> cluster_sizes(const std::vector<double>& values, double tol) {
  std::vector<int> out;
  for (std::size_t i = 0; i < values.size();) {
    std::size_t j = i + 1;
    while (j < values.size() && std::abs(values[j] - values[j - 1]) <= tol * std::abs(values[j])) ++j;
    out.push_back(static_cast<int>(j - i));
    i = j;
  }
  return out;
}

ContractionTable eigenvalue_contraction_experiment(const std::vector<double>& r_list, const Domain& domain,
                                                   const CylindricalGrid& grid, int k) {
  if (r_list.empty()) throw InvalidArgument("empty r list");
  for (std::size_t i = 1; i < r_list.size(); ++i)
    if (!(r_list[i] < r_list[i - 1])) throw InvalidArgument("r list must be decreasing");
  ContractionTable t;
  const SpectralData lim = eigensolve(share(assemble_heisenberg_cylindrical(domain, grid)), k);
  t.limit = lim.eigenvalues;
  const int nk = static_cast<int>(t.limit.size());
  // Pairs from ±θ-harmonics agree to solver precision; a looser tolerance keeps
  // distinct levels apart.
  constexpr double kClusterTol = 1e-4;
  t.limit_clusters = cluster_sizes(t.limit, kClusterTol);
  t.monotone = true;
  t.ordered = std::is_sorted(t.limit.begin(), t.limit.end());
  std::vector<double> prev_gap;
  for (double r : r_list) {
    const SpectralData sd = eigensolve(share(assemble_su2_rescaled(r, domain, grid)), k);
    t.r_values.push_back(r);
    t.eig.push_back(sd.eigenvalues);
    t.ordered = t.ordered && std::is_sorted(sd.eigenvalues.begin(), sd.eigenvalues.end());
    std::vector<double> gap(nk);
    for (int n = 0; n < nk; ++n) {
      gap[n] = std::abs(sd.eigenvalues[n] - t.limit[n]) / t.limit[n];
      double rate = NAN;
      if (!prev_gap.empty() && gap[n] > 0.0 && prev_gap[n] > 0.0)
        rate = std::log(gap[n] / prev_gap[n]) / std::log(r / t.r_values[t.r_values.size() - 2]);
      t.rows.push_back({r, n + 1, sd.eigenvalues[n], gap[n], rate});
      if (!prev_gap.empty() && n < 3 && gap[n] > prev_gap[n]) t.monotone = false;
    }
    prev_gap = gap;
  }
  for (int n = 0; n < nk; ++n) t.rows.push_back({0.0, n + 1, t.limit[n], 0.0, NAN});
  t.final_gap_max = 0.0;
  for (int n = 0; n < std::min(3, nk); ++n) t.final_gap_max = std::max(t.final_gap_max, prev_gap[n]);
  t.clusters_reproduced = cluster_sizes(t.eig.back(), kClusterTol) == t.limit_clusters;
  return t;
}

bool flat_within_ci(const std::vector<double>& values, const std::vector<double>& ci95) {
  for (std::size_t i = 0; i < values.size(); ++i)
    for (std::size_t j = i + 1; j < values.size(); ++j)
      if (std::abs(values[i] - values[j]) > std::hypot(ci95[i], ci95[j])) return false;
  return true;
}

SmallDeviationExperiment su2_small_deviation_experiment(const SmallDeviationConfig& cfg, double lambda_h) {
  if (cfg.epsilons.empty()) throw InvalidArgument("empty ε list");
  if (!(cfg.h_rel > 0.0 && cfg.stage_rel > 0.0)) throw InvalidArgument("h_rel and stage_rel must be positive");
  SmallDeviationExperiment out;
  out.lambda_h = lambda_h;
  const auto run = [&](const Process& p, GaugeKind g, std::uint64_t seed) {
    std::vector<SmallDeviationExperimentRow> rows;
    for (std::size_t j = 0; j < cfg.epsilons.size(); ++j) {
      const double eps = cfg.epsilons[j];
      const double e2 = eps * eps;
      const Domain d = make_domain(p.space(), ball(Gauge{g, 1.0}, eps), "gauge_ball");
      const double h = cfg.h_rel * e2;
      const int steps = static_cast<int>(std::ceil(cfg.t / h - 1e-9));
      const int stages = std::clamp(static_cast<int>(std::ceil(cfg.t / (cfg.stage_rel * e2))), 1, steps);
      const ResampledSurvival s =
          survival_resampled(p, {0.0, 0.0, 0.0}, d, cfg.t, cfg.particles, h, stages, cfg.replicates, seed + j);
      rows.push_back({to_string(p.kind), eps, s.estimate, -e2 * s.log_estimate / cfg.t, e2 * s.log_ci95 / cfg.t,
                      e2 * s.decay_rate, e2 * s.decay_rate_ci95, s.chart_exits});
    }
    return rows;
  };
  out.su2 = run(Process::su2(cfg.scale), GaugeKind::chart_radius, cfg.seed);
  out.heisenberg = run(Process::heisenberg(cfg.scale), GaugeKind::koranyi, cfg.seed + 1000);
  const auto summarize = [&](const std::vector<SmallDeviationExperimentRow>& rows, bool& flat, bool& decay_flat,
                             double& err) {
    std::vector<double> v, c, dv, dc;
    err = 0.0;
    for (const auto& r : rows) {
      v.push_back(r.neg_log);
      c.push_back(r.neg_log_ci95);
      dv.push_back(r.decay);
      dc.push_back(r.decay_ci95);
      err = std::max(err, std::abs(r.neg_log - lambda_h) / lambda_h);
    }
    flat = flat_within_ci(v, c);
    decay_flat = flat_within_ci(dv, dc);
  };
  summarize(out.su2, out.su2_flat, out.su2_decay_flat, out.su2_max_rel_error);
  summarize(out.heisenberg, out.heisenberg_flat, out.heisenberg_decay_flat, out.heisenberg_max_rel_error);
  return out;
}

}  // namespace dirlab
