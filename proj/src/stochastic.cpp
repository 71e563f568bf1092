#include "dirlab/stochastic.hpp"

#include <cmath>
#include <random>

#include "dirlab/kernels.hpp"

namespace dirlab {

namespace {

constexpr std::int64_t kBlock = 4096;

int step_count(double t, double h) {
  if (!(h > 0.0)) throw InvalidArgument("time step must be positive");
  if (!(t >= 0.0)) throw InvalidArgument("horizon must be nonnegative");
  return static_cast<int>(std::ceil(t / h - 1e-9));
}

void require_inside(const Domain& domain, const Point& start) {
  if (!domain.contains(start)) throw InvalidArgument("start point lies outside the domain");
}

Point midpoint(const Point& a, const Point& b) {
  return {0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]), 0.5 * (a[2] + b[2])};
}

// Σf and Σf² over paths, grouped in fixed blocks so that the floating-point
// result does not depend on the number of workers.
struct Sums {
  double s1 = 0.0;
  double s2 = 0.0;
  std::uint64_t nonzero = 0;
};

template <class F>
Sums blocked_sums(std::uint64_t N, F&& f) {
  const std::int64_t nb = (static_cast<std::int64_t>(N) + kBlock - 1) / kBlock;
  std::vector<Sums> part(nb);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t b = 0; b < nb; ++b) {
    const std::int64_t lo = b * kBlock;
    const std::int64_t hi = std::min<std::int64_t>(lo + kBlock, static_cast<std::int64_t>(N));
    Sums a;
    for (std::int64_t i = lo; i < hi; ++i) {
      const double v = f(static_cast<std::uint64_t>(i));
      a.s1 += v;
      a.s2 += v * v;
      a.nonzero += v != 0.0;
    }
    part[b] = a;
  }
  Sums t;
  for (const auto& a : part) {
    t.s1 += a.s1;
    t.s2 += a.s2;
    t.nonzero += a.nonzero;
  }
  return t;
}

template <class F>
Sums serial_sums(std::uint64_t N, F&& f) {
  Sums t;
  for (std::uint64_t i = 0; i < N; ++i) {
    const double v = f(i);
    t.s1 += v;
    t.s2 += v * v;
    t.nonzero += v != 0.0;
  }
  return t;
}

double path_gauge(const Process& p, const Point& start, const Point& x) {
  switch (p.kind) {
    case ProcessKind::euclidean_bm:
      return Gauge{GaugeKind::euclidean_norm, 1.0}({x[0] - start[0], x[1] - start[1], x[2] - start[2]});
    case ProcessKind::heisenberg_bm:
      return Gauge{GaugeKind::koranyi, 1.0}(heisenberg_mul(heisenberg_inv(start), x));
    case ProcessKind::su2_sde:
      return chart_distance(SpaceModel::su2(), start, x);
  }
  return 0.0;
}

McParams params_of(const Process& p, const Domain& d, const Point& start, double t, double h, bool bridge) {
  return {to_string(p.kind), d.label(), start, t, h, bridge};
}

}  // namespace

std::string to_string(ProcessKind k) {
  switch (k) {
    case ProcessKind::euclidean_bm: return "euclidean_bm";
    case ProcessKind::heisenberg_bm: return "heisenberg_bm";
    case ProcessKind::su2_sde: return "su2_sde";
  }
  return "?";
}

Process Process::euclidean(int n, GeneratorScale s) {
  if (n < 1 || n > 3) throw InvalidArgument("euclidean_bm dimension must be 1, 2 or 3");
  return {ProcessKind::euclidean_bm, n, s, 1};
}
Process Process::heisenberg(GeneratorScale s) { return {ProcessKind::heisenberg_bm, 3, s, 4}; }
Process Process::su2(GeneratorScale s) { return {ProcessKind::su2_sde, 3, s, 4}; }

double Process::sigma() const { return scale == GeneratorScale::dirichlet_form ? std::sqrt(2.0) : 1.0; }

SpaceModel Process::space() const {
  switch (kind) {
    case ProcessKind::euclidean_bm: return SpaceModel::euclidean(dim, scale);
    case ProcessKind::heisenberg_bm: return SpaceModel::heisenberg(scale);
    case ProcessKind::su2_sde: return SpaceModel::su2(scale);
  }
  return {};
}

double binomial_ci95(double p, std::uint64_t n) {
  if (n == 0) return 0.0;
  return 1.96 * std::sqrt(p * (1.0 - p) / static_cast<double>(n));
}

PathSample simulate(const Process& process, const Point& start, double t_max, double h_t, std::uint64_t seed,
                    std::uint64_t stream, const Domain* domain) {
  const int steps = step_count(t_max, h_t);
  if (steps < 1) throw InvalidArgument("simulate needs t_max >= h_t");
  const double h = t_max / steps;
  Philox4x32 rng(seed, stream);
  std::normal_distribution<double> N01;
  PathSample s;
  s.process = process;
  s.start = start;
  s.h_t = h;
  s.t_max = t_max;
  s.states.reserve(steps + 1);
  s.states.push_back(start);
  const double sd = process.sigma() * std::sqrt(h);

  su2::Quaternion G = su2::from_chart(start);
  if (process.kind == ProcessKind::su2_sde) s.group_states.push_back(G);
  Point x = start;
  for (int k = 1; k <= steps; ++k) {
    switch (process.kind) {
      case ProcessKind::euclidean_bm:
        for (int i = 0; i < process.dim; ++i) x[i] += sd * N01(rng);
        break;
      case ProcessKind::heisenberg_bm: {
        const double ss = sd / std::sqrt(static_cast<double>(process.substeps));
        for (int j = 0; j < process.substeps; ++j) {
          const double dw1 = ss * N01(rng), dw2 = ss * N01(rng);
          x[2] += 0.5 * (x[0] * dw2 - x[1] * dw1);
          x[0] += dw1;
          x[1] += dw2;
        }
        break;
      }
      case ProcessKind::su2_sde: {
        const double ss = sd / std::sqrt(static_cast<double>(process.substeps));
        for (int j = 0; j < process.substeps; ++j) {
          const double a = ss * N01(rng), b = ss * N01(rng);
          G = G * su2::exp_algebra(a, b, 0.0);
        }
        s.group_states.push_back(G);
        x = su2::to_chart(G);
        break;
      }
    }
    s.states.push_back(x);
    s.sup_gauge = std::max(s.sup_gauge, path_gauge(process, start, x));
    if (domain && s.exit_time == kNeverExited && !domain->contains(x)) s.exit_time = k * h;
  }
  return s;
}

PathOutcome run_killed_path(const Process& process, const Point& start, const Domain& domain, double t,
                            double h_t, bool bridge_correction, Philox4x32& rng) {
  PathOutcome out;
  const int steps = step_count(t, h_t);
  if (steps == 0) return out;
  const double h = t / steps;
  const double sd = process.sigma() * std::sqrt(h);
  std::normal_distribution<double> N01;
  const auto kill = [&](double time, const Point& where) {
    out.survived = false;
    out.exit_time = time;
    out.exit_point = where;
    return out;
  };

  switch (process.kind) {
    case ProcessKind::euclidean_bm: {
      const bool bridge = bridge_correction && !domain.faces().empty();
      const double var = sd * sd;
      std::uniform_real_distribution<double> U01;
      Point x = start;
      for (int k = 0; k < steps; ++k) {
        Point y = x;
        for (int i = 0; i < process.dim; ++i) y[i] += sd * N01(rng);
        if (!domain.contains(y)) return kill((k + 1) * h, domain.project_to_boundary(y).value_or(y));
        if (bridge && U01(rng) >= domain.bridge_survival(x, y, var)) {
          const Point m = midpoint(x, y);
          return kill((k + 0.5) * h, domain.project_to_boundary(m).value_or(m));
        }
        x = y;
      }
      return out;
    }
    case ProcessKind::heisenberg_bm: {
      const int m = process.substeps;
      const double hs = h / m;
      const double ss = sd / std::sqrt(static_cast<double>(m));
      Point x = start;
      for (int k = 0; k < steps; ++k) {
        for (int j = 0; j < m; ++j) {
          const double dw1 = ss * N01(rng), dw2 = ss * N01(rng);
          x[2] += 0.5 * (x[0] * dw2 - x[1] * dw1);
          x[0] += dw1;
          x[1] += dw2;
          if (!domain.contains(x)) return kill((k * m + j + 1) * hs, x);
        }
      }
      return out;
    }
    case ProcessKind::su2_sde: {
      const int m = process.substeps;
      const double hs = h / m;
      const double ss = sd / std::sqrt(static_cast<double>(m));
      su2::Quaternion G = su2::from_chart(start);
      for (int k = 0; k < steps; ++k) {
        for (int j = 0; j < m; ++j) {
          const double a = ss * N01(rng), b = ss * N01(rng);
          G = G * su2::exp_algebra(a, b, 0.0);
          const Point p = su2::to_chart(G);
          if (!su2::chart_valid(p)) {
            out.chart_exit = true;
            return kill((k * m + j + 1) * hs, p);
          }
          if (!domain.contains(p)) return kill((k * m + j + 1) * hs, p);
        }
      }
      return out;
    }
  }
  return out;
}

ExitBatch survival_estimate(const Process& process, const Point& start, const Domain& domain, double t,
                            std::uint64_t N, double h_t, bool bridge_correction, std::uint64_t seed,
                            std::uint64_t stream_begin) {
  require_inside(domain, start);
  step_count(t, h_t);
  std::uint64_t survived = 0, chart = 0;
  const auto n = static_cast<std::int64_t>(N);
#pragma omp parallel for reduction(+ : survived, chart) schedule(dynamic, 256)
  for (std::int64_t i = 0; i < n; ++i) {
    Philox4x32 rng(seed, stream_begin + static_cast<std::uint64_t>(i));
    const PathOutcome o = run_killed_path(process, start, domain, t, h_t, bridge_correction, rng);
    survived += o.survived ? 1 : 0;
    chart += o.chart_exit ? 1 : 0;
  }
  ExitBatch b;
  b.samples = N;
  b.survived = survived;
  b.estimate = N ? static_cast<double>(survived) / static_cast<double>(N) : 0.0;
  b.ci95 = binomial_ci95(b.estimate, N);
  b.seed = seed;
  b.stream_begin = stream_begin;
  b.chart_exits = chart;
  b.params = params_of(process, domain, start, t, h_t, bridge_correction);
  return b;
}

ExitBatch survival_estimate_ref(const Process& process, const Point& start, const Domain& domain, double t,
                                std::uint64_t N, double h_t, bool bridge_correction, std::uint64_t seed,
                                std::uint64_t stream_begin) {
  require_inside(domain, start);
  step_count(t, h_t);
  ExitBatch b;
  for (std::uint64_t i = 0; i < N; ++i) {
    Philox4x32 rng(seed, stream_begin + i);
    const PathOutcome o = run_killed_path(process, start, domain, t, h_t, bridge_correction, rng);
    b.survived += o.survived ? 1 : 0;
    b.chart_exits += o.chart_exit ? 1 : 0;
  }
  b.samples = N;
  b.estimate = N ? static_cast<double>(b.survived) / static_cast<double>(N) : 0.0;
  b.ci95 = binomial_ci95(b.estimate, N);
  b.seed = seed;
  b.stream_begin = stream_begin;
  b.params = params_of(process, domain, start, t, h_t, bridge_correction);
  return b;
}

namespace {

struct Particle {
  Point x{};
  su2::Quaternion G{};
};

// Advances a particle by `steps` steps of size h; false once it is killed.
bool advance(const Process& process, const Domain& domain, Particle& s, int steps, double h, bool bridge,
             Philox4x32& rng, bool& chart_exit) {
  const double sd = process.sigma() * std::sqrt(h);
  std::normal_distribution<double> N01;
  switch (process.kind) {
    case ProcessKind::euclidean_bm: {
      std::uniform_real_distribution<double> U01;
      for (int k = 0; k < steps; ++k) {
        Point y = s.x;
        for (int i = 0; i < process.dim; ++i) y[i] += sd * N01(rng);
        if (!domain.contains(y)) return false;
        if (bridge && U01(rng) >= domain.bridge_survival(s.x, y, sd * sd)) return false;
        s.x = y;
      }
      return true;
    }
    case ProcessKind::heisenberg_bm: {
      const double ss = sd / std::sqrt(static_cast<double>(process.substeps));
      for (int k = 0; k < steps; ++k) {
        for (int j = 0; j < process.substeps; ++j) {
          const double dw1 = ss * N01(rng), dw2 = ss * N01(rng);
          s.x[2] += 0.5 * (s.x[0] * dw2 - s.x[1] * dw1);
          s.x[0] += dw1;
          s.x[1] += dw2;
          if (!domain.contains(s.x)) return false;
        }
      }
      return true;
    }
    case ProcessKind::su2_sde: {
      const double ss = sd / std::sqrt(static_cast<double>(process.substeps));
      for (int k = 0; k < steps * process.substeps; ++k) {
        const double a = ss * N01(rng), b = ss * N01(rng);
        s.G = s.G * su2::exp_algebra(a, b, 0.0);
        s.x = su2::to_chart(s.G);
        if (!su2::chart_valid(s.x)) {
          chart_exit = true;
          return false;
        }
        if (!domain.contains(s.x)) return false;
      }
      return true;
    }
  }
  return false;
}

}  // namespace

ResampledSurvival survival_resampled(const Process& process, const Point& start, const Domain& domain, double t,
                                     std::uint64_t N, double h_t, int stages, int replicates, std::uint64_t seed,
                                     bool bridge_correction) {
  require_inside(domain, start);
  const int steps = step_count(t, h_t);
  if (N == 0) throw InvalidArgument("survival_resampled needs N > 0");
  if (stages < 1 || stages > std::max(steps, 1)) throw InvalidArgument("stages must lie in [1, steps]");
  if (replicates < 2) throw InvalidArgument("survival_resampled needs at least 2 replicates");
  const double h = steps ? t / steps : 0.0;
  const bool bridge = bridge_correction && process.kind == ProcessKind::euclidean_bm && !domain.faces().empty();
  const auto n = static_cast<std::int64_t>(N);
  const std::uint64_t resample_base = static_cast<std::uint64_t>(replicates) * stages * N;

  ResampledSurvival out;
  out.particles = N;
  out.stages = stages;
  Particle init;
  init.x = start;
  init.G = su2::from_chart(start);
  std::vector<Particle> cur(N), next(N);
  std::vector<unsigned char> alive(N);
  const int late = stages / 2;
  const double late_time = steps ? h * (steps - static_cast<std::int64_t>(steps) * late / stages) : 0.0;
  std::vector<double> rates;
  for (int r = 0; r < replicates; ++r) {
    std::fill(cur.begin(), cur.end(), init);
    double log_p = 0.0, log_late = 0.0;
    bool extinct = false;
    for (int k = 0; k < stages && steps > 0; ++k) {
      const int s0 = static_cast<int>(static_cast<std::int64_t>(steps) * k / stages);
      const int s1 = static_cast<int>(static_cast<std::int64_t>(steps) * (k + 1) / stages);
      const std::uint64_t base = (static_cast<std::uint64_t>(r) * stages + k) * N;
      std::uint64_t chart = 0;
#pragma omp parallel for reduction(+ : chart) schedule(dynamic, 256)
      for (std::int64_t i = 0; i < n; ++i) {
        Philox4x32 rng(seed, base + static_cast<std::uint64_t>(i));
        bool ce = false;
        alive[i] = advance(process, domain, cur[i], s1 - s0, h, bridge, rng, ce);
        chart += ce ? 1 : 0;
      }
      out.chart_exits += chart;
      std::vector<std::uint64_t> surv;
      for (std::uint64_t i = 0; i < N; ++i)
        if (alive[i]) surv.push_back(i);
      if (surv.empty()) {
        extinct = true;
        break;
      }
      const double lf = std::log(static_cast<double>(surv.size()) / static_cast<double>(N));
      log_p += lf;
      if (k >= late) log_late += lf;
      Philox4x32 rng(seed, resample_base + static_cast<std::uint64_t>(r) * stages + k);
      const double u = std::uniform_real_distribution<double>()(rng);
      const double m = static_cast<double>(surv.size()) / static_cast<double>(N);
      for (std::uint64_t i = 0; i < N; ++i)
        next[i] = cur[surv[std::min<std::uint64_t>(static_cast<std::uint64_t>((i + u) * m), surv.size() - 1)]];
      std::swap(cur, next);
    }
    out.extinct = out.extinct || extinct;
    out.replicate_estimates.push_back(extinct ? 0.0 : std::exp(log_p));
    if (!extinct && late_time > 0.0) rates.push_back(-log_late / late_time);
  }
  if (rates.size() >= 2) {
    const double n = static_cast<double>(rates.size());
    double a = 0.0, v = 0.0;
    for (double x : rates) a += x / n;
    for (double x : rates) v += (x - a) * (x - a) / (n - 1.0);
    out.decay_rate = a;
    out.decay_rate_ci95 = 1.96 * std::sqrt(v / n);
  }
  const double R = replicates;
  double mean = 0.0, m2 = 0.0;
  for (double p : out.replicate_estimates) mean += p / R;
  for (double p : out.replicate_estimates) m2 += (p - mean) * (p - mean) / (R - 1.0);
  out.estimate = mean;
  out.log_estimate = mean > 0.0 ? std::log(mean) : -INFINITY;
  out.log_ci95 = mean > 0.0 ? 1.96 * std::sqrt(m2 / R) / mean : INFINITY;
  return out;
}

namespace {

template <class Sum>
DensityEstimate dynkin_hunt_impl(const Process& process, const Point& start, const Domain& domain, double t,
                                 const BoundingBox& cell, std::uint64_t N, double h_t, std::uint64_t seed,
                                 bool bridge, Sum&& sum) {
  if (process.kind != ProcessKind::euclidean_bm)
    throw Unsupported("dynkin_hunt_estimate needs a closed-form free kernel (euclidean_bm only)");
  require_inside(domain, start);
  if (!(t > 0.0)) throw InvalidArgument("dynkin_hunt_estimate needs t > 0");
  const Point y = midpoint(cell.lo, cell.hi);
  if (!domain.contains(y)) throw InvalidArgument("cell lies outside the domain");
  const int n = process.dim;
  const auto term = [&](std::uint64_t i) -> double {
    Philox4x32 rng(seed, i);
    const PathOutcome o = run_killed_path(process, start, domain, t, h_t, bridge, rng);
    if (o.survived || !(o.exit_time < t)) return 0.0;
    return gaussian_heat_kernel(t - o.exit_time, o.exit_point, y, n, process.scale);
  };
  const Sums s = sum(N, term);
  const double mean = s.s1 / static_cast<double>(N);
  const double var = std::max(0.0, s.s2 / static_cast<double>(N) - mean * mean);
  DensityEstimate d;
  d.free_kernel = gaussian_heat_kernel(t, start, y, n, process.scale);
  d.value = d.free_kernel - mean;
  d.std_error = std::sqrt(var / static_cast<double>(N));
  d.exited = s.nonzero;
  return d;
}

}  // namespace

DensityEstimate dynkin_hunt_estimate(const Process& process, const Point& start, const Domain& domain, double t,
                                     const BoundingBox& cell, std::uint64_t N, double h_t, std::uint64_t seed,
                                     bool bridge_correction) {
  return dynkin_hunt_impl(process, start, domain, t, cell, N, h_t, seed, bridge_correction,
                          [](std::uint64_t n, auto&& f) { return blocked_sums(n, f); });
}

DensityEstimate dynkin_hunt_estimate_ref(const Process& process, const Point& start, const Domain& domain,
                                         double t, const BoundingBox& cell, std::uint64_t N, double h_t,
                                         std::uint64_t seed, bool bridge_correction) {
  return dynkin_hunt_impl(process, start, domain, t, cell, N, h_t, seed, bridge_correction,
                          [](std::uint64_t n, auto&& f) { return serial_sums(n, f); });
}

MeanEstimate mean_exit_time(const Process& process, const Point& start, const Domain& domain, std::uint64_t N,
                            double h_t, double t_cap, std::uint64_t seed) {
  require_inside(domain, start);
  // Survivors contribute 0 and exits their (positive) exit time, so the nonzero
  // count separates the censored paths.
  const Sums s = blocked_sums(N, [&](std::uint64_t i) {
    Philox4x32 rng(seed, i);
    const PathOutcome o = run_killed_path(process, start, domain, t_cap, h_t, false, rng);
    return o.survived ? 0.0 : o.exit_time;
  });
  const double exited_sum = s.s1;
  const std::uint64_t censored = N - s.nonzero;
  const double mean = (exited_sum + censored * t_cap) / static_cast<double>(N);
  const double m2 = (s.s2 + censored * t_cap * t_cap) / static_cast<double>(N);
  const double var = std::max(0.0, m2 - mean * mean);
  return {mean, std::sqrt(var / static_cast<double>(N)), censored};
}

std::vector<SmallDeviationRow> small_deviation_estimate(const Process& process, const Point& start,
                                                        const Gauge& gauge, double t,
                                                        const std::vector<double>& eps_list, std::uint64_t N,
                                                        double h_t, double lambda1, double beta,
                                                        std::uint64_t seed, bool bridge_correction) {
  std::vector<SmallDeviationRow> rows;
  for (std::size_t j = 0; j < eps_list.size(); ++j) {
    const double eps = eps_list[j];
    if (j > 0 && !(eps < eps_list[j - 1])) throw InvalidArgument("eps_list must be decreasing");
    const Domain ball_eps = make_domain(process.space(), ball(gauge, eps, start), "gauge_ball");
    const ExitBatch b = survival_estimate(process, start, ball_eps, t, N, h_t, bridge_correction, seed, j * N);
    SmallDeviationRow r;
    r.eps = eps;
    r.probability = b.estimate;
    r.ci95 = b.ci95;
    r.flagged = b.survived == 0;
    r.scaled = std::exp(lambda1 * t / std::pow(eps, beta)) * b.estimate;
    r.neg_log = r.flagged ? INFINITY : -std::pow(eps, beta) * std::log(b.estimate);
    r.chart_exits = b.chart_exits;
    rows.push_back(r);
  }
  return rows;
}

HeatContentEstimate heat_content_estimate(const Process& process, const Domain& domain,
                                          const std::vector<Point>& nodes, const std::vector<double>& weights,
                                          double t, std::uint64_t N, double h_t, std::uint64_t seed,
                                          bool bridge_correction) {
  if (nodes.size() != weights.size()) throw InvalidArgument("nodes and weights differ in length");
  HeatContentEstimate q{0.0, 0.0, {}};
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const ExitBatch b = survival_estimate(process, nodes[i], domain, t, N, h_t, bridge_correction, seed, i * N);
    q.node_estimates.push_back(b.estimate);
    q.Q += weights[i] * b.estimate;
    q.ci95 += weights[i] * b.ci95;
  }
  return q;
}

ScalingCheck exit_scaling_check(const Process& process, const Domain& domain, const Point& start, double r,
                                double t, std::uint64_t N, double h_t, std::uint64_t seed) {
  if (process.kind == ProcessKind::su2_sde) throw Unsupported("su2_sde has no exact dilation");
  const Domain dilated = dilate_domain(domain, r);
  const Point xs = Gauge{process.kind == ProcessKind::heisenberg_bm ? GaugeKind::koranyi : GaugeKind::euclidean_norm,
                         1.0}
                       .dilate(start, r);
  ScalingCheck c;
  c.r = r;
  c.ell = r * r;
  const bool bridge = process.kind == ProcessKind::euclidean_bm;
  c.dilated = survival_estimate(process, xs, dilated, t, N, h_t, bridge, seed, 0);
  c.base = survival_estimate(process, start, domain, t / c.ell, N, h_t / c.ell, bridge, seed, N);
  c.difference = c.dilated.estimate - c.base.estimate;
  c.joint_ci95 = std::sqrt(c.dilated.ci95 * c.dilated.ci95 + c.base.ci95 * c.base.ci95);
  c.agree = std::abs(c.difference) <= c.joint_ci95;
  return c;
}

}  // namespace dirlab
