#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "dirlab/core.hpp"
#include "dirlab/rng.hpp"
#include "dirlab/su2.hpp"

namespace dirlab {

enum class ProcessKind { euclidean_bm, heisenberg_bm, su2_sde };

std::string to_string(ProcessKind k);

/// Diffusion generated by the chosen scale of the sum-of-squares operator:
/// dirichlet_form ⇒ increments of variance 2h per driving field, probabilist ⇒ h.
struct Process {
  ProcessKind kind = ProcessKind::euclidean_bm;
  int dim = 1;
  GeneratorScale scale = GeneratorScale::dirichlet_form;
  int substeps = 4;  // increments per step, each monitored (heisenberg_bm, su2_sde)

  static Process euclidean(int n, GeneratorScale s = GeneratorScale::dirichlet_form);
  static Process heisenberg(GeneratorScale s = GeneratorScale::dirichlet_form);
  static Process su2(GeneratorScale s = GeneratorScale::dirichlet_form);

  double sigma() const;
  SpaceModel space() const;
};

inline constexpr double kNeverExited = std::numeric_limits<double>::infinity();

struct PathSample {
  Process process;
  Point start{};
  double h_t = 0.0;
  double t_max = 0.0;
  std::vector<Point> states;                  // chart coordinates, states[k] at time k·h_t
  std::vector<su2::Quaternion> group_states;  // su2_sde only
  double exit_time = kNeverExited;
  double sup_gauge = 0.0;  // running max of gauge(start⁻¹·X_s) over recorded states
};

/// One recorded trajectory. With a domain, exit_time is the first recorded time
/// whose state fails membership; the trajectory is still recorded to t_max.
PathSample simulate(const Process& process, const Point& start, double t_max, double h_t, std::uint64_t seed,
                    std::uint64_t stream, const Domain* domain = nullptr);

/// Outcome of a single killed path.
struct PathOutcome {
  bool survived = true;
  double exit_time = kNeverExited;
  Point exit_point{};
  bool chart_exit = false;
};

/// Runs one path killed on leaving `domain` before time t. With bridge_correction
/// (euclidean only) each step is also killed with the Brownian-bridge crossing
/// probability of the nearest faces; a bridge kill is dated at the step midpoint
/// and located at the boundary projection of the step midpoint.
PathOutcome run_killed_path(const Process& process, const Point& start, const Domain& domain, double t,
                            double h_t, bool bridge_correction, Philox4x32& rng);

struct McParams {
  std::string process;
  std::string domain;
  Point start{};
  double t = 0.0;
  double h_t = 0.0;
  bool bridge_correction = false;
};

struct ExitBatch {
  std::uint64_t samples = 0;
  std::uint64_t survived = 0;
  double estimate = 0.0;
  double ci95 = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t stream_begin = 0;  // streams [stream_begin, stream_begin + samples)
  std::uint64_t chart_exits = 0;
  McParams params;
};

/// 1.96·√(p̂(1 − p̂)/N).
double binomial_ci95(double p, std::uint64_t n);

/// P^x(τ_U > t) by N killed paths (OpenMP over paths; counts are independent of
/// the worker count).
ExitBatch survival_estimate(const Process& process, const Point& start, const Domain& domain, double t,
                            std::uint64_t N, double h_t, bool bridge_correction, std::uint64_t seed,
                            std::uint64_t stream_begin = 0);

/// Serial reference implementation of survival_estimate.
ExitBatch survival_estimate_ref(const Process& process, const Point& start, const Domain& domain, double t,
                                std::uint64_t N, double h_t, bool bridge_correction, std::uint64_t seed,
                                std::uint64_t stream_begin = 0);

struct ResampledSurvival {
  double estimate = 0.0;      // mean over replicates
  double log_estimate = 0.0;  // log(estimate)
  double log_ci95 = 0.0;      // 1.96·sd/(√R·estimate) from the replicate spread
  std::vector<double> replicate_estimates;
  std::uint64_t particles = 0;  // per replicate
  int stages = 0;
  std::uint64_t chart_exits = 0;
  bool extinct = false;  // some replicate lost every particle
  // −mean log(surviving fraction) per unit time over the second half of the
  // stages: the decay rate of the killed semigroup, free of the prefactor.
  double decay_rate = 0.0;
  double decay_rate_ci95 = 0.0;
};

/// P^x(τ_U > t) for rare survival events. N particles are advanced over
/// `stages` equal time slices; after each slice the survivors are resampled
/// back to N (systematic resampling) and the estimate is the product of the
/// surviving fractions. `replicates` independent runs give the CI.
/// Particle i of stage k in replicate r uses stream (r·stages + k)·N + i.
ResampledSurvival survival_resampled(const Process& process, const Point& start, const Domain& domain, double t,
                                     std::uint64_t N, double h_t, int stages, int replicates, std::uint64_t seed,
                                     bool bridge_correction = false);

struct DensityEstimate {
  double value;
  double std_error;
  double free_kernel;
  std::uint64_t exited;
};

/// p_t^U(x, y) = p_t(x, y) − E^x[1{τ<t} p_{t−τ}(X_τ, y)] with y the cell center.
DensityEstimate dynkin_hunt_estimate(const Process& process, const Point& start, const Domain& domain, double t,
                                     const BoundingBox& cell, std::uint64_t N, double h_t, std::uint64_t seed,
                                     bool bridge_correction = true);
DensityEstimate dynkin_hunt_estimate_ref(const Process& process, const Point& start, const Domain& domain,
                                         double t, const BoundingBox& cell, std::uint64_t N, double h_t,
                                         std::uint64_t seed, bool bridge_correction = true);

struct MeanEstimate {
  double mean;
  double std_error;
  std::uint64_t censored;  // paths still alive at t_cap (counted at t_cap)
};

/// E^x[τ_U ∧ t_cap].
MeanEstimate mean_exit_time(const Process& process, const Point& start, const Domain& domain, std::uint64_t N,
                            double h_t, double t_cap, std::uint64_t seed);

struct SmallDeviationRow {
  double eps;
  double probability;
  double ci95;
  double scaled;    // e^{λ₁t/ε^β}·P̂
  double neg_log;   // −ε^β·log P̂
  bool flagged;     // P̂ = 0
  std::uint64_t chart_exits;
};

/// Survival in the gauge ball B_ε(start) up to time t, for each ε.
std::vector<SmallDeviationRow> small_deviation_estimate(const Process& process, const Point& start,
                                                        const Gauge& gauge, double t,
                                                        const std::vector<double>& eps_list, std::uint64_t N,
                                                        double h_t, double lambda1, double beta,
                                                        std::uint64_t seed, bool bridge_correction = true);

struct HeatContentEstimate {
  double Q;
  double ci95;  // Σ wᵢ·ci95ᵢ
  std::vector<double> node_estimates;
};

/// Σ wᵢ P^{xᵢ}(τ_U > t) over quadrature nodes. Node i uses streams [i·N, (i+1)·N).
HeatContentEstimate heat_content_estimate(const Process& process, const Domain& domain,
                                          const std::vector<Point>& nodes, const std::vector<double>& weights,
                                          double t, std::uint64_t N, double h_t, std::uint64_t seed,
                                          bool bridge_correction = true);

struct ScalingCheck {
  double r;
  double ell;
  ExitBatch dilated;  // P^{δ_r x}(τ_{δ_r U} > t)
  ExitBatch base;     // P^x(τ_U > t/ℓ)
  double difference;
  double joint_ci95;
  bool agree;
};

/// Both sides of P^{x_g}(τ_{U_g} > t) = P^x(τ_U > t/ℓ_g) with ℓ = r² by
/// independent MC; the base side runs with step h_t/ℓ so both use the same
/// number of steps.
ScalingCheck exit_scaling_check(const Process& process, const Domain& domain, const Point& start, double r,
                                double t, std::uint64_t N, double h_t, std::uint64_t seed);

}  // namespace dirlab
