#pragma once

#include <optional>
#include <string>
#include <variant>

#include "dirlab/core.hpp"

namespace dirlab {

/// ℝⁿ heat kernel: (4πt)^{−n/2}e^{−|p−q|²/4t} (dirichlet_form) or
/// (2πt)^{−n/2}e^{−|p−q|²/2t} (probabilist).
double gaussian_heat_kernel(double t, const Point& p, const Point& q, int n, GeneratorScale scale);

// Bound families. Envelopes:
//   gaussian_ahlfors  C₂t^{−α/2}e^{−d²/(K₂t)} ≤ p ≤ C₁t^{−α/2}e^{−d²/(K₁t)}
//   sub_gaussian      c₁t^{−α/β}e^{−c₂(d^β/t)^{1/(β−1)}} ≤ p ≤ c₃t^{−α/β}e^{−c₄(d^β/t)^{1/(β−1)}}
//   polynomial        t^{−α/β}(1 + c₁d/t^{1/β})^{−(α+β)} ≤ p ≤ t^{−α/β}(1 + c₂d/t^{1/β})^{−(α+β)}
//   lie_group         c₁t^{−ν/2}e^{−c₂t − c₂d²/t} ≤ p ≤ κt^{−ν/2}e^{κt − c₃d²/t}

struct GaussianAhlfors {
  double C1, C2, K1, K2, alpha;
};
struct SubGaussian {
  double c1, c2, c3, c4, alpha, beta;
};
struct PolynomialNonlocal {
  double c1, c2, alpha, beta;
};
struct LieGroupBound {
  double kappa, c1, c2, c3, nu;
};

class KernelBound {
 public:
  using Params = std::variant<GaussianAhlfors, SubGaussian, PolynomialNonlocal, LieGroupBound>;

  static KernelBound gaussian_ahlfors(double C1, double C2, double K1, double K2, double alpha);
  static KernelBound sub_gaussian(double c1, double c2, double c3, double c4, double alpha, double beta);
  static KernelBound polynomial_nonlocal(double c1, double c2, double alpha, double beta);
  static KernelBound lie_group(double kappa, double c1, double c2, double c3, double nu);

  const Params& params() const { return p_; }
  std::string family() const;

 private:
  explicit KernelBound(Params p) : p_(p) {}
  Params p_;
};

struct Envelope {
  double lower;
  double upper;
};

Envelope envelope(const KernelBound& b, double t, double d);

/// Upper envelope at d = 0.
double sup_kernel(const KernelBound& b, double t);

/// C·t^{−γ} form of sup_kernel where the family has one.
struct PowerLaw {
  double C;
  double gamma;
};
std::optional<PowerLaw> power_law(const KernelBound& b);

struct LambdaConstant {
  double value;
  double t_star;
};

/// inf_{t>0} sup_kernel(t)·e^{λt}.
LambdaConstant lambda_envelope_constant(const KernelBound& b, double lambda);

/// Same infimum for a bare power law C t^{−γ}.
LambdaConstant lambda_envelope_constant(const PowerLaw& m, double lambda);

/// (1/√κ)(ν/(2κe))^{ν/4}.
double good_set_threshold(double kappa, double nu);

struct GapCondition {
  bool satisfied;
  std::optional<double> witness_t;
};

/// Searches for t with sup_kernel(t) < 1/volume².
GapCondition spectral_gap_condition(const KernelBound& b, double volume);

/// Time window below which the family's comparison function F is increasing.
///
/// sub_gaussian (gaussian_ahlfors mapped to β = 2): ν = α/β, μ = 1/(β−1),
///   a = c₂d_xy^{β/(β−1)}, b = c₄d_bd^{β/(β−1)}, F(t) = (s/t)^ν e^{−a/t^μ + b/s^μ}.
/// polynomial: ν = 1/(α+β), μ = 1/β, a = c₁d_xy, b = c₂d_bd,
///   F(t) = (t/s)^ν (s^μ + b)/(t^μ + a).
/// lie_group: a = c₂, b = c₂d_xy², d = c₃d_bd²,
///   F(t) = (s/t)^{ν/2} e^{−at − b/t + d/s − κs}.
struct IrreducibilityWindow {
  std::string family;
  double t0;
  bool r_condition;
  double nu;
  double mu;
  double a;
  double b;
  double d;
};

IrreducibilityWindow irreducibility_window(const KernelBound& bound, double d_xy, double d_boundary);

/// Window from the raw (ν, μ, a, b) parameters of a family.
IrreducibilityWindow irreducibility_window_raw(const std::string& family, double nu, double mu, double a,
                                               double b, double d = 0.0);

double comparison_function(const IrreducibilityWindow& w, double s, double t, double kappa = 0.0);

struct KappaEstimate {
  double center;
  double radius;
};

/// κ(g) ∈ [center − radius, center + radius] with center 1 − β/α.
KappaEstimate kappa_estimate(double J_g, double alpha, double beta, double c1, double c3);

}  // namespace dirlab
