#pragma once

#include <complex>

#include <Eigen/Dense>

#include "dirlab/core.hpp"

namespace dirlab::su2 {

// Milnor basis of su(2): X = −iσ₁/2, Y = −iσ₂/2, Z = −iσ₃/2, so that
// [X,Y] = Z, [Y,Z] = X, [Z,X] = Y and X² = Y² = Z² = −I/4.
//
// Group elements are unit quaternions w + x·i + y·j + z·k with i = 2X, j = 2Y,
// k = 2Z. The quaternion units multiply as ij = k, jk = i, ki = j.

struct Quaternion {
  double w = 1.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

Quaternion operator*(const Quaternion& a, const Quaternion& b);
Quaternion conjugate(const Quaternion& q);
double norm(const Quaternion& q);

/// exp(aX + bY + cZ).
Quaternion exp_algebra(double a, double b, double c);

/// (a, b, c) with exp(aX + bY + cZ) = q, taking the rotation angle in [0, 2π].
std::array<double, 3> log_algebra(const Quaternion& q);

/// Cylindrical chart g(ρ, θ, z) = exp(ρ cosθ X + ρ sinθ Y)·exp(zZ), passed as
/// the Cartesian triple (ρ cosθ, ρ sinθ, z).
Quaternion from_chart(const Point& p);

/// Inverse chart; the image has ρ ∈ [0, π] and z ∈ (−2π, 2π].
Point to_chart(const Quaternion& q);

/// True where the chart is a diffeomorphism onto its image with margin:
/// ρ < π/2 and |z| < π.
bool chart_valid(const Point& p);

using Matrix2c = Eigen::Matrix2cd;

Matrix2c milnor_X();
Matrix2c milnor_Y();
Matrix2c milnor_Z();

Matrix2c to_matrix(const Quaternion& q);
Quaternion from_matrix(const Matrix2c& m);

/// Lie bracket in the Milnor basis on coefficient triples.
std::array<double, 3> bracket(const std::array<double, 3>& v, const std::array<double, 3>& w);

}  // namespace dirlab::su2
