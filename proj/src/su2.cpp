#include "dirlab/su2.hpp"

#include <cmath>
#include <numbers>

namespace dirlab::su2 {

Quaternion operator*(const Quaternion& a, const Quaternion& b) {
  return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
          a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
          a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
          a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

Quaternion conjugate(const Quaternion& q) { return {q.w, -q.x, -q.y, -q.z}; }

double norm(const Quaternion& q) {
  return std::sqrt(q.w * q.w + q.x * q.x + q.y * q.y + q.z * q.z);
}

// aX + bY + cZ = (a i + b j + c k)/2, a pure quaternion of length s/2.
Quaternion exp_algebra(double a, double b, double c) {
  const double s = std::sqrt(a * a + b * b + c * c);
  if (s < 1e-300) return {};
  const double half = 0.5 * s;
  const double f = std::sin(half) / s;
  return {std::cos(half), f * a, f * b, f * c};
}

std::array<double, 3> log_algebra(const Quaternion& q) {
  const double v = std::sqrt(q.x * q.x + q.y * q.y + q.z * q.z);
  if (v < 1e-300) return {0.0, 0.0, 0.0};
  const double s = 2.0 * std::atan2(v, q.w);
  const double f = s / v;
  return {f * q.x, f * q.y, f * q.z};
}

Quaternion from_chart(const Point& p) {
  return exp_algebra(p[0], p[1], 0.0) * exp_algebra(0.0, 0.0, p[2]);
}

Point to_chart(const Quaternion& q) {
  const double half_z = std::atan2(q.z, q.w);
  const double rho = 2.0 * std::atan2(std::hypot(q.x, q.y), std::hypot(q.w, q.z));
  const double phase = std::atan2(q.y, q.x);  // θ − z/2
  const double theta = phase + half_z;
  return {rho * std::cos(theta), rho * std::sin(theta), 2.0 * half_z};
}

bool chart_valid(const Point& p) {
  return std::hypot(p[0], p[1]) < 0.5 * std::numbers::pi && std::abs(p[2]) < std::numbers::pi;
}

namespace {
const std::complex<double> I(0.0, 1.0);
}

Matrix2c milnor_X() {
  Matrix2c m;
  m << 0.0, -0.5 * I, -0.5 * I, 0.0;
  return m;
}

Matrix2c milnor_Y() {
  Matrix2c m;
  m << 0.0, -0.5, 0.5, 0.0;
  return m;
}

Matrix2c milnor_Z() {
  Matrix2c m;
  m << -0.5 * I, 0.0, 0.0, 0.5 * I;
  return m;
}

Matrix2c to_matrix(const Quaternion& q) {
  return q.w * Matrix2c::Identity() + 2.0 * (q.x * milnor_X() + q.y * milnor_Y() + q.z * milnor_Z());
}

Quaternion from_matrix(const Matrix2c& m) {
  // m = [[w − i z, −i x − y], [−i x + y, w + i z]]
  return {0.5 * (m(0, 0).real() + m(1, 1).real()), -0.5 * (m(0, 1).imag() + m(1, 0).imag()),
          0.5 * (m(1, 0).real() - m(0, 1).real()), 0.5 * (m(1, 1).imag() - m(0, 0).imag())};
}

std::array<double, 3> bracket(const std::array<double, 3>& v, const std::array<double, 3>& w) {
  return {v[1] * w[2] - v[2] * w[1], v[2] * w[0] - v[0] * w[2], v[0] * w[1] - v[1] * w[0]};
}

}  // namespace dirlab::su2
