#pragma once

/**
 * @file quat.hpp
 * @brief Quaternion algebra kernel.
 *
 * A quaternion is stored as a scalar part `w` and a vector part `vec`, in the
 * component order (w, x, y, z). Everything here is a pure function of values.
 *
 *   product      a b   = (a.w b.w - a.vec.b.vec, a.w b.vec + b.w a.vec + a.vec x b.vec)
 *   conjugate    conj(a) = (a.w, -a.vec)
 *   cross        a ^ b = (b conj(a) - a conj(b)) / 2 = (0, a.w b.vec - b.w a.vec + a.vec x b.vec)
 *
 * Useful identities (checked by the test-suite):
 *   conj(a b) = conj(b) conj(a)
 *   conj(u).(v w) = conj(w).(u v) = conj(v).(w u)
 *   (u v) ^ w = u ^ (w conj(v))
 */

#include <cmath>
#include <numbers>
#include <string>

#include "ksreg/errors.hpp"
#include "ksreg/linalg.hpp"

namespace ksreg {

struct Quaternion {
  double w{0.0};
  Vec3 vec{};

  constexpr Quaternion() = default;
  constexpr Quaternion(double w_, const Vec3& v_) : w{w_}, vec{v_} {}
  constexpr Quaternion(double w_, double x, double y, double z) : w{w_}, vec{x, y, z} {}

  // Pure vector quaternion (0, v).
  static constexpr Quaternion pure(const Vec3& v) { return {0.0, v}; }
  static constexpr Quaternion identity() { return {1.0, 0.0, 0.0, 0.0}; }

  // Component i in (w, x, y, z) order.
  constexpr double& operator[](std::size_t i) { return i == 0 ? w : vec[i - 1]; }
  constexpr double operator[](std::size_t i) const { return i == 0 ? w : vec[i - 1]; }

  constexpr bool is_pure() const { return w == 0.0; }

  constexpr bool operator==(const Quaternion&) const = default;

  constexpr Quaternion& operator+=(const Quaternion& o) {
    w += o.w;
    vec += o.vec;
    return *this;
  }
  constexpr Quaternion& operator-=(const Quaternion& o) {
    w -= o.w;
    vec -= o.vec;
    return *this;
  }
  constexpr Quaternion& operator*=(double s) {
    w *= s;
    vec *= s;
    return *this;
  }
};

constexpr Quaternion operator+(Quaternion a, const Quaternion& b) { return a += b; }
constexpr Quaternion operator-(Quaternion a, const Quaternion& b) { return a -= b; }
constexpr Quaternion operator-(const Quaternion& a) { return {-a.w, -a.vec}; }
constexpr Quaternion operator*(double s, Quaternion a) { return a *= s; }
constexpr Quaternion operator*(Quaternion a, double s) { return a *= s; }
constexpr Quaternion operator/(const Quaternion& a, double s) { return {a.w / s, a.vec / s}; }

// Euclidean scalar product of two quaternions viewed as 4-vectors.
constexpr double dot(const Quaternion& a, const Quaternion& b) { return a.w * b.w + dot(a.vec, b.vec); }

inline double norm(const Quaternion& a) { return std::sqrt(dot(a, a)); }

inline double max_abs(const Quaternion& a) { return std::max(std::abs(a.w), max_abs(a.vec)); }

constexpr Quaternion qmul(const Quaternion& a, const Quaternion& b) {
  return {a.w * b.w - dot(a.vec, b.vec), a.w * b.vec + b.w * a.vec + cross(a.vec, b.vec)};
}

constexpr Quaternion operator*(const Quaternion& a, const Quaternion& b) { return qmul(a, b); }

constexpr Quaternion qconj(const Quaternion& a) { return {a.w, -a.vec}; }

constexpr Quaternion qcross(const Quaternion& a, const Quaternion& b) {
  return Quaternion::pure(a.w * b.vec - b.w * a.vec + cross(a.vec, b.vec));
}

inline Quaternion qinverse(const Quaternion& a) {
  const double n2 = dot(a, a);
  if (n2 == 0.0) throw InvalidArgument("inverse of the zero quaternion");
  return qconj(a) / n2;
}

// A quaternion of unit norm. Construction absorbs round-off up to 1e-9 in the
// norm and rejects anything further away.
class UnitQuaternion {
 public:
  static constexpr double kNormSlack = 1e-9;

  UnitQuaternion() : q_{Quaternion::identity()} {}

  explicit UnitQuaternion(const Quaternion& q) : q_{q} {
    const double n = norm(q);
    if (!(std::abs(n - 1.0) <= kNormSlack)) {
      throw InvalidArgument("quaternion norm " + std::to_string(n) + " is not within 1e-9 of 1");
    }
    if (n != 1.0) q_ = q / n;
  }

  UnitQuaternion(double w, double x, double y, double z) : UnitQuaternion(Quaternion{w, x, y, z}) {}

  static UnitQuaternion identity() { return UnitQuaternion{}; }

  const Quaternion& value() const { return q_; }
  operator const Quaternion&() const { return q_; }
  double w() const { return q_.w; }
  const Vec3& vec() const { return q_.vec; }

  UnitQuaternion conj() const { return UnitQuaternion{qconj(q_), Trusted{}}; }
  UnitQuaternion operator-() const { return UnitQuaternion{-q_, Trusted{}}; }

  bool operator==(const UnitQuaternion& o) const { return q_ == o.q_; }

 private:
  struct Trusted {};
  UnitQuaternion(const Quaternion& q, Trusted) : q_{q} {}

  Quaternion q_;
};

inline UnitQuaternion operator*(const UnitQuaternion& a, const UnitQuaternion& b) {
  return UnitQuaternion{qmul(a.value(), b.value())};
}

// Vector part of q (0,x) conj(q).
inline Vec3 rotate(const UnitQuaternion& q, const Vec3& x) {
  return qmul(qmul(q.value(), Quaternion::pure(x)), qconj(q.value())).vec;
}

// Euler-Rodrigues rotation matrix. The entries are homogeneous of degree two,
// so this is also valid for non-unit q (it then scales by |q|^2); the KS map
// relies on that.
constexpr Mat3 rotation_matrix(const Quaternion& q) {
  const double q0 = q.w, q1 = q.vec.x, q2 = q.vec.y, q3 = q.vec.z;
  Mat3 r;
  r(0, 0) = q0 * q0 + q1 * q1 - q2 * q2 - q3 * q3;
  r(0, 1) = 2.0 * (q1 * q2 - q0 * q3);
  r(0, 2) = 2.0 * (q0 * q2 + q1 * q3);
  r(1, 0) = 2.0 * (q1 * q2 + q0 * q3);
  r(1, 1) = q0 * q0 - q1 * q1 + q2 * q2 - q3 * q3;
  r(1, 2) = -2.0 * (q0 * q1 - q2 * q3);
  r(2, 0) = -2.0 * (q0 * q2 - q1 * q3);
  r(2, 1) = 2.0 * (q0 * q1 + q2 * q3);
  r(2, 2) = q0 * q0 - q1 * q1 - q2 * q2 + q3 * q3;
  return r;
}

inline Mat3 rotation_matrix(const UnitQuaternion& q) { return rotation_matrix(q.value()); }

// (cos(theta/2), sin(theta/2) n). Angles outside [0, pi] are mapped onto the
// canonical representative through (n, theta) ~ (-n, 2 pi - theta).
inline UnitQuaternion axis_angle(const Vec3& n, double theta) {
  const double len = norm(n);
  if (!(std::abs(len - 1.0) <= 1e-9)) throw InvalidArgument("rotation axis is not a unit vector");
  constexpr double two_pi = 2.0 * std::numbers::pi;
  Vec3 axis = n / len;
  double angle = std::fmod(theta, two_pi);
  if (angle < 0.0) angle += two_pi;
  if (angle > std::numbers::pi) {
    axis = -axis;
    angle = two_pi - angle;
  }
  const double h = 0.5 * angle;
  return UnitQuaternion{Quaternion{std::cos(h), std::sin(h) * axis}};
}

// Rotation of y about the unit axis c by `angle`, in Rodrigues form. Equal to
// R(q) y with q = (cos(angle/2), sin(angle/2) c), but the component of y along
// c is carried through untouched, bit for bit.
inline Vec3 rotate_about(const Vec3& c, double angle, const Vec3& y) {
  if (angle == 0.0) return y;
  const double along = dot(c, y);
  const Vec3 axial = along * c;
  const Vec3 radial = y - axial;
  return axial + std::cos(angle) * radial + std::sin(angle) * cross(c, radial);
}

}  // namespace ksreg
