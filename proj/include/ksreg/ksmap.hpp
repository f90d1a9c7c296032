#pragma once

/**
 * @file ksmap.hpp
 * @brief KS point transformation with an arbitrary defining vector.
 *
 * With a unit defining vector c and a length scale alpha, a KS quaternion v
 * maps onto the Cartesian position
 *
 *     alpha (0, x) = v (0, c) conj(v),        |x| = (v.v) / alpha.
 *
 * Normalised KS variables v/|v| are the Euler-Rodrigues parameters of a
 * rotation taking c onto x/|x|. The map is 1-to-S^1: every point has a fiber
 * v (cos phi, sin phi c) of preimages.
 */

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ksreg/errors.hpp"
#include "ksreg/linalg.hpp"
#include "ksreg/quat.hpp"

namespace ksreg {

// Unit 3-vector fixing the preferred direction of a KS chart.
class DefiningVector {
 public:
  static constexpr double kUnitTolerance = 1e-12;

  explicit DefiningVector(const Vec3& c) : c_{c} {
    if (!(std::abs(norm(c) - 1.0) <= kUnitTolerance)) {
      throw InvalidArgument("defining vector must have unit length");
    }
  }

  // Accepts any non-zero direction and normalises it.
  static DefiningVector from_direction(const Vec3& d) {
    const double n = norm(d);
    if (!(n > 0.0) || !std::isfinite(n)) throw InvalidArgument("defining vector direction is zero");
    return DefiningVector{d / n};
  }

  const Vec3& vec() const { return c_; }
  operator const Vec3&() const { return c_; }
  Quaternion quaternion() const { return Quaternion::pure(c_); }

  bool operator==(const DefiningVector&) const = default;

 private:
  Vec3 c_;
};

struct KSChart {
  DefiningVector c;
  double alpha;

  KSChart(DefiningVector c_, double alpha_) : c{c_}, alpha{alpha_} {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw InvalidArgument("alpha must be positive");
  }

  // Classical celestial-mechanics chart (c = e1).
  static KSChart ks1(double alpha = 1.0) { return {DefiningVector{kE1}, alpha}; }
  // Atomic-physics chart (c = e3).
  static KSChart ks3(double alpha = 1.0) { return {DefiningVector{kE3}, alpha}; }
};

struct CartesianPosition {
  Vec3 x{};
  double r{0.0};

  CartesianPosition() = default;
  CartesianPosition(const Vec3& x_) : x{x_}, r{norm(x_)} {}  // NOLINT: implicit by intent
};

// The antipodal branch is used when 1 + c.x/r drops below this.
inline constexpr double kPoleEpsilon = 1e-10;

inline CartesianPosition ks_forward(const Quaternion& v, const KSChart& chart) {
  const Vec3& c = chart.c.vec();
  const Vec3& u = v.vec;
  const Vec3 ax = (v.w * v.w - dot(u, u)) * c + 2.0 * dot(c, u) * u + 2.0 * v.w * cross(u, c);
  CartesianPosition out;
  out.x = ax / chart.alpha;
  out.r = dot(v, v) / chart.alpha;
  return out;
}

// v (cos phi, sin phi c): another member of the same fiber.
inline Quaternion fiber_shift(const Quaternion& v, double phi, const DefiningVector& c) {
  return qmul(v, Quaternion{std::cos(phi), std::sin(phi) * c.vec()});
}

namespace detail {

// r + c.x evaluated without cancellation near the antipode of c.
inline double r_plus_cx(const Vec3& x, double r, const Vec3& c) {
  const double cx = dot(c, x);
  if (cx >= 0.0) return r + cx;
  const Vec3 cxx = cross(c, x);
  return dot(cxx, cxx) / (r - cx);
}

inline bool near_pole(const Vec3& x, double r, const Vec3& c) {
  return r_plus_cx(x, r, c) < kPoleEpsilon * r;
}

inline void require_nonzero(double r) {
  if (!(r > 0.0)) throw CollisionError();
}

}  // namespace detail

// Unit vector orthogonal to c: c x a normalised, a being the basis vector with
// the smallest |component along c| (lowest index on ties).
inline Vec3 orthogonal_completion(const Vec3& c) {
  std::size_t k = 0;
  for (std::size_t i = 1; i < 3; ++i)
    if (std::abs(c[i]) < std::abs(c[k])) k = i;
  Vec3 a{};
  a[k] = 1.0;
  return normalized(cross(c, a));
}

namespace detail {

// Preimage for positions at or next to the antipode of c. At the exact pole it
// is sqrt(alpha r) (0, n) with n the orthogonal completion of c; close to the
// pole it is composed with the (well-conditioned) rotation from -c to x/r so
// that the forward map still reproduces x.
inline Quaternion antipodal_preimage(const Vec3& x, double r, const KSChart& chart) {
  const Vec3& c = chart.c.vec();
  const Vec3 n = orthogonal_completion(c);
  const Vec3 xh = x / r;
  const Vec3 mc = -c;
  // Rotation taking -c to xh: (sqrt((1 + (-c).xh)/2), (-c x xh) / (2 p0)).
  const double p0 = std::sqrt(0.5 * (1.0 + dot(mc, xh)));
  const Quaternion p{p0, cross(mc, xh) / (2.0 * p0)};
  const Quaternion q = qmul(p, Quaternion::pure(n));
  return std::sqrt(chart.alpha * r) * q / norm(q);
}

}  // namespace detail

// Preimage with positive scalar part (rotation about c x x), or the antipodal
// representative when x is (numerically) antiparallel to c.
inline Quaternion ks_invert(const CartesianPosition& pos, const KSChart& chart) {
  detail::require_nonzero(pos.r);
  const Vec3& c = chart.c.vec();
  const double s = detail::r_plus_cx(pos.x, pos.r, c);
  if (s < kPoleEpsilon * pos.r) return detail::antipodal_preimage(pos.x, pos.r, chart);
  return {std::sqrt(0.5 * chart.alpha * s), std::sqrt(0.5 * chart.alpha / s) * cross(c, pos.x)};
}

// SKS representative: the pure-vector preimage +-sqrt(alpha / (2 (r + c.x))) (0, x + r c).
inline Quaternion ks_invert_sks(const CartesianPosition& pos, const KSChart& chart, int sign = +1) {
  detail::require_nonzero(pos.r);
  if (sign != 1 && sign != -1) throw InvalidArgument("sign must be +1 or -1");
  const Vec3& c = chart.c.vec();
  const double s = detail::r_plus_cx(pos.x, pos.r, c);
  if (s < kPoleEpsilon * pos.r) return sign * detail::antipodal_preimage(pos.x, pos.r, chart);
  const double k = sign * std::sqrt(chart.alpha / (2.0 * s));
  return Quaternion::pure(k * (pos.x + pos.r * c));
}

struct SksReduction {
  Quaternion v_s;         // pure vector representative
  UnitQuaternion gauge;   // v_s = sign * v * gauge
  int sign{+1};
  bool gauge_defined{true};
};

// Reduces an arbitrary fiber member to the SKS vector. With sign = +1 the
// result has a non-negative component along c, i.e. it coincides with
// ks_invert_sks(..., +1). A quaternion that is already pure and orthogonal to
// c admits no gauge; it is returned unchanged with the identity gauge and
// gauge_defined = false.
inline SksReduction reduce_to_sks(const Quaternion& v, const DefiningVector& c, int sign = +1) {
  if (sign != 1 && sign != -1) throw InvalidArgument("sign must be +1 or -1");
  const double vc = dot(v.vec, c.vec());
  const double den = std::hypot(v.w, vc);
  if (den == 0.0) {
    if (dot(v, v) == 0.0) throw GaugeUndefined("cannot reduce the zero quaternion");
    return {sign * v, UnitQuaternion::identity(), sign, false};
  }
  const UnitQuaternion gauge{Quaternion{vc / den, (v.w / den) * c.vec()}};
  Quaternion vs = sign * qmul(v, gauge.value());
  vs.w = 0.0;  // vanishes algebraically; clear the round-off
  return {vs, gauge, sign, true};
}

struct Ks1Image {
  Vec3 x;
  double r;
};

// Legacy KS1 map through the 4x4 L-matrix: (x1, x2, x3, 0) = L(u) u,
// r = sum u_i^2. Kept as an independent oracle for the quaternion map with
// c = e1 under (v0, v1, v2, v3) = (-u4, u1, u2, u3).
inline Ks1Image ks1_oracle(const std::array<double, 4>& u) {
  const double u1 = u[0], u2 = u[1], u3 = u[2], u4 = u[3];
  const double L[4][4] = {{u1, -u2, -u3, u4},
                          {u2, u1, -u4, -u3},
                          {u3, u4, u1, u2},
                          {u4, -u3, u2, -u1}};
  double xs[4] = {0.0, 0.0, 0.0, 0.0};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) xs[i] += L[i][j] * u[j];
  return {{xs[0], xs[1], xs[2]}, u1 * u1 + u2 * u2 + u3 * u3 + u4 * u4};
}

// KS1 parameters (u1..u4) as a quaternion usable with ks_forward and c = e1.
constexpr Quaternion from_ks1(const std::array<double, 4>& u) { return {-u[3], u[0], u[1], u[2]}; }

// Stateful fold keeping a sequence of SKS vectors continuous: the sign is
// flipped whenever |v_k - v_{k-1}| > |v_k + v_{k-1}|. One instance per trajectory.
class SignContinuity {
 public:
  Quaternion operator()(const Quaternion& v) {
    Quaternion out = v;
    if (previous_) {
      if (norm(out - *previous_) > norm(out + *previous_)) out = -out;
    }
    previous_ = out;
    return out;
  }

  void reset() { previous_.reset(); }

 private:
  std::optional<Quaternion> previous_;
};

// SKS vectors for a sampled orbit, signs chosen for continuity.
inline std::vector<Quaternion> sks_track(std::span<const Vec3> positions, const KSChart& chart) {
  std::vector<Quaternion> out;
  out.reserve(positions.size());
  SignContinuity fold;
  for (const Vec3& x : positions) out.push_back(fold(ks_invert_sks(x, chart)));
  return out;
}

}  // namespace ksreg
