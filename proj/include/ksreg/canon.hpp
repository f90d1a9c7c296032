#pragma once

/**
 * @file canon.hpp
 * @brief Canonical (Mathieu) extension of the KS point map.
 *
 * Momenta are related through X.dx = V.dv:
 *
 *     (X0, X) = V (0, c) conj(v) / (2 r)         V = 2 (0, X) v conj(0, c) / alpha
 *
 * The scalar part X0 = (J.c) / (2 r) must vanish, with
 * J = -v0 V + V0 v + v x V = conj(v) ^ conj(V). That is the bilinear constraint.
 */

#include <cmath>

#include "ksreg/errors.hpp"
#include "ksreg/ksmap.hpp"
#include "ksreg/linalg.hpp"
#include "ksreg/quat.hpp"

namespace ksreg {

// Tolerance for |J.c| on KS phases received from outside.
inline constexpr double kConstraintTolerance = 1e-10;

// Extended KS phase: coordinates v, momenta V and the (time, energy) pair.
struct KSPhase {
  Quaternion v{};
  Quaternion V{};
  double v_star{0.0};  // physical time imitator
  double V_star{0.0};  // minus the energy on the K = 0 manifold
};

// Cartesian position, momentum per unit mass and gravitational parameter.
struct CartesianState {
  Vec3 x{};
  Vec3 X{};
  double mu{1.0};
};

struct CartesianMomenta {
  Vec3 X;     // vector part
  double X0;  // scalar part, (J.c) / (2 r); zero on the constraint manifold
};

// J = -v0 V + V0 v + v x V
constexpr Vec3 bilinear_vector(const Quaternion& v, const Quaternion& V) {
  return -v.w * V.vec + V.w * v.vec + cross(v.vec, V.vec);
}

inline double bilinear_invariant(const Quaternion& v, const Quaternion& V, const DefiningVector& c) {
  return dot(bilinear_vector(v, V), c.vec());
}

inline CartesianMomenta momenta_to_cartesian(const Quaternion& v, const Quaternion& V, const KSChart& chart) {
  const double vv = dot(v, v);
  if (!(vv > 0.0)) throw CollisionError();
  const double two_r = 2.0 * vv / chart.alpha;
  const Quaternion q = qmul(qmul(V, chart.c.quaternion()), qconj(v));
  return {q.vec / two_r, q.w / two_r};
}

inline Quaternion cartesian_to_momenta(const Quaternion& v, const Vec3& X, const KSChart& chart) {
  const Quaternion cbar = qconj(chart.c.quaternion());
  return (2.0 / chart.alpha) * qmul(qmul(Quaternion::pure(X), v), cbar);
}

// Momenta of the SKS representative, written with Cartesian quantities only:
//   V0 = -k (x x X).c
//   V  =  k (r X + (x.X) c + (x x X) x c),      k = sqrt(2 / (alpha (r + c.x)))
inline Quaternion sks_momenta(const Vec3& x, const Vec3& X, const KSChart& chart, int sign = +1) {
  const double r = norm(x);
  if (!(r > 0.0)) throw CollisionError();
  if (sign != 1 && sign != -1) throw InvalidArgument("sign must be +1 or -1");
  const Vec3& c = chart.c.vec();
  const double s = detail::r_plus_cx(x, r, c);
  if (s < kPoleEpsilon * r) throw PoleError();
  const double k = sign * std::sqrt(2.0 / (chart.alpha * s));
  const Vec3 G = cross(x, X);
  return {-k * dot(G, c), k * (r * X + dot(x, X) * c + cross(G, c))};
}

inline Quaternion reduce_momenta_sks(const Quaternion& V, const UnitQuaternion& gauge, int sign = +1) {
  return sign * qmul(V, gauge.value());
}

// Full KS phase for a Cartesian state. `sks` selects the SKS representative,
// otherwise the positive-scalar one. V_star is set to minus the Kepler energy
// and v_star to `epoch`.
enum class Representative { sks, rule1 };

inline KSPhase to_ks_phase(const CartesianState& s, const KSChart& chart,
                           Representative rep = Representative::sks, double epoch = 0.0) {
  const CartesianPosition pos{s.x};
  KSPhase p;
  p.v = rep == Representative::sks ? ks_invert_sks(pos, chart) : ks_invert(pos, chart);
  p.V = cartesian_to_momenta(p.v, s.X, chart);
  p.v_star = epoch;
  p.V_star = -(0.5 * dot(s.X, s.X) - s.mu / pos.r);
  return p;
}

// Cartesian state of a KS phase (vector part of the momenta).
inline CartesianState to_cartesian(const KSPhase& p, const KSChart& chart, double mu) {
  return {ks_forward(p.v, chart).x, momenta_to_cartesian(p.v, p.V, chart).X, mu};
}

// Re-derives V from the Cartesian momenta the phase represents, which removes
// any violation of the bilinear constraint without moving (x, X).
inline KSPhase project_constraint(const KSPhase& p, const KSChart& chart) {
  KSPhase out = p;
  out.V = cartesian_to_momenta(p.v, momenta_to_cartesian(p.v, p.V, chart).X, chart);
  return out;
}

// Throws ConstraintViolation when |J.c| exceeds the tolerance.
inline void require_constraint(const KSPhase& p, const KSChart& chart,
                               double tolerance = kConstraintTolerance) {
  const double jc = bilinear_invariant(p.v, p.V, chart.c);
  if (!(std::abs(jc) <= tolerance)) {
    throw ConstraintViolation("bilinear constraint violated: J.c = " + std::to_string(jc));
  }
}

}  // namespace ksreg
