#pragma once

/**
 * @file rotframe.hpp
 * @brief Kepler problem in a frame rotating uniformly about the defining vector.
 *
 * The frame spins with angular velocity Omega c. The time-dependent rotation
 * adds -Omega G.c to the Cartesian Hamiltonian, i.e. P = -(4 r Omega / alpha) G.c
 * in Sundman time. Subtracting a multiple of J.c (invisible in Cartesian
 * variables) gives the simpler
 *
 *     P_m = -(4 r / alpha) Omega H,        H = (v x V).c,
 *
 * under which the scalar pair (v0, V0) is a plain oscillator of frequency
 * w = 2 sqrt(2 (V* - Omega H)) / alpha and the vector pair is the same
 * oscillator seen from a frame turning by -Omega t about c.
 */

#include <cmath>

#include "ksreg/canon.hpp"
#include "ksreg/dynamics.hpp"
#include "ksreg/errors.hpp"
#include "ksreg/invariants.hpp"
#include "ksreg/ksmap.hpp"
#include "ksreg/oscillator.hpp"
#include "ksreg/quat.hpp"

namespace ksreg {

struct RotatingFrameSpec {
  double Omega{0.0};
  DefiningVector axis{kE3};
};

namespace detail {

inline void require_axis_is_chart_vector(const KSChart& chart, const RotatingFrameSpec& spec) {
  if (!(max_abs(chart.c.vec() - spec.axis.vec()) <= 1e-12)) {
    throw InvalidArgument("the modified rotating-frame term needs the rotation axis equal to the defining vector");
  }
}

}  // namespace detail

// Quaternion of the fixed-to-rotating map at time t: (cos(Omega t/2), -sin(Omega t/2) c).
inline UnitQuaternion frame_rotation(const RotatingFrameSpec& spec, double t) {
  const double h = 0.5 * spec.Omega * t;
  return UnitQuaternion{Quaternion{std::cos(h), -std::sin(h) * spec.axis.vec()}};
}

inline CartesianState to_rotating_frame(const CartesianState& fixed, const RotatingFrameSpec& spec, double t) {
  const double angle = -spec.Omega * t;
  return {rotate_about(spec.axis.vec(), angle, fixed.x), rotate_about(spec.axis.vec(), angle, fixed.X), fixed.mu};
}

inline CartesianState from_rotating_frame(const CartesianState& rot, const RotatingFrameSpec& spec, double t) {
  const double angle = spec.Omega * t;
  return {rotate_about(spec.axis.vec(), angle, rot.x), rotate_about(spec.axis.vec(), angle, rot.X), rot.mu};
}

// C y = Omega (c x y)
inline Mat3 cross_product_matrix(const RotatingFrameSpec& spec) {
  const Vec3& c = spec.axis.vec();
  const double w = spec.Omega;
  Mat3 m;
  m(0, 1) = -w * c.z;
  m(0, 2) = w * c.y;
  m(1, 0) = w * c.z;
  m(1, 2) = -w * c.x;
  m(2, 0) = -w * c.y;
  m(2, 1) = w * c.x;
  return m;
}

// H = (v x V).c
inline double rotating_invariant(const KSPhase& p, const KSChart& chart) {
  return dot(cross(p.v.vec, p.V.vec), chart.c.vec());
}

// -(4 r Omega / alpha) G.axis, G including its X0 x part.
inline double rot_perturbation_raw(const KSPhase& p, const KSChart& chart, const RotatingFrameSpec& spec) {
  const double r = dot(p.v, p.v) / chart.alpha;
  return -(4.0 * r * spec.Omega / chart.alpha) * dot(angular_momentum_cartesian(p, chart), spec.axis.vec());
}

inline double rot_perturbation_modified(const KSPhase& p, const KSChart& chart, const RotatingFrameSpec& spec) {
  detail::require_axis_is_chart_vector(chart, spec);
  const double r = dot(p.v, p.v) / chart.alpha;
  return -(4.0 * r / chart.alpha) * spec.Omega * rotating_invariant(p, chart);
}

// Raw term with its gradient. Written as
//   P = -(4 Omega / alpha^2) [ (v.v / 2) W + (J.c) m / 2 ]
// with W = [v ^ V]_vec . a and m = [v c conj(v)]_vec . a (a = rotation axis).
inline PerturbationTerm rot_perturbation_raw_term(const KSPhase& p, const KSChart& chart,
                                                  const RotatingFrameSpec& spec) {
  const Vec3& c = chart.c.vec();
  const Vec3& a = spec.axis.vec();
  const Quaternion& v = p.v;
  const Quaternion& V = p.V;
  const double vv = dot(v, v);
  const double k = -4.0 * spec.Omega / (chart.alpha * chart.alpha);

  const double W = dot(qcross(v, V).vec, a);
  const Quaternion dW_dv{dot(V.vec, a), -V.w * a + cross(V.vec, a)};
  const Quaternion dW_dV{-dot(v.vec, a), v.w * a + cross(a, v.vec)};

  const double ca = dot(c, a);
  const double m = (v.w * v.w - dot(v.vec, v.vec)) * ca + 2.0 * dot(c, v.vec) * dot(v.vec, a) +
                   2.0 * v.w * dot(cross(v.vec, c), a);
  const Quaternion dm_dv{2.0 * v.w * ca + 2.0 * dot(cross(v.vec, c), a),
                         -2.0 * ca * v.vec + 2.0 * dot(v.vec, a) * c + 2.0 * dot(c, v.vec) * a +
                             2.0 * v.w * cross(c, a)};

  const double jc = dot(bilinear_vector(v, V), c);
  const BilinearGradient gj = bilinear_gradient(v, V, c);

  PerturbationTerm t;
  t.value = k * (0.5 * vv * W + 0.5 * jc * m);
  t.d_v = k * (W * v + (0.5 * vv) * dW_dv + (0.5 * m) * gj.d_v + (0.5 * jc) * dm_dv);
  t.d_V = k * ((0.5 * vv) * dW_dV + (0.5 * m) * gj.d_V);
  return t;
}

inline PerturbationTerm rot_perturbation_modified_term(const KSPhase& p, const KSChart& chart,
                                                       const RotatingFrameSpec& spec) {
  detail::require_axis_is_chart_vector(chart, spec);
  const Vec3& c = chart.c.vec();
  const double a2 = chart.alpha * chart.alpha;
  const double vv = dot(p.v, p.v);
  const double H = rotating_invariant(p, chart);
  const double k = -4.0 * spec.Omega / a2;
  PerturbationTerm t;
  t.value = k * vv * H;
  t.d_v = Quaternion{2.0 * k * H * p.v.w, 2.0 * k * H * p.v.vec + k * vv * cross(p.V.vec, c)};
  t.d_V = Quaternion{0.0, k * vv * cross(c, p.v.vec)};
  return t;
}

enum class RotatingTerm { raw, modified };

inline Perturbation rotating_frame_perturbation(const RotatingFrameSpec& spec,
                                                RotatingTerm form = RotatingTerm::modified) {
  if (form == RotatingTerm::raw) {
    return [spec](const KSPhase& p, const KSChart& chart, double) { return rot_perturbation_raw_term(p, chart, spec); };
  }
  return [spec](const KSPhase& p, const KSChart& chart, double) {
    return rot_perturbation_modified_term(p, chart, spec);
  };
}

// w = 2 sqrt(2 (V* - Omega H)) / alpha
inline double rot_frequency(double V_star, double H, const KSChart& chart, const RotatingFrameSpec& spec) {
  const double reduced = V_star - spec.Omega * H;
  if (!(reduced > 0.0)) throw UnboundOrbit("rotating-frame frequency requires V* - Omega H > 0");
  return 2.0 * std::sqrt(2.0 * reduced) / chart.alpha;
}

// Split equations of motion for K0 + P_m:
//   v0' = V0,  V0' = -w^2 v0
//   v'  = V - (4r/alpha) Omega c x v,   V' = -w^2 v - (4r/alpha) Omega c x V
//   v*' = 4r/alpha,  V*' = 0
inline KSPhase rot_equations_of_motion(const KSPhase& p, const KSChart& chart, const RotatingFrameSpec& spec) {
  detail::require_axis_is_chart_vector(chart, spec);
  const double a = chart.alpha;
  const Vec3& c = chart.c.vec();
  const double w2 = 8.0 * (p.V_star - spec.Omega * rotating_invariant(p, chart)) / (a * a);
  const double k = 4.0 * dot(p.v, p.v) / (a * a) * spec.Omega;  // (4 r / alpha) Omega
  KSPhase d;
  d.v = Quaternion{p.V.w, p.V.vec - k * cross(c, p.v.vec)};
  d.V = Quaternion{-w2 * p.v.w, -w2 * p.v.vec - k * cross(c, p.V.vec)};
  d.v_star = 4.0 * dot(p.v, p.v) / (a * a);
  d.V_star = 0.0;
  return d;
}

struct RotSolutionCoeffs {
  double w;
  double b1, b2, b3, b4;
  Mat3 A;
};

inline RotSolutionCoeffs rot_solution_coeffs(double w, double tau, double t, const RotatingFrameSpec& spec) {
  const double cw = std::cos(w * tau), sw = std::sin(w * tau);
  return {w, cw, sw / w, -w * sw, cw, rotation_matrix(frame_rotation(spec, t))};
}

// A rotating-frame problem put on its K = 0 manifold.
struct RotatingSetup {
  KSPhase phase;  // V_star fixed with the modified term
  double H;       // (v x V).c, conserved
  double w;       // conserved frequency
};

// Prepares a KS phase in the rotating frame. w is taken from V* - Omega H,
// which on the manifold equals the root of the unperturbed energy condition;
// that root is used directly so no cancellation enters w.
inline RotatingSetup rotating_setup(const KSPhase& p, const KSChart& chart, double mu, const RotatingFrameSpec& spec) {
  detail::require_axis_is_chart_vector(chart, spec);
  RotatingSetup s;
  s.phase = p;
  s.H = rotating_invariant(p, chart);
  const double reduced = fix_energy_manifold(p, chart, mu, no_perturbation()).V_star;
  s.phase.V_star = reduced + spec.Omega * s.H;
  if (!(reduced > 0.0)) throw UnboundOrbit("rotating-frame closed form requires a bound orbit (V* - Omega H > 0)");
  s.w = 2.0 * std::sqrt(2.0 * reduced) / chart.alpha;
  return s;
}

// Closed-form state at Sundman time tau from (u, U) at tau = 0. The rotation
// angle depends on the physical time t(tau) = epoch + (4 / alpha^2) int |v|^2,
// which is integrated analytically (the frame rotation does not change |v|).
inline KSPhase closed_form_propagate(const Quaternion& u, const Quaternion& U, double tau, const KSChart& chart,
                                     const RotatingFrameSpec& spec, double w, double V_star = 0.0,
                                     double epoch = 0.0) {
  detail::require_axis_is_chart_vector(chart, spec);
  if (!(w > 0.0)) throw UnboundOrbit("closed-form propagation requires w > 0");
  const OscillatorCoeffs k = oscillator_coeffs(w * w, tau);
  const double a = chart.alpha;
  KSPhase p;
  p.v_star = epoch + 4.0 / (a * a) * oscillator_norm_integral(k, u, U);
  p.V_star = V_star;
  const Quaternion y = k.c * u + k.s * U;
  const Quaternion yd = k.cd * u + k.sd * U;
  // R(q(t)) applied as a rotation about c by -Omega (t - epoch).
  const double angle = -spec.Omega * (p.v_star - epoch);
  p.v = Quaternion{y.w, rotate_about(chart.c.vec(), angle, y.vec)};
  p.V = Quaternion{yd.w, rotate_about(chart.c.vec(), angle, yd.vec)};
  return p;
}

inline KSPhase closed_form_propagate(const RotatingSetup& s, double tau, const KSChart& chart,
                                     const RotatingFrameSpec& spec) {
  return closed_form_propagate(s.phase.v, s.phase.V, tau, chart, spec, s.w, s.phase.V_star, s.phase.v_star);
}

}  // namespace ksreg
