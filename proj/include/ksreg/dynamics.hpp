#pragma once

/**
 * @file dynamics.hpp
 * @brief KS Hamiltonian in Sundman time and its equations of motion.
 *
 * With dtau/dt = alpha / (4 r) the extended-phase-space Hamiltonian is
 *
 *     K  = K0 + P,
 *     K0 = V.V / 2 + (4 V* / alpha^2) v.v - 4 mu / alpha,
 *     P  = (4 r / alpha) R*(v, V, v*),
 *
 * and motion happens on the manifold K = 0. Unperturbed, this is a 4D
 * isotropic oscillator with omega0 = 2 sqrt(2 V*) / alpha.
 */

#include <cmath>
#include <functional>

#include "ksreg/canon.hpp"
#include "ksreg/errors.hpp"
#include "ksreg/ksmap.hpp"
#include "ksreg/quat.hpp"

namespace ksreg {

// Value of a perturbing Hamiltonian together with its gradient.
struct PerturbationTerm {
  double value{0.0};
  Quaternion d_v{};     // dP/dv_j, j = 0..3
  Quaternion d_V{};     // dP/dV_j
  double d_vstar{0.0};  // dP/dv*
};

// User-supplied perturbation. Must be re-entrant; must not depend on V*.
using Perturbation = std::function<PerturbationTerm(const KSPhase&, const KSChart&, double mu)>;

inline Perturbation no_perturbation() {
  return [](const KSPhase&, const KSChart&, double) { return PerturbationTerm{}; };
}

inline double kepler_hamiltonian_cartesian(const CartesianState& s) {
  const double r = norm(s.x);
  if (!(r > 0.0)) throw CollisionError();
  return 0.5 * dot(s.X, s.X) - s.mu / r;
}

struct KsEnergy {
  double K0{0.0};
  // -(J.c)^2 / (2 alpha r): the part of the transformed Kepler Hamiltonian that
  // vanishes on the constraint manifold; reported for audits only.
  double jc_term{0.0};
};

inline KsEnergy ks_hamiltonian_unperturbed(const KSPhase& p, const KSChart& chart, double mu) {
  const double a = chart.alpha;
  const double vv = dot(p.v, p.v);
  KsEnergy e;
  e.K0 = 0.5 * dot(p.V, p.V) + 4.0 * p.V_star * vv / (a * a) - 4.0 * mu / a;
  if (vv > 0.0) {
    const double jc = bilinear_invariant(p.v, p.V, chart.c);
    e.jc_term = -jc * jc / (2.0 * vv);
  }
  return e;
}

// Squared oscillator frequency 8 V* / alpha^2 (negative for unbound motion).
inline double omega0_squared(double V_star, const KSChart& chart) {
  return 8.0 * V_star / (chart.alpha * chart.alpha);
}

inline double omega0(double V_star, const KSChart& chart) {
  if (!(V_star > 0.0)) throw UnboundOrbit("oscillator frequency requires V* > 0 (bound orbit)");
  return 2.0 * std::sqrt(2.0 * V_star) / chart.alpha;
}

// dtau/dt = alpha / (4 r)
inline double sundman_rate(double r, const KSChart& chart) {
  if (!(r > 0.0)) throw CollisionError();
  return chart.alpha / (4.0 * r);
}

struct EnergyManifold {
  double V_star;
};

// V* such that K0 + P = 0 at the given state. P may not depend on V*, so the
// condition is linear in V*.
inline EnergyManifold fix_energy_manifold(const KSPhase& p, const KSChart& chart, double mu,
                                          const Perturbation& pert) {
  const double vv = dot(p.v, p.v);
  if (!(vv > 0.0)) throw DegenerateState("v.v = 0: the energy manifold cannot be fixed");
  const double a = chart.alpha;
  const double P = pert ? pert(p, chart, mu).value : 0.0;
  const double rest = 0.5 * dot(p.V, p.V) - 4.0 * mu / a + P;
  return {-rest * a * a / (4.0 * vv)};
}

// Gradient of J.c with respect to v and V.
struct BilinearGradient {
  Quaternion d_v;
  Quaternion d_V;
};

inline BilinearGradient bilinear_gradient(const Quaternion& v, const Quaternion& V, const Vec3& c) {
  // J.c = -v0 (V.c) + V0 (v.c) + v.(V x c)
  return {{-dot(V.vec, c), V.w * c + cross(V.vec, c)}, {dot(v.vec, c), -v.w * c + cross(c, v.vec)}};
}

struct EomOptions {
  // Include the gradient of -(J.c)^2 / (2 v.v). It vanishes on the constraint
  // manifold; enabling it gives the exact transformed Kepler flow off it.
  bool jc_term{false};
};

// d/dtau of every phase component:
//   v'  =  V + dP/dV
//   V'  = -omega0^2 v - dP/dv
//   v*' =  4 r / alpha
//   V*' = -dP/dv*
inline KSPhase ks_equations_of_motion(const KSPhase& p, const KSChart& chart, double mu,
                                      const Perturbation& pert, EomOptions opt = {}) {
  const double a = chart.alpha;
  const double w2 = omega0_squared(p.V_star, chart);
  const double vv = dot(p.v, p.v);
  KSPhase d;
  d.v = p.V;
  d.V = -w2 * p.v;
  d.v_star = 4.0 * vv / (a * a);
  d.V_star = 0.0;
  if (pert) {
    const PerturbationTerm t = pert(p, chart, mu);
    d.v += t.d_V;
    d.V -= t.d_v;
    d.V_star -= t.d_vstar;
  }
  if (opt.jc_term && vv > 0.0) {
    const double jc = bilinear_invariant(p.v, p.V, chart.c);
    const BilinearGradient g = bilinear_gradient(p.v, p.V, chart.c.vec());
    // T = -jc^2 / (2 vv)
    const Quaternion dT_dv = (-jc / vv) * g.d_v + (jc * jc / (vv * vv)) * p.v;
    const Quaternion dT_dV = (-jc / vv) * g.d_V;
    d.v += dT_dV;
    d.V -= dT_dv;
  }
  return d;
}

// d(J.c)/dtau along the flow, evaluated from the equations of motion.
inline double bilinear_rate(const KSPhase& p, const KSPhase& rate, const KSChart& chart) {
  const BilinearGradient g = bilinear_gradient(p.v, p.V, chart.c.vec());
  return dot(g.d_v, rate.v) + dot(g.d_V, rate.V);
}

// Flow generated by Psi (J.c): both v and V move along the fiber by phi.
struct GaugedPair {
  Quaternion v;
  Quaternion V;
};

inline GaugedPair gauge_flow(const Quaternion& v, const Quaternion& V, const DefiningVector& c, double phi) {
  const Quaternion g{std::cos(phi), std::sin(phi) * c.vec()};
  return {qmul(v, g), qmul(V, g)};
}

}  // namespace ksreg
