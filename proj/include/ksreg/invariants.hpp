#pragma once

// First integrals of the unperturbed problem, as an oscillator and as a Kepler
// orbit, and the bridges between the two sets.

#include <array>
#include <cmath>

#include "ksreg/canon.hpp"
#include "ksreg/dynamics.hpp"
#include "ksreg/errors.hpp"
#include "ksreg/ksmap.hpp"
#include "ksreg/quat.hpp"

namespace ksreg {

// F_ij = V_i V_j / omega0 + omega0 v_i v_j
struct FradkinTensor {
  Mat4 F;
  double operator()(std::size_t i, std::size_t j) const { return F(i, j); }
};

// L_ij = v_i V_j - v_j V_i
struct AngularMomentumMatrix {
  Mat4 L;
  double operator()(std::size_t i, std::size_t j) const { return L(i, j); }
};

// 3x3 matrix of Fradkin combinations whose product with c gives the Laplace vector.
struct LaplaceMatrix {
  Mat3 E;
};

inline void require_positive_frequency(double omega0) {
  if (!(omega0 > 0.0)) throw UnboundOrbit("Fradkin integrals need omega0 > 0");
}

// N_j = V_j^2 / 2 + omega0^2 v_j^2 / 2
inline std::array<double, 4> oscillator_energies(const Quaternion& v, const Quaternion& V, double omega0) {
  if (!(omega0 > 0.0)) throw InvalidArgument("omega0 must be positive");
  std::array<double, 4> n{};
  for (std::size_t j = 0; j < 4; ++j) n[j] = 0.5 * V[j] * V[j] + 0.5 * omega0 * omega0 * v[j] * v[j];
  return n;
}

inline FradkinTensor fradkin_tensor(const Quaternion& v, const Quaternion& V, double omega0) {
  require_positive_frequency(omega0);
  FradkinTensor t;
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = i; j < 4; ++j) {
      const double f = V[i] * V[j] / omega0 + omega0 * v[i] * v[j];
      t.F(i, j) = f;
      t.F(j, i) = f;
    }
  return t;
}

inline AngularMomentumMatrix angular_momentum_matrix(const Quaternion& v, const Quaternion& V) {
  AngularMomentumMatrix a;
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = i + 1; j < 4; ++j) {
      const double l = v[i] * V[j] - v[j] * V[i];
      a.L(i, j) = l;
      a.L(j, i) = -l;
    }
  return a;
}

// G = [v ^ V]/2 + X0 x,  X0 = (J.c) / (2 r)
inline Vec3 angular_momentum_cartesian(const KSPhase& p, const KSChart& chart) {
  const CartesianPosition pos = ks_forward(p.v, chart);
  Vec3 G = 0.5 * qcross(p.v, p.V).vec;
  if (pos.r > 0.0) {
    const double X0 = bilinear_invariant(p.v, p.V, chart.c) / (2.0 * pos.r);
    G += X0 * pos.x;
  }
  return G;
}

// Same quantity assembled from the oscillator angular momentum matrix:
// G = ((L01 + L23), (L02 + L31), (L03 + L12)) / 2 + X0 x.
inline Vec3 angular_momentum_from_matrix(const AngularMomentumMatrix& m, double X0, const Vec3& x) {
  const Mat4& L = m.L;
  return Vec3{L(0, 1) + L(2, 3), L(0, 2) + L(3, 1), L(0, 3) + L(1, 2)} * 0.5 + X0 * x;
}

// mu e = (X.X - mu/r) x - (x.X) X; returns e.
inline Vec3 laplace_vector_cartesian(const CartesianState& s) {
  const double r = norm(s.x);
  if (!(r > 0.0)) throw CollisionError();
  return ((dot(s.X, s.X) - s.mu / r) * s.x - dot(s.x, s.X) * s.X) / s.mu;
}

// Laplace vector from the KS phase as a single quaternion product:
//   mu e = [ ((V.V/2 - 2 mu/alpha - (J.c)^2/(2 alpha r)) v - (v.V/2) V) c conj(v) ]_vec / (2 r)
// Returns e.
inline Vec3 laplace_vector_ks(const KSPhase& p, const KSChart& chart, double mu) {
  const double a = chart.alpha;
  const double vv = dot(p.v, p.v);
  if (!(vv > 0.0)) throw CollisionError();
  const double r = vv / a;
  const double jc = bilinear_invariant(p.v, p.V, chart.c);
  const double coef = 0.5 * dot(p.V, p.V) - 2.0 * mu / a - jc * jc / (2.0 * a * r);
  const Quaternion lhs = coef * p.v - (0.5 * dot(p.v, p.V)) * p.V;
  const Quaternion q = qmul(qmul(lhs, chart.c.quaternion()), qconj(p.v));
  return q.vec / (2.0 * r * mu);
}

// E assembled from the Fradkin tensor; the diagonal uses the K0-free form
// E_kk = (F00 + F_kk - F_ll - F_mm) / 2.
inline LaplaceMatrix laplace_matrix(const FradkinTensor& t) {
  const Mat4& F = t.F;
  LaplaceMatrix m;
  Mat3& E = m.E;
  E(0, 0) = 0.5 * (F(0, 0) + F(1, 1) - F(2, 2) - F(3, 3));
  E(1, 1) = 0.5 * (F(0, 0) - F(1, 1) + F(2, 2) - F(3, 3));
  E(2, 2) = 0.5 * (F(0, 0) - F(1, 1) - F(2, 2) + F(3, 3));
  E(0, 1) = F(1, 2) - F(0, 3);
  E(0, 2) = F(1, 3) + F(0, 2);
  E(1, 0) = F(1, 2) + F(0, 3);
  E(1, 2) = F(2, 3) - F(0, 1);
  E(2, 0) = F(1, 3) - F(0, 2);
  E(2, 1) = F(2, 3) + F(0, 1);
  return m;
}

// Diagonal of E through the energy route: K0/omega0 + 4 mu/(alpha omega0) - F_ll - F_mm.
inline Vec3 laplace_matrix_diagonal_from_energy(const FradkinTensor& t, double K0, double mu, double omega0,
                                                const KSChart& chart) {
  const Mat4& F = t.F;
  const double base = K0 / omega0 + 4.0 * mu / (chart.alpha * omega0);
  return {base - F(2, 2) - F(3, 3), base - F(1, 1) - F(3, 3), base - F(1, 1) - F(2, 2)};
}

// mu e = -(alpha omega0 / 4) E c - X0 G + (alpha K0 / (4 r)) x. Returns e.
// K0 and X0 are explicit so that off-manifold states can be audited.
inline Vec3 laplace_vector_fradkin(const FradkinTensor& F, const DefiningVector& c, double omega0,
                                   const KSChart& chart, double mu, double K0, double X0, const Vec3& G,
                                   const Vec3& x) {
  require_positive_frequency(omega0);
  const double a = chart.alpha;
  const Mat3 E = laplace_matrix(F).E;
  const double r = norm(x);
  Vec3 mue = (-a * omega0 / 4.0) * (E * c.vec()) - X0 * G;
  if (r > 0.0) mue += (a * K0 / (4.0 * r)) * x;
  return mue / mu;
}

// Convenience: all Fradkin-route inputs derived from a KS phase.
inline Vec3 laplace_vector_fradkin(const KSPhase& p, const KSChart& chart, double mu) {
  const double w0 = omega0(p.V_star, chart);
  const CartesianPosition pos = ks_forward(p.v, chart);
  if (!(pos.r > 0.0)) throw CollisionError();
  const double X0 = bilinear_invariant(p.v, p.V, chart.c) / (2.0 * pos.r);
  const double K0 = ks_hamiltonian_unperturbed(p, chart, mu).K0;
  return laplace_vector_fradkin(fradkin_tensor(p.v, p.V, w0), chart.c, w0, chart, mu, K0, X0,
                                angular_momentum_cartesian(p, chart), pos.x);
}

}  // namespace ksreg
