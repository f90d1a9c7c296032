#include <gtest/gtest.h>

#include <cmath>

#include "ksreg/canon.hpp"
#include "support/oracles.hpp"
#include "support/random.hpp"

using namespace ksreg;
using ksreg::testing::rel_err;
using ksreg::testing::Rng;

namespace {

// (X0, X) = V (0,c) conj(v) / (2r) through the basis-table expansion.
Vec3 momenta_by_products(const Quaternion& v, const Quaternion& V, const KSChart& chart, double* X0) {
  using ksreg::testing::as_array;
  using ksreg::testing::hamilton_product;
  const auto Vc = hamilton_product(as_array(V), as_array(chart.c.quaternion()));
  const auto q = hamilton_product(Vc, as_array(qconj(v)));
  const double two_r = 2.0 * dot(v, v) / chart.alpha;
  if (X0) *X0 = q[0] / two_r;
  return Vec3{q[1], q[2], q[3]} / two_r;
}

// J.c through the quaternion cross product of conjugates.
double jc_by_qcross(const Quaternion& v, const Quaternion& V, const Vec3& c) {
  return dot(qcross(qconj(v), qconj(V)).vec, c);
}

}  // namespace

TEST(Canon, MomentaExamples) {
  const KSChart chart = KSChart::ks3(1.0);
  const Quaternion v = Quaternion::identity();
  EXPECT_EQ(momenta_to_cartesian(v, Quaternion{}, chart).X, Vec3{});

  // v = 1, c = e3, alpha = 1: r = 1 and X = vec(V e3) / 2.
  const double P1 = 0.3, P2 = -0.7, P3 = 1.1;
  const Quaternion V{0, P1, P2, P3};
  double X0 = 0.0;
  const Vec3 ref = momenta_by_products(v, V, chart, &X0);
  // (0,P) e3 = (-P3, P2, -P1, 0)
  EXPECT_EQ(ref, (Vec3{P2 / 2, -P1 / 2, 0.0}));
  const CartesianMomenta m = momenta_to_cartesian(v, V, chart);
  EXPECT_EQ(m.X, ref);
  EXPECT_DOUBLE_EQ(m.X0, X0);
  EXPECT_DOUBLE_EQ(m.X0, -P3 / 2);

  EXPECT_THROW(momenta_to_cartesian(Quaternion{}, V, chart), CollisionError);
  EXPECT_EQ(cartesian_to_momenta(v, Vec3{}, chart), Quaternion{});
}

TEST(Canon, MomentaMatchProductExpansion) {
  Rng rng(201);
  for (int k = 0; k < 1000; ++k) {
    const KSChart chart = rng.chart();
    const Quaternion v = rng.quaternion(), V = rng.quaternion();
    double X0 = 0.0;
    const Vec3 ref = momenta_by_products(v, V, chart, &X0);
    const CartesianMomenta m = momenta_to_cartesian(v, V, chart);
    EXPECT_LE(rel_err(m.X, ref), 1e-13);
    EXPECT_NEAR(m.X0, X0, 1e-13 * std::max(1.0, std::abs(X0)));
    // Scalar part equals (J.c) / (2 r).
    const double r = dot(v, v) / chart.alpha;
    EXPECT_NEAR(m.X0, bilinear_invariant(v, V, chart.c) / (2.0 * r), 1e-12 * std::max(1.0, std::abs(X0)));
  }
}

TEST(Canon, CartesianToMomentaComponents) {
  Rng rng(203);
  for (int k = 0; k < 500; ++k) {
    const KSChart chart = rng.chart();
    const Quaternion v = rng.quaternion();
    const Vec3 X = rng.vec3();
    const Vec3& c = chart.c.vec();
    const Quaternion V = cartesian_to_momenta(v, X, chart);
    // V0 = 2 (v0 c + v x c).X / alpha
    EXPECT_NEAR(V.w, 2.0 * dot(v.w * c + cross(v.vec, c), X) / chart.alpha, 1e-14 / chart.alpha * 10);
    // Same thing through the basis-table product: 2 (0,X) v (0,-c) / alpha.
    using ksreg::testing::as_array;
    using ksreg::testing::hamilton_product;
    const auto ref = hamilton_product(hamilton_product(as_array(Quaternion::pure(X)), as_array(v)),
                                      as_array(Quaternion::pure(-c)));
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(V[i], 2.0 * ref[i] / chart.alpha, 1e-13);
  }
}

TEST(Canon, BilinearInvariantExamples) {
  const DefiningVector c3{kE3};
  const Quaternion v{0.3, -1.0, 0.5, 2.0};
  EXPECT_EQ(bilinear_invariant(v, 2.5 * v, c3), 0.0);
  EXPECT_EQ(bilinear_vector({0, 0, 0, 1}, {0, 1, 0, 0}), kE2);
  EXPECT_EQ(bilinear_invariant({0, 0, 0, 1}, {0, 1, 0, 0}, c3), 0.0);

  // KS1: u4 u1' - u3 u2' + u2 u3' - u1 u4' under (v0..v3) = (-u4, u1, u2, u3).
  Rng rng(205);
  const DefiningVector c1{kE1};
  for (int k = 0; k < 500; ++k) {
    const std::array<double, 4> u{rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform()};
    const std::array<double, 4> up{rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform()};
    const double ref = u[3] * up[0] - u[2] * up[1] + u[1] * up[2] - u[0] * up[3];
    const double jc = bilinear_invariant(from_ks1(u), from_ks1(up), c1);
    EXPECT_NEAR(jc, ref, 1e-14);
  }
}

TEST(Canon, BilinearInvariantEqualsConjugateCross) {
  Rng rng(207);
  for (int k = 0; k < 1000; ++k) {
    const Vec3 c = rng.unit_vec3();
    const Quaternion v = rng.quaternion(), V = rng.quaternion();
    EXPECT_NEAR(bilinear_invariant(v, V, DefiningVector{c}), jc_by_qcross(v, V, c), 1e-14);
  }
}

TEST(Canon, ConstructedMomentaSatisfyConstraint) {
  Rng rng(209);
  for (int k = 0; k < 1000; ++k) {
    const KSChart chart = rng.chart();
    const Quaternion v = rng.quaternion();
    const Vec3 X = rng.vec3();
    const Quaternion V = cartesian_to_momenta(v, X, chart);
    EXPECT_LE(std::abs(bilinear_invariant(v, V, chart.c)), 1e-13);
  }
}

TEST(Canon, MomentaRoundTrip) {
  Rng rng(211);
  for (int k = 0; k < 1000; ++k) {
    const KSChart chart = rng.chart();
    const CartesianState s = rng.state();
    for (Representative rep : {Representative::sks, Representative::rule1}) {
      const KSPhase p = to_ks_phase(s, chart, rep);
      const CartesianState back = to_cartesian(p, chart, s.mu);
      EXPECT_LE(rel_err(back.x, s.x), 1e-12);
      EXPECT_LE(rel_err(back.X, s.X), 1e-12);
      EXPECT_NEAR(momenta_to_cartesian(p.v, p.V, chart).X0, 0.0, 1e-13);
    }
  }
  // Specific example: v from SKS inversion of e3, X = (p, 0, 0).
  const KSChart chart = KSChart::ks3(1.0);
  const Quaternion v = ks_invert_sks(Vec3{0, 0, 1}, chart);
  const Quaternion V = cartesian_to_momenta(v, {0.8, 0, 0}, chart);
  EXPECT_LE(max_abs(momenta_to_cartesian(v, V, chart).X - Vec3{0.8, 0, 0}), 1e-15);
}

TEST(Canon, MomentumSquareAndRadialProductIdentities) {
  Rng rng(213);
  for (int k = 0; k < 1000; ++k) {
    const KSChart chart = rng.chart();
    const Quaternion v = rng.quaternion();
    // Arbitrary V (off the constraint manifold too).
    const Quaternion V = rng.quaternion();
    const double r = dot(v, v) / chart.alpha;
    const CartesianMomenta m = momenta_to_cartesian(v, V, chart);
    const double jc = bilinear_invariant(v, V, chart.c);
    // X.X + X0^2 = alpha V.V / (4 r)
    const double lhs = dot(m.X, m.X);
    const double rhs = chart.alpha * dot(V, V) / (4.0 * r) - jc * jc / (4.0 * r * r);
    EXPECT_LE(rel_err(lhs, rhs, chart.alpha * dot(V, V) / (4.0 * r)), 1e-12);
    // x.X = v.V / 2
    const Vec3 x = ks_forward(v, chart).x;
    EXPECT_LE(rel_err(dot(x, m.X), 0.5 * dot(v, V), norm(v) * norm(V)), 1e-12);
  }
}

TEST(Canon, MathieuProperty) {
  // X.dx = V.dv for dv tangent and dx its image.
  Rng rng(215);
  for (int k = 0; k < 200; ++k) {
    const KSChart chart = rng.chart();
    const CartesianState s = rng.state();
    const KSPhase p = to_ks_phase(s, chart);
    const Quaternion dir = rng.quaternion();
    const double h = 1e-6;
    const Vec3 dx = (ks_forward(p.v + h * dir, chart).x - ks_forward(p.v - h * dir, chart).x) / (2.0 * h);
    const double scale = norm(s.X) * norm(dx) + norm(p.V) * norm(dir);
    EXPECT_LE(std::abs(dot(s.X, dx) - dot(p.V, dir)), 1e-8 * scale);
  }
}

TEST(Canon, SksMomentaExamples) {
  const KSChart chart = KSChart::ks3(1.0);
  // Circular orbit x = e1, X = e2: (x x X).c = 1, V0 = -sqrt(2).
  const Quaternion V = sks_momenta(kE1, kE2, chart);
  EXPECT_NEAR(V.w, -std::sqrt(2.0), 1e-15);
  const Quaternion ref = cartesian_to_momenta(ks_invert_sks(kE1, chart), kE2, chart);
  EXPECT_LE(max_abs(V - ref), 1e-15);

  // c orthogonal to the angular momentum: V0 = 0.
  EXPECT_EQ(sks_momenta({1, 0, 0}, {0, 0, 1}, chart).w, 0.0);

  // Radial X: V proportional to r X + (x.X) c.
  const Vec3 x{0.3, -0.4, 1.2};
  const Vec3 X = 0.7 * x;
  const Quaternion Vr = sks_momenta(x, X, chart);
  EXPECT_NEAR(Vr.w, 0.0, 1e-15);
  const Vec3 dirn = norm(x) * X + dot(x, X) * kE3;
  EXPECT_LE(norm(cross(Vr.vec, dirn)), 1e-14 * norm(Vr.vec) * norm(dirn));

  EXPECT_THROW(sks_momenta(Vec3{}, kE2, chart), CollisionError);
  EXPECT_THROW(sks_momenta({0, 0, -1}, kE2, chart), PoleError);
}

TEST(Canon, SksMomentaMatchGeneralFormula) {
  Rng rng(217);
  for (int k = 0; k < 1000; ++k) {
    const KSChart chart = rng.chart();
    const CartesianState s = rng.state();
    for (int sign : {+1, -1}) {
      const Quaternion v = ks_invert_sks(s.x, chart, sign);
      const Quaternion V = sks_momenta(s.x, s.X, chart, sign);
      const Quaternion ref = cartesian_to_momenta(v, s.X, chart);
      EXPECT_LE(max_abs(V - ref), 1e-12 * std::max(1.0, max_abs(ref)));
    }
  }
}

TEST(Canon, ReduceMomentaSks) {
  EXPECT_EQ(reduce_momenta_sks({1, 2, 3, 4}, UnitQuaternion::identity()), (Quaternion{1, 2, 3, 4}));
  Rng rng(219);
  for (int k = 0; k < 1000; ++k) {
    const KSChart chart = rng.chart();
    const Quaternion v = rng.quaternion();
    const Quaternion V = cartesian_to_momenta(v, rng.vec3(), chart);
    for (int sign : {+1, -1}) {
      const SksReduction red = reduce_to_sks(v, chart.c, sign);
      const Quaternion Vs = reduce_momenta_sks(V, red.gauge, sign);
      EXPECT_LE(rel_err(momenta_to_cartesian(red.v_s, Vs, chart).X, momenta_to_cartesian(v, V, chart).X), 1e-12);
      EXPECT_LE(std::abs(bilinear_invariant(red.v_s, Vs, chart.c)), 1e-12);
    }
  }
}

TEST(Canon, AntipodalStateRoundTrips) {
  const KSChart chart = KSChart::ks3(1.0);
  const CartesianState s{{0, 0, -2}, {0.3, 0.1, 0.2}, 1.0};
  const KSPhase p = to_ks_phase(s, chart);
  EXPECT_EQ(p.v.w, 0.0);
  // Pure coordinates: V0 = -2 (v x X).c / alpha. With n = e2 this is not zero.
  EXPECT_NEAR(p.V.w, -2.0 * dot(cross(p.v.vec, s.X), kE3) / chart.alpha, 1e-15);
  const CartesianState back = to_cartesian(p, chart, 1.0);
  EXPECT_LE(rel_err(back.x, s.x), 1e-15);
  EXPECT_LE(rel_err(back.X, s.X), 1e-15);
  EXPECT_EQ(bilinear_invariant(p.v, p.V, chart.c), 0.0);

  // X in the plane of n and c: V0 vanishes.
  const KSPhase q = to_ks_phase({{0, 0, -2}, {0.0, 0.1, 0.2}, 1.0}, chart);
  EXPECT_EQ(q.V.w, 0.0);
}

TEST(Canon, ToKsPhaseSetsEnergyAndEpoch) {
  const CartesianState s{{1, 0, 0}, {0, 1, 0}, 1.0};
  const KSPhase p = to_ks_phase(s, KSChart::ks3(2.0), Representative::sks, 5.0);
  EXPECT_EQ(p.V_star, 0.5);
  EXPECT_EQ(p.v_star, 5.0);
}

TEST(Canon, ConstraintCheckAndProjection) {
  Rng rng(221);
  const KSChart chart = rng.chart();
  const CartesianState s = rng.bound_state();
  KSPhase p = to_ks_phase(s, chart);
  EXPECT_NO_THROW(require_constraint(p, chart));
  // V + lambda v c moves J.c by -lambda |v|^2 and leaves X alone.
  const Quaternion off = qmul(p.v, chart.c.quaternion());
  KSPhase bad = p;
  bad.V += 1e-3 * off;
  EXPECT_GT(std::abs(bilinear_invariant(bad.v, bad.V, chart.c)), 1e-6);
  EXPECT_THROW(require_constraint(bad, chart), ConstraintViolation);
  // The fiber direction is invisible to the Cartesian momenta, so projection
  // restores the constraint and leaves (x, X) alone.
  const KSPhase fixed = project_constraint(bad, chart);
  EXPECT_LE(std::abs(bilinear_invariant(fixed.v, fixed.V, chart.c)), 1e-13);
  EXPECT_LE(rel_err(to_cartesian(fixed, chart, 1.0).X, to_cartesian(bad, chart, 1.0).X), 1e-13);
  EXPECT_LE(max_abs(fixed.V - p.V), 1e-12 * std::max(1.0, max_abs(p.V)));
}
