#pragma once

// Universal-variable propagation of the unperturbed two-body problem in
// Cartesian coordinates. Shares no code with the KS side; it is the oracle the
// regularized propagation is checked against.

#include <cmath>
#include <numbers>
#include <string>

#include "ksreg/canon.hpp"
#include "ksreg/errors.hpp"
#include "ksreg/linalg.hpp"

namespace ksreg {

struct Stumpff {
  double C;
  double S;
};

inline Stumpff stumpff(double z) {
  if (std::abs(z) < 1.0) {
    // C = sum (-z)^k / (2k+2)!,  S = sum (-z)^k / (2k+3)!
    double c = 0.0, s = 0.0;
    double tc = 0.5, ts = 1.0 / 6.0;
    for (int k = 0; k < 20; ++k) {
      c += tc;
      s += ts;
      tc *= -z / ((2.0 * k + 3.0) * (2.0 * k + 4.0));
      ts *= -z / ((2.0 * k + 4.0) * (2.0 * k + 5.0));
    }
    return {c, s};
  }
  if (z > 0.0) {
    const double sz = std::sqrt(z);
    const double h = std::sin(0.5 * sz);
    return {2.0 * h * h / z, (sz - std::sin(sz)) / (z * sz)};
  }
  const double sz = std::sqrt(-z);
  return {(std::cosh(sz) - 1.0) / (-z), (std::sinh(sz) - sz) / (-z * sz)};
}

inline constexpr int kKeplerMaxIterations = 50;
inline constexpr double kKeplerResidualTolerance = 1e-13;

// State after time t of unperturbed motion from s0.
inline CartesianState kepler_oracle(const CartesianState& s0, double t) {
  const double r0 = norm(s0.x);
  if (!(r0 > 0.0)) throw CollisionError();
  if (t == 0.0) return s0;
  const double mu = s0.mu;
  const double smu = std::sqrt(mu);
  const double v2 = dot(s0.X, s0.X);
  const double sigma0 = dot(s0.x, s0.X) / smu;
  const double alpha = 2.0 / r0 - v2 / mu;  // reciprocal semi-major axis

  // Whole revolutions do not change the state of an ellipse.
  double tr = t;
  if (alpha > 0.0) {
    const double period = 2.0 * std::numbers::pi / (smu * alpha * std::sqrt(alpha));
    tr = std::remainder(t, period);
  }
  if (tr == 0.0) return s0;

  const double target = smu * tr;
  const double scale = std::max(1.0, std::abs(target));
  double chi = alpha > 0.0 ? smu * alpha * tr : smu * tr / r0;

  auto eval = [&](double x, double& F, double& dF, double& ddF) {
    const double z = alpha * x * x;
    const Stumpff st = stumpff(z);
    F = sigma0 * x * x * st.C + (1.0 - alpha * r0) * x * x * x * st.S + r0 * x - target;
    dF = x * x * st.C + sigma0 * x * (1.0 - z * st.S) + r0 * (1.0 - z * st.C);
    ddF = sigma0 * (1.0 - z * st.C) + (1.0 - alpha * r0) * x * (1.0 - z * st.S);
  };

  double F = 0.0, dF = 0.0, ddF = 0.0;
  bool converged = false;
  for (int it = 0; it < kKeplerMaxIterations; ++it) {
    eval(chi, F, dF, ddF);
    if (std::abs(F) <= kKeplerResidualTolerance * scale) {
      // One Newton polish; the residual tolerance is looser than round-off.
      chi -= F / dF;
      eval(chi, F, dF, ddF);
      converged = true;
      break;
    }
    // Laguerre-Conway step (n = 5).
    const double disc = std::sqrt(std::abs(16.0 * dF * dF - 20.0 * F * ddF));
    const double den = dF + (dF >= 0.0 ? disc : -disc);
    const double delta = 5.0 * F / den;
    chi -= delta;
    if (std::abs(delta) <= 1e-16 * std::abs(chi)) {
      eval(chi, F, dF, ddF);
      converged = std::abs(F) <= kKeplerResidualTolerance * scale;
      break;
    }
  }
  if (!converged) {
    throw NoConvergence("universal Kepler equation: no convergence (residual " + std::to_string(F) + ")");
  }

  const double z = alpha * chi * chi;
  const Stumpff st = stumpff(z);
  const double r = dF;
  const double f = 1.0 - chi * chi * st.C / r0;
  const double g = tr - chi * chi * chi * st.S / smu;
  const double fd = smu * chi * (z * st.S - 1.0) / (r * r0);
  const double gd = 1.0 - chi * chi * st.C / r;
  return {f * s0.x + g * s0.X, fd * s0.x + gd * s0.X, mu};
}

}  // namespace ksreg
