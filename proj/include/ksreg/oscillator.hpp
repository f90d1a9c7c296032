#pragma once

// Exact flow of the isotropic 4D oscillator y'' = -w2 y, for either sign of
// w2, together with the quadrature of |y|^2 that drives the physical time.

#include <cmath>

#include "ksreg/quat.hpp"

namespace ksreg {

// y(tau) = c(tau) u + s(tau) U,  y'(tau) = cd(tau) u + sd(tau) U.
struct OscillatorCoeffs {
  double c;
  double s;
  double cd;
  double sd;
  // Integrals over [0, tau] of c^2, c s and s^2.
  double int_cc;
  double int_cs;
  double int_ss;
};

inline OscillatorCoeffs oscillator_coeffs(double w2, double tau) {
  OscillatorCoeffs k{};
  const double z = w2 * tau * tau;
  if (w2 > 0.0) {
    const double w = std::sqrt(w2);
    const double sw = std::sin(w * tau), cw = std::cos(w * tau);
    k.c = cw;
    k.s = sw / w;
    k.cd = -w * sw;
    k.sd = cw;
    if (std::abs(z) >= 1e-4) k.int_ss = (0.5 * tau - std::sin(2.0 * w * tau) / (4.0 * w)) / w2;
  } else if (w2 < 0.0) {
    const double g = std::sqrt(-w2);
    const double sh = std::sinh(g * tau), ch = std::cosh(g * tau);
    k.c = ch;
    k.s = sh / g;
    k.cd = g * sh;
    k.sd = ch;
    if (std::abs(z) >= 1e-4) k.int_ss = (std::sinh(2.0 * g * tau) / (4.0 * g) - 0.5 * tau) / (-w2);
  } else {
    k.c = 1.0;
    k.s = tau;
    k.cd = 0.0;
    k.sd = 1.0;
  }
  if (std::abs(z) < 1e-4) {
    // Series of the s^2 integral; the closed forms cancel badly for small w tau.
    const double t3 = tau * tau * tau;
    k.int_ss = t3 * (1.0 / 3.0 - z / 15.0 + 2.0 * z * z / 315.0 - z * z * z / 2835.0);
  }
  // c^2 = 1 - w2 s^2 and (s^2)' = 2 c s.
  k.int_cc = tau - w2 * k.int_ss;
  k.int_cs = 0.5 * k.s * k.s;
  return k;
}

// Integral of |y|^2 over [0, tau] for y(0) = u, y'(0) = U.
inline double oscillator_norm_integral(const OscillatorCoeffs& k, const Quaternion& u, const Quaternion& U) {
  return dot(u, u) * k.int_cc + 2.0 * dot(u, U) * k.int_cs + dot(U, U) * k.int_ss;
}

}  // namespace ksreg
