#pragma once

/**
 * @file propagator.hpp
 * @brief Fixed-step integration of the KS equations in Sundman time.
 *
 * Two schemes:
 *  - rk4:   classical fourth-order Runge-Kutta on the full vector field;
 *  - split: Strang splitting, exact oscillator drift for K0 (including the
 *           physical-time quadrature) around half kicks of the perturbation.
 *           Exact when the perturbation is absent.
 *
 * Samples carry the Cartesian image and an invariant report, so the
 * bookkeeping of physical time t = v* travels with the state.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ksreg/canon.hpp"
#include "ksreg/dynamics.hpp"
#include "ksreg/errors.hpp"
#include "ksreg/ksmap.hpp"
#include "ksreg/oscillator.hpp"
#include "ksreg/rotframe.hpp"

namespace ksreg {

using PhaseRate = std::function<KSPhase(const KSPhase&)>;

// Everything the integrator needs to know about the dynamics.
struct Problem {
  KSChart chart;
  double mu{1.0};
  Perturbation perturbation;  // empty means none
  PhaseRate rate;             // full vector field

  static Problem kepler(const KSChart& chart, double mu, Perturbation pert = {}, EomOptions opt = {}) {
    Problem p{chart, mu, std::move(pert), {}};
    p.rate = [chart, mu, pert = p.perturbation, opt](const KSPhase& s) {
      return ks_equations_of_motion(s, chart, mu, pert, opt);
    };
    return p;
  }

  // Rotating frame with the modified term and its split equations of motion.
  static Problem rotating(const KSChart& chart, double mu, const RotatingFrameSpec& spec) {
    Problem p{chart, mu, rotating_frame_perturbation(spec, RotatingTerm::modified), {}};
    p.rate = [chart, spec](const KSPhase& s) { return rot_equations_of_motion(s, chart, spec); };
    return p;
  }
};

enum class Scheme { rk4, split };

struct IntegratorConfig {
  double step{1e-3};                 // Sundman-time step
  Scheme scheme{Scheme::rk4};
  std::size_t max_steps{100'000'000};
  std::size_t output_stride{1};      // emit every n-th step (the final state is always emitted)

  void validate() const {
    if (!(step > 0.0) || !std::isfinite(step)) throw InvalidArgument("integrator step must be positive");
    if (max_steps == 0) throw InvalidArgument("max_steps must be positive");
    if (output_stride == 0) throw InvalidArgument("output_stride must be positive");
  }
};

struct InvariantReport {
  double Jc{0.0};  // bilinear invariant
  double K0{0.0};  // unperturbed Hamiltonian
  double K{0.0};   // K0 + P
};

struct TrajectorySample {
  double tau{0.0};
  double t{0.0};
  KSPhase phase;
  CartesianState cartesian;
  InvariantReport invariants;
};

using SampleSink = std::function<void(const TrajectorySample&)>;

inline TrajectorySample make_sample(double tau, const KSPhase& p, const Problem& prob) {
  TrajectorySample s;
  s.tau = tau;
  s.t = p.v_star;
  s.phase = p;
  s.cartesian = to_cartesian(p, prob.chart, prob.mu);
  s.invariants.Jc = bilinear_invariant(p.v, p.V, prob.chart.c);
  s.invariants.K0 = ks_hamiltonian_unperturbed(p, prob.chart, prob.mu).K0;
  s.invariants.K = s.invariants.K0 + (prob.perturbation ? prob.perturbation(p, prob.chart, prob.mu).value : 0.0);
  return s;
}

namespace detail {

inline KSPhase axpy(const KSPhase& p, double h, const KSPhase& d) {
  return {p.v + h * d.v, p.V + h * d.V, p.v_star + h * d.v_star, p.V_star + h * d.V_star};
}

inline KSPhase rk4_step(const PhaseRate& f, const KSPhase& p, double h) {
  const KSPhase k1 = f(p);
  const KSPhase k2 = f(axpy(p, 0.5 * h, k1));
  const KSPhase k3 = f(axpy(p, 0.5 * h, k2));
  const KSPhase k4 = f(axpy(p, h, k3));
  KSPhase out = p;
  const double h6 = h / 6.0;
  out.v += h6 * (k1.v + 2.0 * k2.v + 2.0 * k3.v + k4.v);
  out.V += h6 * (k1.V + 2.0 * k2.V + 2.0 * k3.V + k4.V);
  out.v_star += h6 * (k1.v_star + 2.0 * k2.v_star + 2.0 * k3.v_star + k4.v_star);
  out.V_star += h6 * (k1.V_star + 2.0 * k2.V_star + 2.0 * k3.V_star + k4.V_star);
  return out;
}

// Exact flow of K0 over h.
inline KSPhase oscillator_drift(const KSPhase& p, double h, const KSChart& chart) {
  const double w2 = omega0_squared(p.V_star, chart);
  const OscillatorCoeffs k = oscillator_coeffs(w2, h);
  KSPhase out = p;
  out.v = k.c * p.v + k.s * p.V;
  out.V = k.cd * p.v + k.sd * p.V;
  out.v_star = p.v_star + 4.0 / (chart.alpha * chart.alpha) * oscillator_norm_integral(k, p.v, p.V);
  return out;
}

// Flow of the perturbation alone over h, one RK4 step.
inline KSPhase perturbation_kick(const KSPhase& p, double h, const Problem& prob) {
  if (!prob.perturbation) return p;
  const PhaseRate f = [&prob](const KSPhase& s) {
    const PerturbationTerm t = prob.perturbation(s, prob.chart, prob.mu);
    KSPhase d;
    d.v = t.d_V;
    d.V = -t.d_v;
    d.v_star = 0.0;
    d.V_star = -t.d_vstar;
    return d;
  };
  return rk4_step(f, p, h);
}

inline KSPhase advance(const KSPhase& p, double h, const Problem& prob, Scheme scheme) {
  if (scheme == Scheme::rk4) return rk4_step(prob.rate, p, h);
  KSPhase q = perturbation_kick(p, 0.5 * h, prob);
  q = oscillator_drift(q, h, prob.chart);
  return perturbation_kick(q, 0.5 * h, prob);
}

inline void guard_collision(const KSPhase& p, const KSChart& chart) {
  const double r = dot(p.v, p.v) / chart.alpha;
  if (!(r >= 1e-12 * chart.alpha)) throw CollisionError("collision: r fell below 1e-12 alpha");
}

}  // namespace detail

// One step of size h with the configured scheme.
inline KSPhase step(const KSPhase& p, double h, const Problem& prob, Scheme scheme = Scheme::rk4) {
  return detail::advance(p, h, prob, scheme);
}

// Integrates from tau = 0 to tau_end with a uniform step no larger than
// cfg.step (tau_end is hit exactly). Samples go to `sink`; the final one is
// returned.
inline TrajectorySample integrate(const KSPhase& p0, const Problem& prob, const IntegratorConfig& cfg,
                                  double tau_end, const SampleSink& sink = {}) {
  cfg.validate();
  if (!(tau_end >= 0.0) || !std::isfinite(tau_end)) throw InvalidArgument("tau_end must be finite and >= 0");
  const double ratio = tau_end / cfg.step;
  const auto n = static_cast<std::size_t>(std::ceil(ratio * (1.0 - 1e-14)));
  if (n > cfg.max_steps) {
    throw StepLimitExceeded("integration needs " + std::to_string(n) + " steps, limit is " +
                            std::to_string(cfg.max_steps));
  }
  TrajectorySample sample = make_sample(0.0, p0, prob);
  if (sink) sink(sample);
  if (n == 0) return sample;
  const double h = tau_end / static_cast<double>(n);
  KSPhase p = p0;
  for (std::size_t k = 1; k <= n; ++k) {
    p = detail::advance(p, h, prob, cfg.scheme);
    detail::guard_collision(p, prob.chart);
    if (k % cfg.output_stride == 0 || k == n) {
      sample = make_sample(k == n ? tau_end : static_cast<double>(k) * h, p, prob);
      if (sink) sink(sample);
    }
  }
  return sample;
}

inline std::vector<TrajectorySample> integrate_collect(const KSPhase& p0, const Problem& prob,
                                                       const IntegratorConfig& cfg, double tau_end) {
  std::vector<TrajectorySample> out;
  integrate(p0, prob, cfg, tau_end, [&out](const TrajectorySample& s) { out.push_back(s); });
  return out;
}

// Physical times of a sample stream (the v* channel).
inline std::vector<double> time_of(std::span<const TrajectorySample> samples) {
  std::vector<double> t;
  t.reserve(samples.size());
  for (const auto& s : samples) t.push_back(s.t);
  return t;
}

// Independent check of the v* channel: trapezoidal quadrature of 4 r / alpha.
inline std::vector<double> trapezoid_time(std::span<const TrajectorySample> samples, const KSChart& chart) {
  std::vector<double> t;
  if (samples.empty()) return t;
  t.reserve(samples.size());
  t.push_back(samples.front().t);
  auto rate = [&chart](const TrajectorySample& s) { return 4.0 * dot(s.phase.v, s.phase.v) / (chart.alpha * chart.alpha); };
  for (std::size_t k = 1; k < samples.size(); ++k) {
    const double h = samples[k].tau - samples[k - 1].tau;
    t.push_back(t.back() + 0.5 * h * (rate(samples[k - 1]) + rate(samples[k])));
  }
  return t;
}

namespace detail {

// Cubic Hermite interpolant of t(tau) on [a, b], using dt/dtau = 4 r / alpha.
inline double hermite_time(const TrajectorySample& a, const TrajectorySample& b, double tau, const KSChart& chart) {
  const double h = b.tau - a.tau;
  const double s = (tau - a.tau) / h;
  const double a2 = chart.alpha * chart.alpha;
  const double da = 4.0 * dot(a.phase.v, a.phase.v) / a2;
  const double db = 4.0 * dot(b.phase.v, b.phase.v) / a2;
  const double h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
  const double h10 = s * (1.0 - s) * (1.0 - s);
  const double h01 = s * s * (3.0 - 2.0 * s);
  const double h11 = s * s * (s - 1.0);
  return h00 * a.t + h10 * h * da + h01 * b.t + h11 * h * db;
}

}  // namespace detail

// Sundman time at which the dense (cubic Hermite) t(tau) reaches `t`,
// found by bisection to 1e-12. Samples must be ordered and bracket t.
inline double tau_at_time(std::span<const TrajectorySample> samples, double t, const KSChart& chart) {
  if (samples.empty()) throw InvalidArgument("no samples");
  if (t == samples.front().t) return samples.front().tau;
  if (t < samples.front().t || t > samples.back().t) throw InvalidArgument("time outside the sampled span");
  const auto it = std::lower_bound(samples.begin(), samples.end(), t,
                                   [](const TrajectorySample& s, double v) { return s.t < v; });
  const TrajectorySample& b = *it;
  const TrajectorySample& a = *(it - 1);
  double lo = a.tau, hi = b.tau;
  const double tol = 1e-12 * std::max(1.0, std::abs(hi));
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (detail::hermite_time(a, b, mid, chart) < t) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// Integrates until the physical time reaches t_end and finishes with a
// partial step landing on the tau found by tau_at_time.
inline TrajectorySample integrate_to_time(const KSPhase& p0, const Problem& prob, const IntegratorConfig& cfg,
                                          double t_end, const SampleSink& sink = {}) {
  cfg.validate();
  if (!(t_end >= p0.v_star) || !std::isfinite(t_end)) throw InvalidArgument("t_end must not precede the epoch");
  TrajectorySample prev = make_sample(0.0, p0, prob);
  if (sink) sink(prev);
  if (t_end == p0.v_star) return prev;
  KSPhase p = p0;
  for (std::size_t k = 1; k <= cfg.max_steps; ++k) {
    const KSPhase next = detail::advance(p, cfg.step, prob, cfg.scheme);
    detail::guard_collision(next, prob.chart);
    const TrajectorySample cur = make_sample(static_cast<double>(k) * cfg.step, next, prob);
    if (cur.t >= t_end) {
      const TrajectorySample pair[2] = {prev, cur};
      const double tau = tau_at_time(pair, t_end, prob.chart);
      const KSPhase last = detail::advance(prev.phase, tau - prev.tau, prob, cfg.scheme);
      TrajectorySample out = make_sample(tau, last, prob);
      if (sink) sink(out);
      return out;
    }
    if (sink && k % cfg.output_stride == 0) sink(cur);
    prev = cur;
    p = next;
  }
  throw StepLimitExceeded("physical time span not reached within max_steps");
}

}  // namespace ksreg
