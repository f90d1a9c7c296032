// ksreg: command-line front end.
//
// Exit codes: 0 success, 2 usage or parse error, 3 domain error, 4 numerical failure.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ksreg/config.hpp"
#include "ksreg/io.hpp"
#include "ksreg/kepler.hpp"
#include "ksreg/ksreg.hpp"

using namespace ksreg;
namespace io = ksreg::io;
using config::RunConfig;
using json = nlohmann::ordered_json;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitDomain = 3;
constexpr int kExitNumerical = 4;

// Raw flag values; unset ones leave the config file (or default) in force.
struct CommonFlags {
  std::string config_path;
  std::string input{"-"};
  std::string output{"-"};
  std::optional<std::string> format, chart, alpha;
  std::optional<double> mu;
};

struct Streams {
  std::unique_ptr<std::ifstream> in_file;
  std::unique_ptr<std::ofstream> out_file;
  std::istream* in{&std::cin};
  std::ostream* out{&std::cout};

  Streams(const std::string& in_path, const std::string& out_path) {
    if (in_path != "-") {
      in_file = std::make_unique<std::ifstream>(in_path);
      if (!*in_file) throw io::ParseError("cannot open input file '" + in_path + "'");
      in = in_file.get();
    }
    if (out_path != "-") {
      out_file = std::make_unique<std::ofstream>(out_path);
      if (!*out_file) throw io::ParseError("cannot open output file '" + out_path + "'");
      out = out_file.get();
    }
  }
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "INI config file (flags override it)");
  cmd->add_option("-i,--input", f.input, "input file, - for stdin");
  cmd->add_option("-o,--output", f.output, "output file, - for stdout");
  cmd->add_option("--format", f.format, "csv or jsonl");
  cmd->add_option("--chart", f.chart, "KS1, KS3 or c1,c2,c3 (default KS3)");
  cmd->add_option("--alpha", f.alpha, "length scale alpha, or auto (= 2a of the initial orbit)");
  cmd->add_option("--mu", f.mu, "gravitational parameter (default 1)");
}

RunConfig base_config(const CommonFlags& f) {
  RunConfig cfg;
  if (!f.config_path.empty()) config::load_ini(f.config_path, cfg);
  if (f.format) cfg.format = io::parse_format(*f.format);
  if (f.chart) cfg.defining_vector = config::parse_chart(*f.chart);
  if (f.alpha) cfg.alpha = config::parse_alpha(*f.alpha);
  if (f.mu) cfg.mu = *f.mu;
  if (!(cfg.mu > 0.0)) throw InvalidArgument("mu must be positive");
  return cfg;
}

CartesianState cartesian_of(const io::CartesianRecord& r, double mu) { return {r.x, r.X, r.mu.value_or(mu)}; }

const CartesianState* first_cartesian(const std::vector<io::Record>& recs, CartesianState& slot, double mu) {
  if (recs.empty()) return nullptr;
  if (const auto* c = std::get_if<io::CartesianRecord>(&recs.front())) {
    slot = cartesian_of(*c, mu);
    return &slot;
  }
  return nullptr;
}

// KS phase of a record. Missing V* is fixed on the unperturbed K = 0 manifold.
KSPhase phase_of(const io::KSRecord& r, const KSChart& chart, double mu, double epoch) {
  KSPhase p{r.v, r.V, r.v_star.value_or(epoch), 0.0};
  p.V_star = r.V_star ? *r.V_star : fix_energy_manifold(p, chart, mu, no_perturbation()).V_star;
  return p;
}

KSPhase phase_of(const io::Record& rec, const KSChart& chart, double mu, Representative rep, double epoch) {
  if (const auto* c = std::get_if<io::CartesianRecord>(&rec)) {
    return to_ks_phase(cartesian_of(*c, mu), chart, rep, epoch);
  }
  const auto& k = std::get<io::KSRecord>(rec);
  return phase_of(k, chart, k.mu.value_or(mu), epoch);
}

double mu_of(const io::Record& rec, double mu) {
  return std::visit([mu](const auto& r) { return r.mu.value_or(mu); }, rec);
}

// Runs fn(i) for i in [0, n) on `jobs` threads. Keeps the error of the lowest
// failing index so the report does not depend on scheduling.
template <class Fn>
void parallel_for(std::size_t n, unsigned jobs, Fn fn) {
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  std::vector<std::exception_ptr> errors(n);
  auto work = [&](unsigned w) {
    for (std::size_t i = w; i < n; i += jobs) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (jobs == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < jobs; ++w) pool.emplace_back(work, w);
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const DomainError& e) {
      throw DomainError("record " + std::to_string(i) + ": " + e.what());
    } catch (const Error& e) {
      throw InvalidArgument("record " + std::to_string(i) + ": " + e.what());
    }
  }
}

void write_summary(const json& j, const std::string& path) {
  if (path.empty()) {
    std::cerr << j.dump(2) << '\n';
    return;
  }
  std::ofstream f(path);
  if (!f) throw io::ParseError("cannot open summary file '" + path + "'");
  f << j.dump(2) << '\n';
}

json vec_json(const Vec3& v) { return json::array({v[0], v[1], v[2]}); }

// ---------------------------------------------------------------- transform

struct TransformFlags {
  std::string rep{"sks"};
  std::string to{"auto"};
  bool project{false};
  unsigned jobs{1};
};

void cmd_transform(const CommonFlags& cf, const TransformFlags& tf) {
  RunConfig cfg = base_config(cf);
  cfg.rep = config::parse_rep(tf.rep);
  if (tf.to != "auto" && tf.to != "ks" && tf.to != "cartesian") throw InvalidArgument("--to must be auto, ks or cartesian");
  Streams st(cf.input, cf.output);
  const auto recs = io::read_records(*st.in, cfg.format);
  CartesianState first{};
  const KSChart chart = config::resolve_chart(cfg, first_cartesian(recs, first, cfg.mu));

  using Out = std::variant<io::KSOut, io::CartesianOut>;
  std::vector<Out> out(recs.size());
  parallel_for(recs.size(), tf.jobs, [&](std::size_t i) {
    const io::Record& rec = recs[i];
    const bool is_cart = std::holds_alternative<io::CartesianRecord>(rec);
    if ((tf.to == "ks" && !is_cart) || (tf.to == "cartesian" && is_cart)) {
      throw InvalidArgument(std::string("record is already ") + (is_cart ? "Cartesian" : "KS"));
    }
    const double mu = mu_of(rec, cfg.mu);
    KSPhase p = phase_of(rec, chart, mu, cfg.rep, 0.0);
    if (tf.project) p = project_constraint(p, chart);
    const double jc = bilinear_invariant(p.v, p.V, chart.c);
    if (is_cart) {
      out[i] = io::KSOut{p, mu, jc};
    } else {
      out[i] = io::CartesianOut{to_cartesian(p, chart, mu), jc};
    }
  });
  io::RecordWriter w(*st.out, cfg.format);
  for (const auto& o : out) std::visit([&w](const auto& r) { w.write(r); }, o);
}

// ---------------------------------------------------------------- propagate

struct PropagateFlags {
  std::optional<double> tau_span, t_span, step, steps_per_orbit, omega;
  std::optional<std::string> scheme, perturbation, axis, rep;
  std::optional<std::size_t> stride, max_steps;
  bool compare_oracle{false};
  std::string summary;
};

struct Setup {
  RunConfig cfg;
  KSChart chart;
  Problem problem;
  RotatingFrameSpec spec;
  KSPhase phase;
  CartesianState initial;  // Cartesian image of the initial phase
  double orbit_tau{0.0};   // Sundman time of one orbit, 0 when unbound
};

RotatingFrameSpec frame_spec(const RunConfig& cfg, const KSChart& chart) {
  return {cfg.omega, cfg.axis ? DefiningVector{*cfg.axis} : chart.c};
}

Setup prepare(RunConfig cfg, std::istream& in) {
  const auto recs = io::read_records(in, cfg.format);
  if (recs.size() != 1) {
    throw io::ParseError("expected exactly one initial state, got " + std::to_string(recs.size()));
  }
  CartesianState first{};
  const KSChart chart = config::resolve_chart(cfg, first_cartesian(recs, first, cfg.mu));
  const double mu = mu_of(recs.front(), cfg.mu);
  const RotatingFrameSpec spec = frame_spec(cfg, chart);
  KSPhase p = phase_of(recs.front(), chart, mu, cfg.rep, cfg.epoch);
  const bool rotating = cfg.perturbation == "rotating_frame";
  const bool modified = rotating && spec.axis == chart.c;
  Problem prob = !rotating ? Problem::kepler(chart, mu)
                 : modified ? Problem::rotating(chart, mu, spec)
                            : Problem::kepler(chart, mu, rotating_frame_perturbation(spec, RotatingTerm::raw));
  double w = 0.0;
  if (modified) {
    try {
      const RotatingSetup rs = rotating_setup(p, chart, mu, spec);
      p = rs.phase;
      w = rs.w;
    } catch (const UnboundOrbit&) {
      p.V_star = fix_energy_manifold(p, chart, mu, prob.perturbation).V_star;
    }
  } else {
    p.V_star = fix_energy_manifold(p, chart, mu, prob.perturbation).V_star;
    const double reduced = fix_energy_manifold(p, chart, mu, no_perturbation()).V_star;
    if (reduced > 0.0) w = omega0(reduced, chart);
  }
  Setup s{cfg, chart, std::move(prob), spec, p, to_cartesian(p, chart, mu), 0.0};
  if (w > 0.0) s.orbit_tau = std::numbers::pi / w;
  return s;
}

IntegratorConfig integrator(const Setup& s) {
  IntegratorConfig ic;
  ic.scheme = s.cfg.scheme;
  ic.max_steps = s.cfg.max_steps;
  ic.output_stride = s.cfg.output_stride;
  if (s.cfg.step) {
    ic.step = *s.cfg.step;
  } else if (s.orbit_tau > 0.0) {
    if (!(s.cfg.steps_per_orbit > 0.0)) throw InvalidArgument("steps_per_orbit must be positive");
    ic.step = s.orbit_tau / s.cfg.steps_per_orbit;
  } else {
    throw InvalidArgument("unbound orbit: give --step explicitly");
  }
  ic.validate();
  return ic;
}

void apply_propagate_flags(RunConfig& cfg, const PropagateFlags& pf) {
  if (pf.tau_span) cfg.tau_span = *pf.tau_span;
  if (pf.t_span) cfg.t_span = *pf.t_span;
  if (pf.tau_span && !pf.t_span) cfg.t_span.reset();
  if (pf.t_span && !pf.tau_span) cfg.tau_span.reset();
  if (pf.step) cfg.step = *pf.step;
  if (pf.steps_per_orbit) cfg.steps_per_orbit = *pf.steps_per_orbit;
  if (pf.omega) cfg.omega = *pf.omega;
  if (pf.scheme) cfg.scheme = config::parse_scheme(*pf.scheme);
  if (pf.perturbation) cfg.perturbation = config::parse_perturbation(*pf.perturbation);
  if (pf.axis) cfg.axis = config::parse_chart(*pf.axis);
  if (pf.rep) cfg.rep = config::parse_rep(*pf.rep);
  if (pf.stride) cfg.output_stride = *pf.stride;
  if (pf.max_steps) cfg.max_steps = *pf.max_steps;
}

void cmd_propagate(const CommonFlags& cf, const PropagateFlags& pf) {
  RunConfig cfg = base_config(cf);
  apply_propagate_flags(cfg, pf);
  if (cfg.tau_span && cfg.t_span) throw InvalidArgument("give either a tau span or a t span, not both");
  if (!cfg.tau_span && !cfg.t_span) throw InvalidArgument("a --tau-span or --t-span is required");
  Streams st(cf.input, cf.output);
  const Setup s = prepare(cfg, *st.in);
  const IntegratorConfig ic = integrator(s);

  // Oracle: fixed-frame Kepler motion seen from the (possibly rotating) frame.
  const bool rotating = cfg.perturbation == "rotating_frame";
  const RotatingFrameSpec spec = rotating ? s.spec : RotatingFrameSpec{0.0, s.chart.c};
  const double epoch = s.phase.v_star;
  const CartesianState fixed0 = from_rotating_frame(s.initial, spec, 0.0);

  io::TrajectoryWriter w(*st.out, cfg.format, pf.compare_oracle);
  std::size_t count = 0;
  double max_jc = 0.0, max_dk = 0.0, max_err = 0.0, max_dh = 0.0;
  const double K_init = make_sample(0.0, s.phase, s.problem).invariants.K;
  const double H_init = rotating_invariant(s.phase, s.chart);
  const SampleSink sink = [&](const TrajectorySample& smp) {
    double err = 0.0;
    if (pf.compare_oracle) {
      const double dt = smp.t - epoch;
      const CartesianState ref = to_rotating_frame(kepler_oracle(fixed0, dt), spec, dt);
      err = norm(smp.cartesian.x - ref.x);
      max_err = std::max(max_err, err);
    }
    max_jc = std::max(max_jc, std::abs(smp.invariants.Jc));
    max_dk = std::max(max_dk, std::abs(smp.invariants.K - K_init));
    max_dh = std::max(max_dh, std::abs(rotating_invariant(smp.phase, s.chart) - H_init));
    ++count;
    w.write(smp, err);
  };
  const TrajectorySample last = cfg.tau_span ? integrate(s.phase, s.problem, ic, *cfg.tau_span, sink)
                                             : integrate_to_time(s.phase, s.problem, ic, epoch + *cfg.t_span, sink);
  st.out->flush();

  json j;
  j["samples"] = count;
  j["step"] = ic.step;
  j["tau_end"] = last.tau;
  j["t_end"] = last.t;
  j["alpha"] = s.chart.alpha;
  j["max_abs_Jc"] = max_jc;
  j["max_K_drift"] = max_dk;
  j["max_H_drift"] = max_dh;
  if (pf.compare_oracle) j["max_pos_err"] = max_err;
  write_summary(j, pf.summary);
}

// ---------------------------------------------------------------- rotating

struct RotatingFlags {
  std::optional<double> omega, tau_span;
  std::optional<std::string> axis, rep;
  std::optional<std::size_t> samples;
  bool compare_numerical{false};
  double steps_per_period{4000.0};
  std::string summary;
};

double phase_deviation(const KSPhase& a, const KSPhase& b) {
  return std::max({max_abs(a.v - b.v), max_abs(a.V - b.V), std::abs(a.v_star - b.v_star)});
}

void cmd_rotating(const CommonFlags& cf, const RotatingFlags& rf) {
  RunConfig cfg = base_config(cf);
  if (rf.omega) cfg.omega = *rf.omega;
  if (rf.axis) cfg.axis = config::parse_chart(*rf.axis);
  if (rf.rep) cfg.rep = config::parse_rep(*rf.rep);
  if (rf.samples) cfg.samples = *rf.samples;
  if (rf.tau_span) cfg.tau_span = *rf.tau_span;
  if (cfg.samples == 0) throw InvalidArgument("--samples must be at least 1");
  cfg.perturbation = "rotating_frame";
  Streams st(cf.input, cf.output);

  const auto recs = io::read_records(*st.in, cfg.format);
  if (recs.size() != 1) {
    throw io::ParseError("expected exactly one initial state, got " + std::to_string(recs.size()));
  }
  CartesianState first{};
  const KSChart chart = config::resolve_chart(cfg, first_cartesian(recs, first, cfg.mu));
  const double mu = mu_of(recs.front(), cfg.mu);
  const RotatingFrameSpec spec = frame_spec(cfg, chart);
  const RotatingSetup rs = rotating_setup(phase_of(recs.front(), chart, mu, cfg.rep, cfg.epoch), chart, mu, spec);
  const Problem prob = Problem::rotating(chart, mu, spec);
  const double period = 2.0 * std::numbers::pi / rs.w;
  const double span = cfg.tau_span.value_or(period);
  if (!(span >= 0.0) || !std::isfinite(span)) throw InvalidArgument("tau span must be finite and >= 0");
  const std::size_t n = cfg.samples;
  auto tau_of = [&](std::size_t k) {
    return n == 1 ? 0.0 : (k + 1 == n ? span : span * static_cast<double>(k) / static_cast<double>(n - 1));
  };

  io::TrajectoryWriter w(*st.out, cfg.format);
  double max_dh = 0.0, max_dw = 0.0;
  std::vector<KSPhase> closed;
  closed.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double tau = tau_of(k);
    const KSPhase p = closed_form_propagate(rs, tau, chart, spec);
    const double H = rotating_invariant(p, chart);
    max_dh = std::max(max_dh, std::abs(H - rs.H) / std::max(std::abs(rs.H), 1e-300));
    max_dw = std::max(max_dw, std::abs(rot_frequency(p.V_star, H, chart, spec) - rs.w) / rs.w);
    w.write(make_sample(tau, p, prob));
    closed.push_back(p);
  }
  st.out->flush();

  json j;
  j["samples"] = n;
  j["tau_end"] = tau_of(n - 1);
  j["t_end"] = closed.back().v_star;
  j["w"] = rs.w;
  j["H"] = rs.H;
  j["V_star"] = rs.phase.V_star;
  j["max_rel_H_drift"] = max_dh;
  j["max_rel_w_drift"] = max_dw;
  if (rf.compare_numerical) {
    // RK4 at a step no larger than period / steps_per_period, landing on every sample.
    const double h_target = period / rf.steps_per_period;
    IntegratorConfig ic;
    ic.max_steps = cfg.max_steps;
    double dev = 0.0;
    KSPhase p = rs.phase;
    for (std::size_t k = 1; k < n; ++k) {
      const double dtau = tau_of(k) - tau_of(k - 1);
      ic.step = h_target;
      if (dtau > 0.0) p = integrate(p, prob, ic, dtau).phase;
      dev = std::max(dev, phase_deviation(p, closed[k]));
    }
    j["numerical_step_target"] = h_target;
    j["max_deviation"] = dev;
  }
  write_summary(j, rf.summary);
}

// ---------------------------------------------------------------- check

struct CheckFlags {
  std::optional<std::string> rep;
  unsigned jobs{1};
};

double spread(std::initializer_list<Vec3> vs) {
  double s = 0.0;
  for (auto a = vs.begin(); a != vs.end(); ++a)
    for (auto b = a + 1; b != vs.end(); ++b) s = std::max(s, norm(*a - *b));
  return s;
}

struct CheckResult {
  json report;
  bool unbound{false};
};

CheckResult check_record(const io::Record& rec, const KSChart& chart, double mu_default, Representative rep) {
  const double mu = mu_of(rec, mu_default);
  const KSPhase p = phase_of(rec, chart, mu, rep, 0.0);
  const CartesianState cs = to_cartesian(p, chart, mu);
  const CartesianPosition pos = ks_forward(p.v, chart);
  const double jc = bilinear_invariant(p.v, p.V, chart.c);
  const double X0 = jc / (2.0 * pos.r);
  const KsEnergy ke = ks_hamiltonian_unperturbed(p, chart, mu);

  json j;
  j["Jc"] = jc;
  j["constraint_violated"] = !(std::abs(jc) <= kConstraintTolerance);
  j["energy"] = {{"cartesian", kepler_hamiltonian_cartesian(cs)}, {"minus_V_star", -p.V_star}, {"K0", ke.K0},
                 {"jc_term", ke.jc_term}};

  // Routes that coincide only on the constraint manifold.
  const Vec3 G_cart = cross(cs.x, cs.X);
  const AngularMomentumMatrix L = angular_momentum_matrix(p.v, p.V);
  const Vec3 G_osc = angular_momentum_from_matrix(L, 0.0, pos.x);
  j["G"] = {{"cartesian", vec_json(G_cart)}, {"oscillator", vec_json(G_osc)}};
  const Vec3 e_cart = laplace_vector_cartesian(cs);
  const Vec3 e_ks = laplace_vector_ks(p, chart, mu);
  j["e"] = {{"cartesian", vec_json(e_cart)}, {"ks", vec_json(e_ks)}};

  CheckResult res;
  std::optional<Vec3> e_fr;
  try {
    const double w0 = omega0(p.V_star, chart);
    const FradkinTensor F = fradkin_tensor(p.v, p.V, w0);
    e_fr = laplace_vector_fradkin(F, chart.c, w0, chart, mu, 0.0, 0.0, G_osc, pos.x);
    j["e"]["fradkin"] = vec_json(*e_fr);
    j["audit"] = {{"G_oscillator_with_X0", vec_json(angular_momentum_from_matrix(L, X0, pos.x))},
                  {"e_fradkin_with_K0_X0", vec_json(laplace_vector_fradkin(p, chart, mu))}};
  } catch (const UnboundOrbit& ex) {
    j["e"]["fradkin"] = nullptr;
    j["fradkin_error"] = ex.what();
    res.unbound = true;
  }
  const double gnorm = norm(G_cart);
  j["spread"] = {{"G", spread({G_cart, G_osc}) / (gnorm > 0.0 ? gnorm : 1.0)},
                 {"e", e_fr ? spread({e_cart, e_ks, *e_fr}) : spread({e_cart, e_ks})}};
  res.report = std::move(j);
  return res;
}

int cmd_check(const CommonFlags& cf, const CheckFlags& kf) {
  RunConfig cfg = base_config(cf);
  if (kf.rep) cfg.rep = config::parse_rep(*kf.rep);
  Streams st(cf.input, cf.output);
  const auto recs = io::read_records(*st.in, cfg.format);
  CartesianState first{};
  const KSChart chart = config::resolve_chart(cfg, first_cartesian(recs, first, cfg.mu));
  std::vector<CheckResult> results(recs.size());
  parallel_for(recs.size(), kf.jobs, [&](std::size_t i) { results[i] = check_record(recs[i], chart, cfg.mu, cfg.rep); });

  json doc;
  doc["chart"] = {{"defining_vector", vec_json(chart.c.vec())}, {"alpha", chart.alpha}};
  doc["records"] = json::array();
  bool unbound = false;
  for (std::size_t i = 0; i < results.size(); ++i) {
    json r;
    r["index"] = i;
    for (auto& [k, v] : results[i].report.items()) r[k] = v;
    doc["records"].push_back(std::move(r));
    unbound = unbound || results[i].unbound;
  }
  *st.out << doc.dump(2) << '\n';
  if (unbound) {
    std::cerr << "ksreg: error: Fradkin routes need bound orbits (see fradkin_error in the report)\n";
    return kExitDomain;
  }
  return 0;
}

// ---------------------------------------------------------------- plot

struct PlotFlags {
  std::string plane{"xy"};
};

std::string fmt2(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 2);
  return std::string(buf, r.ptr);
}

void cmd_plot(const CommonFlags& cf, const PlotFlags& pf) {
  RunConfig cfg = base_config(cf);
  if (pf.plane != "xy" && pf.plane != "xz" && pf.plane != "yz") throw InvalidArgument("--plane must be xy, xz or yz");
  const std::string a = pf.plane == "yz" ? "x2" : "x1";
  const std::string b = pf.plane == "xy" ? "x2" : "x3";
  Streams st(cf.input, cf.output);
  const auto rows = io::read_trajectory(*st.in, cfg.format);
  for (const auto& r : rows) {
    for (const char* k : {"tau", "Jc", "K0"})
      if (!r.contains(k)) throw io::ParseError(std::string("trajectory lacks column '") + k + "'");
    if (!r.contains(a) || !r.contains(b)) throw io::ParseError("trajectory lacks position columns");
  }

  constexpr double W = 400.0, Hh = 400.0, pad = 30.0;
  std::ostream& os = *st.out;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << 2 * W << "\" height=\"" << Hh << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  // Orbit panel, equal aspect, attractor marked.
  double lo = 0.0, hi = 0.0;
  for (const auto& r : rows) {
    lo = std::min({lo, r.at(a), r.at(b)});
    hi = std::max({hi, r.at(a), r.at(b)});
  }
  const double half = std::max(0.5 * (hi - lo), 1e-300);
  const double mid = 0.5 * (hi + lo);
  auto px = [&](double u) { return pad + (u - mid + half) / (2 * half) * (W - 2 * pad); };
  auto py = [&](double u) { return Hh - pad - (u - mid + half) / (2 * half) * (Hh - 2 * pad); };
  os << "<text x=\"" << pad << "\" y=\"20\" font-size=\"12\">orbit (" << a << ", " << b << ")</text>\n";
  os << "<circle cx=\"" << fmt2(px(0)) << "\" cy=\"" << fmt2(py(0)) << "\" r=\"3\" fill=\"black\"/>\n";
  os << "<polyline fill=\"none\" stroke=\"steelblue\" points=\"";
  for (const auto& r : rows) os << fmt2(px(r.at(a))) << ',' << fmt2(py(r.at(b))) << ' ';
  os << "\"/>\n";

  // Drift panel: J.c and K0 - K0(0) against tau.
  if (!rows.empty()) {
    const double t0 = rows.front().at("tau"), t1 = std::max(rows.back().at("tau"), t0 + 1e-300);
    const double k0 = rows.front().at("K0");
    double m = 1e-300;
    for (const auto& r : rows) m = std::max({m, std::abs(r.at("Jc")), std::abs(r.at("K0") - k0)});
    auto qx = [&](double t) { return W + pad + (t - t0) / (t1 - t0) * (W - 2 * pad); };
    auto qy = [&](double d) { return Hh / 2 - d / m * (Hh / 2 - pad); };
    os << "<text x=\"" << W + pad << "\" y=\"20\" font-size=\"12\">drift vs tau, full scale "
       << io::format_double(m) << " (blue Jc, red K0)</text>\n";
    os << "<line x1=\"" << W + pad << "\" y1=\"" << Hh / 2 << "\" x2=\"" << 2 * W - pad << "\" y2=\"" << Hh / 2
       << "\" stroke=\"gray\"/>\n";
    for (const auto& [key, colour] : {std::pair{"Jc", "steelblue"}, std::pair{"K0", "firebrick"}}) {
      os << "<polyline fill=\"none\" stroke=\"" << colour << "\" points=\"";
      for (const auto& r : rows) {
        const double d = std::string_view(key) == "K0" ? r.at("K0") - k0 : r.at("Jc");
        os << fmt2(qx(r.at("tau"))) << ',' << fmt2(qy(d)) << ' ';
      }
      os << "\"/>\n";
    }
  }
  os << "</svg>\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ksreg: Kustaanheimo-Stiefel regularization with an arbitrary defining vector"};
  app.require_subcommand(1);

  CommonFlags common;
  TransformFlags tf;
  PropagateFlags pf;
  RotatingFlags rf;
  CheckFlags kf;
  PlotFlags plf;

  auto* transform = app.add_subcommand("transform", "Cartesian <-> KS conversion of state records");
  add_common(transform, common);
  transform->add_option("--rep", tf.rep, "fiber representative: sks or rule1")->capture_default_str();
  transform->add_option("--to", tf.to, "auto (by record type), ks or cartesian")->capture_default_str();
  transform->add_flag("--project-constraint", tf.project, "re-derive V so that J.c = 0 before output");
  transform->add_option("--jobs", tf.jobs, "worker threads")->check(CLI::PositiveNumber);

  auto* propagate = app.add_subcommand("propagate", "integrate the KS equations in Sundman time");
  add_common(propagate, common);
  auto* tau_opt = propagate->add_option("--tau-span", pf.tau_span, "Sundman-time span");
  propagate->add_option("--t-span", pf.t_span, "physical-time span")->excludes(tau_opt);
  propagate->add_option("--step", pf.step, "Sundman-time step");
  propagate->add_option("--steps-per-orbit", pf.steps_per_orbit, "step = orbit / N when --step is absent (default 2000)");
  propagate->add_option("--scheme", pf.scheme, "rk4 or split");
  propagate->add_option("--perturbation", pf.perturbation, "none or rotating_frame");
  propagate->add_option("--omega", pf.omega, "frame rotation rate for rotating_frame");
  propagate->add_option("--axis", pf.axis, "frame rotation axis (default: defining vector)");
  propagate->add_option("--rep", pf.rep, "fiber representative for Cartesian input");
  propagate->add_option("--stride", pf.stride, "write every n-th step");
  propagate->add_option("--max-steps", pf.max_steps, "step limit");
  propagate->add_flag("--compare-oracle", pf.compare_oracle, "add a pos_err column against the Kepler oracle");
  propagate->add_option("--summary", pf.summary, "write the drift summary here instead of stderr");

  auto* rotating = app.add_subcommand("rotating", "closed-form Kepler motion in a rotating frame");
  add_common(rotating, common);
  rotating->add_option("--omega", rf.omega, "frame rotation rate");
  rotating->add_option("--axis", rf.axis, "rotation axis, must equal the defining vector");
  rotating->add_option("--tau-span", rf.tau_span, "Sundman-time span (default one period)");
  rotating->add_option("--samples", rf.samples, "number of output samples (default 101)");
  rotating->add_option("--rep", rf.rep, "fiber representative for Cartesian input");
  rotating->add_flag("--compare-numerical", rf.compare_numerical, "also integrate numerically and report deviation");
  rotating->add_option("--steps-per-period", rf.steps_per_period, "RK4 resolution for the comparison")
      ->capture_default_str();
  rotating->add_option("--summary", rf.summary, "write the summary here instead of stderr");

  auto* check = app.add_subcommand("check", "invariant report for state records (JSON)");
  add_common(check, common);
  check->add_option("--rep", kf.rep, "fiber representative for Cartesian input");
  check->add_option("--jobs", kf.jobs, "worker threads")->check(CLI::PositiveNumber);

  auto* plot = app.add_subcommand("plot", "SVG of a trajectory file: orbit and invariant drift");
  add_common(plot, common);
  plot->add_option("--plane", plf.plane, "projection plane: xy, xz or yz")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*transform) cmd_transform(common, tf);
    if (*propagate) cmd_propagate(common, pf);
    if (*rotating) cmd_rotating(common, rf);
    if (*check) return cmd_check(common, kf);
    if (*plot) cmd_plot(common, plf);
  } catch (const io::ParseError& e) {
    std::cerr << "ksreg: parse error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const InvalidArgument& e) {
    std::cerr << "ksreg: invalid argument: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DomainError& e) {
    std::cerr << "ksreg: domain error: " << e.what() << '\n';
    return kExitDomain;
  } catch (const NumericalError& e) {
    std::cerr << "ksreg: numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  }
  return 0;
}
