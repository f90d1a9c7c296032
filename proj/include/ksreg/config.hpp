#pragma once

// Run configuration for the command-line tool.
//
// File format (INI):
//
//   [chart]
//   defining_vector = [0, 0, 1]     ; or KS1 / KS3
//   alpha = 2                       ; or auto (twice the semi-major axis)
//   [physics]
//   mu = 1
//   [frame]
//   omega = 0.1
//   axis = [0, 0, 1]                ; defaults to the defining vector
//   epoch = 0
//   [integrator]
//   scheme = rk4                    ; or split
//   step = 0.001                    ; Sundman-time step; overrides steps_per_orbit
//   steps_per_orbit = 2000
//   max_steps = 100000000
//   output_stride = 1
//   [run]
//   perturbation = none             ; or rotating_frame
//   tau_span = 31.4
//   t_span = 62.8
//   samples = 101
//   format = csv                    ; or jsonl
//   rep = sks                       ; or rule1
//
// Command-line flags override file values.

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "ksreg/canon.hpp"
#include "ksreg/dynamics.hpp"
#include "ksreg/io.hpp"
#include "ksreg/ksmap.hpp"
#include "ksreg/propagator.hpp"

namespace ksreg::config {

struct RunConfig {
  Vec3 defining_vector{kE3};
  std::optional<double> alpha{1.0};  // empty means auto
  double mu{1.0};

  double omega{0.0};
  std::optional<Vec3> axis;
  double epoch{0.0};

  Scheme scheme{Scheme::rk4};
  std::optional<double> step;
  double steps_per_orbit{2000.0};
  std::size_t max_steps{100'000'000};
  std::size_t output_stride{1};

  std::string perturbation{"none"};
  std::optional<double> tau_span;
  std::optional<double> t_span;
  std::size_t samples{101};
  io::Format format{io::Format::csv};
  Representative rep{Representative::sks};
};

inline Vec3 parse_vector(std::string_view s) {
  const auto v = io::parse_list(s);
  if (v.size() != 3) throw InvalidArgument("expected three components, got '" + std::string(s) + "'");
  return {v[0], v[1], v[2]};
}

// "KS1", "KS3" or "c1,c2,c3" (normalised).
inline Vec3 parse_chart(std::string_view s) {
  if (s == "KS1" || s == "ks1") return kE1;
  if (s == "KS3" || s == "ks3") return kE3;
  try {
    return DefiningVector::from_direction(parse_vector(s)).vec();
  } catch (const io::ParseError&) {
    throw InvalidArgument("chart must be KS1, KS3 or c1,c2,c3; got '" + std::string(s) + "'");
  }
}

inline std::optional<double> parse_alpha(std::string_view s) {
  if (s == "auto") return std::nullopt;
  const double a = io::parse_double(s);
  if (!(a > 0.0)) throw InvalidArgument("alpha must be positive or 'auto'");
  return a;
}

inline Scheme parse_scheme(std::string_view s) {
  if (s == "rk4") return Scheme::rk4;
  if (s == "split") return Scheme::split;
  throw InvalidArgument("scheme must be rk4 or split");
}

inline Representative parse_rep(std::string_view s) {
  if (s == "sks") return Representative::sks;
  if (s == "rule1") return Representative::rule1;
  throw InvalidArgument("rep must be sks or rule1");
}

inline std::string parse_perturbation(std::string_view s) {
  if (s != "none" && s != "rotating_frame") throw InvalidArgument("perturbation must be none or rotating_frame");
  return std::string(s);
}

inline std::size_t parse_count(std::string_view s) {
  const double d = io::parse_double(s);
  if (!(d >= 0.0) || d != std::floor(d)) throw InvalidArgument("expected a non-negative integer, got '" + std::string(s) + "'");
  return static_cast<std::size_t>(d);
}

// Applies every key present in the file on top of `cfg`.
inline void load_ini(const std::string& path, RunConfig& cfg) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(path, tree);
  } catch (const pt::ini_parser_error& e) {
    throw io::ParseError(e.what());
  }
  auto with = [&](const char* key, auto&& apply) {
    if (const auto v = tree.get_optional<std::string>(key)) {
      std::string_view value = *v;
      value = io::detail::trim(value.substr(0, value.find_first_of(";#")));
      try {
        apply(value);
      } catch (const Error& e) {
        throw io::ParseError(path + ": " + key + ": " + e.what());
      }
    }
  };
  with("chart.defining_vector", [&](auto s) { cfg.defining_vector = parse_chart(s); });
  with("chart.alpha", [&](auto s) { cfg.alpha = parse_alpha(s); });
  with("physics.mu", [&](auto s) { cfg.mu = io::parse_double(s); });
  with("frame.omega", [&](auto s) { cfg.omega = io::parse_double(s); });
  with("frame.axis", [&](auto s) { cfg.axis = parse_chart(s); });
  with("frame.epoch", [&](auto s) { cfg.epoch = io::parse_double(s); });
  with("integrator.scheme", [&](auto s) { cfg.scheme = parse_scheme(s); });
  with("integrator.step", [&](auto s) { cfg.step = io::parse_double(s); });
  with("integrator.steps_per_orbit", [&](auto s) { cfg.steps_per_orbit = io::parse_double(s); });
  with("integrator.max_steps", [&](auto s) { cfg.max_steps = parse_count(s); });
  with("integrator.output_stride", [&](auto s) { cfg.output_stride = parse_count(s); });
  with("run.perturbation", [&](auto s) { cfg.perturbation = parse_perturbation(s); });
  with("run.tau_span", [&](auto s) { cfg.tau_span = io::parse_double(s); });
  with("run.t_span", [&](auto s) { cfg.t_span = io::parse_double(s); });
  with("run.samples", [&](auto s) { cfg.samples = parse_count(s); });
  with("run.format", [&](auto s) { cfg.format = io::parse_format(s); });
  with("run.rep", [&](auto s) { cfg.rep = parse_rep(s); });
}

// alpha = 2a = -mu / E for the "auto" setting.
inline double auto_alpha(const CartesianState& s) {
  const double E = kepler_hamiltonian_cartesian(s);
  if (!(E < 0.0)) throw UnboundOrbit("alpha = auto needs a bound initial orbit (E < 0)");
  return -s.mu / E;
}

inline KSChart resolve_chart(const RunConfig& cfg, const CartesianState* initial) {
  const DefiningVector c{cfg.defining_vector};
  if (cfg.alpha) return {c, *cfg.alpha};
  if (!initial) throw InvalidArgument("alpha = auto needs a Cartesian initial state");
  return {c, auto_alpha(*initial)};
}

}  // namespace ksreg::config
