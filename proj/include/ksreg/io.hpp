#pragma once

// Record and trajectory serialization.
//
// CSV: a header line names the columns; readers look columns up by name and
// ignore the ones they do not know. Lines starting with '#' are comments.
// JSONL: one object per line. Quaternions are [w, x, y, z] arrays in records;
// trajectory lines use the flat CSV column names.
// Floats are written in shortest round-trip form, so output is byte-stable.

#include <charconv>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <system_error>
#include <variant>
#include <vector>

#include <json.hpp>

#include "ksreg/canon.hpp"
#include "ksreg/errors.hpp"
#include "ksreg/propagator.hpp"

namespace ksreg::io {

class ParseError : public Error {
 public:
  using Error::Error;
};

enum class Format { csv, jsonl };

inline Format parse_format(std::string_view s) {
  if (s == "csv") return Format::csv;
  if (s == "jsonl") return Format::jsonl;
  throw InvalidArgument("unknown format '" + std::string(s) + "' (expected csv or jsonl)");
}

inline std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double x = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw ParseError("not a number: '" + std::string(s) + "'");
  }
  return x;
}

// Comma-separated list with optional brackets: "[1, 0, 0]" or "1,0,0".
inline std::vector<double> parse_list(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '[')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == ']' || s.back() == '\r')) s.remove_suffix(1);
  std::vector<double> out;
  if (s.empty()) return out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = s.find(',', pos);
    out.push_back(parse_double(s.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos)));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

// KS phase as stored in files; v_star, V_star and mu may be absent.
struct KSRecord {
  Quaternion v{};
  Quaternion V{};
  std::optional<double> v_star;
  std::optional<double> V_star;
  std::optional<double> mu;
};

struct CartesianRecord {
  Vec3 x{};
  Vec3 X{};
  std::optional<double> mu;
};

using Record = std::variant<CartesianRecord, KSRecord>;

namespace detail {

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = line.find(',', pos);
    cells.push_back(line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return cells;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline bool skip_line(std::string_view s) {
  s = trim(s);
  return s.empty() || s.front() == '#';
}

using Row = std::map<std::string, double, std::less<>>;

inline std::optional<double> get(const Row& row, std::string_view key) {
  const auto it = row.find(key);
  if (it == row.end()) return std::nullopt;
  return it->second;
}

inline Record record_from_row(const Row& row) {
  auto need = [&](std::string_view k) {
    const auto v = get(row, k);
    if (!v) throw ParseError("missing column '" + std::string(k) + "'");
    return *v;
  };
  if (row.contains("v0")) {
    KSRecord r;
    r.v = {need("v0"), need("v1"), need("v2"), need("v3")};
    r.V = {need("V0"), need("V1"), need("V2"), need("V3")};
    r.v_star = get(row, "vstar");
    r.V_star = get(row, "Vstar");
    r.mu = get(row, "mu");
    return r;
  }
  if (row.contains("x1")) {
    CartesianRecord r;
    r.x = {need("x1"), need("x2"), need("x3")};
    r.X = {need("X1"), need("X2"), need("X3")};
    r.mu = get(row, "mu");
    return r;
  }
  throw ParseError("record has neither KS (v0..) nor Cartesian (x1..) columns");
}

template <std::size_t N>
std::array<double, N> json_array(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_array() || j[key].size() != N) {
    throw ParseError(std::string("field '") + key + "' must be an array of " + std::to_string(N) + " numbers");
  }
  std::array<double, N> a{};
  for (std::size_t i = 0; i < N; ++i) {
    if (!j[key][i].is_number()) throw ParseError(std::string("field '") + key + "' must hold numbers");
    a[i] = j[key][i].get<double>();
  }
  return a;
}

inline std::optional<double> json_number(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  if (!j[key].is_number()) throw ParseError(std::string("field '") + key + "' must be a number");
  return j[key].get<double>();
}

inline Record record_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ParseError("record must be a JSON object");
  if (j.contains("v")) {
    KSRecord r;
    const auto v = json_array<4>(j, "v");
    const auto V = json_array<4>(j, "V");
    r.v = {v[0], v[1], v[2], v[3]};
    r.V = {V[0], V[1], V[2], V[3]};
    r.v_star = json_number(j, "v_star");
    r.V_star = json_number(j, "V_star");
    r.mu = json_number(j, "mu");
    return r;
  }
  if (j.contains("x")) {
    CartesianRecord r;
    const auto x = json_array<3>(j, "x");
    const auto X = json_array<3>(j, "X");
    r.x = {x[0], x[1], x[2]};
    r.X = {X[0], X[1], X[2]};
    r.mu = json_number(j, "mu");
    return r;
  }
  throw ParseError("record has neither \"v\" nor \"x\"");
}

}  // namespace detail

// Reads every record. ParseError messages carry the 1-based line number.
inline std::vector<Record> read_records(std::istream& in, Format fmt) {
  std::vector<Record> out;
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::skip_line(line)) continue;
    try {
      if (fmt == Format::jsonl) {
        nlohmann::json j;
        try {
          j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
          throw ParseError(e.what());
        }
        out.push_back(detail::record_from_json(j));
        continue;
      }
      const auto cells = detail::split_commas(line);
      if (header.empty()) {
        for (auto c : cells) header.emplace_back(detail::trim(c));
        continue;
      }
      if (cells.size() != header.size()) {
        throw ParseError("expected " + std::to_string(header.size()) + " columns, got " + std::to_string(cells.size()));
      }
      detail::Row row;
      for (std::size_t i = 0; i < cells.size(); ++i) row[header[i]] = parse_double(cells[i]);
      out.push_back(detail::record_from_row(row));
    } catch (const ParseError& e) {
      throw ParseError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

// Output records. jc is the bilinear constraint value of the KS phase involved.
struct KSOut {
  KSPhase phase;
  double mu;
  double jc;
};

struct CartesianOut {
  CartesianState state;
  double jc;
};

class RecordWriter {
 public:
  RecordWriter(std::ostream& os, Format fmt) : os_{os}, fmt_{fmt} {}

  void write(const KSOut& r) {
    const KSPhase& p = r.phase;
    if (fmt_ == Format::csv) {
      header("v0,v1,v2,v3,V0,V1,V2,V3,vstar,Vstar,mu,Jc");
      row({p.v.w, p.v.vec[0], p.v.vec[1], p.v.vec[2], p.V.w, p.V.vec[0], p.V.vec[1], p.V.vec[2], p.v_star,
           p.V_star, r.mu, r.jc});
      return;
    }
    nlohmann::ordered_json j;
    j["v"] = {p.v.w, p.v.vec[0], p.v.vec[1], p.v.vec[2]};
    j["V"] = {p.V.w, p.V.vec[0], p.V.vec[1], p.V.vec[2]};
    j["v_star"] = p.v_star;
    j["V_star"] = p.V_star;
    j["mu"] = r.mu;
    j["Jc"] = r.jc;
    os_ << j.dump() << '\n';
  }

  void write(const CartesianOut& r) {
    const CartesianState& s = r.state;
    if (fmt_ == Format::csv) {
      header("x1,x2,x3,X1,X2,X3,mu,Jc");
      row({s.x[0], s.x[1], s.x[2], s.X[0], s.X[1], s.X[2], s.mu, r.jc});
      return;
    }
    nlohmann::ordered_json j;
    j["x"] = {s.x[0], s.x[1], s.x[2]};
    j["X"] = {s.X[0], s.X[1], s.X[2]};
    j["mu"] = s.mu;
    j["Jc"] = r.jc;
    os_ << j.dump() << '\n';
  }

 private:
  void header(const char* h) {
    if (!header_done_) os_ << h << '\n';
    header_done_ = true;
  }
  void row(std::initializer_list<double> vals) {
    bool first = true;
    for (double v : vals) {
      if (!first) os_ << ',';
      os_ << format_double(v);
      first = false;
    }
    os_ << '\n';
  }

  std::ostream& os_;
  Format fmt_;
  bool header_done_{false};
};

inline constexpr const char* kTrajectoryColumns =
    "tau,t,v0,v1,v2,v3,V0,V1,V2,V3,vstar,Vstar,x1,x2,x3,X1,X2,X3,Jc,K0";

// Trajectory stream with an optional trailing pos_err column.
class TrajectoryWriter {
 public:
  TrajectoryWriter(std::ostream& os, Format fmt, bool with_error = false)
      : os_{os}, fmt_{fmt}, with_error_{with_error} {
    if (fmt_ == Format::csv) os_ << kTrajectoryColumns << (with_error_ ? ",pos_err" : "") << '\n';
  }

  void write(const TrajectorySample& s, double pos_err = 0.0) {
    const KSPhase& p = s.phase;
    const double vals[] = {s.tau,      s.t,        p.v.w,      p.v.vec[0], p.v.vec[1], p.v.vec[2], p.V.w,
                           p.V.vec[0], p.V.vec[1], p.V.vec[2], p.v_star,   p.V_star,   s.cartesian.x[0],
                           s.cartesian.x[1], s.cartesian.x[2], s.cartesian.X[0], s.cartesian.X[1], s.cartesian.X[2],
                           s.invariants.Jc,  s.invariants.K0};
    if (fmt_ == Format::csv) {
      for (std::size_t i = 0; i < std::size(vals); ++i) os_ << (i ? "," : "") << format_double(vals[i]);
      if (with_error_) os_ << ',' << format_double(pos_err);
      os_ << '\n';
      return;
    }
    nlohmann::ordered_json j;
    std::size_t i = 0;
    for (auto name : detail::split_commas(kTrajectoryColumns)) j[std::string(name)] = vals[i++];
    if (with_error_) j["pos_err"] = pos_err;
    os_ << j.dump() << '\n';
  }

 private:
  std::ostream& os_;
  Format fmt_;
  bool with_error_;
};

// Trajectory rows read back as name -> value maps (used by the plot command).
inline std::vector<std::map<std::string, double, std::less<>>> read_trajectory(std::istream& in, Format fmt) {
  std::vector<std::map<std::string, double, std::less<>>> rows;
  std::string line;
  std::vector<std::string> header;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::skip_line(line)) continue;
    try {
      std::map<std::string, double, std::less<>> row;
      if (fmt == Format::jsonl) {
        nlohmann::json j;
        try {
          j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
          throw ParseError(e.what());
        }
        for (auto& [k, v] : j.items()) {
          if (v.is_number()) row[k] = v.get<double>();
        }
      } else {
        const auto cells = detail::split_commas(line);
        if (header.empty()) {
          for (auto c : cells) header.emplace_back(detail::trim(c));
          continue;
        }
        if (cells.size() != header.size()) throw ParseError("column count does not match the header");
        for (std::size_t i = 0; i < cells.size(); ++i) row[header[i]] = parse_double(cells[i]);
      }
      rows.push_back(std::move(row));
    } catch (const ParseError& e) {
      throw ParseError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

}  // namespace ksreg::io
