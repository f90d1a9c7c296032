#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "ksreg/io.hpp"
#include "support/oracles.hpp"
#include "support/random.hpp"

using namespace ksreg;
using ksreg::testing::rel_err;
using ksreg::testing::Rng;
using json = nlohmann::json;

namespace {

namespace fs = std::filesystem;

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

fs::path scratch() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / ("ksreg_cli_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

fs::path write_file(const std::string& name, const std::string& content) {
  const fs::path p = scratch() / name;
  std::ofstream(p) << content;
  return p;
}

CliResult run(const std::string& args, const std::string& stdin_text = "") {
  const fs::path in = write_file("stdin.txt", stdin_text);
  const fs::path out = scratch() / "stdout.txt";
  const fs::path err = scratch() / "stderr.txt";
  const std::string cmd = std::string(KSREG_CLI) + " " + args + " < " + in.string() + " > " + out.string() + " 2> " +
                          err.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

std::vector<std::map<std::string, double, std::less<>>> rows_of(const std::string& csv) {
  std::istringstream is(csv);
  return io::read_trajectory(is, io::Format::csv);
}

std::vector<std::string> column(const std::string& csv, std::size_t col) {
  std::vector<std::string> out;
  std::istringstream is(csv);
  std::string line;
  std::getline(is, line);
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::string cell;
    for (std::size_t k = 0; k <= col; ++k) std::getline(ls, cell, ',');
    out.push_back(cell);
  }
  return out;
}

const std::string kCircular = "x1,x2,x3,X1,X2,X3,mu\n1,0,0,0,1,0,1\n";

}  // namespace

TEST(CliTransform, UnitRadiusOnDefiningAxis) {
  const CliResult r = run("transform --chart KS3 --alpha 1 --rep sks", "x1,x2,x3,X1,X2,X3,mu\n0,0,1,0,1,0,1\n");
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream is(r.out);
  const auto recs = io::read_records(is, io::Format::csv);
  const auto& k = std::get<io::KSRecord>(recs.at(0));
  EXPECT_EQ(k.v, (Quaternion{0, 0, 0, 1}));
  const Quaternion V = sks_momenta({0, 0, 1}, {0, 1, 0}, KSChart::ks3(1.0));
  EXPECT_EQ(k.V, V);
  EXPECT_EQ(k.V_star, 0.5);
}

TEST(CliTransform, RoundTripAndDeterminism) {
  Rng rng(801);
  std::ostringstream os;
  os << "x1,x2,x3,X1,X2,X3,mu\n";
  std::vector<CartesianState> states;
  for (int k = 0; k < 60; ++k) {
    CartesianState s = rng.state(rng.uniform(0.5, 2.0));
    if (k == 0) s.x = {0.0, 0.0, -1.3};  // antipode of c
    if (k == 1) s.x = Vec3{std::sqrt(2e-5 - 1e-10), 0.0, -1.0 + 1e-5} * 2.0;  // near it
    states.push_back(s);
    os << io::format_double(s.x[0]) << ',' << io::format_double(s.x[1]) << ',' << io::format_double(s.x[2]) << ','
       << io::format_double(s.X[0]) << ',' << io::format_double(s.X[1]) << ',' << io::format_double(s.X[2]) << ','
       << io::format_double(s.mu) << '\n';
  }
  for (const char* rep : {"sks", "rule1"}) {
    const CliResult ks = run(std::string("transform --alpha 1.7 --rep ") + rep, os.str());
    ASSERT_EQ(ks.code, 0) << ks.err;
    const CliResult ks4 = run(std::string("transform --alpha 1.7 --jobs 4 --rep ") + rep, os.str());
    EXPECT_EQ(ks4.out, ks.out);
    const CliResult back = run("transform --alpha 1.7", ks.out);
    ASSERT_EQ(back.code, 0) << back.err;
    std::istringstream is(back.out);
    const auto recs = io::read_records(is, io::Format::csv);
    ASSERT_EQ(recs.size(), states.size());
    for (std::size_t i = 0; i < recs.size(); ++i) {
      const auto& c = std::get<io::CartesianRecord>(recs[i]);
      EXPECT_LE(rel_err(c.x, states[i].x), 1e-11) << rep << " record " << i;
      EXPECT_LE(rel_err(c.X, states[i].X), 1e-11) << rep << " record " << i;
      EXPECT_EQ(c.mu, states[i].mu);
    }
    for (const auto& jc : column(ks.out, 11)) EXPECT_LE(std::abs(io::parse_double(jc)), 1e-13);
  }
}

TEST(CliTransform, JsonlFormat) {
  const CliResult r = run("transform --format jsonl --alpha 2", "{\"x\":[1,0,0],\"X\":[0,1,0]}\n");
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(r.out);
  EXPECT_EQ(j["v"].size(), 4u);
  EXPECT_EQ(j["Jc"].get<double>(), 0.0);
  const CliResult back = run("transform --format jsonl --alpha 2", r.out);
  const json c = json::parse(back.out);
  EXPECT_NEAR(c["x"][0].get<double>(), 1.0, 1e-15);
  EXPECT_NEAR(c["X"][1].get<double>(), 1.0, 1e-15);
}

TEST(CliTransform, EmptyInput) {
  const CliResult r = run("transform");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "");
  EXPECT_EQ(run("transform --format jsonl").out, "");
}

TEST(CliTransform, ProjectConstraint) {
  const std::string in = "v0,v1,v2,v3,V0,V1,V2,V3\n0,1,0,1,-1.001,0,1,0\n";
  const CliResult plain = run("transform --to cartesian --alpha 2", in);
  ASSERT_EQ(plain.code, 0) << plain.err;
  EXPECT_GT(std::abs(io::parse_double(column(plain.out, 7).at(0))), 1e-4);
  const CliResult proj = run("transform --project-constraint --alpha 2", in);
  EXPECT_EQ(io::parse_double(column(proj.out, 7).at(0)), 0.0);
  // Projection keeps the Cartesian state.
  for (std::size_t c = 0; c < 6; ++c) EXPECT_EQ(column(proj.out, c), column(plain.out, c));
}

TEST(CliErrors, ExitCodes) {
  const CliResult parse = run("transform", "x1,x2,x3,X1,X2,X3\n1,2,oops,0,1,0\n");
  EXPECT_EQ(parse.code, 2);
  EXPECT_NE(parse.err.find("line 2"), std::string::npos);
  EXPECT_EQ(run("transform --no-such-flag").code, 2);
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("transform --chart KS9").code, 2);
  EXPECT_EQ(run("transform --to ks", "v0,v1,v2,v3,V0,V1,V2,V3\n1,0,0,0,0,1,0,0\n").code, 2);

  const CliResult collision = run("transform", "x1,x2,x3,X1,X2,X3\n1,0,0,0,1,0\n0,0,0,0,1,0\n");
  EXPECT_EQ(collision.code, 3);
  EXPECT_NE(collision.err.find("record 1"), std::string::npos);

  EXPECT_EQ(run("propagate --alpha auto --tau-span 1", "x1,x2,x3,X1,X2,X3\n1,0,0,0,2,0\n").code, 3);
  EXPECT_EQ(run("rotating --alpha 1 --omega 0.1", "x1,x2,x3,X1,X2,X3\n1,0,0,0,2,0\n").code, 3);
  EXPECT_EQ(run("propagate --alpha 2 --tau-span 10 --max-steps 5", kCircular).code, 4);
  EXPECT_EQ(run("propagate --alpha 2", kCircular).code, 2);
  EXPECT_EQ(run("propagate --alpha 2 --tau-span 1 --t-span 1", kCircular).code, 2);
  EXPECT_EQ(run("propagate --alpha 2 --tau-span 1", kCircular + "1,0,0,0,1,0,1\n").code, 2);
  EXPECT_EQ(run("propagate --config /nonexistent.ini --tau-span 1", kCircular).code, 2);
}

TEST(CliPropagate, CircularOrbitDrifts) {
  const fs::path summary = scratch() / "summary.json";
  const CliResult r = run("propagate --alpha 2 --tau-span 3.141592653589793 --compare-oracle --summary " + summary.string(),
                    kCircular);
  ASSERT_EQ(r.code, 0) << r.err;
  const json s = json::parse(slurp(summary));
  EXPECT_LE(s["max_abs_Jc"].get<double>(), 1e-10);
  EXPECT_LE(s["max_K_drift"].get<double>(), 1e-10);
  EXPECT_LE(s["max_pos_err"].get<double>(), 1e-10);
  EXPECT_NEAR(s["t_end"].get<double>(), 2.0 * std::numbers::pi, 1e-10);
  const auto rows = rows_of(r.out);
  EXPECT_EQ(rows.size(), 2001u);
  EXPECT_TRUE(rows.front().contains("pos_err"));
  // Byte-deterministic.
  EXPECT_EQ(run("propagate --alpha 2 --tau-span 3.141592653589793 --compare-oracle", kCircular).out, r.out);
}

TEST(CliPropagate, ZeroSpanAndTimeSpan) {
  const CliResult zero = run("propagate --alpha 2 --tau-span 0", kCircular);
  ASSERT_EQ(zero.code, 0) << zero.err;
  EXPECT_EQ(rows_of(zero.out).size(), 1u);

  const CliResult t = run("propagate --alpha auto --t-span 2.5 --stride 100000 --compare-oracle",
                    "x1,x2,x3,X1,X2,X3\n1,0,0.2,0,1.1,0.1\n");
  ASSERT_EQ(t.code, 0) << t.err;
  const auto rows = rows_of(t.out);
  EXPECT_NEAR(rows.back().at("t"), 2.5, 1e-10);
  EXPECT_LE(rows.back().at("pos_err"), 1e-9);
}

TEST(CliPropagate, ConfigFileWithFlagOverride) {
  const fs::path cfg = write_file("run.ini",
                                  "[chart]\ndefining_vector = KS1\nalpha = 5\n"
                                  "[integrator]\nscheme = split\nstep = 0.25\n"
                                  "[run]\ntau_span = 1\nformat = jsonl\n");
  const fs::path summary = scratch() / "s.json";
  const CliResult r = run("propagate --config " + cfg.string() + " --alpha 2 --summary " + summary.string(),
                    "{\"x\":[1,0,0],\"X\":[0,1,0]}\n");
  ASSERT_EQ(r.code, 0) << r.err;
  const json s = json::parse(slurp(summary));
  EXPECT_EQ(s["alpha"].get<double>(), 2.0);
  EXPECT_EQ(s["step"].get<double>(), 0.25);
  EXPECT_EQ(s["samples"].get<int>(), 5);
  EXPECT_EQ(json::parse(r.out.substr(0, r.out.find('\n'))).size(), 20u);
}

TEST(CliRotating, OmegaZeroMatchesPropagation) {
  const std::string init = "x1,x2,x3,X1,X2,X3\n1,0,0.1,0,0.9,0.2\n";
  const CliResult rot = run("rotating --alpha 2 --omega 0 --tau-span 6 --samples 25", init);
  ASSERT_EQ(rot.code, 0) << rot.err;
  const CliResult prop = run("propagate --alpha 2 --tau-span 6 --scheme split --step 0.25", init);
  ASSERT_EQ(prop.code, 0) << prop.err;
  const auto a = rows_of(rot.out);
  const auto b = rows_of(prop.out);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (const auto& [key, val] : a[i]) EXPECT_NEAR(val, b[i].at(key), 1e-12 * (1.0 + std::abs(val))) << key;
  }
}

TEST(CliRotating, ThirdChannelIsUntouched) {
  const std::string init = "x1,x2,x3,X1,X2,X3\n0.8,-0.3,0.4,0.2,0.9,-0.1\n";
  const CliResult still = run("rotating --chart KS3 --alpha 2 --omega 0 --tau-span 20 --samples 50", init);
  const CliResult turn = run("rotating --chart KS3 --alpha 2 --omega 0.3 --tau-span 20 --samples 50", init);
  ASSERT_EQ(still.code, 0) << still.err;
  ASSERT_EQ(turn.code, 0) << turn.err;
  EXPECT_EQ(column(still.out, 5), column(turn.out, 5));  // v3
  EXPECT_EQ(column(still.out, 9), column(turn.out, 9));  // V3
  EXPECT_NE(column(still.out, 3), column(turn.out, 3));  // v1 moves
}

TEST(CliRotating, NumericalComparison) {
  const std::string init = "x1,x2,x3,X1,X2,X3\n1,0,0.1,0,0.95,0.2\n";
  const fs::path summary = scratch() / "rot.json";
  CliResult r = run("rotating --alpha 2 --omega 0.4 --samples 2 --summary " + summary.string(), init);
  ASSERT_EQ(r.code, 0) << r.err;
  const double w = json::parse(slurp(summary))["w"].get<double>();
  const double span = 5.0 * 2.0 * std::numbers::pi / w;
  r = run("rotating --alpha 2 --omega 0.4 --samples 51 --compare-numerical --tau-span " + io::format_double(span) +
              " --summary " + summary.string(),
          init);
  ASSERT_EQ(r.code, 0) << r.err;
  const json s = json::parse(slurp(summary));
  EXPECT_LE(s["max_deviation"].get<double>(), 1e-9);
  EXPECT_LE(s["max_rel_H_drift"].get<double>(), 1e-11);
  EXPECT_LE(s["max_rel_w_drift"].get<double>(), 1e-11);
  EXPECT_EQ(rows_of(r.out).size(), 51u);
}

TEST(CliCheck, Reports) {
  CliResult r = run("check --alpha 2", kCircular);
  ASSERT_EQ(r.code, 0) << r.err;
  json rec = json::parse(r.out)["records"][0];
  for (const char* route : {"cartesian", "ks", "fradkin"}) {
    for (int i = 0; i < 3; ++i) EXPECT_LE(std::abs(rec["e"][route][i].get<double>()), 1e-15) << route;
  }
  EXPECT_FALSE(rec["constraint_violated"].get<bool>());

  Rng rng(803);
  std::ostringstream os;
  os << "x1,x2,x3,X1,X2,X3\n";
  for (int k = 0; k < 40; ++k) {
    const CartesianState s = rng.bound_state();
    os << io::format_double(s.x[0]) << ',' << io::format_double(s.x[1]) << ',' << io::format_double(s.x[2]) << ','
       << io::format_double(s.X[0]) << ',' << io::format_double(s.X[1]) << ',' << io::format_double(s.X[2]) << '\n';
  }
  r = run("check --chart 0.3,-0.2,0.9 --alpha 1.3 --jobs 3", os.str());
  ASSERT_EQ(r.code, 0) << r.err;
  for (const auto& rr : json::parse(r.out)["records"]) {
    EXPECT_LE(rr["spread"]["e"].get<double>(), 1e-10);
    EXPECT_LE(rr["spread"]["G"].get<double>(), 1e-10);
  }
  EXPECT_EQ(run("check --chart 0.3,-0.2,0.9 --alpha 1.3", os.str()).out, r.out);
}

TEST(CliCheck, ConstraintViolationShows) {
  // A circular-orbit phase with V perturbed off the constraint manifold.
  const KSChart chart = KSChart::ks3(2.0);
  KSPhase p = to_ks_phase({{1, 0, 0}, {0, 1, 0}, 1.0}, chart);
  p.V = p.V + (1e-3 / dot(p.v, p.v)) * qmul(p.v, chart.c.quaternion());
  const double jc = bilinear_invariant(p.v, p.V, chart.c);
  ASSERT_GT(std::abs(jc), 1e-4);
  std::ostringstream os;
  os << "v0,v1,v2,v3,V0,V1,V2,V3,Vstar\n";
  for (std::size_t i = 0; i < 4; ++i) os << io::format_double(p.v[i]) << ',';
  for (std::size_t i = 0; i < 4; ++i) os << io::format_double(p.V[i]) << ',';
  os << io::format_double(p.V_star) << '\n';
  const CliResult r = run("check --alpha 2", os.str());
  ASSERT_EQ(r.code, 0) << r.err;
  const json rec = json::parse(r.out)["records"][0];
  EXPECT_NEAR(rec["Jc"].get<double>(), jc, 1e-15);
  EXPECT_TRUE(rec["constraint_violated"].get<bool>());
  EXPECT_GT(rec["spread"]["e"].get<double>(), 1e-5);
  EXPECT_GT(rec["spread"]["G"].get<double>(), 1e-5);
}

TEST(CliCheck, UnboundOrbit) {
  const CliResult r = run("check --alpha 1", "x1,x2,x3,X1,X2,X3\n1,0,0,0,2,0\n");
  EXPECT_EQ(r.code, 3);
  const json rec = json::parse(r.out)["records"][0];
  EXPECT_TRUE(rec["e"]["fradkin"].is_null());
  EXPECT_TRUE(rec["e"]["cartesian"].is_array());
  EXPECT_TRUE(rec.contains("fradkin_error"));
}

TEST(CliPlot, Svg) {
  const CliResult traj = run("propagate --alpha 2 --tau-span 3.2 --stride 20", "x1,x2,x3,X1,X2,X3\n1,0,0,0,1.2,0\n");
  ASSERT_EQ(traj.code, 0) << traj.err;
  const CliResult svg = run("plot --plane xy", traj.out);
  ASSERT_EQ(svg.code, 0) << svg.err;
  EXPECT_EQ(svg.out.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.out.find("</svg>"), std::string::npos);
  EXPECT_EQ(run("plot --plane xy", traj.out).out, svg.out);
  EXPECT_EQ(run("plot --plane ab", traj.out).code, 2);
  EXPECT_EQ(run("plot", "a,b\n1,2\n").code, 2);
}
