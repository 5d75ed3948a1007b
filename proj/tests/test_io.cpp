#include <gtest/gtest.h>

#include <sstream>

#include "kukles/io.hpp"
#include "kukles/svg.hpp"
#include "support.hpp"

using namespace kukles;
using io::Json;

namespace {

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST(Io, NumIsShortestRoundTrip) {
  EXPECT_EQ(io::num(0.1), "0.1");
  EXPECT_EQ(io::num(-2.0), "-2");
  kt::Gen g(3);
  for (int i = 0; i < 1000; ++i) {
    const double v = g.uniform(-1e3, 1e3) * std::pow(10.0, g.integer(-12, 12));
    EXPECT_EQ(std::stod(io::num(v)), v);
  }
}

TEST(Io, ParamsRoundTripProperty) {
  kt::Gen g(17);
  for (int i = 0; i < 200; ++i) {
    const CanonicalParams p = g.params(g.q_shape(), 0.5);
    const Json j = Json::parse(io::to_json(p).dump());
    const CanonicalParams r = io::params_from_json(j);
    EXPECT_EQ(r.q.kind, p.q.kind);
    EXPECT_EQ(r.q.a, p.q.a);
    EXPECT_EQ(r.q.b, p.q.b);
    for (ParamId id : {ParamId::C, ParamId::D, ParamId::Alpha0, ParamId::Alpha2, ParamId::Beta, ParamId::Gamma})
      EXPECT_EQ(r.get(id), p.get(id));
  }
}

TEST(Io, PartialParamsKeepDefaults) {
  const auto p = io::params_from_json(Json::parse(R"({"alpha0": 0.05})"));
  EXPECT_EQ(p.alpha0, 0.05);
  EXPECT_EQ(p.q.kind, QCase::One);
  EXPECT_EQ(p.q.a, 2.0);
}

TEST(Io, UnknownKeysAreRejected) {
  EXPECT_THROW(io::params_from_json(Json::parse(R"({"alpha1": 0.1})")), Error);
  EXPECT_THROW(io::run_config_from_json(Json::parse(R"({"integrator": {"rtoll": 1e-9}})")), Error);
  EXPECT_THROW(io::run_config_from_json(Json::parse(R"({"extra": 1})")), Error);
  EXPECT_THROW(io::params_from_json(Json::parse(R"({"q_case": {"case": 4}})")), Error);
  EXPECT_THROW(io::params_from_json(Json::parse(R"({"beta": "high"})")), Error);
}

TEST(Io, RunConfigPropagatesSharedBlocks) {
  const auto rc = io::run_config_from_json(Json::parse(R"({
    "params": {"alpha0": 0.07, "q_case": {"case": 1, "a": 2}},
    "cycles": {"newton_tol": 1e-9},
    "grid": {"alpha2": {"from": -0.1, "to": 0, "n": 11}, "beta": [0.05, 0.06]},
    "census": {"seeds": 40}
  })"));
  EXPECT_EQ(rc.scenario.base.alpha0, 0.07);
  EXPECT_EQ(rc.grid.base.alpha0, 0.07);
  EXPECT_EQ(rc.census.cycle.newton_tol, 1e-9);
  EXPECT_EQ(rc.continuation.cycle.newton_tol, 1e-9);
  EXPECT_EQ(rc.grid.size(), 22u);
  EXPECT_EQ(rc.grid.alpha2.back(), 0.0);
  EXPECT_EQ(rc.census.seeds, 40);
}

TEST(Io, ConfigEchoRoundTrips) {
  io::RunConfig rc;
  rc.params.alpha0 = 0.03;
  rc.override_tolerances(1e-10, 1e-12);
  rc.sync();
  const Json echo = io::to_json(rc);
  const auto back = io::run_config_from_json(echo);
  EXPECT_EQ(io::to_json(back).dump(), echo.dump());
  EXPECT_EQ(back.cycles.integrator.rtol, 1e-10);
  EXPECT_EQ(back.homoclinic.integrator.atol, 1e-12);
}

TEST(Io, ToleranceOverrideValidates) {
  io::RunConfig rc;
  EXPECT_THROW(rc.override_tolerances(-1.0, std::nullopt), Error);
}

TEST(Io, TrajectoryCsvAndJsonl) {
  IntegratorConfig cfg;
  cfg.t_max = 1.0;
  Event ev;
  ev.name = "cross";
  ev.fn = [](double, State s) { return s.x - 0.25; };
  const auto t = integrate(CanonicalParams{}, {0.3, 0.0}, cfg, std::span<const Event>(&ev, 1));
  ASSERT_FALSE(t.events.empty());

  std::ostringstream csv;
  io::write_trajectory_csv(csv, t);
  const auto cl = lines(csv.str());
  EXPECT_EQ(cl.front(), "t,x,y");
  EXPECT_EQ(cl.size(), t.samples.size() + 1);

  std::ostringstream jl;
  io::write_trajectory_jsonl(jl, t);
  const auto jls = lines(jl.str());
  ASSERT_EQ(jls.size(), t.samples.size() + t.events.size());
  const Json last = Json::parse(jls.back());
  EXPECT_EQ(last["event"], "cross");
  EXPECT_NEAR(last["x"].get<double>(), 0.25, 1e-10);
  EXPECT_FALSE(Json::parse(jls.front()).contains("event"));
}

TEST(Io, BranchAndSeparatrixCsvHeaders) {
  CanonicalParams p;
  p.alpha0 = 0.05;
  p.beta = 0.05;
  p.alpha2 = -0.065;
  const auto sec = default_section(p, Anchor::O);
  const auto br = continue_cycle(p, sec, 0.7907369668, ParamId::Gamma, -0.001, 0.001, 1);
  std::ostringstream b;
  io::write_branch_csv(b, br);
  const auto bl = lines(b.str());
  EXPECT_EQ(bl.front(), "param,r,period,multiplier,stability");
  EXPECT_EQ(bl.size(), br.points.size() + 1);
  EXPECT_NE(bl[1].find("stable"), std::string::npos);

  IntegratorConfig cfg;
  cfg.t_max = 2.0;
  std::ostringstream s;
  io::write_separatrix_csv(s, separatrices(p, find_saddle(p), 1e-7, cfg));
  const auto sl = lines(s.str());
  EXPECT_EQ(sl.front(), "branch,t,x,y");
  for (const char* name : {"u+,", "u-,", "s+,", "s-,"}) {
    EXPECT_TRUE(std::any_of(sl.begin(), sl.end(), [&](const std::string& l) { return l.rfind(name, 0) == 0; }))
        << name;
  }
}

TEST(Io, CensusJsonLines) {
  GridSpec g;
  g.base.c = 1.0;
  g.alpha0 = {0.0, 0.01};
  CensusConfig cc;
  cc.seeds = 20;
  cc.threads = 1;
  const auto recs = census(g, cc);
  std::ostringstream os;
  io::write_census(os, recs, io::to_json(cc));
  const auto ls = lines(os.str());
  ASSERT_EQ(ls.size(), 3u);
  const Json head = Json::parse(ls[0]);
  EXPECT_EQ(head["format_version"], "1");
  EXPECT_TRUE(head.contains("config"));
  EXPECT_EQ(head["records"], 2);
  const Json r0 = Json::parse(ls[1]);
  EXPECT_EQ(r0["index"], 0);
  EXPECT_EQ(r0["distribution"], "(0:0)");
  EXPECT_EQ(r0["n_O"], 0);
  EXPECT_EQ(Json::parse(ls[2])["params"]["alpha0"], 0.01);
}

TEST(Io, ScenarioReportShape) {
  ScenarioConfig cfg;
  cfg.stages = {"centers", "alpha0-foci", "beta-AH"};
  const auto rep = run_scenario(cfg);
  const Json j = io::to_json(rep, io::scenario_options(cfg));
  EXPECT_EQ(j["format_version"], "1");
  EXPECT_TRUE(j["completed"].get<bool>());
  ASSERT_EQ(j["stages"].size(), 3u);
  EXPECT_EQ(j["stages"][2]["name"], "beta-AH");
  EXPECT_FALSE(j.contains("failure"));
}

TEST(Io, SingularityJson) {
  const auto s = finite_singularities(CanonicalParams{});
  const Json j = io::to_json(s[1]);
  EXPECT_EQ(j["kind"], "saddle");
  EXPECT_EQ(j["x"], 1.0);
  EXPECT_EQ(j["y"], 0.0);
  EXPECT_EQ(j["eigenvalues"].size(), 2u);
}

TEST(Svg, WellFormedAndDeterministic) {
  CanonicalParams p;
  p.alpha0 = 0.05;
  p.beta = 0.05;
  p.alpha2 = -0.065;
  const auto por = portrait(p, Window{}, Seeding{3, 3, 10.0, true});
  const auto sec = default_section(p, Anchor::O);
  const auto cs = count_cycles(p, sec, 1e-3, 0.999, 60);
  std::ostringstream a, b;
  svg::write(a, por, cs);
  svg::write(b, por, cs);
  EXPECT_EQ(a.str(), b.str());
  const std::string s = a.str();
  EXPECT_EQ(s.rfind("<svg", 0), 0u);
  EXPECT_NE(s.find("</svg>"), std::string::npos);
  EXPECT_NE(s.find("#c0392b"), std::string::npos);  // unstable separatrix colour
  EXPECT_NE(s.find("#1e8449"), std::string::npos);  // stable cycle
}
