#pragma once

// JSON and CSV serialization for parameters, trajectories, cycles, branches,
// census records and scenario reports, plus the run-configuration document.

#include <algorithm>
#include <charconv>
#include <initializer_list>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "kukles/bifurcation.hpp"
#include "kukles/cycles.hpp"
#include "kukles/error.hpp"
#include "kukles/integrate.hpp"
#include "kukles/model.hpp"
#include "kukles/scan.hpp"

namespace kukles::io {

using Json = nlohmann::ordered_json;

inline constexpr const char* kFormatVersion = "1";

/// Shortest decimal string that reads back to the same double.
inline std::string num(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// Reading helpers

inline void reject_unknown(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, where + ": expected a JSON object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : j.items())
    if (!ok.count(k)) throw Error(ErrorCode::InvalidArgument, where + ": unknown key '" + k + "'");
}

template <class T>
void read(const Json& j, const char* key, T& dst, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    dst = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::InvalidArgument, where + "." + key + ": wrong type");
  }
}

// ---------------------------------------------------------------------------
// Parameters

inline Json to_json(const QPolynomial& q) {
  Json j;
  j["case"] = static_cast<int>(q.kind);
  j["a"] = q.a;
  j["b"] = q.b;
  return j;
}

inline QPolynomial q_from_json(const Json& j) {
  reject_unknown(j, {"case", "a", "b"}, "q_case");
  QPolynomial q;
  int kind = 1;
  read(j, "case", kind, "q_case");
  if (kind < 1 || kind > 3) throw Error(ErrorCode::InvalidArgument, "q_case.case must be 1, 2 or 3");
  q.kind = static_cast<QCase>(kind);
  read(j, "a", q.a, "q_case");
  read(j, "b", q.b, "q_case");
  q.validate();
  return q;
}

inline Json to_json(const CanonicalParams& p) {
  Json j;
  j["q_case"] = to_json(p.q);
  j["c"] = p.c;
  j["d"] = p.d;
  j["alpha0"] = p.alpha0;
  j["alpha2"] = p.alpha2;
  j["beta"] = p.beta;
  j["gamma"] = p.gamma;
  return j;
}

/// Missing keys keep the values already in `base`.
inline CanonicalParams params_from_json(const Json& j, CanonicalParams base = {}) {
  reject_unknown(j, {"q_case", "c", "d", "alpha0", "alpha2", "beta", "gamma"}, "params");
  if (j.contains("q_case")) base.q = q_from_json(j.at("q_case"));
  read(j, "c", base.c, "params");
  read(j, "d", base.d, "params");
  read(j, "alpha0", base.alpha0, "params");
  read(j, "alpha2", base.alpha2, "params");
  read(j, "beta", base.beta, "params");
  read(j, "gamma", base.gamma, "params");
  base.validate();
  return base;
}

// ---------------------------------------------------------------------------
// Configuration blocks

inline Json to_json(const IntegratorConfig& c) {
  Json j;
  j["rtol"] = c.rtol;
  j["atol"] = c.atol;
  j["max_step"] = c.max_step;
  j["t_max"] = c.t_max;
  j["escape_radius"] = c.escape_radius;
  j["event_tol"] = c.event_tol;
  return j;
}

inline void read_integrator(const Json& j, IntegratorConfig& c, const std::string& where,
                            std::initializer_list<const char*> extra = {}) {
  std::vector<const char*> keys{"rtol", "atol", "max_step", "t_max", "escape_radius", "event_tol"};
  keys.insert(keys.end(), extra.begin(), extra.end());
  for (const auto& [k, v] : j.items())
    if (std::find_if(keys.begin(), keys.end(), [&k](const char* s) { return k == s; }) == keys.end())
      throw Error(ErrorCode::InvalidArgument, where + ": unknown key '" + k + "'");
  read(j, "rtol", c.rtol, where);
  read(j, "atol", c.atol, where);
  read(j, "max_step", c.max_step, where);
  read(j, "t_max", c.t_max, where);
  read(j, "escape_radius", c.escape_radius, where);
  read(j, "event_tol", c.event_tol, where);
  c.validate();
}

inline Json to_json(const CycleConfig& c) {
  Json j = to_json(c.integrator);
  j["newton_tol"] = c.newton_tol;
  j["mult_tol"] = c.mult_tol;
  j["max_newton"] = c.max_newton;
  j["r_outer_min"] = c.r_outer_min;
  j["big_seeds"] = c.big_seeds;
  return j;
}

inline void read_cycle(const Json& j, CycleConfig& c, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, where + ": expected a JSON object");
  read_integrator(j, c.integrator, where, {"newton_tol", "mult_tol", "max_newton", "r_outer_min", "big_seeds"});
  read(j, "newton_tol", c.newton_tol, where);
  read(j, "mult_tol", c.mult_tol, where);
  read(j, "max_newton", c.max_newton, where);
  read(j, "r_outer_min", c.r_outer_min, where);
  read(j, "big_seeds", c.big_seeds, where);
}

inline Json to_json(const ContinuationConfig& c) {
  Json j;
  j["h_init"] = c.h_init;
  j["h_min"] = c.h_min;
  j["h_max"] = c.h_max;
  j["amp_min"] = c.amp_min;
  j["max_points"] = c.max_points;
  j["max_corrector"] = c.max_corrector;
  return j;
}

inline void read_continuation(const Json& j, ContinuationConfig& c) {
  reject_unknown(j, {"h_init", "h_min", "h_max", "amp_min", "max_points", "max_corrector"}, "continuation");
  read(j, "h_init", c.h_init, "continuation");
  read(j, "h_min", c.h_min, "continuation");
  read(j, "h_max", c.h_max, "continuation");
  read(j, "amp_min", c.amp_min, "continuation");
  read(j, "max_points", c.max_points, "continuation");
  read(j, "max_corrector", c.max_corrector, "continuation");
}

inline Json to_json(const HomoclinicConfig& c) {
  Json j = to_json(c.integrator);
  j["eps"] = c.eps;
  if (c.left_x) j["left_x"] = *c.left_x;
  if (c.right_x) j["right_x"] = *c.right_x;
  return j;
}

inline void read_homoclinic(const Json& j, HomoclinicConfig& c) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "homoclinic: expected a JSON object");
  read_integrator(j, c.integrator, "homoclinic", {"eps", "left_x", "right_x"});
  read(j, "eps", c.eps, "homoclinic");
  if (j.contains("left_x")) c.left_x = j.at("left_x").get<double>();
  if (j.contains("right_x")) c.right_x = j.at("right_x").get<double>();
}

/// An axis is either an explicit list or {"from": a, "to": b, "n": k}.
inline std::vector<double> axis_from_json(const Json& j, const std::string& where) {
  if (j.is_array()) {
    std::vector<double> v;
    for (const auto& e : j) {
      if (!e.is_number()) throw Error(ErrorCode::InvalidArgument, where + ": axis values must be numbers");
      v.push_back(e.get<double>());
    }
    return v;
  }
  reject_unknown(j, {"from", "to", "n"}, where);
  if (!j.contains("from") || !j.contains("to") || !j.contains("n"))
    throw Error(ErrorCode::InvalidArgument, where + ": range axis needs from, to, n");
  return GridSpec::linspace(j.at("from").get<double>(), j.at("to").get<double>(), j.at("n").get<int>());
}

inline Json to_json(const GridSpec& g) {
  Json j = Json::object();
  auto put = [&j](const char* k, const std::vector<double>& v) {
    if (!v.empty()) j[k] = v;
  };
  put("alpha0", g.alpha0);
  put("alpha2", g.alpha2);
  put("beta", g.beta);
  put("gamma", g.gamma);
  return j;
}

inline void read_grid(const Json& j, GridSpec& g) {
  reject_unknown(j, {"alpha0", "alpha2", "beta", "gamma"}, "grid");
  if (j.contains("alpha0")) g.alpha0 = axis_from_json(j.at("alpha0"), "grid.alpha0");
  if (j.contains("alpha2")) g.alpha2 = axis_from_json(j.at("alpha2"), "grid.alpha2");
  if (j.contains("beta")) g.beta = axis_from_json(j.at("beta"), "grid.beta");
  if (j.contains("gamma")) g.gamma = axis_from_json(j.at("gamma"), "grid.gamma");
}

/// Worker count is deliberately not echoed: it never changes the output.
inline Json to_json(const CensusConfig& c) {
  Json j;
  j["seeds"] = c.seeds;
  j["r_min"] = c.r_min;
  j["big_cycle"] = c.big_cycle;
  return j;
}

inline void read_census(const Json& j, CensusConfig& c) {
  reject_unknown(j, {"seeds", "r_min", "big_cycle"}, "census");
  read(j, "seeds", c.seeds, "census");
  read(j, "r_min", c.r_min, "census");
  read(j, "big_cycle", c.big_cycle, "census");
}

inline Json scenario_options(const ScenarioConfig& c) {
  Json j;
  j["alpha2_min"] = c.alpha2_min;
  j["post_offset"] = c.post_offset;
  j["beta_span"] = c.beta_span;
  j["beta_fraction"] = c.beta_fraction;
  j["gamma_offset"] = c.gamma_offset;
  j["gamma_span"] = c.gamma_span;
  j["seeds"] = c.seeds;
  j["r_min"] = c.r_min;
  j["stages"] = c.stages.empty() ? scenario_stage_names() : c.stages;
  j["continue_on_failure"] = c.continue_on_failure;
  return j;
}

inline void read_scenario(const Json& j, ScenarioConfig& c) {
  reject_unknown(j,
                 {"alpha2_min", "post_offset", "beta_span", "beta_fraction", "gamma_offset", "gamma_span", "seeds",
                  "r_min", "stages", "continue_on_failure"},
                 "scenario");
  read(j, "alpha2_min", c.alpha2_min, "scenario");
  read(j, "post_offset", c.post_offset, "scenario");
  read(j, "beta_span", c.beta_span, "scenario");
  read(j, "beta_fraction", c.beta_fraction, "scenario");
  read(j, "gamma_offset", c.gamma_offset, "scenario");
  read(j, "gamma_span", c.gamma_span, "scenario");
  read(j, "seeds", c.seeds, "scenario");
  read(j, "r_min", c.r_min, "scenario");
  read(j, "stages", c.stages, "scenario");
  read(j, "continue_on_failure", c.continue_on_failure, "scenario");
}

inline Json to_json(const Window& w) { return Json::array({w.xmin, w.xmax, w.ymin, w.ymax}); }

inline Json to_json(const Window& w, const Seeding& s) {
  Json j;
  j["window"] = to_json(w);
  j["nx"] = s.nx;
  j["ny"] = s.ny;
  j["t_max"] = s.t_max;
  j["both_directions"] = s.both_directions;
  return j;
}

inline void read_portrait(const Json& j, Window& w, Seeding& s) {
  reject_unknown(j, {"window", "nx", "ny", "t_max", "both_directions"}, "portrait");
  if (j.contains("window")) {
    const auto v = j.at("window").get<std::vector<double>>();
    if (v.size() != 4) throw Error(ErrorCode::InvalidArgument, "portrait.window must be [xmin, xmax, ymin, ymax]");
    w = {v[0], v[1], v[2], v[3]};
  }
  read(j, "nx", s.nx, "portrait");
  read(j, "ny", s.ny, "portrait");
  read(j, "t_max", s.t_max, "portrait");
  read(j, "both_directions", s.both_directions, "portrait");
}

/// Everything a CLI run can be configured with. One JSON document, every
/// block optional; absent keys keep the defaults below.
struct RunConfig {
  CanonicalParams params;
  IntegratorConfig integrator;
  CycleConfig cycles;
  ContinuationConfig continuation;
  HomoclinicConfig homoclinic;
  GridSpec grid;
  CensusConfig census;
  ScenarioConfig scenario;
  Window window;
  Seeding seeding{12, 8, 30.0, true};

  /// Applies one tolerance pair to every integrator the run uses.
  void override_tolerances(std::optional<double> rtol, std::optional<double> atol) {
    for (IntegratorConfig* c : {&integrator, &cycles.integrator, &homoclinic.integrator}) {
      if (rtol) c->rtol = *rtol;
      if (atol) c->atol = *atol;
      c->validate();
    }
  }

  /// Propagates the shared blocks into the command-specific configurations.
  void sync() {
    continuation.cycle = cycles;
    census.cycle = cycles;
    grid.base = params;
    scenario.base = params;
    scenario.cycle = cycles;
    scenario.homoclinic = homoclinic;
    scenario.continuation = continuation;
  }
};

inline RunConfig run_config_from_json(const Json& j) {
  reject_unknown(j,
                 {"params", "integrator", "cycles", "continuation", "homoclinic", "grid", "census", "scenario",
                  "portrait"},
                 "config");
  RunConfig rc;
  if (j.contains("params")) rc.params = params_from_json(j.at("params"));
  if (j.contains("integrator")) read_integrator(j.at("integrator"), rc.integrator, "integrator");
  if (j.contains("cycles")) read_cycle(j.at("cycles"), rc.cycles, "cycles");
  if (j.contains("continuation")) read_continuation(j.at("continuation"), rc.continuation);
  if (j.contains("homoclinic")) read_homoclinic(j.at("homoclinic"), rc.homoclinic);
  if (j.contains("grid")) read_grid(j.at("grid"), rc.grid);
  if (j.contains("census")) read_census(j.at("census"), rc.census);
  if (j.contains("scenario")) read_scenario(j.at("scenario"), rc.scenario);
  if (j.contains("portrait")) read_portrait(j.at("portrait"), rc.window, rc.seeding);
  rc.sync();
  return rc;
}

/// Full effective configuration, echoed by every output.
inline Json to_json(const RunConfig& rc) {
  Json j;
  j["params"] = to_json(rc.params);
  j["integrator"] = to_json(rc.integrator);
  j["cycles"] = to_json(rc.cycles);
  j["continuation"] = to_json(rc.continuation);
  j["homoclinic"] = to_json(rc.homoclinic);
  j["grid"] = to_json(rc.grid);
  j["census"] = to_json(rc.census);
  j["scenario"] = scenario_options(rc.scenario);
  j["portrait"] = to_json(rc.window, rc.seeding);
  return j;
}

// ---------------------------------------------------------------------------
// Results

inline Json to_json(State s) { return Json::array({s.x, s.y}); }

inline Json to_json(const Singularity& s) {
  Json j;
  j["x"] = s.location.x;
  j["y"] = s.location.y;
  j["kind"] = to_string(s.kind);
  j["trace"] = s.trace;
  j["det"] = s.det;
  j["eigenvalues"] = Json::array({Json::array({s.eigenvalues.first.real(), s.eigenvalues.first.imag()}),
                                  Json::array({s.eigenvalues.second.real(), s.eigenvalues.second.imag()})});
  return j;
}

inline Json to_json(const CycleSummary& c) {
  Json j;
  j["r"] = c.r;
  j["period"] = c.period;
  j["multiplier"] = c.multiplier;
  j["stability"] = to_string(c.stability);
  Json enc = Json::array();
  for (State s : c.enclosed) enc.push_back(to_json(s));
  j["enclosed"] = enc;
  j["amplitude"] = c.amplitude;
  return j;
}

inline Json to_json(const LimitCycle& c) { return to_json(summarize(c)); }

inline Json to_json(const HopfReport& h) {
  Json j;
  j["singularity"] = to_json(h.singularity);
  j["free"] = to_string(h.free_param);
  j["critical_value"] = h.critical_value;
  j["trace_at_input"] = h.trace_at_input;
  j["trace_at_critical"] = h.trace_at_critical;
  j["frequency"] = h.frequency;
  j["curvature"] = h.curvature;
  j["side"] = to_string(h.side);
  j["birth_direction"] = h.birth_direction;
  return j;
}

inline Json to_json(const EightLoop& e) {
  Json j;
  j["alpha2_left"] = e.alpha2_left;
  j["alpha2_right"] = e.alpha2_right;
  j["gap_left"] = e.gap_left;
  j["gap_right"] = e.gap_right;
  j["difference"] = e.difference;
  j["simultaneous"] = e.simultaneous;
  return j;
}

inline Json branch_summary(const ContinuationBranch& b) {
  Json j;
  j["param"] = to_string(b.param_id);
  j["points"] = b.points.size();
  Json folds = Json::array();
  for (const auto& f : b.folds) {
    Json fj;
    fj["param"] = f.param;
    fj["r"] = f.r;
    fj["multiplier"] = f.multiplier;
    folds.push_back(fj);
  }
  j["folds"] = folds;
  j["end"] = to_string(b.end);
  j["end_detail"] = b.end_detail;
  return j;
}

inline Json to_json(const DistributionRecord& r) {
  Json j;
  j["index"] = r.index;
  j["params"] = to_json(r.params);
  j["n_O"] = r.n_O;
  j["n_A"] = r.n_A;
  j["n_big"] = r.n_big;
  j["distribution"] = distribution_label(r);
  auto list = [](const std::vector<CycleSummary>& cs) {
    Json a = Json::array();
    for (const auto& c : cs) a.push_back(to_json(c));
    return a;
  };
  j["cycles_O"] = list(r.cycles_O);
  j["cycles_A"] = list(r.cycles_A);
  j["cycles_big"] = list(r.cycles_big);
  j["anomalies"] = r.anomalies;
  return j;
}

inline Json to_json(const StageResult& s) {
  Json j;
  j["name"] = s.name;
  j["ok"] = s.ok;
  j["skipped"] = s.skipped;
  j["reason"] = s.reason;
  Json vals = Json::object();
  for (const auto& [k, v] : s.values) vals[k] = v;
  j["values"] = vals;
  Json inv = Json::object();
  for (const auto& [k, cs] : s.inventories) {
    Json a = Json::array();
    for (const auto& c : cs) a.push_back(to_json(c));
    inv[k] = a;
  }
  j["cycles"] = inv;
  return j;
}

inline Json to_json(const ScenarioReport& rep, const Json& config) {
  Json j;
  j["format_version"] = kFormatVersion;
  j["config"] = config;
  j["completed"] = rep.completed;
  Json st = Json::array();
  for (const auto& s : rep.stages) st.push_back(to_json(s));
  j["stages"] = st;
  if (!rep.completed) {
    Json f;
    f["stage"] = rep.failed_stage;
    f["reason"] = rep.failure_reason;
    j["failure"] = f;
  }
  return j;
}

/// Census as JSON lines: a header carrying the config echo, then one record per line.
inline void write_census(std::ostream& os, const std::vector<DistributionRecord>& recs, const Json& config) {
  Json head;
  head["format_version"] = kFormatVersion;
  head["config"] = config;
  head["records"] = recs.size();
  os << head.dump() << '\n';
  for (const auto& r : recs) os << to_json(r).dump() << '\n';
}

// ---------------------------------------------------------------------------
// CSV / JSON lines

inline void write_trajectory_csv(std::ostream& os, const Trajectory& t, bool header = true) {
  if (header) os << "t,x,y\n";
  for (const auto& s : t.samples) os << num(s.t) << ',' << num(s.s.x) << ',' << num(s.s.y) << '\n';
}

inline void write_trajectory_jsonl(std::ostream& os, const Trajectory& t) {
  for (const auto& s : t.samples) {
    Json j;
    j["t"] = s.t;
    j["x"] = s.s.x;
    j["y"] = s.s.y;
    os << j.dump() << '\n';
  }
  for (const auto& e : t.events) {
    Json j;
    j["t"] = e.t;
    j["x"] = e.s.x;
    j["y"] = e.s.y;
    j["event"] = e.kind;
    os << j.dump() << '\n';
  }
}

inline void write_branch_csv(std::ostream& os, const ContinuationBranch& b) {
  os << "param,r,period,multiplier,stability\n";
  for (const auto& p : b.points)
    os << num(p.param) << ',' << num(p.cycle.section_coord) << ',' << num(p.cycle.period) << ','
       << num(p.cycle.multiplier) << ',' << to_string(p.cycle.stability) << '\n';
}

inline void write_separatrix_csv(std::ostream& os, const SeparatrixSet& s) {
  os << "branch,t,x,y\n";
  for (int k = 0; k < 4; ++k)
    for (const auto& sm : s.branches[k].samples)
      os << s.names[k] << ',' << num(sm.t) << ',' << num(sm.s.x) << ',' << num(sm.s.y) << '\n';
}

inline void write_portrait_csv(std::ostream& os, const Portrait& p) {
  os << "curve,label,t,x,y\n";
  for (std::size_t i = 0; i < p.trajectories.size(); ++i)
    for (const auto& sm : p.trajectories[i].trajectory.samples)
      os << i << ',' << p.trajectories[i].label << ',' << num(sm.t) << ',' << num(sm.s.x) << ',' << num(sm.s.y)
         << '\n';
}

}  // namespace kukles::io
