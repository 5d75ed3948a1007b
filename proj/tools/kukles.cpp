// Command-line front end: singularities, portraits, cycles, Hopf values,
// continuation, separatrices, homoclinic loops, census and the scenario.

#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "kukles/bifurcation.hpp"
#include "kukles/cycles.hpp"
#include "kukles/io.hpp"
#include "kukles/model.hpp"
#include "kukles/scan.hpp"
#include "kukles/svg.hpp"

namespace {

using kukles::io::Json;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config_path;
  std::optional<int> q_case;
  std::optional<double> a, b, c, d, alpha0, alpha2, beta, gamma, rtol, atol;
  std::string format;
  std::string out;
};

void add_common(CLI::App* sub, Common& o, const std::string& default_format) {
  sub->add_option("--config", o.config_path, "JSON run configuration");
  sub->add_option("--q-case", o.q_case, "shape of q(x): 1, 2 or 3")->check(CLI::Range(1, 3));
  sub->add_option("--a", o.a, "case 1 root a");
  sub->add_option("--b", o.b, "case 2 coefficient b");
  sub->add_option("--c", o.c);
  sub->add_option("--d", o.d);
  sub->add_option("--alpha0", o.alpha0);
  sub->add_option("--alpha2", o.alpha2);
  sub->add_option("--beta", o.beta);
  sub->add_option("--gamma", o.gamma);
  sub->add_option("--rtol", o.rtol, "relative tolerance for every integration");
  sub->add_option("--atol", o.atol, "absolute tolerance for every integration");
  sub->add_option("--format", o.format, "output format (default: " + default_format + ")");
  sub->add_option("--out", o.out, "output file (default: standard output)");
}

kukles::io::RunConfig load(const Common& o) {
  kukles::io::RunConfig rc;
  if (!o.config_path.empty()) {
    std::ifstream in(o.config_path);
    if (!in) throw UsageError("--config: cannot open '" + o.config_path + "'");
    Json j;
    try {
      j = Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw UsageError("--config: " + std::string(e.what()));
    }
    rc = kukles::io::run_config_from_json(j);
  }
  auto& p = rc.params;
  if (o.q_case) {
    p.q.kind = static_cast<kukles::QCase>(*o.q_case);
  }
  if (o.a) p.q.a = *o.a;
  if (o.b) p.q.b = *o.b;
  if (o.c) p.c = *o.c;
  if (o.d) p.d = *o.d;
  if (o.alpha0) p.alpha0 = *o.alpha0;
  if (o.alpha2) p.alpha2 = *o.alpha2;
  if (o.beta) p.beta = *o.beta;
  if (o.gamma) p.gamma = *o.gamma;
  p.validate();
  rc.override_tolerances(o.rtol, o.atol);
  rc.sync();
  return rc;
}

/// The first allowed format is the subcommand's default.
void require_format(Common& o, std::initializer_list<const char*> allowed) {
  if (o.format.empty()) o.format = *allowed.begin();
  for (const char* f : allowed)
    if (o.format == f) return;
  std::string list;
  for (const char* f : allowed) list += (list.empty() ? "" : ", ") + std::string(f);
  throw UsageError("--format: '" + o.format + "' is not one of " + list);
}

void emit(const Common& o, const std::function<void(std::ostream&)>& body) {
  if (o.out.empty()) {
    body(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream f(o.out, std::ios::binary);
  if (!f) throw UsageError("--out: cannot write '" + o.out + "'");
  body(f);
}

Json envelope(const kukles::io::RunConfig& rc) {
  Json j;
  j["format_version"] = kukles::io::kFormatVersion;
  j["config"] = kukles::io::to_json(rc);
  return j;
}

kukles::Anchor anchor_of(const std::string& s) {
  if (s == "O") return kukles::Anchor::O;
  if (s == "A") return kukles::Anchor::A;
  throw UsageError("--focus: expected O or A, got '" + s + "'");
}

kukles::ParamId param_of(const std::string& s) {
  if (auto id = kukles::param_from_string(s)) return *id;
  throw UsageError("--free: unknown parameter '" + s + "'");
}

std::vector<kukles::LimitCycle> cycles_around(const kukles::CanonicalParams& p, kukles::Anchor which,
                                              const kukles::io::RunConfig& rc) {
  const auto sec = kukles::default_section(p, which);
  const kukles::State loc = sec.anchor;
  std::vector<kukles::LimitCycle> out;
  const bool single = kukles::finite_singularities(p).size() == 1;
  for (auto& c : kukles::scan_cycles(p, sec, rc.census.r_min, sec.reach * (1.0 - 1e-3), rc.census.seeds, rc.cycles).cycles)
    if (single || kukles::encloses_only(c, loc)) out.push_back(std::move(c));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical toolkit for the Kukles cubic system"};
  app.require_subcommand(1);

  Common o;
  std::string focus = "O", free_name = "beta";
  double r0 = 0.0, lo = 0.0, hi = 0.0;
  int direction = 1;
  bool with_cycles = false, keep_going = false;
  std::vector<double> window;
  int nx = -1, ny = -1;

  auto* s_sing = app.add_subcommand("singularities", "finite and infinite singular points");
  add_common(s_sing, o, "json");

  auto* s_port = app.add_subcommand("portrait", "phase portrait as SVG or CSV");
  add_common(s_port, o, "svg");
  s_port->add_option("--window", window, "xmin xmax ymin ymax")->expected(4);
  s_port->add_option("--nx", nx, "seed lattice columns");
  s_port->add_option("--ny", ny, "seed lattice rows");
  s_port->add_flag("--with-cycles", with_cycles, "draw limit cycles around O and A");

  auto* s_cyc = app.add_subcommand("cycles", "limit cycles around O, A and the big cycle");
  add_common(s_cyc, o, "json");

  auto* s_hopf = app.add_subcommand("hopf", "critical value where a focus turns weak");
  add_common(s_hopf, o, "text");
  s_hopf->add_option("--free", free_name, "free parameter")->required();
  s_hopf->add_option("--focus", focus, "O or A");

  auto* s_cont = app.add_subcommand("continue", "follow a cycle in one parameter");
  add_common(s_cont, o, "csv");
  s_cont->add_option("--free", free_name, "free parameter")->required();
  s_cont->add_option("--focus", focus, "O or A");
  s_cont->add_option("--r0", r0, "section coordinate of the starting cycle (default: outermost)");
  s_cont->add_option("--lo", lo, "lower parameter bound")->required();
  s_cont->add_option("--hi", hi, "upper parameter bound")->required();
  s_cont->add_option("--direction", direction, "+1 or -1")->check(CLI::IsMember({-1, 1}));

  auto* s_sep = app.add_subcommand("separatrix", "separatrices of the saddle");
  add_common(s_sep, o, "csv");

  auto* s_eight = app.add_subcommand("eightloop", "homoclinic alpha2 values of both loops");
  add_common(s_eight, o, "json");
  s_eight->add_option("--lo", lo, "lower alpha2 bound")->required();
  s_eight->add_option("--hi", hi, "upper alpha2 bound")->required();

  auto* s_census = app.add_subcommand("census", "cycle distribution over a parameter grid");
  add_common(s_census, o, "jsonl");

  auto* s_scen = app.add_subcommand("scenario", "scripted bifurcation sequence");
  add_common(s_scen, o, "json");
  s_scen->add_flag("--continue-on-failure", keep_going, "run later stages after a failure");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    kukles::io::RunConfig rc = load(o);
    const auto& p = rc.params;

    if (s_sing->parsed()) {
      require_format(o, {"json", "csv"});
      const auto fin = kukles::finite_singularities(p);
      const auto inf = kukles::infinite_singularities(p);
      emit(o, [&](std::ostream& os) {
        if (o.format == "csv") {
          os << "kind,x,y,trace,det\n";
          for (const auto& s : fin)
            os << kukles::to_string(s.kind) << ',' << kukles::io::num(s.location.x) << ','
               << kukles::io::num(s.location.y) << ',' << kukles::io::num(s.trace) << ','
               << kukles::io::num(s.det) << '\n';
          return;
        }
        Json j = envelope(rc);
        Json f = Json::array(), i = Json::array();
        for (const auto& s : fin) f.push_back(kukles::io::to_json(s));
        for (const auto& s : inf) {
          Json e;
          if (s.vertical) e["direction"] = "vertical";
          else e["slope"] = *s.slope;
          i.push_back(e);
        }
        j["finite"] = f;
        j["infinite"] = i;
        os << j.dump(2) << '\n';
      });
    } else if (s_port->parsed()) {
      require_format(o, {"svg", "csv"});
      if (!window.empty()) rc.window = {window[0], window[1], window[2], window[3]};
      if (nx >= 0) rc.seeding.nx = nx;
      if (ny >= 0) rc.seeding.ny = ny;
      const auto port = kukles::portrait(p, rc.window, rc.seeding, rc.integrator);
      std::vector<kukles::LimitCycle> cyc;
      if (with_cycles)
        for (auto which : {kukles::Anchor::O, kukles::Anchor::A})
          if (kukles::find_anchor(p, which))
            for (auto& c : cycles_around(p, which, rc)) cyc.push_back(std::move(c));
      emit(o, [&](std::ostream& os) {
        if (o.format == "csv") kukles::io::write_portrait_csv(os, port);
        else kukles::svg::write(os, port, cyc);
      });
    } else if (s_cyc->parsed()) {
      require_format(o, {"json", "csv"});
      const auto rec = kukles::census_point(p, rc.census);
      emit(o, [&](std::ostream& os) {
        if (o.format == "csv") {
          os << "anchor,r,period,multiplier,stability,amplitude\n";
          auto rows = [&os](const char* tag, const std::vector<kukles::CycleSummary>& cs) {
            for (const auto& c : cs)
              os << tag << ',' << kukles::io::num(c.r) << ',' << kukles::io::num(c.period) << ','
                 << kukles::io::num(c.multiplier) << ',' << kukles::to_string(c.stability) << ','
                 << kukles::io::num(c.amplitude) << '\n';
          };
          rows("O", rec.cycles_O);
          rows("A", rec.cycles_A);
          rows("big", rec.cycles_big);
          return;
        }
        Json j = envelope(rc);
        const Json r = kukles::io::to_json(rec);
        for (const char* k : {"distribution", "n_O", "n_A", "n_big", "cycles_O", "cycles_A", "cycles_big", "anomalies"})
          j[k] = r[k];
        os << j.dump(2) << '\n';
      });
    } else if (s_hopf->parsed()) {
      require_format(o, {"text", "json"});
      const auto h = kukles::hopf_value(p, anchor_of(focus), param_of(free_name), 0.03, rc.cycles);
      emit(o, [&](std::ostream& os) {
        if (o.format == "text") {
          os << free_name << " = " << kukles::io::num(h.critical_value) << '\n';
          return;
        }
        Json j = envelope(rc);
        j["hopf"] = kukles::io::to_json(h);
        os << j.dump(2) << '\n';
      });
    } else if (s_cont->parsed()) {
      require_format(o, {"csv", "json"});
      const auto which = anchor_of(focus);
      const auto id = param_of(free_name);
      const auto sec = kukles::default_section(p, which);
      if (r0 <= 0.0) {
        const auto cs = cycles_around(p, which, rc);
        if (cs.empty()) throw kukles::Error(kukles::ErrorCode::NoBracket, "no cycle around " + focus + " to continue");
        r0 = cs.back().section_coord;
      }
      const auto br = kukles::continue_cycle(p, sec, r0, id, lo, hi, direction, rc.continuation);
      emit(o, [&](std::ostream& os) {
        if (o.format == "csv") {
          kukles::io::write_branch_csv(os, br);
          return;
        }
        Json j = envelope(rc);
        j["branch"] = kukles::io::branch_summary(br);
        Json pts = Json::array();
        for (const auto& pt : br.points) {
          Json e = kukles::io::to_json(pt.cycle);
          e["param"] = pt.param;
          pts.push_back(e);
        }
        j["points"] = pts;
        os << j.dump(2) << '\n';
      });
    } else if (s_sep->parsed()) {
      require_format(o, {"csv", "json"});
      const auto sad = kukles::find_saddle(p);
      auto ic = rc.integrator;
      ic.record = true;
      const auto set = kukles::separatrices(p, sad, rc.homoclinic.eps, ic);
      emit(o, [&](std::ostream& os) {
        if (o.format == "csv") {
          kukles::io::write_separatrix_csv(os, set);
          return;
        }
        Json j = envelope(rc);
        j["saddle"] = kukles::io::to_json(sad);
        Json br = Json::array();
        for (int k = 0; k < 4; ++k) {
          Json e;
          e["branch"] = set.names[k];
          e["status"] = kukles::to_string(set.branches[k].status);
          e["end"] = kukles::io::to_json(set.branches[k].end);
          e["samples"] = set.branches[k].samples.size();
          br.push_back(e);
        }
        j["branches"] = br;
        os << j.dump(2) << '\n';
      });
    } else if (s_eight->parsed()) {
      require_format(o, {"json"});
      const auto el = kukles::eight_loop_find(p, lo, hi, rc.homoclinic);
      emit(o, [&](std::ostream& os) {
        Json j = envelope(rc);
        j["eight_loop"] = kukles::io::to_json(el);
        os << j.dump(2) << '\n';
      });
    } else if (s_census->parsed()) {
      require_format(o, {"jsonl"});
      const auto recs = kukles::census(rc.grid, rc.census);
      emit(o, [&](std::ostream& os) { kukles::io::write_census(os, recs, kukles::io::to_json(rc)); });
    } else if (s_scen->parsed()) {
      require_format(o, {"json"});
      if (keep_going) rc.scenario.continue_on_failure = true;
      const auto rep = kukles::run_scenario(rc.scenario);
      emit(o, [&](std::ostream& os) { os << kukles::io::to_json(rep, kukles::io::to_json(rc)).dump(2) << '\n'; });
      if (!rep.completed) {
        std::cerr << "scenario stopped at stage '" << rep.failed_stage << "': " << rep.failure_reason << '\n';
        return 1;
      }
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const kukles::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == kukles::ErrorCode::InvalidArgument ? 2 : 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
