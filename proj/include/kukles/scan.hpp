#pragma once

// Parameter-grid census of cycle distributions, the scripted bifurcation
// scenario around the saddle S(1,0), and phase-portrait generation.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "kukles/bifurcation.hpp"
#include "kukles/cycles.hpp"
#include "kukles/error.hpp"
#include "kukles/integrate.hpp"
#include "kukles/model.hpp"

namespace kukles {

/// Worker count: KUKLES_THREADS if set and positive, otherwise the hardware concurrency.
inline int default_threads() {
  if (const char* env = std::getenv("KUKLES_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// ---------------------------------------------------------------------------
// Census

struct CensusConfig {
  CycleConfig cycle;
  double r_min = 2e-3;  // innermost seed on the anti-saddle rays
  int seeds = 120;      // seeds per anti-saddle ray
  bool big_cycle = true;
  int threads = 0;  // 0: default_threads()
};

struct CycleSummary {
  double r = 0.0;
  double period = 0.0;
  double multiplier = 1.0;
  Stability stability = Stability::SemiStableCandidate;
  double amplitude = 0.0;
  std::vector<State> enclosed;
};

inline CycleSummary summarize(const LimitCycle& c) {
  return {c.section_coord, c.period, c.multiplier, c.stability, c.amplitude, c.enclosed};
}

struct DistributionRecord {
  std::size_t index = 0;
  CanonicalParams params;
  int n_O = 0;
  int n_A = 0;
  int n_big = 0;
  std::vector<CycleSummary> cycles_O, cycles_A, cycles_big;
  std::vector<std::string> anomalies;
};

inline std::string distribution_label(const DistributionRecord& r) {
  return "(" + std::to_string(r.n_O) + ":" + std::to_string(r.n_A) + ")" +
         (r.n_big > 0 ? "+" + std::to_string(r.n_big) : std::string());
}

/// Row-major grid over the rotation parameters: alpha0 varies slowest, gamma fastest.
struct GridSpec {
  CanonicalParams base;
  std::vector<double> alpha0, alpha2, beta, gamma;  // empty axis: base value

  static std::vector<double> linspace(double from, double to, int n) {
    if (n < 1) throw Error(ErrorCode::InvalidArgument, "grid axis needs n >= 1");
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) v[i] = n == 1 ? from : from + (to - from) * i / (n - 1);
    return v;
  }

  std::size_t size() const {
    auto n = [](const std::vector<double>& v) { return std::max<std::size_t>(1, v.size()); };
    return n(alpha0) * n(alpha2) * n(beta) * n(gamma);
  }

  CanonicalParams at(std::size_t index) const {
    CanonicalParams p = base;
    auto take = [&index](const std::vector<double>& axis, double& dst) {
      const std::size_t n = std::max<std::size_t>(1, axis.size());
      const std::size_t k = index % n;
      index /= n;
      if (!axis.empty()) dst = axis[k];
    };
    take(gamma, p.gamma);
    take(beta, p.beta);
    take(alpha2, p.alpha2);
    take(alpha0, p.alpha0);
    return p;
  }
};

inline bool encloses_only(const LimitCycle& c, State s) {
  return c.enclosed.size() == 1 && norm(c.enclosed.front() - s) < 1e-9;
}

inline DistributionRecord census_point(const CanonicalParams& p, const CensusConfig& cc, std::size_t index = 0) {
  DistributionRecord rec;
  rec.index = index;
  rec.params = p;
  CycleConfig cfg = cc.cycle;
  cfg.threads = 1;
  auto note = [&rec](const std::string& where, const std::vector<std::string>& items) {
    for (const auto& a : items) rec.anomalies.push_back(where + ": " + a);
  };
  const auto sing = finite_singularities(p);
  for (Anchor which : {Anchor::O, Anchor::A}) {
    const auto loc = find_anchor(p, which);
    if (!loc) continue;
    const std::string tag = which == Anchor::O ? "O" : "A";
    try {
      const Section sec = default_section(p, which);
      // A ray bounded by no other singularity spans decades: seed it geometrically.
      const auto scan = scan_cycles(p, sec, cc.r_min, sec.reach * (1.0 - 1e-3), cc.seeds, cfg, sing.size() == 1);
      note(tag, scan.anomalies);
      for (const auto& c : scan.cycles) {
        // With a single finite singularity every cycle around O is counted there.
        if (!encloses_only(c, *loc) && sing.size() > 1) continue;
        (which == Anchor::O ? rec.cycles_O : rec.cycles_A).push_back(summarize(c));
      }
    } catch (const Error& e) {
      rec.anomalies.push_back(tag + ": " + e.what());
    }
  }
  if (cc.big_cycle && sing.size() > 1) {
    try {
      std::vector<std::string> notes;
      for (const auto& c : big_cycles(p, cfg, &notes)) rec.cycles_big.push_back(summarize(c));
      note("big", notes);
    } catch (const Error& e) {
      rec.anomalies.push_back(std::string("big: ") + e.what());
    }
  }
  rec.n_O = static_cast<int>(rec.cycles_O.size());
  rec.n_A = static_cast<int>(rec.cycles_A.size());
  rec.n_big = static_cast<int>(rec.cycles_big.size());
  return rec;
}

/// Evaluates every grid point; results are ordered by grid index regardless of threading.
inline std::vector<DistributionRecord> census(const GridSpec& grid, const CensusConfig& cc = {}) {
  grid.base.validate();
  const std::size_t n = grid.size();
  std::vector<DistributionRecord> out(n);
  const int threads = cc.threads > 0 ? cc.threads : default_threads();
  detail::parallel_for(static_cast<int>(n), threads,
                       [&](int i) { out[i] = census_point(grid.at(static_cast<std::size_t>(i)), cc, i); });
  return out;
}

// ---------------------------------------------------------------------------
// Scenario

inline const std::vector<std::string>& scenario_stage_names() {
  static const std::vector<std::string> names{"centers",      "alpha0-foci", "beta-AH",
                                              "big-cycle",    "eight-loop",  "post-eight-loop",
                                              "beta-fold",    "gamma-hopf",  "gamma-fold"};
  return names;
}

struct ScenarioConfig {
  CanonicalParams base = [] {
    CanonicalParams p;
    p.alpha0 = 0.05;
    return p;
  }();
  CycleConfig cycle;
  HomoclinicConfig homoclinic;
  ContinuationConfig continuation;
  double alpha2_min = -0.2;        // lower end of the alpha2 search
  double post_offset = 1e-3;       // alpha2 step past the homoclinic values
  double beta_span = 0.05;         // continuation range above beta^AH
  double beta_fraction = 0.5;      // beta for the gamma stage, between beta^AH and the fold
  double gamma_offset = 1e-6;      // gamma step past the gamma-Hopf value
  double gamma_span = 0.05;        // continuation range above the gamma-Hopf value
  int seeds = 200;
  double r_min = 1e-3;
  std::vector<std::string> stages;  // empty: all, in order
  bool continue_on_failure = false;
};

struct StageResult {
  std::string name;
  bool ok = false;
  bool skipped = false;
  std::string reason;
  std::vector<std::pair<std::string, double>> values;
  std::vector<std::pair<std::string, std::vector<CycleSummary>>> inventories;

  std::optional<double> value(const std::string& key) const {
    for (const auto& [k, v] : values)
      if (k == key) return v;
    return std::nullopt;
  }
};

struct ScenarioReport {
  ScenarioConfig config;
  std::vector<StageResult> stages;
  bool completed = false;
  std::string failed_stage;
  std::string failure_reason;

  const StageResult* stage(const std::string& name) const {
    for (const auto& s : stages)
      if (s.name == name) return &s;
    return nullptr;
  }
};

namespace detail {

struct ScenarioState {
  std::optional<double> beta_ah, alpha2_onset, alpha2_left, alpha2_right, alpha2_post, gamma1_r, beta_fold,
      beta_mid, gamma_c, gamma3_r;
};

inline std::vector<LimitCycle> cycles_around(const CanonicalParams& p, Anchor which, const ScenarioConfig& cfg) {
  const Section sec = default_section(p, which);
  const State loc = sec.anchor;
  std::vector<LimitCycle> out;
  for (auto& c : scan_cycles(p, sec, cfg.r_min, sec.reach * (1.0 - 1e-3), cfg.seeds, cfg.cycle).cycles)
    if (encloses_only(c, loc)) out.push_back(std::move(c));
  return out;
}

inline std::vector<CycleSummary> summaries(const std::vector<LimitCycle>& cs) {
  std::vector<CycleSummary> out;
  for (const auto& c : cs) out.push_back(summarize(c));
  return out;
}

inline double small_displacement(const CanonicalParams& p, Anchor which, double r, const CycleConfig& cfg) {
  return return_map(p, default_section(p, which), r, cfg).r - r;
}

inline std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace detail

/// Runs the stages of the scripted scenario in order. A failed stage stops
/// the run unless continue_on_failure is set, in which case later stages run
/// when their inputs exist and are marked skipped otherwise.
inline ScenarioReport run_scenario(const ScenarioConfig& cfg) {
  const auto& all = scenario_stage_names();
  std::vector<std::string> wanted = cfg.stages.empty() ? all : cfg.stages;
  // Each stage needs every earlier stage.
  for (std::size_t i = 0; i < wanted.size(); ++i) {
    const auto it = std::find(all.begin(), all.end(), wanted[i]);
    if (it == all.end()) throw Error(ErrorCode::InvalidArgument, "unknown scenario stage '" + wanted[i] + "'");
    const auto k = static_cast<std::size_t>(it - all.begin());
    if (k != i || wanted[i] != all[i])
      throw Error(ErrorCode::StageFailed, wanted[i] + ": requires stage '" + all[std::min(i, k)] + "' to run first");
  }
  const CanonicalParams& b = cfg.base;
  b.validate();
  if (b.q.kind != QCase::One || b.q.a != 2.0)
    throw Error(ErrorCode::InvalidArgument, "the scenario is defined for case 1 with a = 2");

  ScenarioReport rep;
  rep.config = cfg;
  detail::ScenarioState st;
  const CycleConfig& cc = cfg.cycle;

  CanonicalParams centers = b;
  centers.alpha0 = centers.alpha2 = centers.beta = centers.gamma = 0.0;

  for (const auto& name : wanted) {
    StageResult s;
    s.name = name;
    auto val = [&s](const std::string& k, double v) { s.values.emplace_back(k, v); };
    auto fail = [&s](std::string why) {
      s.ok = false;
      s.reason = std::move(why);
    };
    auto need = [&s](bool have, const char* what) {
      if (!have) {
        s.skipped = true;
        s.reason = std::string("missing input: ") + what;
      }
      return have;
    };
    s.ok = true;
    try {
      if (name == "centers") {
        const auto sing = finite_singularities(centers);
        bool shape = sing.size() == 3 && sing[0].kind == SingularityKind::Center &&
                     sing[1].kind == SingularityKind::Saddle && sing[2].kind == SingularityKind::Center;
        const double dO = detail::small_displacement(centers, Anchor::O, 0.1, cc);
        const double dA = detail::small_displacement(centers, Anchor::A, 0.1, cc);
        val("displacement_O", dO);
        val("displacement_A", dA);
        val("reversible", is_reversible(centers) ? 1.0 : 0.0);
        if (!shape) fail("expected center, saddle, center on the x-axis");
        else if (!is_reversible(centers)) fail("base system is not reversible");
        else if (std::abs(dO) > 1e-8 || std::abs(dA) > 1e-8) fail("return map is not the identity near the centers");
      } else if (name == "alpha0-foci") {
        CanonicalParams p = centers;
        p.alpha0 = b.alpha0;
        const double tO = p.linear_damping(0.0), tA = p.linear_damping(2.0);
        const double dO = detail::small_displacement(p, Anchor::O, 0.05, cc);
        const double dA = detail::small_displacement(p, Anchor::A, 0.05, cc);
        val("alpha0", p.alpha0);
        val("trace_O", tO);
        val("trace_A", tA);
        val("displacement_O", dO);
        val("displacement_A", dA);
        if (!(b.alpha0 > 0.0)) fail("alpha0 must be positive");
        else if (!(tO > 0.0 && tA > 0.0 && dO > 0.0 && dA > 0.0)) fail("foci are not both unstable");
      } else if (name == "beta-AH") {
        CanonicalParams p = centers;
        p.alpha0 = b.alpha0;
        const HopfReport h = hopf_value(p, Anchor::O, ParamId::Beta, 0.03, cc);
        st.beta_ah = h.critical_value;
        const double dm = detail::small_displacement(p.with(ParamId::Beta, h.critical_value - 1e-3), Anchor::O, 0.02, cc);
        const double dp = detail::small_displacement(p.with(ParamId::Beta, h.critical_value + 1e-3), Anchor::O, 0.02, cc);
        val("beta_AH", h.critical_value);
        val("beta_AH_minus_alpha0", h.critical_value - p.alpha0);
        val("trace_O_at_beta_AH", h.trace_at_critical);
        val("trace_A_at_beta_AH", p.with(ParamId::Beta, h.critical_value).linear_damping(2.0));
        val("displacement_below", dm);
        val("displacement_above", dp);
        val("curvature", h.curvature);
        if (std::abs(h.critical_value - p.alpha0) > 1e-12) fail("beta^AH differs from alpha0");
        else if (!(dm > 0.0 && dp < 0.0)) fail("focus O does not change stability across beta^AH");
      } else if (name == "big-cycle") {
        if (need(st.beta_ah.has_value(), "beta^AH")) {
          CanonicalParams p = centers;
          p.alpha0 = b.alpha0;
          p.beta = *st.beta_ah;
          const Section outer = outer_section(p, cc);
          const double r_edge = outer.reach * 0.999;
          const bool none_at_zero = !detect_big_cycle(p, cc).has_value();
          // Walk alpha2 down geometrically until the window holds a big cycle.
          std::optional<double> found;
          double prev = 0.0;
          for (double a2 = -1e-6; a2 >= cfg.alpha2_min; a2 *= 2.0) {
            if (detect_big_cycle(p.with(ParamId::Alpha2, a2), cc)) {
              found = a2;
              break;
            }
            prev = a2;
          }
          val("big_cycle_at_alpha2_0", none_at_zero ? 0.0 : 1.0);
          if (!found) {
            fail("no big cycle for alpha2 in [" + detail::fmt(cfg.alpha2_min) + ", 0)");
          } else {
            // Onset: the alpha2 where the big cycle enters the search window,
            // i.e. the displacement at the window edge changes sign.
            auto disp = [&](double a2) {
              try {
                return return_map(p.with(ParamId::Alpha2, a2), outer, r_edge, cc).r - r_edge;
              } catch (const Error&) {
                return 1.0;  // the orbit leaves the window: outward
              }
            };
            double lo = *found, hi = prev;
            for (int it = 0; it < 200 && hi - lo > 1e-15 + 1e-13 * std::abs(lo); ++it) {
              const double mid = 0.5 * (lo + hi);
              (disp(mid) < 0.0 ? lo : hi) = mid;
            }
            st.alpha2_onset = lo;
            val("alpha2_onset", lo);
            const auto cyc = detect_big_cycle(p.with(ParamId::Alpha2, 2.0 * lo), cc);
            if (cyc) {
              s.inventories.push_back({"big cycle at 2x onset", {summarize(*cyc)}});
              val("big_cycle_amplitude", cyc->amplitude);
              val("big_cycle_multiplier", cyc->multiplier);
            }
            if (!none_at_zero) fail("a big cycle is already present at alpha2 = 0");
            else if (!(lo < 0.0)) fail("onset is not below zero");
            else if (!cyc || cyc->stability != Stability::Stable || cyc->enclosed.size() != 3)
              fail("big cycle past the onset is not a stable cycle around O, S, A");
          }
        }
      } else if (name == "eight-loop") {
        if (need(st.alpha2_onset.has_value(), "big-cycle onset")) {
          CanonicalParams p = centers;
          p.alpha0 = b.alpha0;
          p.beta = *st.beta_ah;
          const EightLoop el = eight_loop_find(p, cfg.alpha2_min, *st.alpha2_onset, cfg.homoclinic);
          st.alpha2_left = el.alpha2_left;
          st.alpha2_right = el.alpha2_right;
          val("alpha2_left", el.alpha2_left);
          val("alpha2_right", el.alpha2_right);
          val("gap_left", el.gap_left);
          val("gap_right", el.gap_right);
          val("difference", el.difference);
          val("simultaneous", el.simultaneous ? 1.0 : 0.0);
          const double a2_near = std::max(el.alpha2_left, el.alpha2_right) + cfg.post_offset;
          if (const auto cyc = detect_big_cycle(p.with(ParamId::Alpha2, a2_near), cc)) {
            s.inventories.push_back({"big cycle just before the loops", {summarize(*cyc)}});
            val("big_cycle_amplitude_before_loops", cyc->amplitude);
          }
          if (std::abs(el.gap_left) >= 1e-8 || std::abs(el.gap_right) >= 1e-8)
            fail("homoclinic gap residual above 1e-8");
        }
      } else if (name == "post-eight-loop") {
        if (need(st.alpha2_left && st.alpha2_right, "homoclinic values")) {
          CanonicalParams p = centers;
          p.alpha0 = b.alpha0;
          p.beta = *st.beta_ah;
          const double a2 = std::min(*st.alpha2_left, *st.alpha2_right) - cfg.post_offset;
          const CanonicalParams q = p.with(ParamId::Alpha2, a2);
          const auto cO = detail::cycles_around(q, Anchor::O, cfg);
          const auto cA = detail::cycles_around(q, Anchor::A, cfg);
          val("alpha2", a2);
          val("trace_O", q.linear_damping(0.0));
          val("trace_A", q.linear_damping(2.0));
          s.inventories.push_back({"O", detail::summaries(cO)});
          s.inventories.push_back({"A", detail::summaries(cA)});
          // Each loop seen on its own, just past its homoclinic value.
          const double a2L = *st.alpha2_left - cfg.post_offset, a2R = *st.alpha2_right - cfg.post_offset;
          s.inventories.push_back({"O past the left loop", detail::summaries(detail::cycles_around(p.with(ParamId::Alpha2, a2L), Anchor::O, cfg))});
          s.inventories.push_back({"A past the right loop", detail::summaries(detail::cycles_around(p.with(ParamId::Alpha2, a2R), Anchor::A, cfg))});
          auto stable_outer = [](const std::vector<LimitCycle>& cs) {
            return !cs.empty() && cs.back().stability == Stability::Stable;
          };
          if (stable_outer(cO)) {
            st.alpha2_post = a2;
            st.gamma1_r = cO.back().section_coord;
            val("gamma1_O_r", cO.back().section_coord);
            val("gamma1_O_multiplier", cO.back().multiplier);
          }
          if (!cA.empty()) {
            val("gamma1_A_r", cA.back().section_coord);
            val("gamma1_A_multiplier", cA.back().multiplier);
          }
          if (!stable_outer(cO) || !stable_outer(cA)) {
            std::string why = "expected stable cycles around O and A at alpha2 = " + detail::fmt(a2) + "; found ";
            why += std::to_string(cO.size()) + " around O (outermost " +
                   (cO.empty() ? std::string("none") : std::string(to_string(cO.back().stability))) + "), ";
            why += std::to_string(cA.size()) + " around A (outermost " +
                   (cA.empty() ? std::string("none") : std::string(to_string(cA.back().stability))) + ")";
            fail(why);
          }
        }
      } else if (name == "beta-fold") {
        if (need(st.alpha2_post && st.gamma1_r, "stable cycle around O past the eight-loop")) {
          CanonicalParams p = centers;
          p.alpha0 = b.alpha0;
          p.beta = *st.beta_ah;
          p.alpha2 = *st.alpha2_post;
          const Section sec = default_section(p, Anchor::O);
          ContinuationConfig ccfg = cfg.continuation;
          ccfg.cycle = cc;
          const auto br = continue_cycle(p, sec, *st.gamma1_r, ParamId::Beta, *st.beta_ah - 1e-12,
                                         *st.beta_ah + cfg.beta_span, +1, ccfg);
          val("branch_points", static_cast<double>(br.points.size()));
          if (br.folds.empty()) {
            fail("no fold on the beta branch (ended: " + std::string(to_string(br.end)) + ")");
          } else {
            const Fold& f = br.folds.front();
            st.beta_fold = f.param;
            val("beta_fold", f.param);
            val("r_fold", f.r);
            val("multiplier_fold", f.multiplier);
            // Multipliers on either side of the fold along the branch.
            double before = 0.0, after = 0.0;
            bool passed = false;
            for (const auto& pt : br.points) {
              if (!passed && pt.cycle.section_coord < f.r) passed = true;
              (passed ? after : before) = pt.cycle.multiplier;
              if (passed) break;
            }
            val("multiplier_before_fold", before);
            val("multiplier_after_fold", after);
            const double bm = 0.5 * (*st.beta_ah + f.param);
            const auto two = detail::cycles_around(p.with(ParamId::Beta, bm), Anchor::O, cfg);
            s.inventories.push_back({"O between beta^AH and the fold", detail::summaries(two)});
            if (std::abs(f.multiplier - 1.0) > 1e-4) fail("fold multiplier differs from 1 by more than 1e-4");
            else if (!(before < 1.0 && after > 1.0)) fail("multiplier does not cross 1 at the fold");
          }
        }
      } else if (name == "gamma-hopf") {
        if (need(st.beta_fold.has_value(), "beta fold")) {
          CanonicalParams p = centers;
          p.alpha0 = b.alpha0;
          p.alpha2 = *st.alpha2_post;
          p.beta = *st.beta_ah + cfg.beta_fraction * (*st.beta_fold - *st.beta_ah);
          st.beta_mid = p.beta;
          const auto before = detail::cycles_around(p, Anchor::O, cfg);
          const HopfReport h = hopf_value(p, Anchor::O, ParamId::Gamma, 0.03, cc);
          st.gamma_c = h.critical_value;
          const double g_after = h.critical_value + cfg.gamma_offset;
          const auto after = detail::cycles_around(p.with(ParamId::Gamma, g_after), Anchor::O, cfg);
          val("beta", p.beta);
          val("gamma_c", h.critical_value);
          val("gamma_c_minus_beta_plus_alpha0", h.critical_value - (p.beta - p.alpha0));
          val("curvature", h.curvature);
          val("supercritical_like", h.side == HopfSide::SupercriticalLike ? 1.0 : 0.0);
          val("cycles_before", static_cast<double>(before.size()));
          val("cycles_after", static_cast<double>(after.size()));
          s.inventories.push_back({"O at gamma = 0", detail::summaries(before)});
          s.inventories.push_back({"O past the gamma-Hopf", detail::summaries(after)});
          if (std::abs(h.critical_value - (p.beta - p.alpha0)) > 1e-12) {
            fail("critical gamma differs from beta - alpha0");
          } else if (after.size() < 3 || after.front().stability != Stability::Stable) {
            fail("no third (stable, innermost) cycle around O past gamma = beta - alpha0; found " +
                 std::to_string(after.size()) + " cycle(s), Hopf is " + std::string(to_string(h.side)));
          } else {
            st.gamma3_r = after.front().section_coord;
          }
        }
      } else if (name == "gamma-fold") {
        if (need(st.gamma3_r.has_value(), "third cycle around O")) {
          CanonicalParams p = centers;
          p.alpha0 = b.alpha0;
          p.alpha2 = *st.alpha2_post;
          p.beta = *st.beta_mid;
          p.gamma = *st.gamma_c + cfg.gamma_offset;
          const Section sec = default_section(p, Anchor::O);
          ContinuationConfig ccfg = cfg.continuation;
          ccfg.cycle = cc;
          const auto br = continue_cycle(p, sec, *st.gamma3_r, ParamId::Gamma, *st.gamma_c,
                                         *st.gamma_c + cfg.gamma_span, +1, ccfg);
          if (br.folds.empty()) {
            fail("no fold on the gamma branch (ended: " + std::string(to_string(br.end)) + ")");
          } else {
            val("gamma_fold", br.folds.front().param);
            val("r_fold", br.folds.front().r);
            val("multiplier_fold", br.folds.front().multiplier);
            if (std::abs(br.folds.front().multiplier - 1.0) > 1e-4) fail("fold multiplier differs from 1");
          }
        }
      }
    } catch (const Error& e) {
      fail(e.what());
    }
    if (s.skipped) s.ok = false;
    const bool stop = !s.ok && !cfg.continue_on_failure;
    if (!s.ok && rep.failed_stage.empty()) {
      rep.failed_stage = s.name;
      rep.failure_reason = s.reason;
    }
    rep.stages.push_back(std::move(s));
    if (stop) break;
  }
  rep.completed = rep.failed_stage.empty() && rep.stages.size() == wanted.size();
  return rep;
}

/// Throws StageFailed for the first failed stage of a report.
inline void require_completed(const ScenarioReport& rep) {
  if (!rep.completed) throw Error(ErrorCode::StageFailed, rep.failed_stage + ": " + rep.failure_reason);
}

// ---------------------------------------------------------------------------
// Guided search for a (3:1) configuration (reported, never asserted)

struct WitnessSearchConfig {
  ScenarioConfig scenario;
  std::vector<double> alpha2;           // default: across the Gamma_1^O window
  std::vector<double> beta_offsets;     // beta - alpha0
  std::vector<double> gamma_fractions;  // gamma = fraction * (beta - alpha0)
};

struct WitnessSearchResult {
  DistributionRecord best;
  std::size_t evaluated = 0;
};

inline WitnessSearchResult witness_search(const WitnessSearchConfig& wc, const CensusConfig& cc = {}) {
  const CanonicalParams& b = wc.scenario.base;
  GridSpec g;
  g.base = b;
  g.alpha2 = wc.alpha2.empty() ? GridSpec::linspace(-0.0745, -0.063, 6) : wc.alpha2;
  const auto offs = wc.beta_offsets.empty() ? std::vector<double>{1e-6, 5e-6, 2e-5} : wc.beta_offsets;
  const auto fracs = wc.gamma_fractions.empty() ? std::vector<double>{0.9, 1.0, 1.05, 1.2} : wc.gamma_fractions;
  WitnessSearchResult res;
  auto score = [](const DistributionRecord& r) { return 10 * std::min(r.n_A, 1) + r.n_O + r.n_A; };
  for (std::size_t i = 0; i < g.alpha2.size(); ++i) {
    for (double off : offs) {
      for (double fr : fracs) {
        CanonicalParams p = b;
        p.alpha2 = g.alpha2[i];
        p.beta = b.alpha0 + off;
        p.gamma = fr * off;
        const auto rec = census_point(p, cc, res.evaluated);
        if (res.evaluated == 0 || score(rec) > score(res.best)) res.best = rec;
        ++res.evaluated;
      }
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// Phase portrait

struct Window {
  double xmin = -1.0, xmax = 3.0, ymin = -2.0, ymax = 2.0;
  bool contains(State s) const { return s.x >= xmin && s.x <= xmax && s.y >= ymin && s.y <= ymax; }
};

struct Seeding {
  int nx = 0;  // lattice size; 0 x 0 means separatrices only
  int ny = 0;
  double t_max = 50.0;
  bool both_directions = true;
};

struct PortraitTrajectory {
  std::string label;  // "seed", or a separatrix branch name
  Trajectory trajectory;
};

struct Portrait {
  Window window;
  std::vector<Singularity> singularities;
  std::vector<PortraitTrajectory> trajectories;
};

inline Portrait portrait(const CanonicalParams& p, const Window& w, const Seeding& seeding, IntegratorConfig cfg = {}) {
  if (!(w.xmin < w.xmax && w.ymin < w.ymax)) throw Error(ErrorCode::InvalidArgument, "window must be a bounded rectangle");
  Portrait out;
  out.window = w;
  out.singularities = finite_singularities(p);
  cfg.t_max = seeding.t_max;
  cfg.record = true;
  Event leave;
  leave.name = "window-exit";
  leave.fn = [w](double, State s) {
    return std::min({s.x - w.xmin, w.xmax - s.x, s.y - w.ymin, w.ymax - s.y});
  };
  leave.direction = -1;
  leave.terminal = true;
  const std::span<const Event> evs(&leave, 1);
  for (int i = 0; i < seeding.nx; ++i) {
    for (int j = 0; j < seeding.ny; ++j) {
      const State s0{w.xmin + (w.xmax - w.xmin) * (i + 0.5) / seeding.nx,
                     w.ymin + (w.ymax - w.ymin) * (j + 0.5) / seeding.ny};
      for (bool back : {false, true}) {
        if (back && !seeding.both_directions) continue;
        IntegratorConfig c = cfg;
        c.backward = back;
        out.trajectories.push_back({back ? "seed-backward" : "seed", integrate(p, s0, c, evs)});
      }
    }
  }
  for (const auto& s : out.singularities) {
    if (s.kind != SingularityKind::Saddle) continue;
    IntegratorConfig c = cfg;
    const SeparatrixSet set = separatrices(p, s, 1e-7, c);
    for (int k = 0; k < 4; ++k) {
      // Truncate at the window edge.
      Trajectory t = set.branches[k];
      auto it = std::find_if(t.samples.begin(), t.samples.end(), [&w](const Sample& sm) { return !w.contains(sm.s); });
      if (it != t.samples.end()) t.samples.erase(it + 1, t.samples.end());
      out.trajectories.push_back({set.names[k], std::move(t)});
    }
  }
  return out;
}

}  // namespace kukles
