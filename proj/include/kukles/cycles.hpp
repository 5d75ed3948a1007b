#pragma once

// Poincare return maps on rays from an anti-saddle, Newton-refined limit
// cycles with Floquet multipliers, and cycle counting.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <boost/math/tools/toms748_solve.hpp>

#include "kukles/error.hpp"
#include "kukles/integrate.hpp"
#include "kukles/model.hpp"

namespace kukles {

/// Transversal ray anchor + r * direction, r in (0, reach).
struct Section {
  State anchor;
  State direction{1.0, 0.0};
  double reach = std::numeric_limits<double>::infinity();

  State point(double r) const { return anchor + r * direction; }
  double coord(State s) const { return dot(s - anchor, direction); }
  double offset(State s) const { return cross(direction, s - anchor); }
};

enum class Stability { Stable, Unstable, SemiStableCandidate };

inline std::string_view to_string(Stability s) {
  switch (s) {
    case Stability::Stable: return "stable";
    case Stability::Unstable: return "unstable";
    case Stability::SemiStableCandidate: return "semi-stable-candidate";
  }
  return "?";
}

struct LimitCycle {
  double section_coord = 0.0;
  double period = 0.0;
  double multiplier = 1.0;          // nontrivial Floquet multiplier
  double trivial_multiplier = 1.0;  // the eigenvalue of the monodromy matrix closest to 1
  double map_derivative = 1.0;      // derivative of the return map at the fixed point
  double residual = 0.0;            // |P(r) - r|
  Stability stability = Stability::SemiStableCandidate;
  std::vector<State> enclosed;
  double amplitude = 0.0;  // max distance from the section anchor
  std::vector<State> polyline;
};

struct CycleConfig {
  IntegratorConfig integrator = [] {
    IntegratorConfig c;
    c.rtol = 1e-11;
    c.atol = 1e-13;
    c.t_max = 1e4;  // T_max
    c.event_tol = 1e-12;
    c.record = false;
    return c;
  }();
  double newton_tol = 1e-10;
  double mult_tol = 1e-4;
  int max_newton = 40;
  double r_outer_min = 0.05;  // big-cycle seeds start here
  int big_seeds = 48;
  int threads = 1;
};

inline Stability stability_of(double multiplier, double mult_tol) {
  if (multiplier < 1.0 - mult_tol) return Stability::Stable;
  if (multiplier > 1.0 + mult_tol) return Stability::Unstable;
  return Stability::SemiStableCandidate;
}

/// Winding number of a closed polyline around a point; |w| >= 0.5 rounds to the nearest integer.
inline int winding_number(const std::vector<State>& poly, State center) {
  if (poly.size() < 3) return 0;
  double total = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const State a = poly[i] - center;
    const State b = poly[(i + 1) % poly.size()] - center;
    total += std::atan2(cross(a, b), dot(a, b));
  }
  const double w = total / (2.0 * M_PI);
  return std::abs(w) >= 0.5 ? static_cast<int>(std::lround(w)) : 0;
}

namespace detail {

template <class Fn>
void parallel_for(int n, int threads, const Fn& fn) {
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      for (int i = w; i < n; i += threads) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

/// Section-crossing event in the rotational sense of the flow at the start point.
inline Event crossing_event(const CanonicalParams& p, const Section& sec, State start) {
  const double sense = cross(sec.direction, eval_field(p, start));
  if (!(std::abs(sense) > 1e-14 * std::max(1.0, norm(eval_field(p, start)))))
    throw Error(ErrorCode::InvalidArgument, "section ray is not transversal at the start point");
  Event ev;
  ev.name = "section";
  ev.fn = [sec](double, State s) { return sec.offset(s); };
  ev.direction = sense > 0.0 ? 1 : -1;
  ev.terminal = true;
  ev.accept = [sec](State s) { return sec.coord(s) > 0.0; };
  return ev;
}

inline void check_return(const CanonicalParams&, const Section& sec, double r1, TrajectoryStatus status) {
  if (status == TrajectoryStatus::Terminated) {
    if (!(r1 < sec.reach)) throw Error(ErrorCode::NoReturn, "orbit crossed the ray beyond its reach");
    return;
  }
  if (status == TrajectoryStatus::Completed) throw Error(ErrorCode::Timeout, "no return before T_max");
  throw Error(ErrorCode::NoReturn, std::string("orbit did not return: ") + std::string(to_string(status)));
}

}  // namespace detail

struct ReturnPoint {
  double r = 0.0;
  double period = 0.0;
};

/// First return of the orbit through sec.point(r) to the ray.
inline ReturnPoint return_map(const CanonicalParams& p, const Section& sec, double r, const CycleConfig& cfg = {}) {
  if (!(r > 0.0 && r < sec.reach)) throw Error(ErrorCode::InvalidArgument, "r outside the section's range");
  const State s0 = sec.point(r);
  const Event ev = detail::crossing_event(p, sec, s0);
  IntegratorConfig ic = cfg.integrator;
  ic.record = false;
  auto rhs = [&p](double, const detail::Vec<2>& u, detail::Vec<2>& du) {
    const State f = eval_field(p, {u[0], u[1]});
    du[0] = f.x;
    du[1] = f.y;
  };
  const auto res = detail::solve<2>(rhs, {s0.x, s0.y}, ic.t_max, ic, std::span<const Event>(&ev, 1),
                                    [](const auto&, double, const auto&) {});
  const double r1 = sec.coord(detail::head(res.y));
  detail::check_return(p, sec, r1, res.status);
  return {r1, res.t};
}

/// Return map with its derivatives from the variational equations.
struct ReturnDerivatives {
  double r = 0.0;
  double period = 0.0;
  double dr = 1.0;      // d r' / d r
  double dparam = 0.0;  // d r' / d mu, when a parameter was requested
  Mat2 monodromy = identity2();
  double trace_integral = 0.0;
  std::vector<State> polyline;
};

inline ReturnDerivatives return_map_variational(const CanonicalParams& p, const Section& sec, double r,
                                                const CycleConfig& cfg = {},
                                                std::optional<ParamId> param = std::nullopt,
                                                bool keep_polyline = false) {
  if (!(r > 0.0 && r < sec.reach)) throw Error(ErrorCode::InvalidArgument, "r outside the section's range");
  const State s0 = sec.point(r);
  const Event ev = detail::crossing_event(p, sec, s0);
  IntegratorConfig ic = cfg.integrator;
  ic.record = keep_polyline;
  ic.samples_per_step = 4;
  detail::VariationalRhs rhs{&p, param, 1.0};
  Trajectory traj;
  if (keep_polyline) traj.samples.push_back({0.0, s0});
  auto u0 = detail::variational_initial(s0);
  // The start point moves along the ray with r.
  const auto res = detail::solve<9>(rhs, u0, ic.t_max, ic, std::span<const Event>(&ev, 1),
                                    detail::Recorder<9>{&traj, &ic});
  const State s1 = detail::head(res.y);
  const double r1 = sec.coord(s1);
  detail::check_return(p, sec, r1, res.status);

  ReturnDerivatives out;
  out.r = r1;
  out.period = res.t;
  out.monodromy = detail::monodromy_of(res.y);
  out.trace_integral = res.y[8];
  const State f1 = eval_field(p, s1);
  const State nrm{-sec.direction.y, sec.direction.x};
  const double nf = dot(nrm, f1);
  // Project the tangent map onto the ray: the return time adjusts so the image stays on it.
  const State me = kukles::apply(out.monodromy, sec.direction);
  out.dr = dot(sec.direction, me - (dot(nrm, me) / nf) * f1);
  if (param) {
    const State sp{res.y[6], res.y[7]};
    out.dparam = dot(sec.direction, sp - (dot(nrm, sp) / nf) * f1);
  }
  if (keep_polyline) {
    finish(traj, res, std::span<const Event>(&ev, 1));
    out.polyline.reserve(traj.samples.size());
    for (const auto& smp : traj.samples) out.polyline.push_back(smp.s);
    if (out.polyline.size() > 1) out.polyline.pop_back();  // closing point duplicates the start
  }
  return out;
}

/// Builds the cycle record at a fixed point r of the return map (no iteration).
inline LimitCycle cycle_at(const CanonicalParams& p, const Section& sec, double r, const CycleConfig& cfg = {}) {
  const ReturnDerivatives rd = return_map_variational(p, sec, r, cfg, std::nullopt, true);
  LimitCycle cyc;
  cyc.section_coord = r;
  cyc.period = rd.period;
  cyc.residual = std::abs(rd.r - r);
  cyc.map_derivative = rd.dr;
  const auto [l1, l2] = eigenvalues(rd.monodromy);
  if (std::abs(l1.imag()) > 0.0) {
    cyc.trivial_multiplier = std::abs(l1);
    cyc.multiplier = std::abs(l2);
  } else if (std::abs(l1.real() - 1.0) < std::abs(l2.real() - 1.0)) {
    cyc.trivial_multiplier = l1.real();
    cyc.multiplier = l2.real();
  } else {
    cyc.trivial_multiplier = l2.real();
    cyc.multiplier = l1.real();
  }
  cyc.stability = stability_of(cyc.multiplier, cfg.mult_tol);
  cyc.polyline = rd.polyline;
  for (const State& s : cyc.polyline) cyc.amplitude = std::max(cyc.amplitude, norm(s - sec.anchor));
  for (const Singularity& sg : finite_singularities(p)) {
    if (std::abs(winding_number(cyc.polyline, sg.location)) == 1) cyc.enclosed.push_back(sg.location);
  }
  return cyc;
}

/// Newton iteration on r -> P(r) - r.
inline LimitCycle find_cycle(const CanonicalParams& p, const Section& sec, double r_guess, const CycleConfig& cfg = {}) {
  double r = r_guess;
  for (int it = 0; it < cfg.max_newton; ++it) {
    const ReturnDerivatives rd = return_map_variational(p, sec, r, cfg);
    const double g = rd.r - r;
    const double dg = rd.dr - 1.0;
    if (std::abs(dg) < cfg.mult_tol)
      throw Error(ErrorCode::Degenerate, "return map derivative within mult_tol of 1 (fold or center)");
    if (std::abs(g) < cfg.newton_tol) return cycle_at(p, sec, r, cfg);
    double step = -g / dg;
    // Damping keeps the iterate on the ray.
    const double max_step = 0.5 * std::min(r, sec.reach - r);
    if (std::abs(step) > max_step) step = std::copysign(max_step, step);
    r += step;
    if (!(r > 0.0 && r < sec.reach)) break;
  }
  throw Error(ErrorCode::NewtonDiverged, "Newton did not converge from r = " + std::to_string(r_guess));
}

/// Result of a seeded scan: cycles ordered by section coordinate plus notes
/// on seeds where the return map was undefined.
struct CycleScan {
  std::vector<LimitCycle> cycles;
  std::vector<std::string> anomalies;
  std::vector<double> seeds;
  std::vector<std::optional<double>> displacement;
  std::vector<double> noise;  // integration noise floor per seed
};

namespace detail {

/// Refines a sign change of d(r) = P(r) - r and builds the cycle.
inline std::optional<LimitCycle> refine_bracket(const CanonicalParams& p, const Section& sec, double lo, double hi,
                                                double dlo, double dhi, const CycleConfig& cfg) {
  auto disp = [&](double r) { return return_map(p, sec, r, cfg).r - r; };
  try {
    std::uintmax_t iters = 100;
    auto tol = [](double a, double b) { return std::abs(a - b) <= 1e-13 * std::max(1.0, std::abs(a)); };
    const auto [a, b] = boost::math::tools::toms748_solve(disp, lo, hi, dlo, dhi, tol, iters);
    double r = 0.5 * (a + b);
    // Newton polish with the variational derivative where it is well conditioned.
    for (int it = 0; it < 4; ++it) {
      const ReturnDerivatives rd = return_map_variational(p, sec, r, cfg);
      const double g = rd.r - r;
      const double dg = rd.dr - 1.0;
      if (std::abs(g) < 0.1 * cfg.newton_tol || std::abs(dg) < cfg.mult_tol) break;
      const double rn = r - g / dg;
      if (!(rn > lo && rn < hi)) break;
      r = rn;
    }
    return cycle_at(p, sec, r, cfg);
  } catch (const Error&) {
    return std::nullopt;
  }
}

}  // namespace detail

/// Scans n_seeds radii in [r_min, r_max], brackets sign changes of the
/// displacement and refines each bracket.
inline CycleScan scan_cycles(const CanonicalParams& p, const Section& sec, double r_min, double r_max, int n_seeds,
                             const CycleConfig& cfg = {}, bool geometric = false) {
  if (!(r_min > 0.0) || !(r_max > r_min) || n_seeds < 2)
    throw Error(ErrorCode::InvalidArgument, "count_cycles needs 0 < r_min < r_max and n_seeds >= 2");
  r_max = std::min(r_max, sec.reach * (1.0 - 1e-12));
  CycleScan out;
  out.seeds.resize(n_seeds);
  for (int i = 0; i < n_seeds; ++i) {
    const double f = static_cast<double>(i) / (n_seeds - 1);
    out.seeds[i] = geometric ? r_min * std::pow(r_max / r_min, f) : r_min + (r_max - r_min) * f;
  }
  out.displacement.assign(n_seeds, std::nullopt);
  out.noise.assign(n_seeds, 0.0);
  std::vector<std::string> notes(n_seeds);
  detail::parallel_for(n_seeds, cfg.threads, [&](int i) {
    try {
      const ReturnPoint rp = return_map(p, sec, out.seeds[i], cfg);
      out.displacement[i] = rp.r - out.seeds[i];
      // Round-off in P(r) grows with the return time; below this the sign is meaningless.
      out.noise[i] = 100.0 * cfg.integrator.rtol * out.seeds[i] * std::max(1.0, rp.period / (2.0 * std::numbers::pi));
    } catch (const Error& e) {
      notes[i] = std::string(to_string(e.code()));
    }
  });
  for (int i = 0; i < n_seeds; ++i) {
    if (!notes[i].empty()) out.anomalies.push_back(notes[i] + " at r=" + std::to_string(out.seeds[i]));
  }
  std::vector<int> brackets;
  int flat = 0;
  for (int i = 0; i + 1 < n_seeds; ++i) {
    const auto& a = out.displacement[i];
    const auto& b = out.displacement[i + 1];
    if (!a || !b) continue;
    if (std::abs(*a) <= out.noise[i] && std::abs(*b) <= out.noise[i + 1]) {
      ++flat;
      continue;
    }
    if ((*a < 0.0 && *b > 0.0) || (*a > 0.0 && *b < 0.0) || *a == 0.0) brackets.push_back(i);
  }
  if (flat > 0) out.anomalies.push_back(std::to_string(flat) + " seed intervals with displacement at noise level");
  std::vector<std::optional<LimitCycle>> found(brackets.size());
  detail::parallel_for(static_cast<int>(brackets.size()), cfg.threads, [&](int k) {
    const int i = brackets[k];
    const double dlo = *out.displacement[i], dhi = *out.displacement[i + 1];
    if (dlo == 0.0) {
      try {
        found[k] = cycle_at(p, sec, out.seeds[i], cfg);
      } catch (const Error&) {
      }
      return;
    }
    found[k] = detail::refine_bracket(p, sec, out.seeds[i], out.seeds[i + 1], dlo, dhi, cfg);
  });
  for (std::size_t k = 0; k < found.size(); ++k) {
    if (!found[k]) {
      out.anomalies.push_back("refinement failed in [" + std::to_string(out.seeds[brackets[k]]) + ", " +
                              std::to_string(out.seeds[brackets[k] + 1]) + "]");
      continue;
    }
    if (!out.cycles.empty() &&
        std::abs(out.cycles.back().section_coord - found[k]->section_coord) < 10.0 * cfg.newton_tol)
      continue;
    out.cycles.push_back(std::move(*found[k]));
  }
  return out;
}

inline std::vector<LimitCycle> count_cycles(const CanonicalParams& p, const Section& sec, double r_min, double r_max,
                                            int n_seeds, const CycleConfig& cfg = {}) {
  return scan_cycles(p, sec, r_min, r_max, n_seeds, cfg).cycles;
}

// ---------------------------------------------------------------------------
// Section conventions

enum class Anchor { O, A };

/// Location of an anti-saddle: O is the origin, A the other anti-saddle
/// on the x-axis (case 1 with a > 0, a != 1).
inline std::optional<State> find_anchor(const CanonicalParams& p, Anchor which) {
  if (which == Anchor::O) return State{0.0, 0.0};
  for (const auto& [x, m] : p.q.roots()) {
    if (m == 1 && x != 0.0 && -p.q.derivative(x) > 0.0) return State{x, 0.0};
  }
  return std::nullopt;
}

inline State anchor_location(const CanonicalParams& p, Anchor which) {
  const auto a = find_anchor(p, which);
  if (!a) throw Error(ErrorCode::InvalidArgument, "the system has no second anti-saddle");
  return *a;
}

/// Horizontal ray from an anti-saddle toward the neighbouring saddle between
/// the two anti-saddles (+x from O when A lies to the right). Reach stops at
/// the next finite singularity along the ray.
inline Section default_section(const CanonicalParams& p, Anchor which, double fallback_reach = 500.0) {
  Section sec;
  sec.anchor = anchor_location(p, which);
  const auto other = find_anchor(p, which == Anchor::O ? Anchor::A : Anchor::O);
  double dir = 1.0;
  if (which == Anchor::A) dir = sec.anchor.x > 0.0 ? -1.0 : 1.0;
  else if (other && other->x < 0.0) dir = -1.0;
  sec.direction = {dir, 0.0};
  sec.reach = fallback_reach;
  for (const auto& [x, m] : p.q.roots()) {
    const double c = (x - sec.anchor.x) * dir;
    if (c > 1e-12) sec.reach = std::min(sec.reach, c);
  }
  return sec;
}

/// Vertical ray from the centroid of the finite singularities.
inline Section outer_section(const CanonicalParams& p, const CycleConfig& cfg = {}) {
  const auto sing = finite_singularities(p);
  double cx = 0.0;
  for (const auto& s : sing) cx += s.location.x;
  cx /= static_cast<double>(sing.size());
  Section sec;
  sec.anchor = {cx, 0.0};
  sec.direction = {0.0, 1.0};
  sec.reach = 0.5 * cfg.integrator.escape_radius;
  return sec;
}

/// Cycles enclosing every finite singularity, innermost first.
inline std::vector<LimitCycle> big_cycles(const CanonicalParams& p, const CycleConfig& cfg = {},
                                          std::vector<std::string>* anomalies = nullptr) {
  const Section sec = outer_section(p, cfg);
  const auto scan = scan_cycles(p, sec, cfg.r_outer_min, sec.reach * 0.999, cfg.big_seeds, cfg, true);
  if (anomalies) anomalies->insert(anomalies->end(), scan.anomalies.begin(), scan.anomalies.end());
  const std::size_t n_sing = finite_singularities(p).size();
  std::vector<LimitCycle> out;
  for (const auto& c : scan.cycles) {
    if (c.enclosed.size() == n_sing) out.push_back(c);
  }
  return out;
}

inline std::optional<LimitCycle> detect_big_cycle(const CanonicalParams& p, const CycleConfig& cfg = {}) {
  auto all = big_cycles(p, cfg);
  if (all.empty()) return std::nullopt;
  return all.front();
}

}  // namespace kukles
