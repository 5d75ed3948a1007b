#pragma once

// Hopf values, pseudo-arclength continuation of cycles with fold detection,
// saddle separatrices, homoclinic gaps and the eight-loop search.

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/toms748_solve.hpp>

#include "kukles/cycles.hpp"
#include "kukles/error.hpp"
#include "kukles/integrate.hpp"
#include "kukles/model.hpp"

namespace kukles {

// ---------------------------------------------------------------------------
// Hopf values

enum class HopfSide { SupercriticalLike, SubcriticalLike };

inline std::string_view to_string(HopfSide s) {
  return s == HopfSide::SupercriticalLike ? "supercritical-like" : "subcritical-like";
}

struct HopfReport {
  State singularity;
  ParamId free_param = ParamId::Beta;
  double trace_at_input = 0.0;     // trace of the Jacobian at the focus for the given parameters
  double critical_value = 0.0;     // free parameter value where the trace vanishes
  double trace_at_critical = 0.0;  // analytic trace re-evaluated there
  double frequency = 0.0;          // |Im lambda| at the critical value
  double curvature = 0.0;          // d(r) / r^3 of the return map at the critical value
  HopfSide side = HopfSide::SupercriticalLike;
  int birth_direction = 1;  // sign of the parameter offset on which the small cycle exists
};

/// d(trace at (x0, 0)) / d(mu); the trace is affine in every parameter.
inline double trace_sensitivity(ParamId id, double x0) {
  switch (id) {
    case ParamId::Alpha0: return 1.0;
    case ParamId::Alpha2: return x0 * x0;
    case ParamId::Beta: return x0 - 1.0;
    case ParamId::Gamma: return 1.0;
    case ParamId::C:
    case ParamId::D: return 0.0;
  }
  return 0.0;
}

inline HopfReport hopf_value(const CanonicalParams& p, Anchor which, ParamId free_param, double probe_r = 0.03,
                             const CycleConfig& cfg = {}) {
  const State loc = anchor_location(p, which);
  const double dt = -p.q.derivative(loc.x);
  if (!(dt > kClassifyTol)) throw Error(ErrorCode::NotAFocus, "equilibrium is not an anti-saddle");
  const double slope = trace_sensitivity(free_param, loc.x);
  if (slope == 0.0) throw Error(ErrorCode::Insensitive, "trace does not depend on " + std::string(to_string(free_param)));

  HopfReport rep;
  rep.singularity = loc;
  rep.free_param = free_param;
  rep.trace_at_input = p.linear_damping(loc.x);
  rep.critical_value = p.get(free_param) - rep.trace_at_input / slope;
  const CanonicalParams pc = p.with(free_param, rep.critical_value);
  rep.trace_at_critical = pc.linear_damping(loc.x);
  if (dt - 0.25 * rep.trace_at_critical * rep.trace_at_critical <= 0.0)
    throw Error(ErrorCode::NotAFocus, "eigenvalues are real at the critical value");
  rep.frequency = std::sqrt(dt - 0.25 * rep.trace_at_critical * rep.trace_at_critical);

  const Section sec = default_section(pc, which);
  const double r = std::min(probe_r, 0.25 * sec.reach);
  rep.curvature = (return_map(pc, sec, r, cfg).r - r) / (r * r * r);
  // A weakly attracting focus sheds a stable cycle once its trace turns positive.
  rep.side = rep.curvature < 0.0 ? HopfSide::SupercriticalLike : HopfSide::SubcriticalLike;
  const int up = slope > 0.0 ? 1 : -1;
  rep.birth_direction = rep.side == HopfSide::SupercriticalLike ? up : -up;
  return rep;
}

// ---------------------------------------------------------------------------
// Continuation

struct ContinuationConfig {
  double h_init = 1e-3;
  double h_min = 1e-8;
  double h_max = 1e-1;
  double amp_min = 1e-4;
  int max_points = 4000;
  int max_corrector = 10;
  int easy_iterations = 3;  // solves with at most this many iterations count as easy
  int easy_streak = 3;      // easy solves in a row before the step doubles
  CycleConfig cycle;
};

struct BranchPoint {
  double param = 0.0;
  LimitCycle cycle;
};

struct Fold {
  double param = 0.0;
  double r = 0.0;
  double multiplier = 1.0;
};

enum class BranchEnd { RangeEnd, HopfEndpoint, Homoclinic, Escape, MaxPoints };

inline std::string_view to_string(BranchEnd e) {
  switch (e) {
    case BranchEnd::RangeEnd: return "range-end";
    case BranchEnd::HopfEndpoint: return "hopf-endpoint";
    case BranchEnd::Homoclinic: return "homoclinic";
    case BranchEnd::Escape: return "escape";
    case BranchEnd::MaxPoints: return "max-points";
  }
  return "?";
}

struct ContinuationBranch {
  ParamId param_id = ParamId::Alpha0;
  Section section;
  std::vector<BranchPoint> points;
  std::vector<Fold> folds;
  BranchEnd end = BranchEnd::RangeEnd;
  std::string end_detail;
};

namespace detail {

// The continuation works with D(mu, r) = (P(r) - r) / r, which removes the
// trivial branch r = 0 and keeps Hopf endpoints regular.
struct Scaled {
  double value, d_r, d_mu, residual;
};

inline Scaled scaled_displacement(const CanonicalParams& p, const Section& sec, ParamId id, double mu, double r,
                                  const CycleConfig& cfg) {
  const auto rd = return_map_variational(p.with(id, mu), sec, r, cfg, id);
  const double g = rd.r - r;
  return {g / r, (rd.dr - 1.0) / r - g / (r * r), rd.dparam / r, std::abs(g)};
}

struct Tangent {
  double mu, r;
};

inline Tangent tangent_of(const Scaled& s, const Tangent& prev) {
  Tangent t{s.d_r, -s.d_mu};
  const double n = std::hypot(t.mu, t.r);
  t.mu /= n;
  t.r /= n;
  if (t.mu * prev.mu + t.r * prev.r < 0.0) {
    t.mu = -t.mu;
    t.r = -t.r;
  }
  return t;
}

/// Parameter value on the branch at fixed r (Newton in mu).
inline std::optional<double> param_at_radius(const CanonicalParams& p, const Section& sec, ParamId id, double r,
                                             double mu_guess, const CycleConfig& cfg) {
  double mu = mu_guess;
  for (int it = 0; it < 30; ++it) {
    const auto rd = return_map_variational(p.with(id, mu), sec, r, cfg, id);
    const double g = rd.r - r;
    if (std::abs(g) < 0.1 * cfg.newton_tol) return mu;
    if (rd.dparam == 0.0) return std::nullopt;
    const double step = -g / rd.dparam;
    mu += step;
    if (std::abs(step) < 1e-15 * std::max(1.0, std::abs(mu))) return mu;
  }
  return std::nullopt;
}

}  // namespace detail

/// Pseudo-arclength continuation of the fixed point `r0` of the return map
/// on `sec` in the parameter `id`, heading toward increasing (direction > 0)
/// or decreasing parameter values, until it leaves [lo, hi].
inline ContinuationBranch continue_cycle(const CanonicalParams& p0, const Section& sec, double r0, ParamId id,
                                         double lo, double hi, int direction, const ContinuationConfig& cc = {}) {
  if (!(lo < hi)) throw Error(ErrorCode::InvalidArgument, "continuation range must satisfy lo < hi");
  ContinuationBranch br;
  br.param_id = id;
  br.section = sec;
  const CycleConfig& cfg = cc.cycle;

  auto record = [&](double mu, double r) {
    LimitCycle cyc = cycle_at(p0.with(id, mu), sec, r, cfg);
    cyc.polyline.clear();
    cyc.polyline.shrink_to_fit();
    br.points.push_back({mu, std::move(cyc)});
  };

  double mu = p0.get(id), r = r0;
  auto s = detail::scaled_displacement(p0, sec, id, mu, r, cfg);
  detail::Tangent t = detail::tangent_of(s, {direction >= 0 ? 1.0 : -1.0, 0.0});
  if (t.mu == 0.0 && t.r == 0.0) throw Error(ErrorCode::Degenerate, "singular start point");
  record(mu, r);

  double h = cc.h_init;
  int easy = 0;
  std::string last_failure;
  ErrorCode last_code = ErrorCode::NewtonDiverged;
  while (true) {
    if (static_cast<int>(br.points.size()) >= cc.max_points) {
      br.end = BranchEnd::MaxPoints;
      return br;
    }
    const double mu_p = mu + h * t.mu, r_p = r + h * t.r;
    double m = mu_p, x = r_p;
    bool ok = false;
    int iters = 0;
    detail::Scaled sc{};
    try {
      for (iters = 1; iters <= cc.max_corrector; ++iters) {
        if (!(x > 0.0 && x < sec.reach)) {
          last_code = x <= 0.0 ? ErrorCode::Degenerate : ErrorCode::NoReturn;
          last_failure = "corrector left the ray";
          break;
        }
        sc = detail::scaled_displacement(p0, sec, id, m, x, cfg);
        const double f1 = sc.value, f2 = t.mu * (m - mu_p) + t.r * (x - r_p);
        const double a = sc.d_mu, b = sc.d_r, c = t.mu, d = t.r;
        const double det2 = a * d - b * c;
        if (det2 == 0.0) break;
        const double dm = (-f1 * d + b * f2) / det2;
        const double dx = (-a * f2 + c * f1) / det2;
        m += dm;
        x += dx;
        if (sc.residual < cfg.newton_tol && std::abs(dm) + std::abs(dx) < 1e-9) {
          ok = x > 0.0 && x < sec.reach;
          break;
        }
      }
    } catch (const Error& e) {
      last_code = e.code();
      last_failure = e.what();
      ok = false;
    }
    if (ok) {
      // Re-evaluate at the corrected point for the residual check and the new tangent.
      try {
        sc = detail::scaled_displacement(p0, sec, id, m, x, cfg);
        ok = sc.residual < cfg.newton_tol;
      } catch (const Error& e) {
        last_code = e.code();
        last_failure = e.what();
        ok = false;
      }
    }
    if (!ok) {
      h *= 0.5;
      easy = 0;
      if (h < cc.h_min) {
        if (last_code == ErrorCode::Timeout) {
          br.end = BranchEnd::Homoclinic;
        } else if (last_code == ErrorCode::NoReturn) {
          br.end = x >= sec.reach * 0.9 ? BranchEnd::Homoclinic : BranchEnd::Escape;
        } else if (last_code == ErrorCode::Degenerate && br.points.back().cycle.amplitude < 1e-2) {
          br.end = BranchEnd::HopfEndpoint;
        } else {
          throw Error(ErrorCode::StepCollapse, "arclength step collapsed: " + last_failure);
        }
        br.end_detail = last_failure;
        return br;
      }
      continue;
    }

    const detail::Tangent tn = detail::tangent_of(sc, t);
    const double mu_prev = mu, r_prev = r;
    const bool fold = (tn.mu > 0.0) != (t.mu > 0.0) && tn.mu != 0.0 && t.mu != 0.0;

    if (m < lo || m > hi) {
      // Finish exactly on the range end when the branch is still single-valued there.
      const double edge = m < lo ? lo : hi;
      const double frac = (edge - mu_prev) / (m - mu_prev);
      if (!fold) {
        try {
          const LimitCycle c = find_cycle(p0.with(id, edge), sec, r_prev + frac * (x - r_prev), cfg);
          record(edge, c.section_coord);
        } catch (const Error&) {
        }
      }
      br.end = BranchEnd::RangeEnd;
      return br;
    }

    if (fold) {
      // mu(r) has an extremum between the two points.
      const double ra = std::min(r_prev, x), rb = std::max(r_prev, x);
      const double sgn = t.mu > 0.0 ? -1.0 : 1.0;  // maximum if mu was increasing
      auto f = [&](double rr) {
        const double guess = mu_prev + (m - mu_prev) * (rr - r_prev) / (x - r_prev);
        const auto v = detail::param_at_radius(p0, sec, id, rr, guess, cfg);
        return v ? sgn * *v : std::numeric_limits<double>::infinity();
      };
      std::uintmax_t it = 100;
      try {
        const auto [rf, fv] = boost::math::tools::brent_find_minima(f, ra, rb, 30, it);
        const double muf = sgn * fv;
        if (std::isfinite(muf)) {
          const LimitCycle cf = cycle_at(p0.with(id, muf), sec, rf, cfg);
          br.folds.push_back({muf, rf, cf.multiplier});
        }
      } catch (const Error&) {
      }
    }

    mu = m;
    r = x;
    t = tn;
    record(mu, r);
    if (br.points.back().cycle.amplitude < cc.amp_min) {
      br.end = BranchEnd::HopfEndpoint;
      return br;
    }
    easy = iters <= cc.easy_iterations ? easy + 1 : 0;
    if (easy >= cc.easy_streak) {
      h = std::min(2.0 * h, cc.h_max);
      easy = 0;
    }
  }
}

// ---------------------------------------------------------------------------
// Separatrices

struct SeparatrixSet {
  Singularity saddle;
  std::array<std::string, 4> names{"u+", "u-", "s+", "s-"};
  std::array<Trajectory, 4> branches;  // stable pair integrated in reversed time
  State unstable_vector, stable_vector;
};

/// The saddle nearest to the origin on the positive x-axis (S between O and A in case 1).
inline Singularity find_saddle(const CanonicalParams& p) {
  std::optional<Singularity> best;
  for (const auto& s : finite_singularities(p)) {
    if (s.kind != SingularityKind::Saddle || !(s.location.x > 0.0)) continue;
    if (!best || s.location.x < best->location.x) best = s;
  }
  if (!best) throw Error(ErrorCode::NotASaddle, "no finite saddle on the positive x-axis");
  return *best;
}

/// Unit eigenvectors (unstable, stable) of a saddle, oriented with positive x.
inline std::pair<State, State> saddle_eigenvectors(const CanonicalParams& p, const Singularity& saddle) {
  if (saddle.kind != SingularityKind::Saddle) throw Error(ErrorCode::NotASaddle, "singularity is not a saddle");
  const Mat2 j = jacobian(p, saddle.location);
  const double tr = trace(j), dt = det(j);
  const double disc = std::sqrt(0.25 * tr * tr - dt);
  // With x' = y, (1, lambda) is an eigenvector for eigenvalue lambda.
  auto unit = [](double lam) {
    const State v{1.0, lam};
    return (1.0 / norm(v)) * v;
  };
  return {unit(0.5 * tr + disc), unit(0.5 * tr - disc)};
}

inline SeparatrixSet separatrices(const CanonicalParams& p, const Singularity& saddle, double eps = 1e-7,
                                  IntegratorConfig cfg = {}) {
  const auto [vu, vs] = saddle_eigenvectors(p, saddle);
  SeparatrixSet out;
  out.saddle = saddle;
  out.unstable_vector = vu;
  out.stable_vector = vs;
  const State s0 = saddle.location;
  const std::array<State, 4> starts{s0 + eps * vu, s0 - eps * vu, s0 + eps * vs, s0 - eps * vs};
  for (int k = 0; k < 4; ++k) {
    IntegratorConfig c = cfg;
    c.backward = k >= 2;
    out.branches[k] = integrate(p, starts[k], c);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Homoclinic gaps

enum class LoopSide { Left, Right };

inline std::string_view to_string(LoopSide s) { return s == LoopSide::Left ? "left" : "right"; }

struct HomoclinicConfig {
  std::optional<double> left_x;   // default: midway between the saddle and O
  std::optional<double> right_x;  // default: midway between the saddle and A
  double eps = 1e-7;
  IntegratorConfig integrator = [] {
    IntegratorConfig c;
    c.rtol = 1e-11;
    c.atol = 1e-13;
    c.event_tol = 1e-13;
    c.t_max = 400.0;
    c.record = false;
    return c;
  }();
};

/// Signed distance between the unstable and stable separatrices of the saddle
/// at their first crossing of a vertical half-line: {x = x_l, y > 0} for the
/// loop around O, {x = x_r, y < 0} for the loop around A. Positive means the
/// unstable branch passes outside the stable one.
inline double homoclinic_gap(const CanonicalParams& p, LoopSide side, const HomoclinicConfig& hc = {}) {
  const Singularity s = find_saddle(p);
  const auto [vu, vs] = saddle_eigenvectors(p, s);
  const bool left = side == LoopSide::Left;
  double xl = 0.5 * s.location.x;
  double xr = s.location.x;
  if (!left) {
    const State a = anchor_location(p, Anchor::A);
    xr = 0.5 * (s.location.x + a.x);
  }
  const double xc = left ? hc.left_x.value_or(xl) : hc.right_x.value_or(xr);
  Event ev;
  ev.name = "transversal";
  ev.fn = [xc](double, State z) { return z.x - xc; };
  ev.terminal = true;
  ev.accept = [left](State z) { return left ? z.y > 0.0 : z.y < 0.0; };
  const double sgn = left ? -1.0 : 1.0;  // left loop uses the branches leaving toward x < x_S

  auto cross_y = [&](State v, bool backward) {
    IntegratorConfig c = hc.integrator;
    c.backward = backward;
    c.record = false;
    const Trajectory tr = integrate(p, s.location + (sgn * hc.eps) * v, c, std::span<const Event>(&ev, 1));
    if (tr.status != TrajectoryStatus::Terminated)
      throw Error(ErrorCode::BranchEscaped,
                  std::string("separatrix did not reach the transversal: ") + std::string(to_string(tr.status)));
    return tr.end.y;
  };
  const double yu = cross_y(vu, false);
  const double ys = cross_y(vs, true);
  return left ? yu - ys : ys - yu;
}

struct EightLoop {
  double alpha2_left = 0.0;
  double alpha2_right = 0.0;
  double gap_left = 0.0;
  double gap_right = 0.0;
  double difference = 0.0;  // alpha2_left - alpha2_right
  bool simultaneous = false;
};

/// Root of one side's homoclinic gap in alpha2 inside [lo, hi]. The gap is
/// sampled on n_samples points first (branches that miss the transversal
/// leave holes); the sign change closest to hi is refined.
inline std::pair<double, double> homoclinic_alpha2(const CanonicalParams& base, LoopSide side, double lo, double hi,
                                                   const HomoclinicConfig& hc = {}, int n_samples = 33,
                                                   double gap_tol = 1e-8) {
  if (!(lo < hi) || n_samples < 2) throw Error(ErrorCode::InvalidArgument, "bad alpha2 bracket");
  auto g = [&](double a2) { return homoclinic_gap(base.with(ParamId::Alpha2, a2), side, hc); };
  std::vector<double> xs(n_samples);
  std::vector<std::optional<double>> gs(n_samples);
  for (int i = 0; i < n_samples; ++i) {
    xs[i] = hi - (hi - lo) * i / (n_samples - 1);
    try {
      gs[i] = g(xs[i]);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::BranchEscaped) throw;
    }
  }
  if (gs[0] && std::abs(*gs[0]) < gap_tol) return {xs[0], *gs[0]};
  std::optional<int> prev;
  for (int i = 0; i < n_samples; ++i) {
    if (!gs[i]) continue;
    if (std::abs(*gs[i]) < gap_tol) return {xs[i], *gs[i]};
    if (prev && (*gs[*prev] > 0.0) != (*gs[i] > 0.0)) {
      const double a = xs[i], b = xs[*prev];
      std::uintmax_t iters = 200;
      auto tol = [](double u, double v) { return std::abs(u - v) <= 1e-15; };
      const auto [ra, rb] = boost::math::tools::toms748_solve(g, a, b, *gs[i], *gs[*prev], tol, iters);
      const double ga = g(ra), gb = g(rb);
      return std::abs(ga) <= std::abs(gb) ? std::pair{ra, ga} : std::pair{rb, gb};
    }
    prev = i;
  }
  throw Error(ErrorCode::NoBracket, std::string(to_string(side)) + " gap does not change sign inside the bracket");
}

inline EightLoop eight_loop_find(const CanonicalParams& base, double lo, double hi, const HomoclinicConfig& hc = {}) {
  EightLoop out;
  std::tie(out.alpha2_left, out.gap_left) = homoclinic_alpha2(base, LoopSide::Left, lo, hi, hc);
  std::tie(out.alpha2_right, out.gap_right) = homoclinic_alpha2(base, LoopSide::Right, lo, hi, hc);
  out.difference = out.alpha2_left - out.alpha2_right;
  out.simultaneous = std::abs(out.difference) < 1e-6;
  return out;
}

}  // namespace kukles
