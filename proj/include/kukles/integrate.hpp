#pragma once

// Adaptive Dormand-Prince 5(4) integration of the canonical field with
// dense output, event location and variational (monodromy) equations.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kukles/error.hpp"
#include "kukles/model.hpp"

namespace kukles {

struct IntegratorConfig {
  double rtol = 1e-9;
  double atol = 1e-12;
  double max_step = 0.1;
  double t_max = 100.0;
  double escape_radius = 1e3;
  double event_tol = 1e-11;
  bool backward = false;      // integrate the time-reversed field
  bool record = true;         // keep samples in the trajectory
  int samples_per_step = 1;   // dense-output points recorded per accepted step

  void validate() const {
    if (!(rtol > 0.0) || !(atol > 0.0)) throw Error(ErrorCode::InvalidArgument, "rtol and atol must be positive");
    if (!(escape_radius > 0.0)) throw Error(ErrorCode::InvalidArgument, "escape_radius must be positive");
    if (!(max_step > 0.0)) throw Error(ErrorCode::InvalidArgument, "max_step must be positive");
    if (!(t_max >= 0.0)) throw Error(ErrorCode::InvalidArgument, "t_max must be non-negative");
    if (!(event_tol > 0.0)) throw Error(ErrorCode::InvalidArgument, "event_tol must be positive");
    if (samples_per_step < 1) throw Error(ErrorCode::InvalidArgument, "samples_per_step must be >= 1");
  }

  IntegratorConfig with_tolerance_scale(double k) const {
    IntegratorConfig out = *this;
    out.rtol *= k;
    out.atol *= k;
    return out;
  }
};

enum class TrajectoryStatus { Completed, Escaped, EquilibriumReached, StepFailure, Terminated };

inline std::string_view to_string(TrajectoryStatus s) {
  switch (s) {
    case TrajectoryStatus::Completed: return "completed";
    case TrajectoryStatus::Escaped: return "escaped";
    case TrajectoryStatus::EquilibriumReached: return "equilibrium";
    case TrajectoryStatus::StepFailure: return "step-failure";
    case TrajectoryStatus::Terminated: return "terminated";
  }
  return "?";
}

/// A scalar function of (t, state) whose sign changes mark an event.
struct Event {
  std::string name;
  std::function<double(double, State)> fn;
  int direction = 0;  // +1 rising only, -1 falling only, 0 both
  bool terminal = false;
  std::function<bool(State)> accept;  // optional filter on the refined crossing
};

struct Sample {
  double t;
  State s;
};

struct EventRecord {
  double t;
  State s;
  std::string kind;
};

/// Times are elapsed integration time; for backward runs the physical time is -t.
struct Trajectory {
  std::vector<Sample> samples;
  std::vector<EventRecord> events;
  TrajectoryStatus status = TrajectoryStatus::Completed;
  bool backward = false;
  double t_end = 0.0;
  State end;
  std::size_t steps = 0;
};

namespace detail {

template <std::size_t N>
using Vec = std::array<double, N>;

/// One accepted step with its free 4th-order continuous extension.
template <std::size_t N>
struct DenseStep {
  double t0 = 0.0;
  double h = 0.0;
  Vec<N> y0{}, r2{}, r3{}, r4{}, r5{};

  Vec<N> operator()(double t) const {
    const double th = (t - t0) / h;
    const double th1 = 1.0 - th;
    Vec<N> out;
    for (std::size_t i = 0; i < N; ++i) out[i] = y0[i] + th * (r2[i] + th1 * (r3[i] + th * (r4[i] + th1 * r5[i])));
    return out;
  }
};

template <std::size_t N>
struct EventHit {
  double t;
  Vec<N> y;
  std::size_t index;
};

template <std::size_t N>
struct SolveResult {
  TrajectoryStatus status = TrajectoryStatus::Completed;
  double t = 0.0;
  Vec<N> y{};
  std::vector<EventHit<N>> hits;
  std::size_t steps = 0;
};

// Dormand-Prince 5(4) tableau and dense-output coefficients.
struct DP {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                          a76 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                          e6 = 22.0 / 525, e7 = -1.0 / 40;
  static constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                          d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                          d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;
};

template <std::size_t N>
struct StepWork {
  Vec<N> k1, k2, k3, k4, k5, k6, k7, y1, err;
};

/// Takes one DP5 step of size h from (t, y) with k1 = f(t, y); fills y1, k7 and err.
template <std::size_t N, class Rhs>
void dp_step(const Rhs& f, double t, const Vec<N>& y, double h, StepWork<N>& w) {
  using D = DP;
  Vec<N> tmp;
  for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + h * D::a21 * w.k1[i];
  f(t + D::c2 * h, tmp, w.k2);
  for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + h * (D::a31 * w.k1[i] + D::a32 * w.k2[i]);
  f(t + D::c3 * h, tmp, w.k3);
  for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + h * (D::a41 * w.k1[i] + D::a42 * w.k2[i] + D::a43 * w.k3[i]);
  f(t + D::c4 * h, tmp, w.k4);
  for (std::size_t i = 0; i < N; ++i)
    tmp[i] = y[i] + h * (D::a51 * w.k1[i] + D::a52 * w.k2[i] + D::a53 * w.k3[i] + D::a54 * w.k4[i]);
  f(t + D::c5 * h, tmp, w.k5);
  for (std::size_t i = 0; i < N; ++i)
    tmp[i] = y[i] + h * (D::a61 * w.k1[i] + D::a62 * w.k2[i] + D::a63 * w.k3[i] + D::a64 * w.k4[i] +
                         D::a65 * w.k5[i]);
  f(t + h, tmp, w.k6);
  for (std::size_t i = 0; i < N; ++i)
    w.y1[i] = y[i] + h * (D::a71 * w.k1[i] + D::a73 * w.k3[i] + D::a74 * w.k4[i] + D::a75 * w.k5[i] +
                          D::a76 * w.k6[i]);
  f(t + h, w.y1, w.k7);
  for (std::size_t i = 0; i < N; ++i)
    w.err[i] = h * (D::e1 * w.k1[i] + D::e3 * w.k3[i] + D::e4 * w.k4[i] + D::e5 * w.k5[i] + D::e6 * w.k6[i] +
                    D::e7 * w.k7[i]);
}

template <std::size_t N>
State head(const Vec<N>& y) {
  return {y[0], y[1]};
}

/// Generic adaptive integration. `f(t, y, dydt)` is the right-hand side; events
/// look at the first two components. `observe(step, t1, y1)` runs after every
/// accepted step.
template <std::size_t N, class Rhs, class Observer>
SolveResult<N> solve(const Rhs& f, Vec<N> y, double t_end, const IntegratorConfig& cfg,
                     std::span<const Event> events, Observer&& observe) {
  SolveResult<N> res;
  double t = 0.0;
  StepWork<N> w;
  f(t, y, w.k1);

  auto scale = [&](double a, double b) {
    return cfg.atol + cfg.rtol * std::max(std::abs(a), std::abs(b));
  };

  // Initial step guess.
  double h;
  {
    double d0 = 0.0, d1 = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      const double sk = scale(y[i], y[i]);
      d0 += (y[i] / sk) * (y[i] / sk);
      d1 += (w.k1[i] / sk) * (w.k1[i] / sk);
    }
    d0 = std::sqrt(d0 / N);
    d1 = std::sqrt(d1 / N);
    h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h = std::min({h, cfg.max_step, std::max(t_end, 1e-12)});
  }

  std::vector<double> g_prev(events.size());
  for (std::size_t e = 0; e < events.size(); ++e) g_prev[e] = events[e].fn(t, head(y));

  int calm_steps = 0;
  bool last_rejected = false;
  while (t < t_end) {
    if (t + h > t_end) h = t_end - t;
    if (!(h > 1e-14 * std::max(1.0, std::abs(t)))) {
      res.status = TrajectoryStatus::StepFailure;
      break;
    }
    dp_step<N>(f, t, y, h, w);
    double err = 0.0;
    bool finite = true;
    for (std::size_t i = 0; i < N; ++i) {
      if (!std::isfinite(w.y1[i])) finite = false;
      const double r = w.err[i] / scale(y[i], w.y1[i]);
      err += r * r;
    }
    err = finite ? std::sqrt(err / N) : std::numeric_limits<double>::infinity();
    if (!(err <= 1.0)) {
      const double fac = std::isfinite(err) ? std::max(0.2, 0.9 * std::pow(err, -0.2)) : 0.2;
      h *= fac;
      last_rejected = true;
      continue;
    }

    // Accepted.
    DenseStep<N> ds;
    ds.t0 = t;
    ds.h = h;
    ds.y0 = y;
    for (std::size_t i = 0; i < N; ++i) {
      using D = DP;
      const double ydiff = w.y1[i] - y[i];
      const double bspl = h * w.k1[i] - ydiff;
      ds.r2[i] = ydiff;
      ds.r3[i] = bspl;
      ds.r4[i] = ydiff - h * w.k7[i] - bspl;
      ds.r5[i] = h * (D::d1 * w.k1[i] + D::d3 * w.k3[i] + D::d4 * w.k4[i] + D::d5 * w.k5[i] + D::d6 * w.k6[i] +
                      D::d7 * w.k7[i]);
    }
    const double t1 = t + h;
    ++res.steps;

    // Events: bracket on endpoint sign change, bisect on the dense output, then
    // polish with exact partial steps.
    std::vector<EventHit<N>> step_hits;
    for (std::size_t e = 0; e < events.size(); ++e) {
      const Event& ev = events[e];
      const double g0 = g_prev[e];
      const double g1 = ev.fn(t1, head(w.y1));
      g_prev[e] = g1;
      const bool rising = g0 < 0.0 && g1 >= 0.0;
      const bool falling = g0 > 0.0 && g1 <= 0.0;
      if (!((rising && ev.direction >= 0) || (falling && ev.direction <= 0))) continue;
      double lo = t, hi = t1, glo = g0;
      double tm = t1;
      for (int it = 0; it < 80; ++it) {
        tm = 0.5 * (lo + hi);
        const double gm = ev.fn(tm, head(ds(tm)));
        if (std::abs(gm) < cfg.event_tol) break;
        if ((gm < 0.0) == (glo < 0.0)) {
          lo = tm;
          glo = gm;
        } else {
          hi = tm;
        }
      }
      // Polish: exact DP5 substep to tm, Newton on tm with a dense-output slope.
      StepWork<N> sub;
      sub.k1 = w.k1;
      Vec<N> ym = ds(tm);
      for (int it = 0; it < 3; ++it) {
        const double hs = tm - t;
        if (hs > 0.0) {
          dp_step<N>(f, t, y, hs, sub);
          ym = sub.y1;
        } else {
          ym = y;
        }
        const double gm = ev.fn(tm, head(ym));
        const double dt = 1e-7 * h;
        const double ta = std::max(t, tm - dt), tb = std::min(t1, tm + dt);
        const double slope = (ev.fn(tb, head(ds(tb))) - ev.fn(ta, head(ds(ta)))) / (tb - ta);
        if (!(std::abs(slope) > 0.0)) break;
        const double tn = std::clamp(tm - gm / slope, t, t1);
        if (std::abs(tn - tm) <= 1e-15 * std::max(1.0, std::abs(tm))) break;
        tm = tn;
      }
      if (ev.accept && !ev.accept(head(ym))) continue;
      step_hits.push_back({tm, ym, e});
    }
    std::sort(step_hits.begin(), step_hits.end(), [](const auto& a, const auto& b) { return a.t < b.t; });
    bool stop = false;
    for (const auto& hit : step_hits) {
      res.hits.push_back(hit);
      if (events[hit.index].terminal) {
        stop = true;
        res.t = hit.t;
        res.y = hit.y;
        break;
      }
    }

    observe(ds, t1, w.y1);
    if (stop) {
      res.status = TrajectoryStatus::Terminated;
      return res;
    }

    t = t1;
    y = w.y1;
    w.k1 = w.k7;

    if (std::hypot(y[0], y[1]) > cfg.escape_radius) {
      res.status = TrajectoryStatus::Escaped;
      break;
    }
    if (std::hypot(w.k1[0], w.k1[1]) < 1e-13) {
      if (++calm_steps >= 3) {
        res.status = TrajectoryStatus::EquilibriumReached;
        break;
      }
    } else {
      calm_steps = 0;
    }

    double fac = err > 0.0 ? 0.9 * std::pow(err, -0.2) : 5.0;
    fac = std::clamp(fac, 0.2, 5.0);
    if (last_rejected) fac = std::min(fac, 1.0);
    last_rejected = false;
    h = std::min(h * fac, cfg.max_step);
  }
  res.t = t;
  res.y = y;
  return res;
}

/// Right-hand side for the state plus monodromy matrix, optional parameter
/// sensitivity and the running integral of the Jacobian trace:
/// [x, y, M00, M01, M10, M11, s0, s1, int tr J].
struct VariationalRhs {
  const CanonicalParams* p;
  std::optional<ParamId> param;
  double sign = 1.0;

  void operator()(double, const Vec<9>& u, Vec<9>& du) const {
    const State s{u[0], u[1]};
    const State f = eval_field(*p, s);
    const Mat2 j = jacobian(*p, s);
    du[0] = sign * f.x;
    du[1] = sign * f.y;
    du[2] = sign * (j[0][0] * u[2] + j[0][1] * u[4]);
    du[3] = sign * (j[0][0] * u[3] + j[0][1] * u[5]);
    du[4] = sign * (j[1][0] * u[2] + j[1][1] * u[4]);
    du[5] = sign * (j[1][0] * u[3] + j[1][1] * u[5]);
    State fp{};
    if (param) fp = field_param_derivative(*param, s);
    du[6] = sign * (j[0][0] * u[6] + j[0][1] * u[7] + fp.x);
    du[7] = sign * (j[1][0] * u[6] + j[1][1] * u[7] + fp.y);
    du[8] = sign * (j[0][0] + j[1][1]);
  }
};

inline Vec<9> variational_initial(State s0) { return {s0.x, s0.y, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0}; }

inline Mat2 monodromy_of(const Vec<9>& u) { return {{{u[2], u[3]}, {u[4], u[5]}}}; }

template <std::size_t N>
struct Recorder {
  Trajectory* traj;
  const IntegratorConfig* cfg;

  void operator()(const DenseStep<N>& ds, double t1, const Vec<N>& y1) const {
    if (!cfg->record) return;
    const int k = cfg->samples_per_step;
    for (int i = 1; i < k; ++i) {
      const double ti = ds.t0 + ds.h * i / k;
      traj->samples.push_back({ti, head(ds(ti))});
    }
    traj->samples.push_back({t1, head(y1)});
  }
};

template <std::size_t N>
void finish(Trajectory& traj, const SolveResult<N>& res, std::span<const Event> events) {
  traj.status = res.status;
  traj.t_end = res.t;
  traj.end = head(res.y);
  traj.steps = res.steps;
  for (const auto& hit : res.hits) traj.events.push_back({hit.t, head(hit.y), events[hit.index].name});
  if (res.status == TrajectoryStatus::Terminated && !traj.samples.empty()) {
    // Drop dense samples past the terminal event and end on the event state.
    while (!traj.samples.empty() && traj.samples.back().t >= res.t) traj.samples.pop_back();
    traj.samples.push_back({res.t, head(res.y)});
  }
}

}  // namespace detail

/// Integrates the canonical field from s0 over [0, cfg.t_max] (or the reversed
/// field when cfg.backward is set).
inline Trajectory integrate(const CanonicalParams& p, State s0, const IntegratorConfig& cfg,
                            std::span<const Event> events = {}) {
  cfg.validate();
  if (!is_finite(s0)) throw Error(ErrorCode::InvalidArgument, "initial state must be finite");
  const double sign = cfg.backward ? -1.0 : 1.0;
  auto rhs = [&p, sign](double, const detail::Vec<2>& u, detail::Vec<2>& du) {
    const State f = eval_field(p, {u[0], u[1]});
    du[0] = sign * f.x;
    du[1] = sign * f.y;
  };
  Trajectory traj;
  traj.backward = cfg.backward;
  if (cfg.record) traj.samples.push_back({0.0, s0});
  const auto res = detail::solve<2>(rhs, {s0.x, s0.y}, cfg.t_max, cfg, events, detail::Recorder<2>{&traj, &cfg});
  detail::finish(traj, res, events);
  return traj;
}

struct VariationalResult {
  Trajectory trajectory;
  Mat2 monodromy = identity2();
  State param_sensitivity;  // d s(T) / d mu when a parameter was requested
  double trace_integral = 0.0;
};

/// Integrates the state together with v' = J(s(t)) v over [0, T]; the
/// fundamental matrix starts at the identity.
inline VariationalResult integrate_with_variational(const CanonicalParams& p, State s0, const IntegratorConfig& cfg,
                                                    double T, std::optional<ParamId> param = std::nullopt) {
  cfg.validate();
  if (!(T > 0.0)) throw Error(ErrorCode::InvalidArgument, "T must be positive");
  if (!is_finite(s0)) throw Error(ErrorCode::InvalidArgument, "initial state must be finite");
  detail::VariationalRhs rhs{&p, param, cfg.backward ? -1.0 : 1.0};
  VariationalResult out;
  out.trajectory.backward = cfg.backward;
  if (cfg.record) out.trajectory.samples.push_back({0.0, s0});
  const auto res =
      detail::solve<9>(rhs, detail::variational_initial(s0), T, cfg, {}, detail::Recorder<9>{&out.trajectory, &cfg});
  detail::finish(out.trajectory, res, {});
  if (res.status == TrajectoryStatus::StepFailure) throw Error(ErrorCode::StepFailure, "step size underflow");
  out.monodromy = detail::monodromy_of(res.y);
  out.param_sensitivity = {res.y[6], res.y[7]};
  out.trace_integral = res.y[8];
  return out;
}

}  // namespace kukles
