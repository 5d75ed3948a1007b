#pragma once

// Kukles cubic system and its canonical form
//
//   x' = y
//   y' = q(x) + (alpha0 - beta + gamma + beta*x + alpha2*x^2)*y + (c + d*x)*y^2 + gamma*y^3
//
// with q(x) in one of three normalized shapes. Everything here is a pure
// function of its arguments.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kukles/error.hpp"

namespace kukles {

struct State {
  double x = 0.0;
  double y = 0.0;

  friend State operator+(State a, State b) { return {a.x + b.x, a.y + b.y}; }
  friend State operator-(State a, State b) { return {a.x - b.x, a.y - b.y}; }
  friend State operator*(double k, State a) { return {k * a.x, k * a.y}; }
  friend bool operator==(const State&, const State&) = default;
};

inline double norm(State s) { return std::hypot(s.x, s.y); }
inline double dot(State a, State b) { return a.x * b.x + a.y * b.y; }
inline double cross(State a, State b) { return a.x * b.y - a.y * b.x; }
inline bool is_finite(State s) { return std::isfinite(s.x) && std::isfinite(s.y); }

/// Row-major 2x2 matrix, m[row][col].
using Mat2 = std::array<std::array<double, 2>, 2>;

inline constexpr Mat2 identity2() { return {{{1.0, 0.0}, {0.0, 1.0}}}; }
inline double trace(const Mat2& m) { return m[0][0] + m[1][1]; }
inline double det(const Mat2& m) { return m[0][0] * m[1][1] - m[0][1] * m[1][0]; }
inline State apply(const Mat2& m, State v) {
  return {m[0][0] * v.x + m[0][1] * v.y, m[1][0] * v.x + m[1][1] * v.y};
}

/// Roots of lambda^2 - tr*lambda + det, ordered by real part (then imaginary part).
inline std::pair<std::complex<double>, std::complex<double>> eigenvalues(double tr, double dt) {
  const double half = 0.5 * tr;
  const double disc = half * half - dt;
  if (disc >= 0.0) {
    const double r = std::sqrt(disc);
    return {{half - r, 0.0}, {half + r, 0.0}};
  }
  const double im = std::sqrt(-disc);
  return {{half, -im}, {half, im}};
}

inline std::pair<std::complex<double>, std::complex<double>> eigenvalues(const Mat2& m) {
  return eigenvalues(trace(m), det(m));
}

// ---------------------------------------------------------------------------
// Parameter records

/// Coefficients of the general system x' = y, y' = -x + delta*y + a1*x^2 + ... + a7*y^3.
struct KuklesParams {
  double delta = 0.0;
  double a1 = 0.0;  // x^2
  double a2 = 0.0;  // x*y
  double a3 = 0.0;  // y^2
  double a4 = 0.0;  // x^3
  double a5 = 0.0;  // x^2*y
  double a6 = 0.0;  // x*y^2
  double a7 = 0.0;  // y^3

  void validate() const {
    for (double v : {delta, a1, a2, a3, a4, a5, a6, a7}) {
      if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "non-finite Kukles coefficient");
    }
  }
};

enum class QCase { One = 1, Two = 2, Three = 3 };

/// The restoring polynomial q(x) in one of the three normalized shapes:
///   One:   -x + (1 + 1/a) x^2 - (1/a) x^3 = -(1/a) x (x - 1)(x - a)
///   Two:   -x + b x^3
///   Three: -x + x^2
struct QPolynomial {
  QCase kind = QCase::Two;
  double a = 2.0;  // used by QCase::One
  double b = 0.0;  // used by QCase::Two

  static QPolynomial case1(double a) { return {QCase::One, a, 0.0}; }
  static QPolynomial case2(double b) { return {QCase::Two, 2.0, b}; }
  static QPolynomial case3() { return {QCase::Three, 2.0, 0.0}; }

  void validate() const {
    if (!std::isfinite(a) || !std::isfinite(b))
      throw Error(ErrorCode::InvalidArgument, "non-finite q(x) parameter");
    if (kind == QCase::One && a == 0.0)
      throw Error(ErrorCode::InvalidArgument, "case 1 requires a != 0");
  }

  /// q(x) = -x + quadratic()*x^2 + cubic()*x^3
  double quadratic() const {
    switch (kind) {
      case QCase::One: return 1.0 + 1.0 / a;
      case QCase::Two: return 0.0;
      case QCase::Three: return 1.0;
    }
    return 0.0;
  }
  double cubic() const {
    switch (kind) {
      case QCase::One: return -1.0 / a;
      case QCase::Two: return b;
      case QCase::Three: return 0.0;
    }
    return 0.0;
  }

  double operator()(double x) const { return x * (-1.0 + x * (quadratic() + x * cubic())); }
  double derivative(double x) const { return -1.0 + x * (2.0 * quadratic() + 3.0 * x * cubic()); }

  /// Real roots of q with multiplicities, sorted ascending.
  std::vector<std::pair<double, int>> roots() const {
    std::vector<std::pair<double, int>> out;
    switch (kind) {
      case QCase::One:
        out.push_back({0.0, 1});
        if (a == 1.0) {
          out.push_back({1.0, 2});
        } else {
          out.push_back({1.0, 1});
          out.push_back({a, 1});
        }
        break;
      case QCase::Two:
        out.push_back({0.0, 1});
        if (b > 0.0) {
          const double r = 1.0 / std::sqrt(b);
          out.push_back({-r, 1});
          out.push_back({r, 1});
        }
        break;
      case QCase::Three:
        out.push_back({0.0, 1});
        out.push_back({1.0, 1});
        break;
    }
    std::sort(out.begin(), out.end());
    return out;
  }
};

/// Named representative shapes: a in {1, -1, 2, -2}, b in {0, -1}, and case 3.
inline std::vector<std::pair<std::string, QPolynomial>> q_presets() {
  return {{"case1_a1", QPolynomial::case1(1.0)},   {"case1_a-1", QPolynomial::case1(-1.0)},
          {"case1_a2", QPolynomial::case1(2.0)},   {"case1_a-2", QPolynomial::case1(-2.0)},
          {"case2_b0", QPolynomial::case2(0.0)},   {"case2_b-1", QPolynomial::case2(-1.0)},
          {"case3", QPolynomial::case3()}};
}

enum class ParamId { Alpha0, Alpha2, Beta, Gamma, C, D };

inline std::string_view to_string(ParamId id) {
  switch (id) {
    case ParamId::Alpha0: return "alpha0";
    case ParamId::Alpha2: return "alpha2";
    case ParamId::Beta: return "beta";
    case ParamId::Gamma: return "gamma";
    case ParamId::C: return "c";
    case ParamId::D: return "d";
  }
  return "?";
}

inline std::optional<ParamId> param_from_string(std::string_view s) {
  for (ParamId id : {ParamId::Alpha0, ParamId::Alpha2, ParamId::Beta, ParamId::Gamma, ParamId::C,
                     ParamId::D}) {
    if (to_string(id) == s) return id;
  }
  return std::nullopt;
}

struct CanonicalParams {
  QPolynomial q = QPolynomial::case1(2.0);
  double c = 0.0;
  double d = 0.0;
  double alpha0 = 0.0;
  double alpha2 = 0.0;
  double beta = 0.0;
  double gamma = 0.0;

  void validate() const {
    q.validate();
    for (double v : {c, d, alpha0, alpha2, beta, gamma}) {
      if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "non-finite canonical parameter");
    }
  }

  double get(ParamId id) const {
    switch (id) {
      case ParamId::Alpha0: return alpha0;
      case ParamId::Alpha2: return alpha2;
      case ParamId::Beta: return beta;
      case ParamId::Gamma: return gamma;
      case ParamId::C: return c;
      case ParamId::D: return d;
    }
    return 0.0;
  }

  double& ref(ParamId id) {
    switch (id) {
      case ParamId::Alpha0: return alpha0;
      case ParamId::Alpha2: return alpha2;
      case ParamId::Beta: return beta;
      case ParamId::Gamma: return gamma;
      case ParamId::C: return c;
      case ParamId::D: return d;
    }
    return alpha0;
  }

  CanonicalParams with(ParamId id, double value) const {
    CanonicalParams out = *this;
    out.ref(id) = value;
    return out;
  }

  /// Coefficient of y in y': alpha0 - beta + gamma + beta*x + alpha2*x^2.
  double linear_damping(double x) const { return alpha0 - beta + gamma + x * (beta + alpha2 * x); }
};

// ---------------------------------------------------------------------------
// Field evaluation

inline State eval_field(const CanonicalParams& p, State s) {
  const double x = s.x;
  const double y = s.y;
  return {y, p.q(x) + y * (p.linear_damping(x) + y * ((p.c + p.d * x) + p.gamma * y))};
}

inline State eval_kukles(const KuklesParams& k, State s) {
  const double x = s.x;
  const double y = s.y;
  return {y, -x + k.delta * y + k.a1 * x * x + k.a2 * x * y + k.a3 * y * y + k.a4 * x * x * x +
                 k.a5 * x * x * y + k.a6 * x * y * y + k.a7 * y * y * y};
}

inline Mat2 jacobian(const CanonicalParams& p, State s) {
  const double x = s.x;
  const double y = s.y;
  const double dqdx = p.q.derivative(x) + (p.beta + 2.0 * p.alpha2 * x) * y + p.d * y * y;
  const double dqdy = p.linear_damping(x) + 2.0 * (p.c + p.d * x) * y + 3.0 * p.gamma * y * y;
  return {{{0.0, 1.0}, {dqdx, dqdy}}};
}

/// Partial derivative of the field with respect to one parameter.
inline State field_param_derivative(ParamId id, State s) {
  const double x = s.x;
  const double y = s.y;
  switch (id) {
    case ParamId::Alpha0: return {0.0, y};
    case ParamId::Alpha2: return {0.0, x * x * y};
    case ParamId::Beta: return {0.0, (x - 1.0) * y};
    case ParamId::Gamma: return {0.0, y + y * y * y};
    case ParamId::C: return {0.0, y * y};
    case ParamId::D: return {0.0, x * y * y};
  }
  return {};
}

/// P*dQ/dmu - Q*dP/dmu: the rotation of the field under a change of one parameter.
inline double rotation_determinant(ParamId id, const CanonicalParams& p, State s) {
  const State f = eval_field(p, s);
  const State df = field_param_derivative(id, s);
  return f.x * df.y - f.y * df.x;
}

/// |F(x,-y) + F(x,y)| with F = Q/P, the defect of mirror symmetry in the x-axis.
inline double reversibility_defect(const CanonicalParams& p, State s) {
  if (s.y == 0.0) throw Error(ErrorCode::OnSection, "reversibility defect needs y != 0");
  auto slope = [&](State z) {
    const State f = eval_field(p, z);
    return f.y / f.x;
  };
  return std::abs(slope({s.x, -s.y}) + slope(s));
}

/// True when every odd-in-y term vanishes, so the system is mirror-symmetric.
inline bool is_reversible(const CanonicalParams& p) {
  return p.alpha0 == 0.0 && p.alpha2 == 0.0 && p.beta == 0.0 && p.gamma == 0.0;
}

// ---------------------------------------------------------------------------
// Reduction of the general system to canonical form

/// Result of normalizing a Kukles system: canonical coefficients in the scaled
/// coordinates (X, Y) = (x, y) / scale.
struct Reduction {
  CanonicalParams params;
  double scale = 1.0;
};

inline constexpr double kRootMergeTol = 1e-9;

/// Rescales (x, y) -> (x, y)/r so a nonzero root of q lands at 1, then maps
/// the remaining coefficients:
///   beta = a2, c = a3, alpha2 = a5, d = a6, gamma = a7, alpha0 = delta + beta - gamma.
inline Reduction reduce(const KuklesParams& k) {
  k.validate();
  QPolynomial q;
  double r = 1.0;
  if (k.a4 == 0.0) {
    if (k.a1 == 0.0) {
      q = QPolynomial::case2(0.0);
    } else {
      r = 1.0 / k.a1;
      q = QPolynomial::case3();
    }
  } else {
    // Nonzero roots solve a4 x^2 + a1 x - 1 = 0; they differ by sqrt(|disc|)/|a4|.
    const double disc = k.a1 * k.a1 + 4.0 * k.a4;
    const bool merged = std::sqrt(std::abs(disc)) <= 0.5 * kRootMergeTol * std::abs(k.a1);
    if (merged) {
      r = -k.a1 / (2.0 * k.a4);
      q = QPolynomial::case1(1.0);
    } else if (disc < 0.0) {
      if (k.a1 != 0.0) {
        throw Error(ErrorCode::DegenerateQ,
                    "q(x) has no nonzero real roots but a nonzero x^2 term; no canonical shape");
      }
      q = QPolynomial::case2(k.a4);
    } else {
      const double sq = std::sqrt(disc);
      // Stable quadratic formula.
      const double t = -0.5 * (k.a1 + std::copysign(sq, k.a1 == 0.0 ? 1.0 : k.a1));
      double r1 = t / k.a4;
      double r2 = -1.0 / t;
      if (std::abs(r1) > std::abs(r2) || (std::abs(r1) == std::abs(r2) && r1 < r2)) std::swap(r1, r2);
      r = r1;
      q = QPolynomial::case1(r2 / r1);
    }
  }
  const double r2s = r * r;
  CanonicalParams p;
  p.q = q;
  p.beta = k.a2 * r;
  p.c = k.a3 * r;
  p.alpha2 = k.a5 * r2s;
  p.d = k.a6 * r2s;
  p.gamma = k.a7 * r2s;
  p.alpha0 = k.delta + p.beta - p.gamma;
  return {p, r};
}

inline CanonicalParams to_canonical(const KuklesParams& k) { return reduce(k).params; }

/// Inverse of reduce(): the general coefficients whose reduction at `scale` gives `p`.
inline KuklesParams to_kukles(const CanonicalParams& p, double scale = 1.0) {
  const double r = scale;
  KuklesParams k;
  k.delta = p.alpha0 - p.beta + p.gamma;
  k.a1 = p.q.quadratic() / r;
  k.a4 = p.q.cubic() / (r * r);
  k.a2 = p.beta / r;
  k.a3 = p.c / r;
  k.a5 = p.alpha2 / (r * r);
  k.a6 = p.d / (r * r);
  k.a7 = p.gamma / (r * r);
  return k;
}

// ---------------------------------------------------------------------------
// Singular points

enum class SingularityKind { Saddle, AntiSaddleFocus, AntiSaddleNode, Center, SaddleNode, Degenerate, Infinite };

inline std::string_view to_string(SingularityKind k) {
  switch (k) {
    case SingularityKind::Saddle: return "saddle";
    case SingularityKind::AntiSaddleFocus: return "focus";
    case SingularityKind::AntiSaddleNode: return "node";
    case SingularityKind::Center: return "center-candidate";
    case SingularityKind::SaddleNode: return "saddle-node";
    case SingularityKind::Degenerate: return "degenerate";
    case SingularityKind::Infinite: return "infinite";
  }
  return "?";
}

inline bool is_anti_saddle(SingularityKind k) {
  return k == SingularityKind::AntiSaddleFocus || k == SingularityKind::AntiSaddleNode ||
         k == SingularityKind::Center;
}

struct Singularity {
  State location;
  std::optional<double> slope;  // infinite points: direction y = slope * x
  bool vertical = false;        // infinite point in the y direction
  SingularityKind kind = SingularityKind::Degenerate;
  std::pair<std::complex<double>, std::complex<double>> eigenvalues;
  double trace = 0.0;
  double det = 0.0;
};

inline constexpr double kClassifyTol = 1e-12;

/// Labels a finite equilibrium from its linearization; `multiplicity` is the
/// multiplicity of the root of q(x).
inline SingularityKind classify(double tr, double dt, int multiplicity = 1) {
  if (std::abs(dt) < kClassifyTol) {
    if (multiplicity >= 3) return SingularityKind::Degenerate;
    if (multiplicity == 2 || std::abs(tr) >= kClassifyTol) return SingularityKind::SaddleNode;
    return SingularityKind::Degenerate;
  }
  if (dt < 0.0) return SingularityKind::Saddle;
  if (std::abs(tr) < kClassifyTol) return SingularityKind::Center;
  return tr * tr < 4.0 * dt ? SingularityKind::AntiSaddleFocus : SingularityKind::AntiSaddleNode;
}

inline std::vector<Singularity> finite_singularities(const CanonicalParams& p) {
  std::vector<Singularity> out;
  for (const auto& [x, mult] : p.q.roots()) {
    Singularity s;
    s.location = {x, 0.0};
    const Mat2 j = jacobian(p, s.location);
    s.trace = trace(j);
    s.det = det(j);
    s.eigenvalues = eigenvalues(s.trace, s.det);
    s.kind = classify(s.trace, s.det, mult);
    out.push_back(s);
  }
  return out;
}

namespace detail {

/// Distinct real roots of c3 u^3 + c2 u^2 + c1 u + c0, ascending. Leading
/// coefficients that are exactly zero lower the degree.
inline std::vector<double> real_roots_cubic(double c3, double c2, double c1, double c0) {
  std::vector<double> roots;
  auto eval = [&](double u) { return ((c3 * u + c2) * u + c1) * u + c0; };
  auto deriv = [&](double u) { return (3.0 * c3 * u + 2.0 * c2) * u + c1; };
  if (c3 != 0.0) {
    const double a = c2 / c3, b = c1 / c3, c = c0 / c3;
    const double p = b - a * a / 3.0;
    const double q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    const double disc = 0.25 * q * q + p * p * p / 27.0;
    const double shift = -a / 3.0;
    if (p == 0.0 && q == 0.0) {
      roots.push_back(shift);
    } else if (disc > 0.0) {
      const double sd = std::sqrt(disc);
      roots.push_back(std::cbrt(-0.5 * q + sd) + std::cbrt(-0.5 * q - sd) + shift);
    } else {
      const double m = 2.0 * std::sqrt(-p / 3.0);
      const double arg = std::clamp(3.0 * q / (p * m), -1.0, 1.0);
      const double phi = std::acos(arg) / 3.0;
      for (int k = 0; k < 3; ++k) roots.push_back(m * std::cos(phi - 2.0 * M_PI * k / 3.0) + shift);
    }
  } else if (c2 != 0.0) {
    const double disc = c1 * c1 - 4.0 * c2 * c0;
    if (disc >= 0.0) {
      const double sd = std::sqrt(disc);
      const double t = -0.5 * (c1 + std::copysign(sd, c1 == 0.0 ? 1.0 : c1));
      if (t != 0.0) {
        roots.push_back(t / c2);
        roots.push_back(c0 / t);
      } else {
        roots.push_back(0.0);
      }
    }
  } else if (c1 != 0.0) {
    roots.push_back(-c0 / c1);
  }
  for (double& u : roots) {
    for (int it = 0; it < 3; ++it) {
      const double dv = deriv(u);
      if (dv == 0.0) break;
      const double step = eval(u) / dv;
      if (!std::isfinite(step)) break;
      u -= step;
    }
  }
  std::sort(roots.begin(), roots.end());
  double scale = 0.0;
  for (double u : roots) scale = std::max(scale, std::abs(u));
  std::vector<double> merged;
  for (double u : roots) {
    if (!merged.empty() && std::abs(u - merged.back()) <= kRootMergeTol * std::max(scale, 1e-3)) continue;
    merged.push_back(u);
  }
  return merged;
}

}  // namespace detail

/// Real slopes u = y/x of the non-vertical singular directions at infinity:
/// roots of gamma u^3 + d u^2 + alpha2 u + s, s being the x^3 coefficient of q.
/// The vertical direction is always present and is not included here.
inline std::vector<double> infinite_directions(const CanonicalParams& p) {
  return detail::real_roots_cubic(p.gamma, p.d, p.alpha2, p.q.cubic());
}

/// Infinite singular points: one per real slope plus the vertical direction.
inline std::vector<Singularity> infinite_singularities(const CanonicalParams& p) {
  std::vector<Singularity> out;
  for (double u : infinite_directions(p)) {
    Singularity s;
    s.kind = SingularityKind::Infinite;
    s.slope = u;
    out.push_back(s);
  }
  Singularity v;
  v.kind = SingularityKind::Infinite;
  v.vertical = true;
  out.push_back(v);
  return out;
}

// ---------------------------------------------------------------------------
// First integrals of the Hamiltonian skeleton (c = d = alpha0 = alpha2 = beta = gamma = 0)

struct FirstIntegral {
  QPolynomial q;

  double operator()(State s) const {
    const double x = s.x;
    const double x2 = x * x;
    switch (q.kind) {
      case QCase::One:
        return x2 - (2.0 / 3.0) * (1.0 + 1.0 / q.a) * x2 * x + (1.0 / (2.0 * q.a)) * x2 * x2 + s.y * s.y;
      case QCase::Two:
        return x2 - 0.5 * q.b * x2 * x2 + s.y * s.y;
      case QCase::Three:
        return x2 - (2.0 / 3.0) * x2 * x + s.y * s.y;
    }
    return 0.0;
  }

  State gradient(State s) const {
    const double x = s.x;
    double hx = 0.0;
    switch (q.kind) {
      case QCase::One: hx = 2.0 * x - 2.0 * (1.0 + 1.0 / q.a) * x * x + (2.0 / q.a) * x * x * x; break;
      case QCase::Two: hx = 2.0 * x - 2.0 * q.b * x * x * x; break;
      case QCase::Three: hx = 2.0 * x - 2.0 * x * x; break;
    }
    return {hx, 2.0 * s.y};
  }

  /// Derivative of H along the flow of p.
  double lie_derivative(const CanonicalParams& p, State s) const { return dot(gradient(s), eval_field(p, s)); }
};

inline FirstIntegral first_integral(const QPolynomial& q) { return {q}; }

}  // namespace kukles
