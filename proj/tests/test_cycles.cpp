#include <gtest/gtest.h>

#include <cmath>
#include <iomanip>
#include <numbers>

#include "kukles/cycles.hpp"
#include "support.hpp"

using namespace kukles;

namespace {

constexpr double kPi = std::numbers::pi;

CanonicalParams zero(QPolynomial q) {
  CanonicalParams p;
  p.q = q;
  return p;
}

// Stable cycle around O after the left homoclinic loop has broken.
CanonicalParams gamma1_regime() {
  CanonicalParams p;
  p.alpha0 = 0.05;
  p.beta = 0.05;
  p.alpha2 = -0.065;
  return p;
}

// Two cycles around O and one around A (c = 1 breaks the O/A mirror symmetry).
CanonicalParams two_one_regime() {
  CanonicalParams p;
  p.c = 1.0;
  p.alpha0 = 0.068845;
  p.alpha2 = -0.011705;
  p.beta = 0.03059;
  p.gamma = -0.037775;
  return p;
}

// Successive downward crossings of the positive x-axis from r0 after a long run.
std::vector<double> crossings(const CanonicalParams& p, double r0, double t_max) {
  IntegratorConfig c;
  c.t_max = t_max;
  c.rtol = 1e-11;
  c.atol = 1e-13;
  c.record = false;
  Event ev;
  ev.name = "axis";
  ev.fn = [](double, State s) { return s.y; };
  ev.direction = -1;
  ev.accept = [](State s) { return s.x > 0.0; };
  const auto t = integrate(p, {r0, 0.0}, c, std::span<const Event>(&ev, 1));
  std::vector<double> out;
  for (const auto& e : t.events) out.push_back(e.s.x);
  return out;
}

}  // namespace

TEST(ReturnMap, HarmonicIsIdentity) {
  const CanonicalParams p = zero(QPolynomial::case2(0.0));
  const auto sec = default_section(p, Anchor::O);
  const auto rp = return_map(p, sec, 0.3);
  EXPECT_NEAR(rp.r, 0.3, 1e-8);
  EXPECT_NEAR(rp.period, 2 * kPi, 1e-8);
}

TEST(ReturnMap, CenterAnnulusIsIdentity) {
  const CanonicalParams p = zero(QPolynomial::case1(2.0));
  EXPECT_NEAR(return_map(p, default_section(p, Anchor::O), 0.3).r, 0.3, 1e-8);
  EXPECT_NEAR(return_map(p, default_section(p, Anchor::A), 0.3).r, 0.3, 1e-8);
}

TEST(ReturnMap, UnstableFocusSpiralsOut) {
  CanonicalParams p = zero(QPolynomial::case1(2.0));
  p.alpha0 = 0.05;
  for (double r : {0.01, 0.05, 0.2}) EXPECT_GT(return_map(p, default_section(p, Anchor::O), r).r, r);
}

TEST(ReturnMap, RejectsBadRadius) {
  const CanonicalParams p = zero(QPolynomial::case1(2.0));
  const auto sec = default_section(p, Anchor::O);
  EXPECT_THROW(return_map(p, sec, 0.0), Error);
  EXPECT_THROW(return_map(p, sec, -0.1), Error);
}

TEST(ReturnMap, EscapingOrbitHasNoReturn) {
  CanonicalParams p = zero(QPolynomial::case1(2.0));
  p.alpha0 = 0.5;
  const auto sec = default_section(p, Anchor::O);
  try {
    return_map(p, sec, 0.9);
    FAIL() << "expected no return";
  } catch (const Error& e) {
    EXPECT_TRUE(e.code() == ErrorCode::NoReturn || e.code() == ErrorCode::Timeout);
  }
}

TEST(ReturnMap, VariationalDerivativesMatchFiniteDifferences) {
  const CanonicalParams p = gamma1_regime();
  const auto sec = default_section(p, Anchor::O);
  CycleConfig cfg;
  for (double r : {0.3, 0.6, 0.85}) {
    const auto d = return_map_variational(p, sec, r, cfg, ParamId::Beta);
    const double h = 1e-6;
    const double fd_r = (return_map(p, sec, r + h, cfg).r - return_map(p, sec, r - h, cfg).r) / (2 * h);
    const double fd_mu = (return_map(p.with(ParamId::Beta, p.beta + h), sec, r, cfg).r -
                          return_map(p.with(ParamId::Beta, p.beta - h), sec, r, cfg).r) /
                         (2 * h);
    EXPECT_NEAR(d.dr, fd_r, 1e-4 * std::abs(fd_r));
    EXPECT_NEAR(d.dparam, fd_mu, 1e-4 * std::max(1.0, std::abs(fd_mu)));
  }
}

// Oracle: long-time integration squeezes the cycle between two monotone crossing sequences.
TEST(FindCycle, StableCycleAroundOMatchesLongTimeIntegration) {
  const CanonicalParams p = gamma1_regime();
  const auto inner = crossings(p, 0.2, 20000.0);
  const auto outer = crossings(p, 0.9, 20000.0);
  ASSERT_GT(inner.size(), 100u);
  ASSERT_GT(outer.size(), 100u);
  // The outer sequence settles to round-off; allow that much slack on the bracket.
  const double slack = 1e-9;
  const double lo = inner.back() - slack, hi = outer.back() + slack;
  ASSERT_LT(lo, hi);
  ASSERT_LT(hi - lo, 1e-3);
  EXPECT_GT(inner.back(), inner[inner.size() - 2]);
  EXPECT_LE(outer.back(), outer[outer.size() - 2] + slack);

  const auto sec = default_section(p, Anchor::O);
  const auto c = find_cycle(p, sec, 0.5 * (lo + hi));
  EXPECT_GE(c.section_coord, lo);
  EXPECT_LE(c.section_coord, hi) << std::setprecision(17) << outer.back() << " " << c.section_coord;
  EXPECT_EQ(c.stability, Stability::Stable);
  EXPECT_LT(c.multiplier, 1.0);
  EXPECT_LT(std::abs(c.residual), 1e-10);

  const auto all = count_cycles(p, sec, 1e-3, sec.reach * 0.999, 120);
  ASSERT_EQ(all.size(), 1u);
  EXPECT_NEAR(all[0].section_coord, c.section_coord, 1e-8);
}

TEST(FindCycle, CenterIsDegenerate) {
  const CanonicalParams p = zero(QPolynomial::case2(0.0));
  const auto sec = default_section(p, Anchor::O);
  for (double r : {0.1, 0.5, 1.3}) {
    try {
      find_cycle(p, sec, r);
      FAIL() << "expected Degenerate";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::Degenerate);
    }
  }
}

TEST(FindCycle, StabilityAgreesWithDisplacementSigns) {
  for (const CanonicalParams& p : {gamma1_regime(), two_one_regime()}) {
    for (Anchor which : {Anchor::O, Anchor::A}) {
      const auto sec = default_section(p, which);
      for (const auto& c : count_cycles(p, sec, 1e-3, sec.reach * 0.999, 120)) {
        const double h = 1e-3 * c.section_coord;
        const double below = return_map(p, sec, c.section_coord - h).r - (c.section_coord - h);
        const double above = return_map(p, sec, c.section_coord + h).r - (c.section_coord + h);
        if (c.stability == Stability::Stable) {
          EXPECT_LT(c.multiplier, 1.0);
          EXPECT_GT(below, 0.0);
          EXPECT_LT(above, 0.0);
        } else if (c.stability == Stability::Unstable) {
          EXPECT_GT(c.multiplier, 1.0);
          EXPECT_LT(below, 0.0);
          EXPECT_GT(above, 0.0);
        }
      }
    }
  }
}

TEST(CountCycles, SymmetricSystemHasNone) {
  CanonicalParams p = zero(QPolynomial::case1(2.0));
  p.c = 1.0;
  p.d = -0.5;
  for (Anchor which : {Anchor::O, Anchor::A}) {
    const auto sec = default_section(p, which);
    EXPECT_TRUE(count_cycles(p, sec, 1e-3, sec.reach * 0.999, 60).empty());
  }
}

TEST(CountCycles, TwoOneDistribution) {
  const CanonicalParams p = two_one_regime();
  const auto so = default_section(p, Anchor::O);
  const auto sa = default_section(p, Anchor::A);
  const auto o = count_cycles(p, so, 1e-3, so.reach * 0.999, 120);
  const auto a = count_cycles(p, sa, 1e-3, sa.reach * 0.999, 120);
  ASSERT_EQ(o.size(), 2u);
  ASSERT_EQ(a.size(), 1u);
  // Nested cycles alternate in stability.
  EXPECT_NE(o[0].stability, o[1].stability);
  EXPECT_LT(o[0].section_coord, o[1].section_coord);
}

TEST(CountCycles, InvariantUnderSeedDoubling) {
  for (const CanonicalParams& p : {gamma1_regime(), two_one_regime()}) {
    for (Anchor which : {Anchor::O, Anchor::A}) {
      const auto sec = default_section(p, which);
      const auto a = count_cycles(p, sec, 1e-3, sec.reach * 0.999, 60);
      const auto b = count_cycles(p, sec, 1e-3, sec.reach * 0.999, 120);
      ASSERT_EQ(a.size(), b.size());
      for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i].section_coord, b[i].section_coord, 1e-6);
    }
  }
}

TEST(Cycle, ResidualAndMultiplierProperties) {
  for (const CanonicalParams& p : {gamma1_regime(), two_one_regime()}) {
    for (Anchor which : {Anchor::O, Anchor::A}) {
      const auto sec = default_section(p, which);
      for (const auto& c : count_cycles(p, sec, 1e-3, sec.reach * 0.999, 120)) {
        EXPECT_LT(std::abs(c.residual), 1e-10);
        const double h = 1e-6;
        const double fd = (return_map(p, sec, c.section_coord + h).r - return_map(p, sec, c.section_coord - h).r) / (2 * h);
        EXPECT_NEAR(c.multiplier, fd, 1e-4 * std::abs(fd));
        // The monodromy also has the trivial multiplier 1 along the flow.
        EXPECT_NEAR(c.trivial_multiplier, 1.0, 1e-6);
        ASSERT_EQ(c.enclosed.size(), 1u);
        EXPECT_EQ(winding_number(c.polyline, c.enclosed[0]) != 0, true);
      }
    }
  }
}

// Small cycles near a Hopf point turn with the focus frequency.
TEST(Cycle, SmallCyclePeriodApproachesFocusPeriod) {
  CanonicalParams p;
  p.alpha0 = 0.05;
  p.alpha2 = 1.0;
  p.beta = 0.05 + 2e-5;  // just past the Hopf value, where the small unstable cycle lives
  const auto sec = default_section(p, Anchor::O);
  const auto cs = count_cycles(p, sec, 1e-3, 0.5, 120);
  ASSERT_FALSE(cs.empty());
  const auto& c = cs.front();
  ASSERT_LE(c.amplitude, 1e-2);
  const auto w = std::abs(finite_singularities(p)[0].eigenvalues.first.imag());
  EXPECT_NEAR(c.period, 2 * kPi / w, 0.01 * 2 * kPi / w);
}

// --- big cycle ------------------------------------------------------------

TEST(BigCycle, AbsentWithoutAlpha2) {
  CanonicalParams p;
  p.alpha0 = 0.05;
  p.beta = 0.05;
  EXPECT_FALSE(detect_big_cycle(p).has_value());
  // Oracle: the outer orbit keeps growing instead of settling.
  const auto sec = outer_section(p);
  const double r1 = return_map(p, sec, 50.0).r;
  EXPECT_GT(r1, 50.0);
}

TEST(BigCycle, InwardIntegrationOracle) {
  CanonicalParams p;
  p.alpha0 = 0.05;
  p.beta = 0.05;
  p.alpha2 = -0.01;
  const auto big = detect_big_cycle(p);
  ASSERT_TRUE(big.has_value());
  EXPECT_EQ(big->stability, Stability::Stable);
  ASSERT_EQ(big->enclosed.size(), 3u);
  for (const auto& s : finite_singularities(p)) EXPECT_EQ(std::abs(winding_number(big->polyline, s.location)), 1);

  // Oracle: iterate the first-return along the outer ray starting far away
  // (radius 50) and from inside; both sequences close in on the same radius.
  const auto sec = outer_section(p);
  IntegratorConfig c;
  c.t_max = 4000.0;
  c.record = false;
  Event ev;
  ev.name = "ray";
  ev.fn = [&sec](double, State s) { return sec.offset(s); };
  ev.direction = 0;
  ev.accept = [&sec](State s) { return sec.coord(s) > 0.0; };
  auto last_coord = [&](double r0) {
    const auto t = integrate(p, sec.point(r0), c, std::span<const Event>(&ev, 1));
    EXPECT_EQ(t.status, TrajectoryStatus::Completed);  // bounded: no escape
    EXPECT_GT(t.events.size(), 20u);
    return sec.coord(t.events.back().s);
  };
  const double from_out = last_coord(50.0);
  const double from_in = last_coord(0.5 * big->section_coord);
  EXPECT_NEAR(from_out, big->section_coord, 1e-4 * big->section_coord);
  EXPECT_NEAR(from_in, big->section_coord, 1e-4 * big->section_coord);
}

TEST(Anchors, DefaultSections) {
  const CanonicalParams p = zero(QPolynomial::case1(2.0));
  const auto o = default_section(p, Anchor::O);
  EXPECT_EQ(o.anchor.x, 0.0);
  EXPECT_NEAR(o.reach, 1.0, 1e-12);
  const auto a = default_section(p, Anchor::A);
  EXPECT_EQ(a.anchor.x, 2.0);
  EXPECT_NEAR(a.reach, 1.0, 1e-12);
  EXPECT_THROW(anchor_location(zero(QPolynomial::case2(0.0)), Anchor::A), Error);
}
