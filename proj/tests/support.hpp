#pragma once

// Shared helpers for the unit suites: seeded generators and small numeric oracles.

#include <cmath>
#include <cstdint>
#include <random>

#include "kukles/model.hpp"

namespace kt {

/// Deterministic sampler; every suite seeds its own instance.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }

  kukles::State state(double box) { return {uniform(-box, box), uniform(-box, box)}; }

  kukles::CanonicalParams params(const kukles::QPolynomial& q, double spread) {
    kukles::CanonicalParams p;
    p.q = q;
    p.c = uniform(-spread, spread);
    p.d = uniform(-spread, spread);
    p.alpha0 = uniform(-spread, spread);
    p.alpha2 = uniform(-spread, spread);
    p.beta = uniform(-spread, spread);
    p.gamma = uniform(-spread, spread);
    return p;
  }

  kukles::QPolynomial q_shape() {
    switch (integer(0, 2)) {
      case 0: {
        double a = uniform(-3.0, 3.0);
        if (std::abs(a) < 0.2) a = 0.2;
        return kukles::QPolynomial::case1(a);
      }
      case 1: return kukles::QPolynomial::case2(uniform(-2.0, 2.0));
      default: return kukles::QPolynomial::case3();
    }
  }

 private:
  std::mt19937_64 rng_;
};

/// Central difference of the field in one parameter.
inline kukles::State field_fd(const kukles::CanonicalParams& p, kukles::ParamId id, kukles::State s, double h = 1e-6) {
  const kukles::State fp = kukles::eval_field(p.with(id, p.get(id) + h), s);
  const kukles::State fm = kukles::eval_field(p.with(id, p.get(id) - h), s);
  return {(fp.x - fm.x) / (2 * h), (fp.y - fm.y) / (2 * h)};
}

inline bool near_rel(double a, double b, double rel, double abs_floor = 0.0) {
  return std::abs(a - b) <= rel * std::max({std::abs(a), std::abs(b), 1.0}) + abs_floor;
}

}  // namespace kt
