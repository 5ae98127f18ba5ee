#include <cmath>
#include <cstring>
#include <numbers>

#include "doctest.h"
#include "dho/errors.hpp"
#include "dho/params.hpp"

using namespace dho;

namespace {

ErrorCode code_of(const PhysParams& p, Validation mode = Validation::Quantum) {
  try {
    derive(p, mode);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::InvalidParams;
}

}  // namespace

TEST_CASE("critical damping constant for unit mass and frequency") {
  const auto d = derive({1, 0.3, 1, 1});
  CHECK(d.gamma_star == doctest::Approx(std::sqrt(5.0) - 1.0).epsilon(1e-15));
  // "1.236 m omega"
  CHECK(d.gamma_star == doctest::Approx(1.236).epsilon(1e-3));
}

TEST_CASE("undamped limit") {
  const auto d = derive({1, 0, 1, 1});
  CHECK(d.omega == 1.0);
  CHECK(d.omega_minus == 1.0);
  CHECK(d.omega_plus == 1.0);
  CHECK(d.alpha == 1.0);
  CHECK(d.beta == 0.0);
  CHECK(d.lambda == cplx(1.0, 0.0));
  CHECK_FALSE(d.xi.has_value());
  CHECK_FALSE(d.zeta.has_value());
  CHECK(d.quantum_regime == QuantumRegime::Oscillatory);
}

TEST_CASE("xi for m = omega = 1, gamma = 1") {
  const auto d = derive({1, 1, 1, 1});
  CHECK(d.alpha == doctest::Approx(0.75).epsilon(1e-15));
  REQUIRE(d.xi.has_value());
  CHECK(d.xi->real() == 0.0);
  CHECK(d.xi->imag() == doctest::Approx(std::sqrt(1.25)).epsilon(1e-15));
  const cplx xi2 = *d.xi * *d.xi;
  CHECK(std::abs(xi2 + 4.0 * d.alpha * d.alpha - 1.0) < 1e-14);
}

TEST_CASE("regime classification") {
  CHECK(classify({1, 1, 1, 1}).first == QuantumRegime::Oscillatory);
  CHECK(classify({1, std::sqrt(5.0) - 1.0, 1, 1}).first == QuantumRegime::Critical);
  CHECK(classify({1, 1.5, 1, 1}).first == QuantumRegime::Hyperbolic);
  CHECK(classify({1, 1.5, 1, 1}).second == ClassicalRegime::Underdamped);
  CHECK(classify({1, 2.0, 1, 1}).second == ClassicalRegime::CriticallyDamped);
  CHECK(classify({1, 2.5, 1, 1}).second == ClassicalRegime::Overdamped);
  CHECK_FALSE(classify({1, 2.5, 1, 1}).first.has_value());

  SUBCASE("critical band is 1e-9 m omega wide") {
    const double g = std::sqrt(5.0) - 1.0;
    CHECK(classify({1, g + 0.5e-9, 1, 1}).first == QuantumRegime::Critical);
    CHECK(classify({1, g + 2e-9, 1, 1}).first == QuantumRegime::Hyperbolic);
    CHECK(classify({1, g - 2e-9, 1, 1}).first == QuantumRegime::Oscillatory);
    CHECK(classify({2, 2 * g + 1.5e-9, 2, 1}).first == QuantumRegime::Critical);
  }
}

TEST_CASE("validation errors") {
  CHECK(code_of({0, 0, 1, 1}) == ErrorCode::InvalidParams);
  CHECK(code_of({1, -0.1, 1, 1}) == ErrorCode::InvalidParams);
  CHECK(code_of({1, 0, 0, 1}) == ErrorCode::InvalidParams);
  CHECK(code_of({1, 0, 1, 0}) == ErrorCode::InvalidParams);
  CHECK(code_of({1, std::nan(""), 1, 1}) == ErrorCode::InvalidParams);
  CHECK(code_of({1, 2.5, 1, 1}) == ErrorCode::Overdamped);
  CHECK(code_of({1, 2.0, 1, 1}) == ErrorCode::Overdamped);
  CHECK_NOTHROW(derive({1, 2.5, 1, 1}, Validation::Basic));
  CHECK(std::isnan(derive({1, 2.5, 1, 1}, Validation::Basic).alpha));
}

TEST_CASE("derived identities over a damping sweep") {
  for (double m : {0.5, 1.0, 3.0}) {
    for (double w : {0.7, 1.0, 2.0}) {
      const double k = m * w * w;
      for (int i = 1; i < 200; ++i) {
        const double g = 2.0 * m * w * i / 200.0;
        CAPTURE(m);
        CAPTURE(w);
        CAPTURE(g);
        const auto d = derive({m, g, k, 1});
        const double damp2 = g * g / (4 * m * m);
        CHECK(std::abs(d.omega_minus * d.omega_minus + damp2 - w * w) <= 1e-14 * w * w);
        CHECK(std::abs(d.omega_plus * d.omega_plus - damp2 - w * w) <= 1e-14 * w * w);
        const cplx eib = std::polar(1.0, d.beta);
        CHECK(std::abs(eib - cplx(w, g / (2 * m)) / d.omega_plus) < 1e-15);
        CHECK(std::norm(d.lambda) == doctest::Approx(d.omega_plus / w).epsilon(1e-14));
        const cplx arg = *d.xi + cplx(0, 2 * m * d.alpha / g);
        CHECK(std::abs(std::exp(*d.zeta) - arg) <= 1e-14 * std::abs(arg));
        CHECK(std::abs(d.zeta->imag()) <= std::numbers::pi);
        // Principal branch of xi.
        CHECK(d.xi->real() >= 0.0);
        if (d.xi->real() == 0.0) CHECK(d.xi->imag() >= 0.0);
        const cplx xi2 = *d.xi * *d.xi;
        CHECK(std::abs(xi2.real() - d.xi_squared) <= 1e-14 * std::max(1.0, std::abs(d.xi_squared)));
      }
    }
  }
}

TEST_CASE("xi is imaginary, zero or real in (0,1) by regime") {
  const auto a = derive({1, 1.0, 1, 1});
  CHECK(a.xi->real() == 0.0);
  CHECK(a.xi->imag() > 0.0);
  const auto b = derive({1, std::sqrt(5.0) - 1.0, 1, 1});
  CHECK(std::abs(*b.xi) < 1e-7);
  const auto c = derive({1, 1.5, 1, 1});
  CHECK(c.xi->imag() == 0.0);
  CHECK(c.xi->real() > 0.0);
  CHECK(c.xi->real() < 1.0);
}

TEST_CASE("xi squared identity down to tiny damping") {
  for (double g : {1e-6, 1e-4, 1e-2, 0.5, 1.9}) {
    const auto d = derive({1, g, 1, 1});
    const double expect = 1.0 - 4.0 * d.alpha * d.alpha / (g * g);
    CHECK(std::abs(d.xi_squared - expect) <= 1e-14 * std::abs(expect));
  }
}

TEST_CASE("gamma star solves its quadratic") {
  for (double m : {0.25, 1.0, 7.0}) {
    for (double w : {0.5, 1.0, 3.0}) {
      const double g = gamma_star(m, w);
      const double lhs = g * g / (2 * m) + g * w - 2 * m * w * w;
      CHECK(std::abs(lhs) <= 1e-12 * 2 * m * w * w);
    }
  }
}

TEST_CASE("derive is deterministic") {
  const PhysParams p{1.3, 0.77, 2.1, 0.9};
  const auto a = derive(p);
  const auto b = derive(p);
  CHECK(std::memcmp(&a.alpha, &b.alpha, sizeof(double)) == 0);
  CHECK(a.xi_squared == b.xi_squared);
  CHECK(*a.zeta == *b.zeta);
  CHECK(a.lambda == b.lambda);
}

TEST_CASE("regime names") {
  CHECK(to_string(QuantumRegime::Oscillatory) == "oscillatory");
  CHECK(to_string(ClassicalRegime::CriticallyDamped) == "critically_damped");
}
