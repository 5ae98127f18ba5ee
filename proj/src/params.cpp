#include "dho/params.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "dho/errors.hpp"

namespace dho {

namespace {

constexpr double kClassicalCriticalRelTol = 1e-12;

std::string describe(const PhysParams& p) {
  std::ostringstream os;
  os.precision(17);
  os << "m=" << p.m << " gamma=" << p.gamma << " k=" << p.k << " hbar=" << p.hbar;
  return os.str();
}

ClassicalRegime classical_of(const PhysParams& p, double omega) {
  const double critical = 2.0 * p.m * omega;
  if (std::abs(p.gamma - critical) <= kClassicalCriticalRelTol * p.m * omega) {
    return ClassicalRegime::CriticallyDamped;
  }
  return p.gamma < critical ? ClassicalRegime::Underdamped : ClassicalRegime::Overdamped;
}

std::optional<QuantumRegime> quantum_of(const PhysParams& p, double omega,
                                        ClassicalRegime classical) {
  if (classical != ClassicalRegime::Underdamped) return std::nullopt;
  const double g_star = gamma_star(p.m, omega);
  if (std::abs(p.gamma - g_star) <= kCriticalRelTol * p.m * omega) return QuantumRegime::Critical;
  return p.gamma < g_star ? QuantumRegime::Oscillatory : QuantumRegime::Hyperbolic;
}

}  // namespace

std::string_view to_string(QuantumRegime r) {
  switch (r) {
    case QuantumRegime::Oscillatory: return "oscillatory";
    case QuantumRegime::Critical: return "critical";
    case QuantumRegime::Hyperbolic: return "hyperbolic";
  }
  return "unknown";
}

std::string_view to_string(ClassicalRegime r) {
  switch (r) {
    case ClassicalRegime::Underdamped: return "underdamped";
    case ClassicalRegime::CriticallyDamped: return "critically_damped";
    case ClassicalRegime::Overdamped: return "overdamped";
  }
  return "unknown";
}

double gamma_star(double m, double omega) { return (std::sqrt(5.0) - 1.0) * m * omega; }

void validate(const PhysParams& p, Validation mode) {
  auto bad = [&](const char* what) {
    throw Error(ErrorCode::InvalidParams, std::string(what) + " (" + describe(p) + ")");
  };
  if (!std::isfinite(p.m) || !(p.m > 0.0)) bad("m must be > 0");
  if (!std::isfinite(p.k) || !(p.k > 0.0)) bad("k must be > 0");
  if (!std::isfinite(p.hbar) || !(p.hbar > 0.0)) bad("hbar must be > 0");
  if (!std::isfinite(p.gamma) || !(p.gamma >= 0.0)) bad("gamma must be >= 0");
  if (mode == Validation::Quantum) {
    const double omega = std::sqrt(p.k / p.m);
    if (classical_of(p, omega) != ClassicalRegime::Underdamped) {
      throw Error(ErrorCode::Overdamped,
                  "gamma must be < 2 m omega = " + std::to_string(2.0 * p.m * omega) + " (" +
                      describe(p) + ")");
    }
  }
}

DerivedParams derive(const PhysParams& p, Validation mode) {
  validate(p, mode);
  DerivedParams d;
  d.phys = p;
  const double m = p.m;
  const double g = p.gamma;
  d.omega = std::sqrt(p.k / m);
  const double w2 = d.omega * d.omega;
  const double damp2 = g * g / (4.0 * m * m);
  d.classical_regime = classical_of(p, d.omega);
  d.quantum_regime = quantum_of(p, d.omega, d.classical_regime);
  d.gamma_star = gamma_star(m, d.omega);

  d.omega_plus = std::sqrt(w2 + damp2);
  const double ratio = d.omega_plus / d.omega;
  d.lambda = cplx(std::sqrt((1.0 + ratio) / 2.0), std::sqrt((ratio - 1.0) / 2.0));
  // (omega + i gamma/2m) / omega_plus lies in the first quadrant.
  d.beta = std::atan2(g / (2.0 * m), d.omega);

  if (d.classical_regime != ClassicalRegime::Underdamped) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    d.omega_minus = d.classical_regime == ClassicalRegime::CriticallyDamped ? 0.0 : nan;
    d.alpha = d.classical_regime == ClassicalRegime::CriticallyDamped ? 0.0 : nan;
    d.xi_squared = nan;
    return d;
  }

  d.omega_minus = std::sqrt(w2 - damp2);
  d.alpha = (w2 - damp2) / d.omega;
  if (g > 0.0) {
    const double two_m_alpha_over_g = 2.0 * m * d.alpha / g;
    d.xi_squared = 1.0 - two_m_alpha_over_g * two_m_alpha_over_g;
    d.xi = std::sqrt(cplx(d.xi_squared, 0.0));
    d.zeta = std::log(*d.xi + cplx(0.0, two_m_alpha_over_g));
  } else {
    d.xi_squared = -std::numeric_limits<double>::infinity();
  }
  return d;
}

std::pair<std::optional<QuantumRegime>, ClassicalRegime> classify(const PhysParams& p) {
  validate(p, Validation::Basic);
  const double omega = std::sqrt(p.k / p.m);
  const auto classical = classical_of(p, omega);
  return {quantum_of(p, omega, classical), classical};
}

}  // namespace dho
