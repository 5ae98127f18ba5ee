#pragma once

#include <complex>
#include <optional>
#include <string_view>
#include <utility>

namespace dho {

using cplx = std::complex<double>;

/// Physical inputs: mass, damping coefficient, spring constant, hbar.
struct PhysParams {
  double m = 1.0;
  double gamma = 0.0;
  double k = 1.0;
  double hbar = 1.0;
};

/// Behaviour of the transition probabilities, split at gamma* = (sqrt5 - 1) m omega.
enum class QuantumRegime { Oscillatory, Critical, Hyperbolic };
/// Classical damping class, split at gamma = 2 m omega.
enum class ClassicalRegime { Underdamped, CriticallyDamped, Overdamped };

std::string_view to_string(QuantumRegime r);
std::string_view to_string(ClassicalRegime r);

/// Every constant derived from PhysParams.
///
/// `xi` and `zeta` are absent at gamma = 0 (their definitions divide by gamma).
/// `xi_squared` is kept separately because it is real for every damping and is
/// what the branch-free closed forms consume.
struct DerivedParams {
  PhysParams phys;
  double omega = 0.0;
  double omega_minus = 0.0;
  double omega_plus = 0.0;
  double alpha = 0.0;        // omega_minus^2 / omega
  double beta = 0.0;         // arg((omega + i gamma/2m) / omega_plus), in [0, pi/2)
  cplx lambda;               // Lambda, |Lambda|^2 = omega_plus / omega
  double xi_squared = 1.0;   // 1 - 4 m^2 alpha^2 / gamma^2
  std::optional<cplx> xi;    // principal square root of xi_squared
  std::optional<cplx> zeta;  // principal log of xi + 2 i m alpha / gamma
  double gamma_star = 0.0;
  std::optional<QuantumRegime> quantum_regime;  // absent when overdamped
  ClassicalRegime classical_regime = ClassicalRegime::Underdamped;

  /// gamma t / 2m, the natural time variable of the closed forms.
  double tau(double t) const { return phys.gamma * t / (2.0 * phys.m); }
};

/// |gamma - gamma*| at or below this multiple of m*omega counts as Critical.
inline constexpr double kCriticalRelTol = 1e-9;

enum class Validation {
  /// m, k, hbar > 0 and gamma >= 0.
  Basic,
  /// Basic plus gamma < 2 m omega, required by every quantum routine.
  Quantum,
};

/// Throws Error(InvalidParams) or, in Quantum mode, Error(Overdamped).
void validate(const PhysParams& p, Validation mode = Validation::Quantum);

/// Computes all derived constants. In Basic mode an overdamped input yields
/// NaN for omega_minus, alpha and beta-dependent quantities and no xi/zeta.
DerivedParams derive(const PhysParams& p, Validation mode = Validation::Quantum);

std::pair<std::optional<QuantumRegime>, ClassicalRegime> classify(const PhysParams& p);

double gamma_star(double m, double omega);

}  // namespace dho
