#pragma once

#include <optional>
#include <vector>

#include "dho/grid.hpp"
#include "dho/params.hpp"

namespace dho {

/// One sample of the constrained classical system.
///
/// (x, y, rho, sigma) are the Lagrangian coordinates; (X, P, theta, N) the
/// reduced canonical set with X = sqrt2 x, theta = ln(rho/sigma)/2, N = rho sigma.
/// The Dirac brackets {X,P} = 1, {X,N} = -X give dX/dt = e^{-2 theta} P/m - gamma X/2m,
/// so P = m e^{2 theta}(dX/dt + gamma X / 2m).
struct ClassicalState {
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;
  double rho = 0.0;
  double sigma = 0.0;
  double x_dot = 0.0;
  double X = 0.0;
  double X_dot = 0.0;
  double P = 0.0;
  double theta = 0.0;
  double N = 0.0;
  double H = 0.0;
  double E = 0.0;
  double Q = 0.0;  // H - E
};

/// Initial data of the general solution.
///
/// x(t) = x0 e^{-gamma t/2m} sin(omega_- t + phi), rho(t) = rho0 e^{gamma t/2m},
/// sigma(t) = sigma0 e^{-gamma t/2m}, y(t) = y0 e^{gamma t/2m} sin(omega_- t + chi).
/// When y0 / chi are omitted they are fixed by the constraint rho x = sigma y:
/// chi = phi and y0 = rho0 x0 / sigma0.
struct InitialData {
  double x0 = 1.0;
  double phi = 0.0;
  double rho0 = 1.0;
  double sigma0 = 1.0;
  std::optional<double> y0;
  std::optional<double> chi;

  double theta0() const;
};

struct ClassicalTrajectory {
  PhysParams params;
  InitialData initial;  // with y0 and chi resolved
  std::vector<ClassicalState> samples;

  bool theta0_is_zero() const;
};

/// Checks the constraint rho x = sigma y against the supplied initial data.
///
/// chi - phi must be an integer multiple n of pi; with N > 0 and x0, y0 > 0
/// only even n survive. Returns the data with y0 and chi filled in.
/// Throws ConstraintInfeasible otherwise.
InitialData resolve_constraint(const InitialData& init);

ClassicalTrajectory solve_trajectory(const PhysParams& p, const InitialData& init,
                                     const GridSpec& grid);

/// Analytic state at one time instant.
ClassicalState evaluate_state(const DerivedParams& d, const InitialData& resolved, double t);

double hamiltonian(const ClassicalState& s, const PhysParams& p);
double mechanical_energy(const ClassicalState& s, const PhysParams& p);

/// H - E(0): the heat already present at t = 0 (zero when gamma = 0, theta(0) = 0).
double initial_heat(const ClassicalTrajectory& traj);

/// gamma * integral_0^t Xdot^2 dt' on every sample, composite Simpson on the
/// analytic Xdot with substeps no longer than `max_step_fraction` of a period.
std::vector<double> heat_generated(const ClassicalTrajectory& traj,
                                   double max_step_fraction = 1e-3);

/// Q(t) per sample. With theta(0) = 0 this is initial_heat + heat_generated,
/// an independent evaluation of H - E. Otherwise Q is defined by the ledger
/// H - E directly.
std::vector<double> heat(const ClassicalTrajectory& traj, double max_step_fraction = 1e-3);

/// |rho x - sigma y| for one sample.
double constraint_residual(const ClassicalState& s);

/// Classical RK4 integration of the Euler-Lagrange system
///   m x'' + gamma x' + k x = 0,   m y'' - gamma y' + k y = 0,
///   2m rho' = gamma rho,          2m sigma' = -gamma sigma,
/// sampled on `grid`, with steps no longer than `max_step`. Used to check the
/// analytic solution.
std::vector<ClassicalState> integrate_euler_lagrange(const PhysParams& p, const InitialData& init,
                                                     const GridSpec& grid, double max_step);

}  // namespace dho
