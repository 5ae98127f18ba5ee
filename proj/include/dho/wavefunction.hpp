#pragma once

#include <vector>

#include "dho/grid.hpp"
#include "dho/params.hpp"
#include "dho/transitions.hpp"

namespace dho {

/// psi(X, t) on a spatial grid, built from an amplitude vector.
struct WavePacket {
  PhysParams params;
  AmplitudeVector amplitudes;
  std::vector<PhaseTheta> phases;  // one per retained level
  GridSpec x_grid;
  std::vector<cplx> values;
};

/// Largest leaked_mass assemble() accepts.
inline constexpr double kAssembleLeakLimit = 1e-6;

/// Symmetric grid of half-width 12 sqrt(var phi_0(t)) with `count` points.
GridSpec default_x_grid(const PhysParams& p, double t, std::size_t count = 4096);

/// psi(X, t) = sum_n c_n(t) e^{i Theta_n t / hbar} phi_n(X, t) over the levels
/// held in `amplitudes`, evaluated at t = amplitudes.t. `theta_shift` is added
/// to every Theta_n. Throws TruncationLeakError when leaked_mass exceeds
/// kAssembleLeakLimit.
WavePacket assemble(const PhysParams& p, const AmplitudeVector& amplitudes, const GridSpec& x_grid,
                    double theta_shift = 0.0);

/// Trapezoid integral of |psi|^2 over the grid.
double norm(const WavePacket& w);

/// Variance of X under |psi|^2 / norm, trapezoid rule.
double dispersion(const WavePacket& w);

}  // namespace dho
