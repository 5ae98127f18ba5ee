#include "dho/wavefunction.hpp"

#include <cmath>
#include <string>

#include "dho/errors.hpp"
#include "dho/spectrum.hpp"

namespace dho {

namespace {

/// Trapezoid weights times f(X_i) summed.
template <class F>
double trapezoid(const GridSpec& g, F&& f) {
  const double h = g.step();
  double s = 0.0;
  for (std::size_t i = 0; i < g.count; ++i) {
    const double w = (i == 0 || i + 1 == g.count) ? 0.5 : 1.0;
    s += w * f(i, g.at(i));
  }
  return s * h;
}

}  // namespace

GridSpec default_x_grid(const PhysParams& p, double t, std::size_t count) {
  validate(p, Validation::Basic);
  const double omega = std::sqrt(p.k / p.m);
  const double var0 = p.hbar / (2.0 * p.m * omega) * std::exp(-p.gamma * t / p.m);
  return GridSpec::spatial(12.0 * std::sqrt(var0), count);
}

WavePacket assemble(const PhysParams& p, const AmplitudeVector& amplitudes, const GridSpec& x_grid,
                    double theta_shift) {
  const auto d = derive(p);
  x_grid.validate();
  if (amplitudes.leaked_mass > kAssembleLeakLimit) {
    throw TruncationLeakError("amplitudes carry leaked mass " + std::to_string(amplitudes.leaked_mass) +
                                  " at nmax = " + std::to_string(amplitudes.nmax),
                              2 * amplitudes.nmax);
  }
  const double t = amplitudes.t;
  const int nmax = static_cast<int>(amplitudes.coeffs.size()) - 1;

  WavePacket w;
  w.params = p;
  w.amplitudes = amplitudes;
  w.x_grid = x_grid;
  std::vector<cplx> weight(amplitudes.coeffs.size());
  int top = 0;
  for (int n = 0; n <= nmax; ++n) {
    auto theta = theta_phase(p, n);
    theta.theta_n += theta_shift;
    w.phases.push_back(theta);
    weight[n] = amplitudes.coeffs[n] * std::polar(1.0, theta.theta_n * t / p.hbar);
    if (amplitudes.coeffs[n] != cplx{}) top = n;
  }

  w.values.resize(x_grid.count);
  for (std::size_t i = 0; i < x_grid.count; ++i) {
    const auto phi = eigenfunctions(d, top, x_grid.at(i), t);
    cplx psi{0.0, 0.0};
    for (int n = 0; n <= top; ++n) {
      if (weight[n] != cplx{}) psi += weight[n] * phi[n];
    }
    w.values[i] = psi;
  }
  return w;
}

double norm(const WavePacket& w) {
  return trapezoid(w.x_grid, [&](std::size_t i, double) { return std::norm(w.values[i]); });
}

double dispersion(const WavePacket& w) {
  const double total = norm(w);
  const double mean =
      trapezoid(w.x_grid, [&](std::size_t i, double x) { return x * std::norm(w.values[i]); }) / total;
  const double second =
      trapezoid(w.x_grid, [&](std::size_t i, double x) { return x * x * std::norm(w.values[i]); }) / total;
  return second - mean * mean;
}

}  // namespace dho
