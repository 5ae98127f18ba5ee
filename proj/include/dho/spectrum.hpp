#pragma once

#include <vector>

#include "dho/params.hpp"

namespace dho {

/// Physicists' Hermite polynomial H_n(u) by the three-term recurrence.
double hermite(int n, double u);

/// Orthonormal Hermite function h_n(u) = H_n(u) e^{-u^2/2} / sqrt(2^n n! sqrt(pi)).
///
/// The recurrence runs on the polynomial part with a running power-of-two
/// rescale, and the Gaussian is applied in log space at the end, so neither
/// large n nor large |u| overflows before the true value would.
double hermite_function(int n, double u);

/// h_0(u), ..., h_nmax(u) in one pass.
std::vector<double> hermite_functions(int nmax, double u);

/// Gauss-Hermite rule for weight e^{-u^2}: nodes ascending, weights matching.
struct GaussHermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Newton iteration on the normalized recurrence; exact for polynomials of
/// degree <= 2*count - 1.
GaussHermiteRule gauss_hermite(int count);

/// E_n(t) = hbar omega e^{-gamma t/m} (n + 1/2).
double energy_eigenvalue(const PhysParams& p, int n, double t);

/// sqrt(m omega / hbar) e^{gamma t / 2m}: maps X to the Hermite argument.
double spatial_scale(const DerivedParams& d, double t);

/// phi_n(X, t), the instantaneous energy eigenfunction, evaluated term by term:
/// complex quarter-power prefactor (principal branch), e^{gamma t/4m}
/// amplitude growth, Hermite factor and the complex Gaussian.
cplx eigenfunction(const DerivedParams& d, int n, double X, double t);
cplx eigenfunction(const PhysParams& p, int n, double X, double t);

/// phi_0(X, t), ..., phi_nmax(X, t) from a single recurrence pass.
std::vector<cplx> eigenfunctions(const DerivedParams& d, int nmax, double X, double t);

/// Default node count used by overlap() and density_variance().
int default_overlap_nodes(int n, int n_prime);
/// Smallest node count that integrates the overlap exactly.
int min_overlap_nodes(int n, int n_prime);

/// <phi_n(t)|phi_n'(t)> by Gauss-Hermite quadrature in u = spatial_scale * X.
/// nodes <= 0 selects default_overlap_nodes. Throws QuadratureUnderResolved
/// below min_overlap_nodes.
cplx overlap(const PhysParams& p, int n, int n_prime, double t, int nodes = 0);

/// Variance of X under |phi_n(X,t)|^2 by quadrature.
double density_variance(const PhysParams& p, int n, double t, int nodes = 0);

/// (hbar / m omega)(n + 1/2) e^{-gamma t/m}.
double density_variance_closed_form(const PhysParams& p, int n, double t);

}  // namespace dho
