#pragma once

#include <span>
#include <vector>

#include "dho/grid.hpp"
#include "dho/params.hpp"

namespace dho {

/// Truncated amplitude vector c_0..c_nmax at one time.
///
/// `leaked_mass` is 1 - sum |c_n|^2 over the levels below the truncation edge
/// band, i.e. the probability that is either lost to round-off or sits where
/// the closed truncation c_{nmax+2} = 0 distorts the dynamics.
/// `norm_defect` is 1 - sum over every retained level.
struct AmplitudeVector {
  double t = 0.0;
  std::vector<cplx> coeffs;
  int nmax = 0;
  int initial_l = 0;
  double leaked_mass = 0.0;
  double norm_defect = 0.0;

  double norm_squared() const;
};

/// Theta_n = -hbar (omega_-^2 / omega)(n + 1/2): the dynamical phase left after
/// the geometric phase cancels against the N' term.
struct PhaseTheta {
  int n = 0;
  double theta_n = 0.0;
};

PhaseTheta theta_phase(const PhysParams& p, int n);

/// Closed forms switch to their critical-point expansion below this |xi|.
inline constexpr double kCriticalSwitchXi = 1e-3;

/// Right side of the differential-difference system
///   dc_n/dt = (gamma/4m) [ -sqrt((n+1)(n+2)) e^{-i(2 alpha t + beta)} c_{n+2}
///                          + sqrt(n(n-1))   e^{+i(2 alpha t + beta)} c_{n-2} ]
/// with c_{-2} = c_{nmax+2} = 0. `c` and `dcdt` hold levels 0..nmax.
void coupling_rhs(const DerivedParams& d, std::span<const cplx> c, double t, std::span<cplx> dcdt);

/// How the truncated coupling system is propagated.
///
/// DormandPrince integrates the system as written with an adaptive embedded
/// 5(4) pair. Chebyshev first moves to b_n = e^{-in(alpha t + beta/2)} c_n,
/// where the generator becomes the constant Hermitian tridiagonal matrix
/// alpha n delta_{n,n'} + i-phased sqrt((n+1)(n+2)) gamma/4m couplings, and then
/// applies exp(-i H dt) by a Chebyshev expansion. The second is unitary to
/// round-off and its cost does not grow with the stiffness of the top levels.
enum class OdeMethod { DormandPrince, Chebyshev };

struct IntegrateOptions {
  OdeMethod method = OdeMethod::Chebyshev;
  double tol = 1e-10;
  /// TruncationLeak is raised when leaked_mass exceeds this at any sample.
  double leak_threshold = 1e-6;
  /// integrate_auto accepts a truncation once doubling it moves no watched
  /// amplitude by more than this.
  double doubling_tol = 1e-8;
};

/// Solution of the coupling system from c_n(0) = delta_{nl}, reported on every
/// point of `t_grid` (which must start at 0). Only the parity class of l is
/// propagated; the other class is identically zero. Throws TruncationLeakError,
/// or ToleranceUnachievable when the Dormand-Prince step underflows.
std::vector<AmplitudeVector> integrate(const PhysParams& p, int l, int nmax, const GridSpec& t_grid,
                                       const IntegrateOptions& opts = {});

/// Smallest truncation tried by integrate_auto for initial level l.
int initial_truncation(int l);
inline constexpr int kMaxTruncation = 32768;

/// Runs integrate() at nmax = l + 40, 2(l + 40), ... and returns the first
/// run whose predecessor at half the truncation agrees with it to
/// opts.doubling_tol on every sample and every watched level n <= watch
/// (watch < 0 means half the smaller truncation). The edge-band leak check is
/// not applied to these runs; convergence is judged by the doubling alone.
/// Throws TruncationLeakError when the next doubling would pass `nmax_cap`.
std::vector<AmplitudeVector> integrate_auto(const PhysParams& p, int l, const GridSpec& t_grid,
                                            const IntegrateOptions& opts = {},
                                            int nmax_cap = kMaxTruncation, int watch = -1);

/// The coupling system integrated on its invariant manifold: starting from
/// |0> or |2> the amplitudes keep the shape A f_k z^k (l = 0) or
/// f_k z^{k-1}(P k + Q z) (l = 2), f_k = (2k-1)!!/sqrt((2k)!), and the system
/// reduces to a handful of complex ODEs solved by Dormand-Prince at `tol`.
/// No truncation is involved; levels 0..nmax are reported, and leaked_mass
/// and norm_defect both give 1 minus the reported mass.
std::vector<AmplitudeVector> integrate_reduced(const PhysParams& p, int l, int nmax, const GridSpec& t_grid,
                                               double tol = 1e-10);

/// c_{n,0}(t) for the ground-state initial condition, closed form.
cplx closed_form_c_n0(const DerivedParams& d, int n, double t);
/// c_{n,2}(t) for the second-excited initial condition, closed form.
cplx closed_form_c_n2(const DerivedParams& d, int n, double t);

/// The xi -> 0 forms exactly as they stand at xi = 0, using the actual
/// alpha, beta, gamma of `d`.
cplx critical_limit_c_n0(const DerivedParams& d, int n, double t);
cplx critical_limit_c_n2(const DerivedParams& d, int n, double t);

/// Route selector for the closed forms, exposed for the continuity checks.
enum class ClosedFormRoute {
  Auto,       // Hyperbolic/trigonometric form above the switch, expansion below.
  Explicit,   // Always the sinh/cosh form in xi and zeta (requires xi != 0).
  Expansion,  // Always the regular expansion in xi^2 (valid for every xi).
};
cplx closed_form(const DerivedParams& d, int l, int n, double t, ClosedFormRoute route);

/// sum_n |c_{n,l}(t)|^2 over n = 0..nmax from the closed form.
double closed_form_norm(const DerivedParams& d, int l, double t, int nmax);

struct NormSeries {
  double value = 0.0;
  long long terms = 0;     // even levels summed
  double tail_bound = 0.0; // bound on the omitted remainder
  bool converged = false;
};

/// sum_n |c_{n,l}(t)|^2 extended until the geometric tail bound drops below
/// `tail_tol` or `max_terms` even levels have been added. Terms are generated
/// by recurrence, so each costs a few flops.
NormSeries closed_form_norm_series(const DerivedParams& d, int l, double t, double tail_tol = 1e-13,
                                   long long max_terms = 100'000'000);

/// G_l(q, t) = sum_n q^n e^{-in(alpha t + beta/2)} c_{n,l}(t) / sqrt(n!).
/// l = 0 is the closed Gaussian in q; l = 2 is summed from the c_{n,2} series
/// and is guarded to |q| <= 1 (SeriesDivergence otherwise).
cplx generating_function(const DerivedParams& d, int l, cplx q, double t);

inline constexpr double kContourRadius = 0.5;
int default_contour_points(int n);

/// max(kContourRadius, sqrt(n)). The trapezoid rule loses about
/// eps sqrt(n!) max|G_0| / r^n to round-off; at r = sqrt(n) that factor stays
/// of order one, while a fixed r = 1/2 costs ~1e-8 already at n = 12.
double default_contour_radius(int n);

/// c_{n,0}(t) recovered from G_0 by the Cauchy integral on |q| = radius with
/// `points` equally spaced samples. radius <= 0 picks default_contour_radius
/// and points <= 0 picks default_contour_points. Throws ContourUnderResolved
/// when doubling the sample count moves the result by more than 1e-9.
cplx contour_extract(const DerivedParams& d, int l, int n, double t,
                     double radius = 0.0, int points = 0);

}  // namespace dho
