#include "dho/transitions.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <string>

#include "dho/errors.hpp"

namespace dho {

namespace {

constexpr cplx kI{0.0, 1.0};

bool is_odd(int n) { return (n & 1) != 0; }

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

cplx ipow(cplx base, int exponent) {
  cplx result{1.0, 0.0};
  while (exponent > 0) {
    if (exponent & 1) result *= base;
    base *= base;
    exponent >>= 1;
  }
  return result;
}

double ipow(double base, int exponent) {
  double result = 1.0;
  while (exponent > 0) {
    if (exponent & 1) result *= base;
    base *= base;
    exponent >>= 1;
  }
  return result;
}

/// (n-1)!! / sqrt(n!) for even n, with (-1)!! = 1.
double double_factorial_ratio(int n) {
  return std::exp(0.5 * std::lgamma(n + 1.0) - 0.5 * n * std::numbers::ln2 -
                  std::lgamma(n / 2.0 + 1.0));
}

/// Pieces shared by every closed form and by G_0:
///   D    = cosh(zeta + xi tau) / xi = cosh(xi tau) + i alpha t sinh(xi tau)/(xi tau)
///   R    = sinh(xi tau) / cosh(zeta + xi tau)
///   root = D^{1/2} on the branch continuous in t from D(0) = 1.
/// sqrt(xi) cosh^{-1/2}(zeta + xi tau) is 1/root on that branch.
struct Ingredients {
  cplx D;
  cplx R;
  cplx root;
};

/// D^{1/2} continued along t. For xi^2 >= 0, Re D = cosh(xi tau) >= 1 and the
/// principal root is already continuous. For xi^2 < 0, D traces the ellipse
/// cos v + i K sin v (v = |xi| tau, K > 0) and winds once per v-period; after
/// removing k = round(v/pi) half turns the remainder has Re >= 0.
cplx continuous_root(cplx D, double xi_squared, double tau) {
  if (!(xi_squared < 0.0)) return std::sqrt(D);
  const double v = std::sqrt(-xi_squared) * tau;
  const long long k = std::llround(v / std::numbers::pi);
  const bool odd = (k & 1) != 0;
  const cplx base = std::sqrt(odd ? -D : D);
  static constexpr std::array<cplx, 4> kQuarterTurns{cplx{1, 0}, cplx{0, 1}, cplx{-1, 0}, cplx{0, -1}};
  return base * kQuarterTurns[static_cast<std::size_t>(((k % 4) + 4) % 4)];
}

Ingredients explicit_ingredients(const DerivedParams& d, double t) {
  if (!d.xi || std::abs(*d.xi) == 0.0) {
    throw Error(ErrorCode::InvalidParams, "explicit closed form needs xi != 0");
  }
  const cplx xi = *d.xi;
  const double tau = d.tau(t);
  const cplx u = xi * tau;
  const cplx sh = std::sinh(u);
  const cplx ch = std::cosh(*d.zeta + u);
  Ingredients in;
  in.D = ch / xi;
  in.R = sh / ch;
  in.root = continuous_root(in.D, d.xi_squared, tau);
  return in;
}

/// cosh(u) and sinh(u)/u as functions of u^2, real for real u^2.
std::pair<double, double> even_hyperbolic(double u2) {
  if (std::abs(u2) <= 1.0) {
    double c = 1.0;
    double s = 1.0;
    double term_c = 1.0;
    double term_s = 1.0;
    for (int k = 1; k < 40; ++k) {
      term_c *= u2 / ((2.0 * k - 1.0) * (2.0 * k));
      term_s *= u2 / ((2.0 * k) * (2.0 * k + 1.0));
      c += term_c;
      s += term_s;
      if (std::abs(term_c) < 1e-18 && std::abs(term_s) < 1e-18) break;
    }
    return {c, s};
  }
  if (u2 > 0.0) {
    const double u = std::sqrt(u2);
    return {std::cosh(u), std::sinh(u) / u};
  }
  const double v = std::sqrt(-u2);
  return {std::cos(v), std::sin(v) / v};
}

Ingredients expansion_ingredients(const DerivedParams& d, double t) {
  const double tau = d.tau(t);
  const auto [c, s] = even_hyperbolic(d.xi_squared * tau * tau);
  Ingredients in;
  in.D = cplx(c, d.alpha * t * s);
  in.R = tau * s / in.D;
  in.root = continuous_root(in.D, d.xi_squared, tau);
  return in;
}

cplx assemble_c_n0(const DerivedParams& d, int n, double t, const Ingredients& in) {
  const double phase = (n + 0.5) * d.alpha * t + 0.5 * n * d.beta;
  return double_factorial_ratio(n) * std::polar(1.0, phase) * ipow(in.R, n / 2) / in.root;
}

cplx assemble_c_n2(const DerivedParams& d, int n, double t, const Ingredients& in) {
  const double phase = (n + 0.5) * d.alpha * t + (0.5 * n - 1.0) * d.beta;
  // sqrt(xi) {-sinh + n xi^2/sinh} sinh^{n/2} / cosh^{(n+3)/2} with the powers
  // distributed: [-R^{(n+2)/2} + n R^{(n-2)/2} / D^2] / root.
  cplx bracket = -ipow(in.R, (n + 2) / 2);
  if (n > 0) bracket += static_cast<double>(n) * ipow(in.R, (n - 2) / 2) / (in.D * in.D);
  return double_factorial_ratio(n) / std::numbers::sqrt2 * std::polar(1.0, phase) * bracket / in.root;
}

void check_level(int n) {
  if (n < 0) throw Error(ErrorCode::InvalidParams, "quantum number must be >= 0");
}

}  // namespace

double AmplitudeVector::norm_squared() const {
  double s = 0.0;
  for (const auto& c : coeffs) s += std::norm(c);
  return s;
}

PhaseTheta theta_phase(const PhysParams& p, int n) {
  check_level(n);
  const auto d = derive(p);
  return {n, -p.hbar * d.alpha * (n + 0.5)};
}

void coupling_rhs(const DerivedParams& d, std::span<const cplx> c, double t, std::span<cplx> dcdt) {
  const auto size = c.size();
  if (dcdt.size() != size) throw Error(ErrorCode::InvalidParams, "coupling_rhs size mismatch");
  const double g4m = d.phys.gamma / (4.0 * d.phys.m);
  const cplx rot = std::polar(1.0, 2.0 * d.alpha * t + d.beta);
  const cplx rot_conj = std::conj(rot);
  for (std::size_t n = 0; n < size; ++n) {
    cplx v{0.0, 0.0};
    if (n + 2 < size) v -= std::sqrt(double(n + 1) * double(n + 2)) * rot_conj * c[n + 2];
    if (n >= 2) v += std::sqrt(double(n) * double(n - 1)) * rot * c[n - 2];
    dcdt[n] = g4m * v;
  }
}

namespace {

/// Coupling system restricted to one parity class n = parity + 2j.
class ParityClassSystem {
 public:
  ParityClassSystem(const DerivedParams& d, int parity, int nmax)
      : g4m_(d.phys.gamma / (4.0 * d.phys.m)), alpha_(d.alpha), beta_(d.beta) {
    for (int n = parity; n <= nmax; n += 2) {
      up_.push_back(std::sqrt(double(n + 1) * double(n + 2)));
      down_.push_back(std::sqrt(double(n) * double(n - 1)));
    }
  }

  std::size_t size() const { return up_.size(); }

  void operator()(double t, const std::vector<cplx>& c, std::vector<cplx>& out) const {
    const cplx rot = std::polar(g4m_, 2.0 * alpha_ * t + beta_);
    const cplx rot_conj = std::conj(rot);
    const std::size_t last = c.size() - 1;
    for (std::size_t j = 0; j <= last; ++j) {
      cplx v{0.0, 0.0};
      if (j < last) v -= up_[j] * rot_conj * c[j + 1];
      if (j > 0) v += down_[j] * rot * c[j - 1];
      out[j] = v;
    }
  }

 private:
  double g4m_;
  double alpha_;
  double beta_;
  std::vector<double> up_;
  std::vector<double> down_;
};

/// Dormand-Prince 5(4) with FSAL and a standard step-size controller.
template <class System>
class DormandPrince {
 public:
  DormandPrince(const System& sys, double tol) : sys_(sys), tol_(tol) {
    const auto n = sys.size();
    for (auto& k : k_) k.assign(n, cplx{});
    tmp_.assign(n, cplx{});
    next_.assign(n, cplx{});
  }

  /// Advances y from t to t_end in place.
  void advance(std::vector<cplx>& y, double& t, double t_end, double& h) {
    if (!fsal_valid_) {
      sys_(t, y, k_[0]);
      fsal_valid_ = true;
    }
    while (t < t_end) {
      const bool last = t + h >= t_end;
      const double step = last ? t_end - t : h;
      if (step < 1e-13 * std::max(1.0, std::abs(t))) {
        throw Error(ErrorCode::ToleranceUnachievable,
                    "step size underflow at t = " + std::to_string(t));
      }
      const double err = attempt(y, t, step);
      if (err <= 1.0) {
        t = last ? t_end : t + step;
        y.swap(next_);
        std::swap(k_[0], k_[6]);
        const double grow = err == 0.0 ? 5.0 : std::min(5.0, 0.9 * std::pow(err, -0.2));
        // Keep the tentative step when only clipped to hit the output time.
        if (!last || step >= h) h = step * grow;
      } else {
        h = step * std::max(0.2, 0.9 * std::pow(err, -0.2));
      }
    }
  }

 private:
  double attempt(const std::vector<cplx>& y, double t, double h) {
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                            a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                            b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                            e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
    const std::size_t n = y.size();
    auto& k1 = k_[0];
    auto& k2 = k_[1];
    auto& k3 = k_[2];
    auto& k4 = k_[3];
    auto& k5 = k_[4];
    auto& k6 = k_[5];
    auto& k7 = k_[6];

    for (std::size_t i = 0; i < n; ++i) tmp_[i] = y[i] + h * a21 * k1[i];
    sys_(t + c2 * h, tmp_, k2);
    for (std::size_t i = 0; i < n; ++i) tmp_[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
    sys_(t + c3 * h, tmp_, k3);
    for (std::size_t i = 0; i < n; ++i) tmp_[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
    sys_(t + c4 * h, tmp_, k4);
    for (std::size_t i = 0; i < n; ++i)
      tmp_[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
    sys_(t + c5 * h, tmp_, k5);
    for (std::size_t i = 0; i < n; ++i)
      tmp_[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
    sys_(t + h, tmp_, k6);
    for (std::size_t i = 0; i < n; ++i)
      next_[i] = y[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
    sys_(t + h, next_, k7);

    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const cplx e = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
      const double scale = tol_ + tol_ * std::max(std::abs(y[i]), std::abs(next_[i]));
      acc += std::norm(e) / (scale * scale);
    }
    return std::sqrt(acc / static_cast<double>(n));
  }

  const System& sys_;
  double tol_;
  std::array<std::vector<cplx>, 7> k_;
  std::vector<cplx> tmp_;
  std::vector<cplx> next_;
  bool fsal_valid_ = false;
};

/// J_0(z) .. J_K(z) by Miller's backward recurrence, normalised with
/// J_0 + 2 sum J_{2k} = 1. K is large enough that J_K is below round-off.
std::vector<double> bessel_j_sequence(double z) {
  const int top = static_cast<int>(std::ceil(z + 20.0 * std::cbrt(z) + 40.0));
  std::vector<double> j(static_cast<std::size_t>(top) + 2, 0.0);
  j[top] = 1e-300;
  for (int k = top; k > 0; --k) {
    j[k - 1] = 2.0 * k / z * j[k] - j[k + 1];
    if (std::abs(j[k - 1]) > 1e250) {
      for (int i = k - 1; i <= top; ++i) j[i] *= 1e-250;
    }
  }
  double norm = j[0];
  for (int k = 2; k <= top; k += 2) norm += 2.0 * j[k];
  for (auto& v : j) v /= norm;
  j.pop_back();
  while (j.size() > 1 && std::abs(j.back()) < 1e-18) j.pop_back();
  return j;
}

/// exp(-i H dt) for the real symmetric tridiagonal H of one parity class in
/// the frame b_n = i^{-j} e^{-in(alpha t + beta/2)} c_n, n = parity + 2j:
///   H_jj = alpha n,   H_{j,j+1} = (gamma/4m) sqrt((n+1)(n+2)).
/// Works on split real/imaginary arrays; every Chebyshev coefficient
/// 2 (-i)^k J_k is purely real or purely imaginary.
class ChebyshevPropagator {
 public:
  ChebyshevPropagator(const DerivedParams& d, int parity, int nmax) {
    const double g4m = d.phys.gamma / (4.0 * d.phys.m);
    std::vector<double> diag;
    for (int n = parity; n <= nmax; n += 2) {
      diag.push_back(d.alpha * n);
      off_.push_back(n + 2 <= nmax ? g4m * std::sqrt(double(n + 1) * double(n + 2)) : 0.0);
    }
    double lo = diag[0];
    double hi = diag[0];
    for (std::size_t j = 0; j < diag.size(); ++j) {
      const double radius = (j > 0 ? off_[j - 1] : 0.0) + off_[j];
      lo = std::min(lo, diag[j] - radius);
      hi = std::max(hi, diag[j] + radius);
    }
    center_ = 0.5 * (hi + lo);
    half_width_ = std::max(0.5 * (hi - lo), 1e-300);
    diag_.resize(diag.size());
    for (std::size_t j = 0; j < diag.size(); ++j) diag_[j] = (diag[j] - center_) / half_width_;
    for (auto& o : off_) o /= half_width_;
    const auto n = diag.size();
    for (auto* v : {&pr_, &pi_, &cr_, &ci_, &sr_, &si_}) v->assign(n, 0.0);
  }

  void advance(std::vector<cplx>& b, double dt) {
    if (dt <= 0.0) return;
    const auto coeff = bessel_j_sequence(half_width_ * dt);
    const std::size_t n = b.size();
    for (std::size_t j = 0; j < n; ++j) {
      pr_[j] = b[j].real();
      pi_[j] = b[j].imag();
      sr_[j] = coeff[0] * pr_[j];
      si_[j] = coeff[0] * pi_[j];
    }
    if (coeff.size() > 1) {
      // T_1 = Hs b, weight -2i J_1.
      const double q = -2.0 * coeff[1];
      for (std::size_t j = 0; j < n; ++j) {
        double wr = diag_[j] * pr_[j] + off_[j] * (j + 1 < n ? pr_[j + 1] : 0.0);
        double wi = diag_[j] * pi_[j] + off_[j] * (j + 1 < n ? pi_[j + 1] : 0.0);
        if (j > 0) {
          wr += off_[j - 1] * pr_[j - 1];
          wi += off_[j - 1] * pi_[j - 1];
        }
        cr_[j] = wr;
        ci_[j] = wi;
        sr_[j] -= q * wi;
        si_[j] += q * wr;
      }
    }
    for (std::size_t k = 2; k < coeff.size(); ++k) {
      // T_{k+1} = 2 Hs T_k - T_{k-1}, written over T_{k-1}.
      step(n);
      const double s = 2.0 * coeff[k];
      switch (k % 4) {
        case 0: accumulate_real(n, s); break;
        case 1: accumulate_imag(n, -s); break;
        case 2: accumulate_real(n, -s); break;
        default: accumulate_imag(n, s); break;
      }
      pr_.swap(cr_);
      pi_.swap(ci_);
    }
    const cplx shift = std::polar(1.0, -center_ * dt);
    for (std::size_t j = 0; j < n; ++j) b[j] = shift * cplx(sr_[j], si_[j]);
  }

 private:
  void step(std::size_t n) {
    const double* d = diag_.data();
    const double* o = off_.data();
    const double* cr = cr_.data();
    const double* ci = ci_.data();
    double* pr = pr_.data();
    double* pi = pi_.data();
    pr[0] = 2.0 * (d[0] * cr[0] + (n > 1 ? o[0] * cr[1] : 0.0)) - pr[0];
    pi[0] = 2.0 * (d[0] * ci[0] + (n > 1 ? o[0] * ci[1] : 0.0)) - pi[0];
    for (std::size_t j = 1; j + 1 < n; ++j) {
      pr[j] = 2.0 * (o[j - 1] * cr[j - 1] + d[j] * cr[j] + o[j] * cr[j + 1]) - pr[j];
      pi[j] = 2.0 * (o[j - 1] * ci[j - 1] + d[j] * ci[j] + o[j] * ci[j + 1]) - pi[j];
    }
    if (n > 1) {
      const std::size_t j = n - 1;
      pr[j] = 2.0 * (o[j - 1] * cr[j - 1] + d[j] * cr[j]) - pr[j];
      pi[j] = 2.0 * (o[j - 1] * ci[j - 1] + d[j] * ci[j]) - pi[j];
    }
  }

  void accumulate_real(std::size_t n, double s) {
    for (std::size_t j = 0; j < n; ++j) {
      sr_[j] += s * pr_[j];
      si_[j] += s * pi_[j];
    }
  }

  void accumulate_imag(std::size_t n, double s) {
    for (std::size_t j = 0; j < n; ++j) {
      sr_[j] -= s * pi_[j];
      si_[j] += s * pr_[j];
    }
  }

  std::vector<double> diag_;
  std::vector<double> off_;
  double center_ = 0.0;
  double half_width_ = 1.0;
  std::vector<double> pr_, pi_, cr_, ci_, sr_, si_;
};

/// The coupling system restricted to the manifold reached from |0> or |2>. In the frame
/// b_n = e^{-in(alpha t + beta/2)} c_n with f_k = (2k-1)!!/sqrt((2k)!):
///   l = 0:  b_{2k} = A f_k z^k
///   l = 2:  b_{2k} = f_k z^{k-1} (P k + Q z)
/// and substituting into the coupling system gives, with g = gamma/4m,
///   z' = 2g(1 - z^2) - 2i alpha z,  A' = -g z A,
///   P' = -(5 g z + 2i alpha) P,     Q' = -g (P + Q z).
class ReducedSystem {
 public:
  ReducedSystem(const DerivedParams& d, int l)
      : g_(d.phys.gamma / (4.0 * d.phys.m)), alpha_(d.alpha), l_(l) {}

  std::size_t size() const { return l_ == 0 ? 2 : 3; }

  void operator()(double, const std::vector<cplx>& y, std::vector<cplx>& out) const {
    const cplx z = y[0];
    out[0] = 2.0 * g_ * (1.0 - z * z) - 2.0 * kI * alpha_ * z;
    if (l_ == 0) {
      out[1] = -g_ * z * y[1];
    } else {
      out[1] = -(5.0 * g_ * z + 2.0 * kI * alpha_) * y[1];
      out[2] = -g_ * (y[1] + y[2] * z);
    }
  }

 private:
  double g_;
  double alpha_;
  int l_;
};

/// Number of top levels of the retained class treated as the edge band.
std::size_t edge_band(std::size_t class_size) { return std::max<std::size_t>(4, class_size / 8); }

AmplitudeVector make_sample(double t, const std::vector<cplx>& y, int parity, int nmax, int l) {
  AmplitudeVector a;
  a.t = t;
  a.nmax = nmax;
  a.initial_l = l;
  a.coeffs.assign(static_cast<std::size_t>(nmax) + 1, cplx{});
  const std::size_t band = edge_band(y.size());
  double total = 0.0;
  double interior = 0.0;
  for (std::size_t j = 0; j < y.size(); ++j) {
    a.coeffs[parity + 2 * j] = y[j];
    const double w = std::norm(y[j]);
    total += w;
    if (j + band < y.size()) interior += w;
  }
  a.norm_defect = 1.0 - total;
  a.leaked_mass = 1.0 - interior;
  return a;
}

}  // namespace

std::vector<AmplitudeVector> integrate(const PhysParams& p, int l, int nmax, const GridSpec& t_grid,
                                       const IntegrateOptions& opts) {
  const auto d = derive(p);
  check_level(l);
  if (nmax < l + 20) {
    throw Error(ErrorCode::InvalidParams,
                "nmax must be >= l + 20 (got nmax=" + std::to_string(nmax) + ", l=" + std::to_string(l) + ")");
  }
  t_grid.validate();
  if (t_grid.min != 0.0) throw Error(ErrorCode::InvalidParams, "time grid must start at t = 0");
  if (!(opts.tol > 0.0)) throw Error(ErrorCode::InvalidParams, "tolerance must be > 0");

  const int parity = l % 2;
  const ParityClassSystem sys(d, parity, nmax);
  std::vector<cplx> y(sys.size(), cplx{});
  y[static_cast<std::size_t>(l / 2)] = 1.0;

  std::vector<AmplitudeVector> out;
  out.reserve(t_grid.count);
  out.push_back(make_sample(0.0, y, parity, nmax, l));
  if (p.gamma == 0.0) {
    for (std::size_t i = 1; i < t_grid.count; ++i) out.push_back(make_sample(t_grid.at(i), y, parity, nmax, l));
    return out;
  }

  auto check_leak = [&](const AmplitudeVector& sample) {
    if (sample.leaked_mass > opts.leak_threshold) {
      throw TruncationLeakError("leaked mass " + sci(sample.leaked_mass) + " at t = " +
                                    std::to_string(sample.t) + " with nmax = " + std::to_string(nmax),
                                2 * nmax);
    }
  };

  if (opts.method == OdeMethod::Chebyshev) {
    ChebyshevPropagator prop(d, parity, nmax);
    // b_j = i^{-j} e^{-in(alpha t + beta/2)} c_n
    auto frame = [&](std::size_t j, double t) {
      const int n = parity + 2 * static_cast<int>(j);
      return std::polar(1.0, -n * (d.alpha * t + 0.5 * d.beta) - 0.5 * std::numbers::pi * double(j));
    };
    std::vector<cplx> b(y.size());
    for (std::size_t j = 0; j < y.size(); ++j) b[j] = frame(j, 0.0) * y[j];
    double t = 0.0;
    for (std::size_t i = 1; i < t_grid.count; ++i) {
      const double target = t_grid.at(i);
      prop.advance(b, target - t);
      t = target;
      for (std::size_t j = 0; j < y.size(); ++j) y[j] = std::conj(frame(j, t)) * b[j];
      auto sample = make_sample(t, y, parity, nmax, l);
      check_leak(sample);
      out.push_back(std::move(sample));
    }
    return out;
  }

  DormandPrince<ParityClassSystem> stepper(sys, opts.tol);
  const double rate = d.phys.gamma / (4.0 * d.phys.m) * 2.0 * (nmax + 2);
  double h = std::min(t_grid.step(), 0.1 / rate);
  double t = 0.0;
  for (std::size_t i = 1; i < t_grid.count; ++i) {
    stepper.advance(y, t, t_grid.at(i), h);
    auto sample = make_sample(t, y, parity, nmax, l);
    check_leak(sample);
    out.push_back(std::move(sample));
  }
  return out;
}

int initial_truncation(int l) { return l + 40; }

std::vector<AmplitudeVector> integrate_auto(const PhysParams& p, int l, const GridSpec& t_grid,
                                            const IntegrateOptions& opts, int nmax_cap, int watch) {
  IntegrateOptions run_opts = opts;
  run_opts.leak_threshold = std::numeric_limits<double>::infinity();
  int nmax = initial_truncation(l);
  auto coarse = integrate(p, l, nmax, t_grid, run_opts);
  double last_change = 0.0;
  while (2 * nmax <= nmax_cap) {
    auto fine = integrate(p, l, 2 * nmax, t_grid, run_opts);
    const int top = watch < 0 ? nmax / 2 : std::min(watch, nmax);
    last_change = 0.0;
    for (std::size_t i = 0; i < fine.size(); ++i) {
      for (int n = 0; n <= top; ++n) {
        last_change = std::max(last_change, std::abs(fine[i].coeffs[n] - coarse[i].coeffs[n]));
      }
    }
    if (last_change <= opts.doubling_tol) return fine;
    coarse = std::move(fine);
    nmax *= 2;
  }
  throw TruncationLeakError("doubling nmax to " + std::to_string(nmax) + " still moved amplitudes by " +
                                sci(last_change) + "; cap is " + std::to_string(nmax_cap),
                            2 * nmax);
}

std::vector<AmplitudeVector> integrate_reduced(const PhysParams& p, int l, int nmax, const GridSpec& t_grid,
                                               double tol) {
  const auto d = derive(p);
  if (l != 0 && l != 2) throw Error(ErrorCode::InvalidParams, "the reduced route exists for l = 0 and l = 2 only");
  if (nmax < l) throw Error(ErrorCode::InvalidParams, "nmax must be >= l");
  t_grid.validate();
  if (t_grid.min != 0.0) throw Error(ErrorCode::InvalidParams, "time grid must start at t = 0");
  if (!(tol > 0.0)) throw Error(ErrorCode::InvalidParams, "tolerance must be > 0");

  const ReducedSystem sys(d, l);
  std::vector<cplx> y(sys.size(), cplx{});
  if (l == 0) {
    y[1] = 1.0;
  } else {
    y[1] = std::polar(std::numbers::sqrt2, -d.beta);
  }

  auto sample = [&](double t) {
    AmplitudeVector a;
    a.t = t;
    a.nmax = nmax;
    a.initial_l = l;
    a.coeffs.assign(static_cast<std::size_t>(nmax) + 1, cplx{});
    const cplx z = y[0];
    const double rate = d.alpha * t + 0.5 * d.beta;
    double f = 1.0;
    cplx z_pow{1.0, 0.0};  // z^k for l = 0, z^{k-1} for l = 2 (k >= 1)
    double total = 0.0;
    for (int k = 0; 2 * k <= nmax; ++k) {
      if (k > 0) f *= std::sqrt((2.0 * k - 1.0) / (2.0 * k));
      cplx b;
      if (l == 0) {
        if (k > 0) z_pow *= z;
        b = y[1] * f * z_pow;
      } else if (k == 0) {
        b = y[2];
      } else {
        if (k > 1) z_pow *= z;
        b = f * z_pow * (y[1] * double(k) + y[2] * z);
      }
      const int n = 2 * k;
      a.coeffs[n] = std::polar(1.0, n * rate) * b;
      total += std::norm(a.coeffs[n]);
    }
    a.norm_defect = 1.0 - total;
    a.leaked_mass = a.norm_defect;
    return a;
  };

  std::vector<AmplitudeVector> out;
  out.reserve(t_grid.count);
  out.push_back(sample(0.0));
  if (p.gamma == 0.0) {
    for (std::size_t i = 1; i < t_grid.count; ++i) out.push_back(sample(t_grid.at(i)));
    return out;
  }
  DormandPrince<ReducedSystem> stepper(sys, tol);
  double h = std::min(t_grid.step(), 1e-3);
  double t = 0.0;
  for (std::size_t i = 1; i < t_grid.count; ++i) {
    stepper.advance(y, t, t_grid.at(i), h);
    out.push_back(sample(t));
  }
  return out;
}

cplx closed_form(const DerivedParams& d, int l, int n, double t, ClosedFormRoute route) {
  check_level(n);
  if (l != 0 && l != 2) throw Error(ErrorCode::InvalidParams, "closed forms exist for l = 0 and l = 2 only");
  if (d.classical_regime != ClassicalRegime::Underdamped) {
    throw Error(ErrorCode::Overdamped, "closed forms need gamma < 2 m omega");
  }
  if (is_odd(n)) return {0.0, 0.0};
  if (d.phys.gamma == 0.0) return n == l ? cplx{1.0, 0.0} : cplx{0.0, 0.0};

  bool use_expansion = route == ClosedFormRoute::Expansion;
  if (route == ClosedFormRoute::Auto) use_expansion = std::abs(*d.xi) < kCriticalSwitchXi;
  const Ingredients in = use_expansion ? expansion_ingredients(d, t) : explicit_ingredients(d, t);
  return l == 0 ? assemble_c_n0(d, n, t, in) : assemble_c_n2(d, n, t, in);
}

cplx closed_form_c_n0(const DerivedParams& d, int n, double t) {
  return closed_form(d, 0, n, t, ClosedFormRoute::Auto);
}

cplx closed_form_c_n2(const DerivedParams& d, int n, double t) {
  return closed_form(d, 2, n, t, ClosedFormRoute::Auto);
}

cplx critical_limit_c_n0(const DerivedParams& d, int n, double t) {
  check_level(n);
  if (is_odd(n)) return {0.0, 0.0};
  const double tau = d.tau(t);
  const double phase = (n + 0.5) * d.alpha * t + 0.5 * n * d.beta;
  return double_factorial_ratio(n) * std::polar(1.0, phase) * ipow(tau, n / 2) /
         std::pow(cplx(1.0, d.alpha * t), 0.5 * (n + 1));
}

cplx critical_limit_c_n2(const DerivedParams& d, int n, double t) {
  check_level(n);
  if (is_odd(n)) return {0.0, 0.0};
  const double tau = d.tau(t);
  const double phase = (n + 0.5) * d.alpha * t + (0.5 * n - 1.0) * d.beta;
  // (-tau + n/tau) tau^{n/2}, distributed so t = 0 is regular.
  double bracket = -ipow(tau, (n + 2) / 2);
  if (n > 0) bracket += n * ipow(tau, (n - 2) / 2);
  return double_factorial_ratio(n) / std::numbers::sqrt2 * std::polar(1.0, phase) * bracket /
         std::pow(cplx(1.0, d.alpha * t), 0.5 * (n + 3));
}

double closed_form_norm(const DerivedParams& d, int l, double t, int nmax) {
  double s = 0.0;
  for (int n = 0; n <= nmax; n += 2) s += std::norm(closed_form(d, l, n, t, ClosedFormRoute::Auto));
  return s;
}

NormSeries closed_form_norm_series(const DerivedParams& d, int l, double t, double tail_tol,
                                   long long max_terms) {
  if (l != 0 && l != 2) throw Error(ErrorCode::InvalidParams, "closed forms exist for l = 0 and l = 2 only");
  if (d.classical_regime != ClassicalRegime::Underdamped) {
    throw Error(ErrorCode::Overdamped, "closed forms need gamma < 2 m omega");
  }
  NormSeries out;
  if (d.phys.gamma == 0.0 || t == 0.0) {
    out.value = 1.0;
    out.terms = l / 2 + 1;
    out.converged = true;
    return out;
  }
  const Ingredients in = std::abs(*d.xi) < kCriticalSwitchXi ? expansion_ingredients(d, t)
                                                            : explicit_ingredients(d, t);
  const double x = std::norm(in.R);
  const double inv_abs_d = 1.0 / std::abs(in.D);
  const cplx inv_d2 = 1.0 / (in.D * in.D);
  // |c_{2k}|^2 = f_k^2 |...|^2 / |D| with f_k^2 = (2k-1)!!^2 / (2k)! by recurrence.
  double f2 = 1.0;
  cplx r_pow{1.0, 0.0};       // R^k
  cplx r_pow_lower{0.0, 0.0}; // R^{k-1}
  double sum = 0.0;
  double compensation = 0.0;
  for (long long k = 0; k < max_terms; ++k) {
    if (k > 0) {
      f2 *= (2.0 * k - 1.0) / (2.0 * k);
      r_pow_lower = r_pow;
      r_pow *= in.R;
    }
    double term;
    if (l == 0) {
      term = f2 * std::norm(r_pow) * inv_abs_d;
    } else {
      const cplx bracket = -r_pow * in.R + 2.0 * double(k) * r_pow_lower * inv_d2;
      term = 0.5 * f2 * std::norm(bracket) * inv_abs_d;
    }
    // Neumaier compensated summation; up to ~1e8 terms are added.
    const double next_sum = sum + term;
    compensation += std::abs(sum) >= term ? (sum - next_sum) + term : (term - next_sum) + sum;
    sum = next_sum;
    out.terms = k + 1;
    // Bound on every later term ratio: x (2k+1)/(2k+2) for l = 0; for l = 2 the
    // bracket ratio |-R^2 + 2(k+1)/D^2| / |-R^2 + 2k/D^2| is at most
    // (b(k+1) + a)/(bk - a) once bk > a, with a = |R|^2, b = 2/|D|^2, and
    // both bounds decrease in k.
    double ratio = std::numeric_limits<double>::infinity();
    if (l == 0) {
      ratio = x;
    } else {
      const double a = x;
      const double b = 2.0 * inv_abs_d * inv_abs_d;
      if (b * double(k) > a) {
        const double q = (b * double(k + 1) + a) / (b * double(k) - a);
        ratio = x * q * q;
      }
    }
    if (ratio < 1.0) {
      out.tail_bound = term * ratio / (1.0 - ratio);
      if (out.tail_bound < tail_tol) {
        out.converged = true;
        break;
      }
    } else {
      out.tail_bound = std::numeric_limits<double>::infinity();
    }
  }
  out.value = sum + compensation;
  return out;
}

cplx generating_function(const DerivedParams& d, int l, cplx q, double t) {
  if (l != 0 && l != 2) throw Error(ErrorCode::InvalidParams, "generating functions exist for l = 0 and l = 2 only");
  if (d.classical_regime != ClassicalRegime::Underdamped) {
    throw Error(ErrorCode::Overdamped, "generating functions need gamma < 2 m omega");
  }
  if (l == 0) {
    if (d.phys.gamma == 0.0) return {1.0, 0.0};
    const Ingredients in = std::abs(*d.xi) < kCriticalSwitchXi ? expansion_ingredients(d, t)
                                                              : explicit_ingredients(d, t);
    // sqrt(xi) e^{i alpha t/2} cosh^{-1/2}(zeta + xi tau) exp[sinh(xi tau) q^2 / (2 cosh(zeta + xi tau))]
    return std::polar(1.0, 0.5 * d.alpha * t) / in.root * std::exp(0.5 * in.R * q * q);
  }

  if (std::abs(q) > 1.0) {
    throw Error(ErrorCode::SeriesDivergence, "G_2 series is only summed for |q| <= 1");
  }
  const double phase_rate = d.alpha * t + 0.5 * d.beta;
  cplx sum{0.0, 0.0};
  cplx q_pow{1.0, 0.0};
  double log_sqrt_fact = 0.0;
  int quiet = 0;
  for (int n = 0; n < 4000; n += 2) {
    if (n > 0) {
      q_pow *= q * q;
      log_sqrt_fact += 0.5 * (std::log(double(n)) + std::log(double(n - 1)));
    }
    const cplx c = closed_form_c_n2(d, n, t);
    const cplx term = q_pow * std::polar(std::exp(-log_sqrt_fact), -n * phase_rate) * c;
    sum += term;
    if (n > 2 && std::abs(term) <= 1e-17 * std::max(1e-300, std::abs(sum))) {
      if (++quiet >= 3) return sum;
    } else {
      quiet = 0;
    }
  }
  throw Error(ErrorCode::SeriesDivergence, "G_2 series did not converge");
}

int default_contour_points(int n) {
  int m = 1;
  while (m < 4 * n + 32) m <<= 1;
  return m;
}

double default_contour_radius(int n) { return std::max(kContourRadius, std::sqrt(double(n))); }

namespace {

cplx cauchy_coefficient(const DerivedParams& d, int n, double t, double radius, int points) {
  // Taylor coefficient a_n of G_0 by the trapezoid rule on |q| = radius.
  cplx sum{0.0, 0.0};
  for (int j = 0; j < points; ++j) {
    const double angle = 2.0 * std::numbers::pi * j / points;
    const cplx q = std::polar(radius, angle);
    sum += generating_function(d, 0, q, t) * std::polar(1.0, -n * angle);
  }
  return sum / static_cast<double>(points) / std::pow(radius, n);
}

}  // namespace

cplx contour_extract(const DerivedParams& d, int l, int n, double t, double radius, int points) {
  check_level(n);
  if (l != 0) throw Error(ErrorCode::InvalidParams, "contour extraction is defined for l = 0");
  if (radius <= 0.0) radius = default_contour_radius(n);
  if (!std::isfinite(radius)) throw Error(ErrorCode::InvalidParams, "contour radius must be finite");
  if (points <= 0) points = default_contour_points(n);
  if (points < 4 * n + 32 || (points & (points - 1)) != 0) {
    throw Error(ErrorCode::InvalidParams, "contour points must be a power of two >= 4n + 32");
  }
  // c_n = e^{in(alpha t + beta/2)} d^n G / dq^n / sqrt(n!) = e^{...} sqrt(n!) a_n
  const cplx factor = std::polar(std::exp(0.5 * std::lgamma(n + 1.0)), n * (d.alpha * t + 0.5 * d.beta));
  const cplx coarse = factor * cauchy_coefficient(d, n, t, radius, points);
  const cplx fine = factor * cauchy_coefficient(d, n, t, radius, 2 * points);
  if (std::abs(fine - coarse) > 1e-9) {
    throw Error(ErrorCode::ContourUnderResolved,
                "doubling the contour samples moved c_" + std::to_string(n) + " by " + sci(std::abs(fine - coarse)));
  }
  return fine;
}

}  // namespace dho
