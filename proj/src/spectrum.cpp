#include "dho/spectrum.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "dho/errors.hpp"

namespace dho {

namespace {

constexpr double kRescaleThreshold = 0x1p+500;
constexpr double kRescaleFactor = 0x1p-500;
const double kLogRescale = 500.0 * std::numbers::ln2;

/// Polynomial part of h_n(u), i.e. h_n(u) e^{u^2/2} = value * e^{log_scale}.
struct ScaledValue {
  double value = 0.0;
  double log_scale = 0.0;
};

ScaledValue hermite_poly_part(int n, double u) {
  const double h0 = 1.0 / std::sqrt(std::sqrt(std::numbers::pi));
  if (n == 0) return {h0, 0.0};
  double prev = h0;
  double cur = std::numbers::sqrt2 * u * h0;
  double log_scale = 0.0;
  for (int k = 1; k < n; ++k) {
    const double next = std::sqrt(2.0 / (k + 1)) * u * cur - std::sqrt(double(k) / (k + 1)) * prev;
    prev = cur;
    cur = next;
    if (std::abs(cur) > kRescaleThreshold) {
      cur *= kRescaleFactor;
      prev *= kRescaleFactor;
      log_scale += kLogRescale;
    }
  }
  return {cur, log_scale};
}

double sign_of(double x) { return x < 0.0 ? -1.0 : 1.0; }

}  // namespace

double hermite(int n, double u) {
  if (n < 0) throw Error(ErrorCode::InvalidParams, "hermite order must be >= 0");
  if (n == 0) return 1.0;
  double prev = 1.0;
  double cur = 2.0 * u;
  for (int k = 1; k < n; ++k) {
    const double next = 2.0 * u * cur - 2.0 * k * prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

double hermite_function(int n, double u) {
  if (n < 0) throw Error(ErrorCode::InvalidParams, "hermite order must be >= 0");
  const auto s = hermite_poly_part(n, u);
  if (s.value == 0.0) return 0.0;
  return sign_of(s.value) * std::exp(std::log(std::abs(s.value)) + s.log_scale - 0.5 * u * u);
}

std::vector<double> hermite_functions(int nmax, double u) {
  std::vector<double> out(static_cast<std::size_t>(nmax) + 1);
  for (int n = 0; n <= nmax; ++n) out[n] = hermite_function(n, u);
  return out;
}

GaussHermiteRule gauss_hermite(int count) {
  if (count < 1) throw Error(ErrorCode::InvalidParams, "Gauss-Hermite rule needs >= 1 node");
  GaussHermiteRule rule;
  rule.nodes.assign(count, 0.0);
  rule.weights.assign(count, 0.0);
  const double pim4 = 1.0 / std::sqrt(std::sqrt(std::numbers::pi));
  const int half = (count + 1) / 2;
  double z = 0.0;
  for (int i = 0; i < half; ++i) {
    // Initial guesses for the largest roots first, then extrapolate inward.
    if (i == 0) {
      z = std::sqrt(2.0 * count + 1) - 1.85575 * std::pow(2.0 * count + 1, -0.16667);
    } else if (i == 1) {
      z -= 1.14 * std::pow(double(count), 0.426) / z;
    } else if (i == 2) {
      z = 1.86 * z - 0.86 * rule.nodes[count - 1];
    } else if (i == 3) {
      z = 1.91 * z - 0.91 * rule.nodes[count - 2];
    } else {
      z = 2.0 * z - rule.nodes[count - 1 - (i - 2)];
    }
    double derivative = 0.0;
    bool converged = false;
    for (int iter = 0; iter < 200; ++iter) {
      double p1 = pim4;
      double p2 = 0.0;
      for (int j = 0; j < count; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = z * std::sqrt(2.0 / (j + 1)) * p2 - std::sqrt(double(j) / (j + 1)) * p3;
      }
      derivative = std::sqrt(2.0 * count) * p2;
      const double dz = p1 / derivative;
      z -= dz;
      if (std::abs(dz) <= 1e-15 * std::max(1.0, std::abs(z))) {
        converged = true;
        break;
      }
    }
    if (!converged) {
      throw Error(ErrorCode::QuadratureUnderResolved,
                  "Gauss-Hermite Newton iteration did not converge for " + std::to_string(count) +
                      " nodes");
    }
    rule.nodes[count - 1 - i] = z;
    rule.nodes[i] = -z;
    rule.weights[count - 1 - i] = rule.weights[i] = 2.0 / (derivative * derivative);
  }
  if (count % 2 == 1) rule.nodes[count / 2] = 0.0;
  return rule;
}

double energy_eigenvalue(const PhysParams& p, int n, double t) {
  if (n < 0) throw Error(ErrorCode::InvalidParams, "quantum number must be >= 0");
  validate(p, Validation::Basic);
  const double omega = std::sqrt(p.k / p.m);
  return p.hbar * omega * std::exp(-p.gamma * t / p.m) * (n + 0.5);
}

double spatial_scale(const DerivedParams& d, double t) {
  const auto& p = d.phys;
  return std::sqrt(p.m * d.omega / p.hbar) * std::exp(p.gamma * t / (2.0 * p.m));
}

cplx eigenfunction(const DerivedParams& d, int n, double X, double t) {
  if (n < 0) throw Error(ErrorCode::InvalidParams, "quantum number must be >= 0");
  const auto& p = d.phys;
  const double m = p.m;
  const double w = d.omega;
  const double g = p.gamma;
  const double u = spatial_scale(d, t) * X;

  // ((w - i g/2m) / (w + i g/2m))^{n/4}, principal branch; modulus one.
  const cplx ratio = cplx(w, -g / (2.0 * m)) / cplx(w, g / (2.0 * m));
  const double prefactor_phase = 0.25 * n * std::arg(ratio);

  // exp[g t/4m - (m/2hbar)(w - i g/2m) e^{g t/m} X^2]; the real part of the
  // Gaussian exponent equals -u^2/2 and is merged with the Hermite factor below.
  const double growth = std::exp(g * t / m);
  const double gauss_phase = (m / (2.0 * p.hbar)) * (g / (2.0 * m)) * growth * X * X;

  // 1/sqrt(2^n n!) (m w / pi hbar)^{1/4} H_n(u) e^{-u^2/2}
  //   = (m w / hbar)^{1/4} h_n(u), with h_n from the scaled recurrence.
  const auto poly = hermite_poly_part(n, u);
  if (poly.value == 0.0) return {0.0, 0.0};
  const double log_mag = 0.25 * std::log(m * w / p.hbar) + g * t / (4.0 * m) +
                         std::log(std::abs(poly.value)) + poly.log_scale - 0.5 * u * u;
  return std::polar(sign_of(poly.value) * std::exp(log_mag), prefactor_phase + gauss_phase);
}

std::vector<cplx> eigenfunctions(const DerivedParams& d, int nmax, double X, double t) {
  if (nmax < 0) throw Error(ErrorCode::InvalidParams, "nmax must be >= 0");
  const auto& p = d.phys;
  const double m = p.m;
  const double w = d.omega;
  const double g = p.gamma;
  const double u = spatial_scale(d, t) * X;
  const double quarter_arg = 0.25 * std::arg(cplx(w, -g / (2.0 * m)) / cplx(w, g / (2.0 * m)));
  const double gauss_phase = (m / (2.0 * p.hbar)) * (g / (2.0 * m)) * std::exp(g * t / m) * X * X;
  const double log_common = 0.25 * std::log(m * w / p.hbar) + g * t / (4.0 * m) - 0.5 * u * u;

  std::vector<cplx> out(static_cast<std::size_t>(nmax) + 1);
  auto emit = [&](int n, double value, double log_scale) {
    if (value == 0.0) {
      out[n] = {0.0, 0.0};
      return;
    }
    const double mag = std::exp(log_common + log_scale + std::log(std::abs(value)));
    out[n] = std::polar(sign_of(value) * mag, n * quarter_arg + gauss_phase);
  };
  double prev = 1.0 / std::sqrt(std::sqrt(std::numbers::pi));
  double log_scale = 0.0;
  emit(0, prev, 0.0);
  if (nmax == 0) return out;
  double cur = std::numbers::sqrt2 * u * prev;
  emit(1, cur, 0.0);
  for (int k = 1; k < nmax; ++k) {
    const double next = std::sqrt(2.0 / (k + 1)) * u * cur - std::sqrt(double(k) / (k + 1)) * prev;
    prev = cur;
    cur = next;
    if (std::abs(cur) > kRescaleThreshold) {
      cur *= kRescaleFactor;
      prev *= kRescaleFactor;
      log_scale += kLogRescale;
    }
    emit(k + 1, cur, log_scale);
  }
  return out;
}

cplx eigenfunction(const PhysParams& p, int n, double X, double t) {
  return eigenfunction(derive(p), n, X, t);
}

int default_overlap_nodes(int n, int n_prime) { return 2 * std::max(n, n_prime) + 40; }

int min_overlap_nodes(int n, int n_prime) { return (n + n_prime) / 2 + 1; }

cplx overlap(const PhysParams& p, int n, int n_prime, double t, int nodes) {
  if (n < 0 || n_prime < 0) throw Error(ErrorCode::InvalidParams, "quantum numbers must be >= 0");
  if (nodes <= 0) nodes = default_overlap_nodes(n, n_prime);
  if (nodes < min_overlap_nodes(n, n_prime)) {
    throw Error(ErrorCode::QuadratureUnderResolved,
                std::to_string(nodes) + " Gauss-Hermite nodes cannot resolve the <" +
                    std::to_string(n) + "|" + std::to_string(n_prime) + "> overlap (need >= " +
                    std::to_string(min_overlap_nodes(n, n_prime)) + ")");
  }
  const auto d = derive(p);
  const double scale = spatial_scale(d, t);
  const auto rule = gauss_hermite(nodes);
  auto term = [&](std::size_t i) {
    const double u = rule.nodes[i];
    const double X = u / scale;
    // Split e^{u^2} between the two factors to stay in range.
    const double half_weight = std::exp(0.5 * u * u);
    const cplx a = eigenfunction(d, n, X, t) * half_weight;
    const cplx b = eigenfunction(d, n_prime, X, t) * half_weight;
    return rule.weights[i] * std::conj(a) * b;
  };
  // Mirrored nodes are added pairwise so odd integrands cancel exactly.
  const std::size_t count = rule.nodes.size();
  cplx sum{0.0, 0.0};
  for (std::size_t i = 0; i < count / 2; ++i) sum += term(i) + term(count - 1 - i);
  if (count % 2) sum += term(count / 2);
  return sum / scale;
}

double density_variance(const PhysParams& p, int n, double t, int nodes) {
  if (n < 0) throw Error(ErrorCode::InvalidParams, "quantum number must be >= 0");
  if (nodes <= 0) nodes = default_overlap_nodes(n, n) + 2;
  if (nodes < min_overlap_nodes(n + 1, n + 1)) {
    throw Error(ErrorCode::QuadratureUnderResolved,
                std::to_string(nodes) + " nodes cannot resolve the second moment of level " +
                    std::to_string(n));
  }
  const auto d = derive(p);
  const double scale = spatial_scale(d, t);
  const auto rule = gauss_hermite(nodes);
  double norm = 0.0;
  double second = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const double u = rule.nodes[i];
    const double X = u / scale;
    const double density = std::norm(eigenfunction(d, n, X, t) * std::exp(0.5 * u * u));
    norm += rule.weights[i] * density;
    second += rule.weights[i] * X * X * density;
  }
  // Mean is zero by parity.
  return second / norm;
}

double density_variance_closed_form(const PhysParams& p, int n, double t) {
  validate(p, Validation::Basic);
  const double omega = std::sqrt(p.k / p.m);
  return p.hbar / (p.m * omega) * (n + 0.5) * std::exp(-p.gamma * t / p.m);
}

}  // namespace dho
