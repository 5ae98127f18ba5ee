#include "dho/classical.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "dho/errors.hpp"

namespace dho {

namespace {

constexpr double kPhaseTol = 1e-12;

void fill_canonical(ClassicalState& s, const PhysParams& p) {
  s.X = std::numbers::sqrt2 * s.x;
  s.X_dot = std::numbers::sqrt2 * s.x_dot;
  s.P = p.m * std::exp(2.0 * s.theta) * (s.X_dot + p.gamma * s.X / (2.0 * p.m));
  s.H = hamiltonian(s, p);
  s.E = mechanical_energy(s, p);
  s.Q = s.H - s.E;
}

}  // namespace

double InitialData::theta0() const { return 0.5 * std::log(rho0 / sigma0); }

bool ClassicalTrajectory::theta0_is_zero() const { return initial.rho0 == initial.sigma0; }

InitialData resolve_constraint(const InitialData& init) {
  if (!(init.x0 > 0.0)) throw Error(ErrorCode::InvalidParams, "x0 must be > 0");
  if (!(init.rho0 * init.sigma0 > 0.0)) {
    throw Error(ErrorCode::ConstraintInfeasible, "N = rho0 sigma0 must be > 0");
  }
  InitialData out = init;
  const double y0_matched = init.rho0 * init.x0 / init.sigma0;
  long long half_turns = 0;
  if (init.chi) {
    const double turns = (*init.chi - init.phi) / std::numbers::pi;
    half_turns = std::llround(turns);
    if (std::abs(turns - static_cast<double>(half_turns)) > kPhaseTol * std::max(1.0, std::abs(turns))) {
      throw Error(ErrorCode::ConstraintInfeasible,
                  "chi - phi must be an integer multiple of pi for rho x = sigma y to hold");
    }
    if (half_turns % 2 != 0) {
      // rho0 x0 = (-1)^n sigma0 y0 with rho0 sigma0 > 0 forces y0 < 0.
      throw Error(ErrorCode::ConstraintInfeasible,
                  "chi = phi + (2n+1) pi requires y0 < 0, incompatible with N > 0 and x0, y0 > 0");
    }
  } else {
    out.chi = init.phi;
  }
  if (init.y0) {
    if (!(*init.y0 > 0.0)) throw Error(ErrorCode::InvalidParams, "y0 must be > 0");
    if (std::abs(*init.y0 - y0_matched) > kPhaseTol * std::abs(y0_matched)) {
      throw Error(ErrorCode::ConstraintInfeasible,
                  "y0 must equal rho0 x0 / sigma0 = " + std::to_string(y0_matched));
    }
  } else {
    if (!(y0_matched > 0.0)) throw Error(ErrorCode::ConstraintInfeasible, "y0 = rho0 x0 / sigma0 must be > 0");
    out.y0 = y0_matched;
  }
  return out;
}

ClassicalState evaluate_state(const DerivedParams& d, const InitialData& r, double t) {
  const auto& p = d.phys;
  const double decay = p.gamma / (2.0 * p.m);
  const double down = std::exp(-decay * t);
  const double up = std::exp(decay * t);
  const double wm = d.omega_minus;
  const double sx = std::sin(wm * t + r.phi);
  const double cx = std::cos(wm * t + r.phi);

  ClassicalState s;
  s.t = t;
  s.x = r.x0 * down * sx;
  s.x_dot = r.x0 * down * (wm * cx - decay * sx);
  s.y = *r.y0 * up * std::sin(wm * t + *r.chi);
  s.rho = r.rho0 * up;
  s.sigma = r.sigma0 * down;
  s.theta = r.theta0() + decay * t;
  s.N = r.rho0 * r.sigma0;
  fill_canonical(s, p);
  return s;
}

ClassicalTrajectory solve_trajectory(const PhysParams& p, const InitialData& init,
                                     const GridSpec& grid) {
  const auto d = derive(p, Validation::Quantum);
  grid.validate();
  ClassicalTrajectory traj;
  traj.params = p;
  traj.initial = resolve_constraint(init);
  traj.samples.reserve(grid.count);
  for (std::size_t i = 0; i < grid.count; ++i) {
    traj.samples.push_back(evaluate_state(d, traj.initial, grid.at(i)));
  }
  return traj;
}

double hamiltonian(const ClassicalState& s, const PhysParams& p) {
  const double w2 = p.k / p.m;
  const double wm2 = w2 - p.gamma * p.gamma / (4.0 * p.m * p.m);
  const double e2 = std::exp(2.0 * s.theta);
  return s.P * s.P / (2.0 * p.m * e2) + 0.5 * p.m * wm2 * e2 * s.X * s.X +
         p.gamma / (2.0 * p.m) * s.N;
}

double mechanical_energy(const ClassicalState& s, const PhysParams& p) {
  const double v = std::exp(-2.0 * s.theta) * s.P - 0.5 * p.gamma * s.X;
  return v * v / (2.0 * p.m) + 0.5 * p.k * s.X * s.X;
}

double initial_heat(const ClassicalTrajectory& traj) {
  const auto d = derive(traj.params, Validation::Quantum);
  const auto s0 = evaluate_state(d, traj.initial, 0.0);
  return s0.H - s0.E;
}

std::vector<double> heat_generated(const ClassicalTrajectory& traj, double max_step_fraction) {
  const auto d = derive(traj.params, Validation::Quantum);
  const auto& r = traj.initial;
  const double decay = traj.params.gamma / (2.0 * traj.params.m);
  const double wm = d.omega_minus;
  auto xdot_sq = [&](double t) {
    const double v = std::numbers::sqrt2 * r.x0 * std::exp(-decay * t) *
                     (wm * std::cos(wm * t + r.phi) - decay * std::sin(wm * t + r.phi));
    return v * v;
  };
  const double period = 2.0 * std::numbers::pi / wm;
  const double max_step = max_step_fraction * period;

  std::vector<double> out(traj.samples.size(), 0.0);
  double accumulated = 0.0;
  double t_prev = 0.0;
  for (std::size_t i = 0; i < traj.samples.size(); ++i) {
    const double t = traj.samples[i].t;
    if (t != t_prev) {
      // Composite Simpson on [t_prev, t] with an even number of panels.
      auto panels = static_cast<long long>(std::ceil(std::abs(t - t_prev) / max_step));
      if (panels < 2) panels = 2;
      if (panels % 2) ++panels;
      const double h = (t - t_prev) / static_cast<double>(panels);
      double sum = xdot_sq(t_prev) + xdot_sq(t);
      for (long long j = 1; j < panels; ++j) {
        sum += (j % 2 ? 4.0 : 2.0) * xdot_sq(t_prev + static_cast<double>(j) * h);
      }
      accumulated += traj.params.gamma * sum * h / 3.0;
      t_prev = t;
    }
    out[i] = accumulated;
  }
  return out;
}

std::vector<double> heat(const ClassicalTrajectory& traj, double max_step_fraction) {
  std::vector<double> q;
  q.reserve(traj.samples.size());
  if (!traj.theta0_is_zero()) {
    for (const auto& s : traj.samples) q.push_back(s.H - s.E);
    return q;
  }
  const double q0 = initial_heat(traj);
  for (double g : heat_generated(traj, max_step_fraction)) q.push_back(q0 + g);
  return q;
}

double constraint_residual(const ClassicalState& s) { return std::abs(s.rho * s.x - s.sigma * s.y); }

std::vector<ClassicalState> integrate_euler_lagrange(const PhysParams& p, const InitialData& init,
                                                     const GridSpec& grid, double max_step) {
  const auto d = derive(p, Validation::Quantum);
  grid.validate();
  if (!(max_step > 0.0)) throw Error(ErrorCode::InvalidParams, "RK4 step must be > 0");
  const auto r = resolve_constraint(init);
  const double m = p.m;
  const double g = p.gamma;
  const double decay = g / (2.0 * m);
  const double wm = d.omega_minus;

  using State = std::array<double, 6>;  // x, x', y, y', rho, sigma
  auto rhs = [&](const State& s) {
    return State{s[1], -(g * s[1] + p.k * s[0]) / m, s[3], (g * s[3] - p.k * s[2]) / m,
                 decay * s[4], -decay * s[5]};
  };
  State s{r.x0 * std::sin(r.phi),
          r.x0 * (wm * std::cos(r.phi) - decay * std::sin(r.phi)),
          *r.y0 * std::sin(*r.chi),
          *r.y0 * (wm * std::cos(*r.chi) + decay * std::sin(*r.chi)),
          r.rho0,
          r.sigma0};

  auto to_state = [&](const State& v, double t) {
    ClassicalState c;
    c.t = t;
    c.x = v[0];
    c.x_dot = v[1];
    c.y = v[2];
    c.rho = v[4];
    c.sigma = v[5];
    c.theta = 0.5 * std::log(v[4] / v[5]);
    c.N = v[4] * v[5];
    fill_canonical(c, p);
    return c;
  };

  std::vector<ClassicalState> out;
  out.reserve(grid.count);
  double t = grid.at(0);
  if (t != 0.0) {
    throw Error(ErrorCode::InvalidParams, "RK4 oracle grid must start at t = 0");
  }
  out.push_back(to_state(s, t));
  for (std::size_t i = 1; i < grid.count; ++i) {
    const double target = grid.at(i);
    const auto steps = std::max<long long>(1, static_cast<long long>(std::ceil((target - t) / max_step)));
    const double h = (target - t) / static_cast<double>(steps);
    for (long long j = 0; j < steps; ++j) {
      const State k1 = rhs(s);
      State tmp;
      for (int c = 0; c < 6; ++c) tmp[c] = s[c] + 0.5 * h * k1[c];
      const State k2 = rhs(tmp);
      for (int c = 0; c < 6; ++c) tmp[c] = s[c] + 0.5 * h * k2[c];
      const State k3 = rhs(tmp);
      for (int c = 0; c < 6; ++c) tmp[c] = s[c] + h * k3[c];
      const State k4 = rhs(tmp);
      for (int c = 0; c < 6; ++c) s[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
    }
    t = target;
    out.push_back(to_state(s, t));
  }
  return out;
}

}  // namespace dho
