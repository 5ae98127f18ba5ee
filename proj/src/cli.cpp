#include "dho/cli.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <memory>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dho/classical.hpp"
#include "dho/csv.hpp"
#include "dho/errors.hpp"
#include "dho/params.hpp"
#include "dho/spectrum.hpp"
#include "dho/transitions.hpp"
#include "dho/wavefunction.hpp"

namespace dho {

namespace {

struct Flags {
  double m = 1.0;
  double gamma = 0.0;
  double k = 1.0;
  double hbar = 1.0;
  double t_max = 30.0;
  double dt = 0.1;
  double t = 0.0;
  int n_max = -1;
  int l = 0;
  std::string fig_case = "a";
  int precision = 12;
  std::string out;

  double x0 = 1.0;
  double phi = 0.0;
  double rho0 = 1.0;
  double sigma0 = 1.0;
  double y0 = 0.0;
  double chi = 0.0;

  int truncation = 0;
  double tol = 1e-10;
  std::string method = "chebyshev";
  bool ode = false;

  double x_max = 0.0;
  int points = 0;
  bool series = false;
  int nodes = 0;
};

/// Which flags were given on the command line or in the config file.
struct Given {
  CLI::Option* m = nullptr;
  CLI::Option* gamma = nullptr;
  CLI::Option* k = nullptr;
  CLI::Option* hbar = nullptr;
  CLI::Option* t_max = nullptr;
  CLI::Option* dt = nullptr;
  CLI::Option* n_max = nullptr;
  CLI::Option* out = nullptr;
  CLI::Option* y0 = nullptr;
  CLI::Option* chi = nullptr;
  CLI::Option* x_max = nullptr;
  CLI::Option* points = nullptr;

  static bool set(const CLI::Option* o) { return o != nullptr && o->count() > 0; }
};

struct Context {
  Flags f;
  Given g;
  std::ostream* stdout_stream = nullptr;
};

PhysParams phys(const Context& c) { return {c.f.m, c.f.gamma, c.f.k, c.f.hbar}; }

int levels(const Context& c, int fallback) { return Given::set(c.g.n_max) ? c.f.n_max : fallback; }

GridSpec time_grid(const Context& c, double t_max, double dt) {
  return GridSpec::temporal(Given::set(c.g.t_max) ? c.f.t_max : t_max, Given::set(c.g.dt) ? c.f.dt : dt);
}

/// Runs `body` against the --out file, or the standard output stream.
void with_output(const Context& c, const std::string& path, const std::function<void(std::ostream&)>& body) {
  if (path.empty()) {
    body(*c.stdout_stream);
    c.stdout_stream->flush();
    return;
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw std::runtime_error("cannot open " + path + " for writing");
  body(file);
  file.flush();
  if (!file) throw std::runtime_error("write to " + path + " failed");
}

std::string format_complex(cplx z) {
  std::string s = format_shortest(z.real());
  if (!(z.imag() < 0.0)) s += '+';
  return s + format_shortest(z.imag()) + 'i';
}

double case_gamma(const std::string& fig_case) {
  if (fig_case == "a") return 1.0;
  if (fig_case == "b") return std::sqrt(5.0) - 1.0;
  if (fig_case == "c") return 1.5;
  throw Error(ErrorCode::InvalidParams, "--case must be a, b or c");
}

void check_levels(int n_max) {
  if (n_max < 0) throw Error(ErrorCode::InvalidParams, "--n-max must be >= 0");
}

// --- subcommands -----------------------------------------------------------

void cmd_derive(const Context& c) {
  const auto d = derive(phys(c));
  with_output(c, c.f.out, [&](std::ostream& os) {
    auto kv = [&](const char* key, const std::string& value) { os << key << '=' << value << '\n'; };
    kv("m", format_shortest(d.phys.m));
    kv("gamma", format_shortest(d.phys.gamma));
    kv("k", format_shortest(d.phys.k));
    kv("hbar", format_shortest(d.phys.hbar));
    kv("omega", format_shortest(d.omega));
    kv("omega_minus", format_shortest(d.omega_minus));
    kv("omega_plus", format_shortest(d.omega_plus));
    kv("alpha", format_shortest(d.alpha));
    kv("beta", format_shortest(d.beta));
    kv("lambda", format_complex(d.lambda));
    kv("xi_squared", d.xi ? format_shortest(d.xi_squared) : "absent");
    kv("xi", d.xi ? format_complex(*d.xi) : "absent");
    kv("zeta", d.zeta ? format_complex(*d.zeta) : "absent");
    kv("gamma_star", format_shortest(d.gamma_star));
    kv("quantum_regime", std::string(to_string(*d.quantum_regime)));
    kv("classical_regime", std::string(to_string(d.classical_regime)));
  });
}

void write_fig1_file(const Context& c, const PhysParams& p, double t, const std::string& path) {
  const auto d = derive(p);
  const int top = levels(c, 2);
  check_levels(top);
  const double half = Given::set(c.g.x_max) ? c.f.x_max : 2.5;
  const auto grid = GridSpec::spatial(half, Given::set(c.g.points) ? c.f.points : 1001);
  with_output(c, path, [&](std::ostream& os) {
    CsvWriter w(os, c.f.precision);
    std::vector<std::string> head{"X"};
    for (int n = 0; n <= top; ++n) head.push_back("phi" + std::to_string(n) + "_sq");
    w.header(head);
    std::vector<double> row(head.size());
    for (std::size_t i = 0; i < grid.count; ++i) {
      const double x = grid.at(i);
      const auto phi = eigenfunctions(d, top, x, t);
      row[0] = x;
      for (int n = 0; n <= top; ++n) row[n + 1] = std::norm(phi[n]);
      w.row(row);
    }
  });
}

void cmd_fig1(const Context& c) {
  PhysParams p{10.0, 0.1, 10.0, 1.0};
  if (Given::set(c.g.m)) p.m = c.f.m;
  if (Given::set(c.g.gamma)) p.gamma = c.f.gamma;
  p.k = Given::set(c.g.k) ? c.f.k : p.m;  // omega = 1 unless k is given
  if (Given::set(c.g.hbar)) p.hbar = c.f.hbar;
  validate(p);
  const std::string prefix = Given::set(c.g.out) ? c.f.out : "fig1";
  write_fig1_file(c, p, 0.0, prefix + "_t0.csv");
  write_fig1_file(c, p, 250.0, prefix + "_t250.csv");
}

void cmd_figure_amplitudes(const Context& c, int l) {
  PhysParams p{1.0, case_gamma(c.f.fig_case), 1.0, 1.0};
  if (Given::set(c.g.m)) p.m = c.f.m;
  if (Given::set(c.g.gamma)) p.gamma = c.f.gamma;
  if (Given::set(c.g.k)) p.k = c.f.k;
  if (Given::set(c.g.hbar)) p.hbar = c.f.hbar;
  const auto d = derive(p);
  const int top = levels(c, 6);
  check_levels(top);
  const auto grid = time_grid(c, 30.0, 0.01);

  std::vector<AmplitudeVector> ode;
  if (c.f.ode) {
    IntegrateOptions opts;
    opts.tol = c.f.tol;
    ode = integrate_auto(p, l, grid, opts, kMaxTruncation, top);
  }
  with_output(c, c.f.out, [&](std::ostream& os) {
    CsvWriter w(os, c.f.precision);
    std::vector<std::string> head{"t"};
    for (int n = 0; n <= top; n += 2) head.push_back("p" + std::to_string(n));
    if (c.f.ode) {
      for (int n = 0; n <= top; n += 2) head.push_back("ode_p" + std::to_string(n));
    }
    w.header(head);
    std::vector<double> row;
    for (std::size_t i = 0; i < grid.count; ++i) {
      const double t = grid.at(i);
      row.assign(1, t);
      for (int n = 0; n <= top; n += 2) row.push_back(std::norm(closed_form(d, l, n, t, ClosedFormRoute::Auto)));
      if (c.f.ode) {
        for (int n = 0; n <= top; n += 2) row.push_back(std::norm(ode[i].coeffs[n]));
      }
      w.row(row);
    }
  });
}

void cmd_classical(const Context& c) {
  const auto p = phys(c);
  InitialData init;
  init.x0 = c.f.x0;
  init.phi = c.f.phi;
  init.rho0 = c.f.rho0;
  init.sigma0 = c.f.sigma0;
  if (Given::set(c.g.y0)) init.y0 = c.f.y0;
  if (Given::set(c.g.chi)) init.chi = c.f.chi;
  const auto traj = solve_trajectory(p, init, time_grid(c, 30.0, 0.01));
  const auto q = heat(traj);
  with_output(c, c.f.out, [&](std::ostream& os) {
    CsvWriter w(os, c.f.precision);
    w.header({"t", "x", "y", "rho", "sigma", "X", "P", "theta", "N", "H", "E", "Q", "constraint_residual"});
    for (std::size_t i = 0; i < traj.samples.size(); ++i) {
      const auto& s = traj.samples[i];
      const double row[] = {s.t, s.x, s.y, s.rho, s.sigma, s.X, s.P, s.theta, s.N, s.H, s.E, q[i],
                            constraint_residual(s)};
      w.row(row);
    }
  });
}

void cmd_spectrum_eigenvalues(const Context& c) {
  const auto p = phys(c);
  validate(p);
  const int top = levels(c, 4);
  check_levels(top);
  with_output(c, c.f.out, [&](std::ostream& os) {
    CsvWriter w(os, c.f.precision);
    w.header({"n", "E"});
    for (int n = 0; n <= top; ++n) {
      const double row[] = {double(n), energy_eigenvalue(p, n, c.f.t)};
      w.row(row);
    }
  });
}

void cmd_spectrum_eigenfunction(const Context& c) {
  const auto p = phys(c);
  const auto d = derive(p);
  const int top = levels(c, 2);
  check_levels(top);
  const std::size_t count = Given::set(c.g.points) ? static_cast<std::size_t>(c.f.points) : 1001;
  const auto grid = Given::set(c.g.x_max) ? GridSpec::spatial(c.f.x_max, count) : default_x_grid(p, c.f.t, count);
  with_output(c, c.f.out, [&](std::ostream& os) {
    CsvWriter w(os, c.f.precision);
    std::vector<std::string> head{"X"};
    for (int n = 0; n <= top; ++n) {
      const auto s = std::to_string(n);
      head.insert(head.end(), {"phi" + s + "_re", "phi" + s + "_im", "phi" + s + "_sq"});
    }
    w.header(head);
    std::vector<double> row;
    for (std::size_t i = 0; i < grid.count; ++i) {
      const double x = grid.at(i);
      const auto phi = eigenfunctions(d, top, x, c.f.t);
      row.assign(1, x);
      for (int n = 0; n <= top; ++n) row.insert(row.end(), {phi[n].real(), phi[n].imag(), std::norm(phi[n])});
      w.row(row);
    }
  });
}

void cmd_spectrum_overlap(const Context& c) {
  const auto p = phys(c);
  const int top = levels(c, 10);
  check_levels(top);
  with_output(c, c.f.out, [&](std::ostream& os) {
    CsvWriter w(os, c.f.precision);
    w.header({"n", "n_prime", "re", "im"});
    for (int n = 0; n <= top; ++n) {
      for (int np = 0; np <= top; ++np) {
        const cplx v = overlap(p, n, np, c.f.t, c.f.nodes);
        const double row[] = {double(n), double(np), v.real(), v.imag()};
        w.row(row);
      }
    }
  });
}

void cmd_spectrum_variance(const Context& c) {
  const auto p = phys(c);
  const int top = levels(c, 10);
  check_levels(top);
  with_output(c, c.f.out, [&](std::ostream& os) {
    CsvWriter w(os, c.f.precision);
    w.header({"n", "quadrature", "closed_form"});
    for (int n = 0; n <= top; ++n) {
      const double row[] = {double(n), density_variance(p, n, c.f.t, c.f.nodes),
                            density_variance_closed_form(p, n, c.f.t)};
      w.row(row);
    }
  });
}

IntegrateOptions ode_options(const Context& c) {
  IntegrateOptions opts;
  opts.tol = c.f.tol;
  if (c.f.method == "chebyshev") {
    opts.method = OdeMethod::Chebyshev;
  } else if (c.f.method == "dopri") {
    opts.method = OdeMethod::DormandPrince;
  } else {
    throw Error(ErrorCode::InvalidParams, "--method must be chebyshev or dopri");
  }
  return opts;
}

/// Emits t, p0..p_top from per-sample amplitude vectors.
void write_amplitudes(const Context& c, const std::vector<AmplitudeVector>& runs, int top) {
  with_output(c, c.f.out, [&](std::ostream& os) {
    CsvWriter w(os, c.f.precision);
    std::vector<std::string> head{"t"};
    for (int n = 0; n <= top; ++n) head.push_back("p" + std::to_string(n));
    head.push_back("leaked_mass");
    w.header(head);
    std::vector<double> row;
    for (const auto& a : runs) {
      row.assign(1, a.t);
      for (int n = 0; n <= top; ++n) {
        row.push_back(n < static_cast<int>(a.coeffs.size()) ? std::norm(a.coeffs[n]) : 0.0);
      }
      row.push_back(a.leaked_mass);
      w.row(row);
    }
  });
}

void cmd_transitions(const Context& c, const std::string& route) {
  const auto p = phys(c);
  const auto d = derive(p);
  const int top = levels(c, 12);
  check_levels(top);
  if (c.f.l < 0) throw Error(ErrorCode::InvalidParams, "--l must be >= 0");
  const auto grid = time_grid(c, 30.0, 0.1);

  if (route == "ode") {
    const auto opts = ode_options(c);
    std::vector<AmplitudeVector> runs =
        c.f.truncation > 0 ? integrate(p, c.f.l, c.f.truncation, grid, opts)
                           : integrate_auto(p, c.f.l, grid, opts, kMaxTruncation, top);
    write_amplitudes(c, runs, top);
    return;
  }
  if (route == "reduced") {
    write_amplitudes(c, integrate_reduced(p, c.f.l, top, grid, c.f.tol), top);
    return;
  }
  std::vector<AmplitudeVector> runs;
  for (std::size_t i = 0; i < grid.count; ++i) {
    AmplitudeVector a;
    a.t = grid.at(i);
    a.nmax = top;
    a.initial_l = c.f.l;
    for (int n = 0; n <= top; ++n) {
      a.coeffs.push_back(route == "closed" ? closed_form(d, c.f.l, n, a.t, ClosedFormRoute::Auto)
                                           : contour_extract(d, c.f.l, n, a.t));
    }
    a.leaked_mass = 1.0 - a.norm_squared();
    a.norm_defect = a.leaked_mass;
    runs.push_back(std::move(a));
  }
  write_amplitudes(c, runs, top);
}

std::vector<AmplitudeVector> packet_amplitudes(const PhysParams& p, int l, const GridSpec& grid) {
  return integrate_auto(p, l, grid);
}

void cmd_wavefunction(const Context& c) {
  const auto p = phys(c);
  validate(p);
  if (c.f.l < 0) throw Error(ErrorCode::InvalidParams, "--l must be >= 0");
  const std::size_t count = Given::set(c.g.points) ? static_cast<std::size_t>(c.f.points) : 4096;

  if (c.f.series) {
    const auto grid = time_grid(c, 20.0, 0.1);
    const auto runs = packet_amplitudes(p, c.f.l, grid);
    with_output(c, c.f.out, [&](std::ostream& os) {
      CsvWriter w(os, c.f.precision);
      w.header({"t", "norm", "dispersion"});
      for (const auto& a : runs) {
        const auto packet = assemble(p, a, default_x_grid(p, a.t, count));
        const double row[] = {a.t, norm(packet), dispersion(packet)};
        w.row(row);
      }
    });
    return;
  }

  if (c.f.t < 0.0) throw Error(ErrorCode::InvalidParams, "--t must be >= 0");
  AmplitudeVector amp;
  if (c.f.t == 0.0) {
    amp = integrate(p, c.f.l, c.f.l + 40, GridSpec{0.0, 1.0, 2, GridKind::Temporal})[0];
  } else {
    amp = packet_amplitudes(p, c.f.l, GridSpec{0.0, c.f.t, 2, GridKind::Temporal}).back();
  }
  const auto grid = Given::set(c.g.x_max) ? GridSpec::spatial(c.f.x_max, count) : default_x_grid(p, c.f.t, count);
  const auto packet = assemble(p, amp, grid);
  with_output(c, c.f.out, [&](std::ostream& os) {
    CsvWriter w(os, c.f.precision);
    w.header({"X", "re", "im", "density"});
    for (std::size_t i = 0; i < grid.count; ++i) {
      const cplx v = packet.values[i];
      const double row[] = {grid.at(i), v.real(), v.imag(), std::norm(v)};
      w.row(row);
    }
  });
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Context ctx;
  ctx.stdout_stream = &out;
  auto& f = ctx.f;
  auto& g = ctx.g;

  CLI::App app{"Damped harmonic oscillator: spectra, eigenfunctions and transition amplitudes", "dho"};
  app.set_config("--config", "", "key=value file merged under command-line flags");
  app.fallthrough();
  app.require_subcommand(1);

  g.m = app.add_option("--m", f.m, "mass")->capture_default_str();
  g.gamma = app.add_option("--gamma", f.gamma, "damping coefficient")->capture_default_str();
  g.k = app.add_option("--k", f.k, "spring constant")->capture_default_str();
  g.hbar = app.add_option("--hbar", f.hbar, "reduced Planck constant")->capture_default_str();
  g.t_max = app.add_option("--t-max", f.t_max, "end of the time grid");
  g.dt = app.add_option("--dt", f.dt, "time step of the grid");
  app.add_option("--t", f.t, "single evaluation time")->capture_default_str();
  g.n_max = app.add_option("--n-max", f.n_max, "highest level reported");
  app.add_option("--l", f.l, "initial level")->capture_default_str();
  app.add_option("--case", f.fig_case, "figure case a, b or c")->capture_default_str();
  app.add_option("--precision", f.precision, "significant decimals in CSV output")
      ->check(CLI::Range(1, 17))
      ->capture_default_str();
  g.out = app.add_option("--out", f.out, "output file (fig1: file prefix)");
  app.add_option("--x0", f.x0, "classical amplitude x0")->capture_default_str();
  app.add_option("--phi", f.phi, "classical phase phi")->capture_default_str();
  app.add_option("--rho0", f.rho0, "rho(0)")->capture_default_str();
  app.add_option("--sigma0", f.sigma0, "sigma(0)")->capture_default_str();
  g.y0 = app.add_option("--y0", f.y0, "y amplitude (default: fixed by the constraint)");
  g.chi = app.add_option("--chi", f.chi, "y phase (default: phi)");
  app.add_option("--truncation", f.truncation, "fixed Fock truncation for the ODE route (0: automatic)")
      ->capture_default_str();
  app.add_option("--tol", f.tol, "ODE tolerance")->capture_default_str();
  app.add_option("--method", f.method, "ODE propagator: chebyshev or dopri")->capture_default_str();
  app.add_flag("--ode", f.ode, "add ODE-route columns to fig2/fig3");
  g.x_max = app.add_option("--x-max", f.x_max, "half-width of the spatial grid");
  g.points = app.add_option("--points", f.points, "spatial grid points");
  app.add_flag("--series", f.series, "wavefunction: norm and dispersion over the time grid");
  app.add_option("--nodes", f.nodes, "Gauss-Hermite nodes (0: default)")->capture_default_str();

  std::function<void()> action;
  auto on = [&](CLI::App* sub, std::function<void()> fn) { sub->callback([&action, fn] { action = fn; }); };

  on(app.add_subcommand("derive", "print every derived constant"), [&] { cmd_derive(ctx); });
  on(app.add_subcommand("fig1", "|phi_n|^2 at t = 0 and t = 250 (two CSV files)"), [&] { cmd_fig1(ctx); });
  on(app.add_subcommand("fig2", "|c_{n,0}(t)|^2 for n = 0, 2, 4, 6"), [&] { cmd_figure_amplitudes(ctx, 0); });
  on(app.add_subcommand("fig3", "|c_{n,2}(t)|^2 for n = 0, 2, 4, 6"), [&] { cmd_figure_amplitudes(ctx, 2); });
  on(app.add_subcommand("classical", "classical trajectory and energy ledger"), [&] { cmd_classical(ctx); });

  auto* spectrum = app.add_subcommand("spectrum", "energy levels and eigenfunctions");
  spectrum->require_subcommand(1);
  on(spectrum->add_subcommand("eigenvalues", "E_n(t)"), [&] { cmd_spectrum_eigenvalues(ctx); });
  on(spectrum->add_subcommand("eigenfunction", "phi_n(X, t)"), [&] { cmd_spectrum_eigenfunction(ctx); });
  on(spectrum->add_subcommand("overlap", "<phi_n|phi_n'> by quadrature"), [&] { cmd_spectrum_overlap(ctx); });
  on(spectrum->add_subcommand("variance", "variance of |phi_n|^2"), [&] { cmd_spectrum_variance(ctx); });

  auto* transitions = app.add_subcommand("transitions", "transition probabilities |c_{n,l}(t)|^2");
  transitions->require_subcommand(1);
  for (const char* route : {"closed", "ode", "contour", "reduced"}) {
    const std::string r = route;
    on(transitions->add_subcommand(r, r + " route"), [&, r] { cmd_transitions(ctx, r); });
  }
  on(app.add_subcommand("wavefunction", "psi(X, t) or its norm and dispersion"), [&] { cmd_wavefunction(ctx); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (action) action();
    return kExitOk;
  } catch (const TruncationLeakError& e) {
    err << "dho: " << e.what() << "\ndho: retry with --truncation " << e.suggested_nmax() << '\n';
    return kExitTruncation;
  } catch (const Error& e) {
    err << "dho: " << e.what() << '\n';
    switch (e.code()) {
      case ErrorCode::InvalidParams:
      case ErrorCode::Overdamped:
      case ErrorCode::ConstraintInfeasible:
        return kExitValidation;
      default:
        return kExitFailure;
    }
  } catch (const std::exception& e) {
    err << "dho: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace dho
