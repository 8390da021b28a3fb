#include <doctest.h>

#include <random>

#include "fisherflow/dynamics.hpp"
#include "fisherflow/observables.hpp"
#include "fisherflow/states.hpp"
#include "oracles.hpp"

using namespace fisherflow;

namespace {

GridPtr grid_1d(double extent, std::size_t n = 256) {
  return make_grid(GridSpec{{{extent, n}}}, Metric{1, 1, {1.0}});
}

ActionConfig fisher_config(const GridPtr& g, Potential v = Potential::zero()) {
  ActionConfig cfg;
  cfg.measure = MeasureSpec::fisher(g->metric());
  cfg.potential = std::move(v);
  return cfg;
}

EvolveConfig split(double dt, long steps, long rec) {
  return EvolveConfig{dt, steps, Integrator::split_step, rec};
}
EvolveConfig rk4(double dt, long steps, long rec) {
  return EvolveConfig{dt, steps, Integrator::rk4, rec};
}

} // namespace

TEST_CASE("free packet dispersion follows the analytic law") {
  auto g = grid_1d(24.0);
  auto psi = gaussian_packet(g, {0.0}, {0.5}, {0.0});
  auto traj = evolve_wave(psi, fisher_config(g), split(1e-3, 1000, 500));
  CHECK(variance(traj.wave.back(), 0) ==
        doctest::Approx(oracles::free_dispersion(0.5, 1.0)).epsilon(1e-3));
  CHECK(oracles::free_dispersion(0.5, 1.0) == 1.0); // frozen oracle value
  CHECK(std::abs(norm(traj.wave.back()) - 1.0) < 1e-10);
}

TEST_CASE("coherent state center oscillates as x0 cos(omega t)") {
  auto g = grid_1d(9.8);
  auto cfg = fisher_config(g, Potential::harmonic({1.0}));
  const double x0 = 0.25;
  auto psi = gaussian_packet(g, {x0}, {0.5}, {0.0});
  auto traj = evolve_wave(psi, cfg, split(1e-3, 6280, 628));
  for (std::size_t r = 0; r < traj.records(); ++r)
    CHECK(std::abs(moment(traj.wave[r], 0, 1) - x0 * std::cos(traj.times[r])) < 1e-4);
}

TEST_CASE("zero steps returns the initial state unchanged") {
  auto g = grid_1d(20.0);
  auto psi = gaussian_packet(g, {0.0}, {0.5}, {0.0});
  auto traj = evolve_wave(psi, fisher_config(g), split(1e-3, 0, 1));
  REQUIRE(traj.records() == 1);
  for (std::size_t i = 0; i < psi.size(); ++i) CHECK(traj.wave[0][i] == psi[i]);
}

TEST_CASE("hydro evolution holds the harmonic ground state stationary") {
  // 512 points resolve the log-density's antipodal crossover (width sigma^2/L),
  // which at 256 points rings through the spectral derivatives at the 1e-6 level
  auto g = grid_1d(9.8, 512);
  auto cfg = fisher_config(g, Potential::harmonic({1.0}));
  auto gs = ground_state(cfg, harmonic_ground_density(g, 1.0, 1.0), 1e-7);
  const RealField& p = gs.state.p;
  auto traj = evolve_hydro(gs.state, cfg, rk4(2e-4, 1000, 500));

  const HydroState& last = traj.hydro.back();
  double pmax = 0.0;
  for (double v : p) pmax = std::max(pmax, v);
  double p_drift = 0.0, s_err = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p_drift = std::max(p_drift, std::abs(last.p[i] - p[i]));
    if (p[i] >= 1e-6 * pmax)
      s_err = std::max(s_err, std::abs(last.s[i] + 0.5 * traj.times.back()));
  }
  CHECK(p_drift < 1e-8);
  CHECK(s_err < 1e-6); // S(t) = -(hbar omega / 2) t
}

TEST_CASE("hydro evolution freezes a flat state at zero potential") {
  auto g = grid_1d(9.8, 128);
  auto cfg = fisher_config(g);
  RealField p(g);
  for (double& v : p) v = 1.0 / 9.8;
  auto traj = evolve_hydro(make_hydro_state(p, RealField(g)), cfg, rk4(1e-3, 200, 200));
  for (std::size_t i = 0; i < p.size(); ++i) {
    CHECK(std::abs(traj.hydro.back().p[i] - p[i]) < 1e-13);
    CHECK(std::abs(traj.hydro.back().s[i]) < 1e-13);
  }
}

TEST_CASE("wave and hydro pictures agree on the coherent orbit") {
  auto g = grid_1d(9.8);
  auto cfg = fisher_config(g, Potential::harmonic({1.0}));
  auto psi = gaussian_packet(g, {0.25}, {0.5}, {0.0});
  auto wave_traj = evolve_wave(psi, cfg, split(1e-3, 1000, 1000));
  auto hydro_traj = evolve_hydro(wave_to_hydro(psi, 1.0), cfg, rk4(1e-3, 1000, 1000));
  CHECK(l2_distance(density_of(wave_traj.wave.back()), hydro_traj.hydro.back().p) < 1e-4);
}

TEST_CASE("hydro rejects steps the grid cannot resolve") {
  auto g = grid_1d(9.8, 256);
  auto cfg = fisher_config(g);
  auto p = gaussian_density(g, {0.0}, {0.5});
  CHECK_THROWS_AS(evolve_hydro(make_hydro_state(p, RealField(g)), cfg, rk4(5e-3, 10, 10)),
                  error);
}

TEST_CASE("wave/hydro transformations") {
  auto g = grid_1d(9.8);
  SUBCASE("a real positive wavefunction has zero phase action") {
    auto p = gaussian_density(g, {0.0}, {0.5});
    ComplexField psi(g);
    for (std::size_t i = 0; i < psi.size(); ++i) psi[i] = std::sqrt(p[i]);
    auto st = wave_to_hydro(psi, 1.0);
    for (std::size_t i = 0; i < st.s.size(); ++i) CHECK(std::abs(st.s[i]) < 1e-12);
    for (double k : st.s_linear) CHECK(k == 0.0);
  }
  SUBCASE("round trip reproduces the state up to a global phase") {
    HydroState st = coherent_hydro(g, 1.0, 0.3, 0.6, 1.0);
    auto psi = hydro_to_wave(st, 1.0);
    auto back = hydro_to_wave(wave_to_hydro(psi, 1.0), 1.0);
    std::complex<double> overlap = 0.0;
    for (std::size_t i = 0; i < psi.size(); ++i) overlap += std::conj(back[i]) * psi[i];
    const std::complex<double> phase = overlap / std::abs(overlap);
    double err = 0.0;
    for (std::size_t i = 0; i < psi.size(); ++i)
      err = std::max(err, std::abs(phase * back[i] - psi[i]));
    CHECK(err < 1e-10);
  }
  SUBCASE("plane-wave winding lands in the linear part") {
    auto psi = plane_wave(g, {1});
    auto st = wave_to_hydro(psi, 1.0);
    CHECK(st.s_linear[0] == doctest::Approx(2.0 * std::numbers::pi / 9.8).epsilon(1e-12));
    for (std::size_t i = 0; i < st.s.size(); ++i) CHECK(std::abs(st.s[i]) < 1e-10);
  }
  SUBCASE("nodes are rejected with the first site named") {
    ComplexField psi(g);
    for (std::size_t i = 0; i < psi.size(); ++i) psi[i] = 1.0;
    psi[17] = 0.0;
    CHECK_THROWS_WITH_AS(wave_to_hydro(psi, 1.0),
                         doctest::Contains("site 17"), error);
  }
}

TEST_CASE("ground state of the harmonic trap from a random positive start") {
  auto g = grid_1d(9.8);
  auto cfg = fisher_config(g, Potential::harmonic({1.0}));
  std::mt19937_64 rng(42);
  MixtureOptions opt;
  opt.uniform_weight = 0.05;
  auto init = random_mixture_density(g, rng, opt);
  auto gs = ground_state(cfg, init, 1e-6);
  CHECK(std::abs(gs.energy - 0.5) < 1e-4);
  CHECK(std::abs(moment(gs.state, 0, 2) - 0.5) < 1e-3);
  CHECK(gs.residual < 1e-6);
}

TEST_CASE("ground state at zero potential relaxes to the uniform density") {
  auto g = grid_1d(9.8, 128);
  auto cfg = fisher_config(g);
  auto init = gaussian_density(g, {0.4}, {1.0});
  auto gs = ground_state(cfg, init, 1e-7);
  CHECK(std::abs(gs.energy) < 1e-6);
  const double uniform = 1.0 / 9.8;
  for (std::size_t i = 0; i < gs.state.p.size(); ++i)
    CHECK(std::abs(gs.state.p[i] - uniform) < 1e-6);
}

TEST_CASE("without the information penalty the flow collapses and reports the floor") {
  auto g = grid_1d(9.8, 128);
  ActionConfig cfg = fisher_config(g, Potential::harmonic({1.0}));
  cfg.lambda = 0.0;
  auto init = gaussian_density(g, {0.0}, {1.0});
  CHECK_THROWS_AS(ground_state(cfg, init, 1e-6), error);
  try {
    ground_state(cfg, init, 1e-6);
  } catch (const error& e) {
    CHECK(e.code() == errc::node_breach);
  }
}

TEST_CASE("Galilean boosts") {
  auto g = grid_1d(20.0);
  auto psi = gaussian_packet(g, {-0.5}, {0.5}, {0.0});
  const double v = 2.0 * std::numbers::pi * 2.0 / 20.0; // momentum-lattice velocity

  SUBCASE("zero velocity is the identity") {
    auto b = apply_boost(psi, {0.0}, 0.7, 1.0);
    double err = 0.0;
    for (std::size_t i = 0; i < psi.size(); ++i) err = std::max(err, std::abs(b[i] - psi[i]));
    CHECK(err < 1e-14);
  }
  SUBCASE("boost then evolve equals evolve then boost for the linear theory") {
    auto cfg = fisher_config(g);
    CHECK(galilean_commutator_defect(psi, cfg, split(1e-3, 1000, 1000), {v}) < 1e-8);
  }
  SUBCASE("a local density nonlinearity leaves velocity boosts exact") {
    // translation-covariant F(p) commutes with boosts; the anisotropy shows
    // up only through the rotational part of the group
    auto gn = grid_1d(10.0);
    auto psin = gaussian_packet(gn, {-0.5}, {0.5}, {0.0}, 1e-2);
    const double vn = 2.0 * std::numbers::pi * 2.0 / 10.0;
    ActionConfig cfg = fisher_config(gn);
    cfg.measure = MeasureSpec::anisotropic_fisher(SymMatrix::diagonal({1.3}));
    CHECK(galilean_commutator_defect(psin, cfg, split(1e-3, 500, 500), {vn}) < 1e-8);
  }
  SUBCASE("boost shifts the energy by the kinetic offset") {
    auto cfg = fisher_config(g);
    const double e0 = energy(psi, cfg);
    auto b = apply_boost(psi, {v}, 0.0, 1.0);
    CHECK(std::abs(energy(b, cfg) - e0 - 0.5 * v * v) < 1e-8);
  }
  SUBCASE("support wrap emits a warning") {
    std::vector<std::string> warnings;
    apply_boost(psi, {v}, 14.0, 1.0, &warnings); // shift by ~8.8 pushes tails around
    CHECK(!warnings.empty());
  }
}

TEST_CASE("norm is conserved to machine precision over long runs") {
  auto g = grid_1d(9.8);
  auto cfg = fisher_config(g, Potential::harmonic({1.0}));
  auto psi = gaussian_packet(g, {0.25}, {0.5}, {0.0});
  auto traj = evolve_wave(psi, cfg, split(1e-3, 2000, 1000));
  for (const auto& w : traj.wave) CHECK(std::abs(norm(w) - 1.0) < 1e-11);
}

TEST_CASE("step halving retry engages for stiff nonlinear phases") {
  auto g = grid_1d(9.5);
  ActionConfig cfg = fisher_config(g);
  cfg.measure = MeasureSpec::anisotropic_fisher(SymMatrix::diagonal({3.0}));
  auto psi = gaussian_packet(g, {0.0}, {0.5}, {0.0}, 1e-4);
  auto traj = evolve_wave(psi, cfg, split(0.05, 1, 1));
  CHECK(!traj.warnings.empty());
  CHECK(traj.evolve_config.dt < 0.05);
  CHECK(traj.evolve_config.dt * traj.evolve_config.steps == doctest::Approx(0.05));
}

TEST_CASE("product states stay products in separable traps") {
  auto g = make_grid(GridSpec{{{9.8, 96}, {9.8, 96}}}, Metric{1, 2, {1.0}});
  ActionConfig cfg = fisher_config(g, Potential::harmonic({1.0, 1.0}));
  auto psi = gaussian_packet(g, {0.3, -0.2}, {0.5, 0.5}, {0.0, 0.0});
  auto traj = evolve_wave(psi, cfg, split(1e-3, 300, 100));
  for (const auto& w : traj.wave) CHECK(schmidt_defect(w) < 1e-8);
}

TEST_CASE("time-step convergence orders: Strang ~dt^2, RK4 ~dt^4") {
  auto g = grid_1d(9.8, 128);
  auto cfg = fisher_config(g, Potential::harmonic({1.0}));
  auto psi = gaussian_packet(g, {0.25}, {0.5}, {0.0});
  const double T = 0.5;

  auto wave_err = [&](double dt) {
    auto traj = evolve_wave(psi, cfg, split(dt, std::lround(T / dt), std::lround(T / dt)));
    auto ref = evolve_wave(psi, cfg, split(dt / 8, std::lround(8 * T / dt),
                                           std::lround(8 * T / dt)));
    return l2_distance(traj.wave.back(), ref.wave.back());
  };
  const double we1 = wave_err(4e-3), we2 = wave_err(2e-3);
  CHECK(we1 / we2 == doctest::Approx(4.0).epsilon(0.5));

  // a mixture riding on a flat floor with a sine phase: rich dynamics, no
  // fragile wrapped tails
  auto gh = grid_1d(9.0, 128);
  auto cfg_h = fisher_config(gh, Potential::harmonic({1.0}));
  std::mt19937_64 rng_h(17);
  MixtureOptions mo;
  mo.uniform_weight = 0.02;
  auto p0 = random_mixture_density(gh, rng_h, mo);
  RealField s0(gh);
  for (std::size_t i = 0; i < s0.size(); ++i)
    s0[i] = 0.3 * std::sin(2.0 * std::numbers::pi * gh->coord_of_site(i, 0) / 9.0);
  auto st0 = make_hydro_state(p0, s0);
  auto hydro_err = [&](double dt) {
    auto traj = evolve_hydro(st0, cfg_h, rk4(dt, std::lround(T / dt), std::lround(T / dt)));
    auto ref = evolve_hydro(st0, cfg_h, rk4(dt / 8, std::lround(8 * T / dt),
                                            std::lround(8 * T / dt)));
    return l2_distance(traj.hydro.back().p, ref.hydro.back().p);
  };
  const double he1 = hydro_err(1.25e-3), he2 = hydro_err(6.25e-4);
  CHECK(he1 / he2 > 8.0); // 4th order: ~16x per halving
}
