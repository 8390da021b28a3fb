#include <doctest.h>

#include <random>

#include "fisherflow/action.hpp"
#include "fisherflow/states.hpp"
#include "oracles.hpp"

using namespace fisherflow;

namespace {

GridPtr grid_1d(double extent = 9.5, std::size_t n = 256) {
  return make_grid(GridSpec{{{extent, n}}}, Metric{1, 1, {1.0}});
}

ActionConfig fisher_config(const GridPtr& g, Potential v = Potential::zero()) {
  ActionConfig cfg;
  cfg.measure = MeasureSpec::fisher(g->metric());
  cfg.potential = std::move(v);
  return cfg;
}

// masked maximum of |a - b| relative to max|b|, over sites with p above frac
double masked_rel_err(const RealField& a, const RealField& b, const RealField& p, double frac) {
  double pmax = 0.0, scale = 0.0, err = 0.0;
  for (double v : p) pmax = std::max(pmax, v);
  for (std::size_t i = 0; i < b.size(); ++i) scale = std::max(scale, std::abs(b[i]));
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (p[i] < frac * pmax) continue;
    err = std::max(err, std::abs(a[i] - b[i]));
  }
  return err / scale;
}

} // namespace

TEST_CASE("quantum potential of a Gaussian against the closed form") {
  auto g = grid_1d(10.2);
  auto p = gaussian_density(g, {0.0}, {0.5});
  auto q = quantum_potential(p, g->metric(), 1.0);
  double pmax = 0.0;
  for (double v : p) pmax = std::max(pmax, v);
  double err = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] < 1e-4 * pmax) continue; // box images distort the free-space form beyond here
    const double expect = oracles::gaussian_quantum_potential(g->coord_of_site(i, 0), 0.0, 0.5);
    err = std::max(err, std::abs(q[i] - expect));
    scale = std::max(scale, std::abs(expect));
  }
  CHECK(err / scale < 1e-8);

  SUBCASE("constant density gives zero quantum potential") {
    RealField flat(g);
    for (double& v : flat) v = 1.0;
    auto qf = quantum_potential(flat, g->metric(), 1.0);
    for (std::size_t i = 0; i < qf.size(); ++i) CHECK(std::abs(qf[i]) < 1e-10);
  }
}

TEST_CASE("keystone identity: Q equals the variational derivative of (hbar^2/8) I_F") {
  // two routes: Q differentiates sqrt(p) directly, the variational derivative
  // differentiates ln p; agreement ties the hydrodynamic equation to the action
  MixtureOptions opt;
  opt.uniform_weight = 0.02;
  std::mt19937_64 rng(5);
  auto g = grid_1d(16.0);
  for (int trial = 0; trial < 3; ++trial) {
    auto p = random_mixture_density(g, rng, opt);
    auto q = quantum_potential(p, g->metric(), 1.0);
    auto vd = variational_derivative(MeasureSpec::fisher(g->metric()), p);
    double qmax = 0.0, err = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
      qmax = std::max(qmax, std::abs(q[i]));
      err = std::max(err, std::abs(q[i] - 0.125 * vd[i]));
    }
    CHECK(err / qmax < 1e-6);
  }
  // and one Gaussian with everything masked above the floor window
  auto pg = gaussian_density(grid_1d(), {0.0}, {0.5});
  auto q = quantum_potential(pg, grid_1d()->metric(), 1.0);
  auto vd = variational_derivative(MeasureSpec::fisher(grid_1d()->metric()), pg);
  RealField lvd(pg.grid());
  for (std::size_t i = 0; i < lvd.size(); ++i) lvd[i] = 0.125 * vd[i];
  CHECK(masked_rel_err(q, lvd, pg, 1e-8) < 1e-6);
}

TEST_CASE("hj_residual vanishes on the harmonic ground state") {
  // 512 points resolve the log-density crossover at the antipode; see the
  // matching note in the hydro stationarity test
  auto g = grid_1d(9.8, 512);
  auto cfg = fisher_config(g, Potential::harmonic({1.0}));
  auto p = harmonic_ground_density(g, 1.0, 1.0);
  HydroState st = make_hydro_state(p, RealField(g));
  RealField s_dot(g);
  for (double& v : s_dot) v = -0.5; // S = -(hbar omega / 2) t
  auto res = hj_residual(st, s_dot, cfg);
  double pmax = 0.0, worst = 0.0;
  for (double v : st.p) pmax = std::max(pmax, v);
  for (std::size_t i = 0; i < res.size(); ++i)
    if (st.p[i] >= 1e-6 * pmax) worst = std::max(worst, std::abs(res[i]));
  CHECK(worst < 1e-6);
}

TEST_CASE("hj and continuity residuals vanish along the coherent-state orbit") {
  auto g = grid_1d(9.6, 512);
  auto cfg = fisher_config(g, Potential::harmonic({1.0}));
  const double x0 = 0.3, t = 0.7, dt = 1e-5;
  HydroState st = coherent_hydro(g, 1.0, x0, t, 1.0);
  HydroState plus = coherent_hydro(g, 1.0, x0, t + dt, 1.0);
  HydroState minus = coherent_hydro(g, 1.0, x0, t - dt, 1.0);
  RealField s_dot(g), p_dot(g);
  for (std::size_t i = 0; i < s_dot.size(); ++i) {
    s_dot[i] = (plus.s_total(i) - minus.s_total(i)) / (2.0 * dt);
    p_dot[i] = (plus.p[i] - minus.p[i]) / (2.0 * dt);
  }
  double pmax = 0.0;
  for (double v : st.p) pmax = std::max(pmax, v);

  auto hj = hj_residual(st, s_dot, cfg);
  auto cont = continuity_residual(st, p_dot, g->metric());
  double worst_hj = 0.0, worst_cont = 0.0;
  for (std::size_t i = 0; i < hj.size(); ++i) {
    if (st.p[i] < 1e-6 * pmax) continue;
    worst_hj = std::max(worst_hj, std::abs(hj[i]));
    worst_cont = std::max(worst_cont, std::abs(cont[i]));
  }
  CHECK(worst_hj < 1e-5);
  CHECK(worst_cont < 1e-5);
}

TEST_CASE("continuity residual trivial cases") {
  auto g = grid_1d();
  SUBCASE("stationary state") {
    auto p = gaussian_density(g, {0.0}, {0.5});
    HydroState st = make_hydro_state(p, RealField(g));
    auto res = continuity_residual(st, RealField(g), g->metric());
    for (std::size_t i = 0; i < res.size(); ++i) CHECK(std::abs(res[i]) < 1e-12);
  }
  SUBCASE("plane-wave phase over a constant density") {
    RealField p(g);
    for (double& v : p) v = 1.0 / 9.5;
    HydroState st{p, RealField(g), {0.7}}; // S = 0.7 x, constant slope
    auto res = continuity_residual(st, RealField(g), g->metric());
    for (std::size_t i = 0; i < res.size(); ++i) CHECK(std::abs(res[i]) < 1e-12);
  }
}

TEST_CASE("hj_residual with lambda = 0 is the classical residual") {
  auto g = grid_1d();
  ActionConfig cfg = fisher_config(g, Potential::harmonic({1.0}));
  cfg.lambda = 0.0;
  auto p = gaussian_density(g, {0.0}, {0.5});
  HydroState st = make_hydro_state(p, RealField(g), {0.4});
  RealField s_dot(g);
  for (double& v : s_dot) v = -0.2;
  auto res = hj_residual(st, s_dot, cfg);
  const RealField v = cfg.potential.sample(g);
  for (std::size_t i = 0; i < res.size(); ++i) {
    const double classical = -0.2 + 0.5 * 0.4 * 0.4 + v[i];
    CHECK(res[i] == doctest::Approx(classical).epsilon(1e-12));
  }
}

TEST_CASE("evaluate_action: stationary value and trivial cases") {
  auto g = grid_1d(9.8);
  auto cfg = fisher_config(g, Potential::harmonic({1.0}));
  auto p = harmonic_ground_density(g, 1.0, 1.0);

  const double dt = 0.05;
  const int samples = 9;
  std::vector<HydroState> history;
  for (int i = 0; i < samples; ++i) {
    RealField s(g);
    for (double& v : s) v = -0.5 * dt * i;
    history.push_back(make_hydro_state(p, std::move(s)));
  }
  const double phi = evaluate_action(history, dt, cfg);
  CHECK(std::abs(phi) < 1e-6 * dt * (samples - 2));

  SUBCASE("static density, zero phase, zero potential, lambda 0 gives zero") {
    ActionConfig trivial = fisher_config(g);
    trivial.lambda = 0.0;
    std::vector<HydroState> hist;
    for (int i = 0; i < 3; ++i) hist.push_back(make_hydro_state(p, RealField(g)));
    CHECK(evaluate_action(hist, dt, trivial) == doctest::Approx(0.0).epsilon(1e-15));
  }
  SUBCASE("lambda = 0 recovers the classical ensemble action") {
    ActionConfig classical = cfg;
    classical.lambda = 0.0;
    const double phi_classical = evaluate_action(history, dt, classical);
    const double lambda = cfg.lambda_value();
    const double fisher_part =
        lambda * evaluate(MeasureSpec::fisher(g->metric()), p) * dt * (samples - 2);
    CHECK(phi == doctest::Approx(phi_classical + fisher_part).epsilon(1e-10));
  }
  SUBCASE("fewer than 3 samples is an error") {
    std::vector<HydroState> tiny = {history[0], history[1]};
    CHECK_THROWS_AS(evaluate_action(tiny, dt, cfg), error);
  }
}

TEST_CASE("the action is stationary at the ground state to second order") {
  auto g = grid_1d(9.8);
  auto cfg = fisher_config(g, Potential::harmonic({1.0}));
  auto p = harmonic_ground_density(g, 1.0, 1.0);
  const double dt = 0.05;

  auto phi_of = [&](const RealField& density, const RealField& s_extra) {
    std::vector<HydroState> history;
    for (int i = 0; i < 3; ++i) {
      RealField s = s_extra;
      for (double& v : s) v += -0.5 * dt * i;
      RealField pc = density;
      history.push_back(HydroState{std::move(pc), std::move(s),
                                   std::vector<double>(g->ndim(), 0.0)});
    }
    return evaluate_action(history, dt, cfg);
  };

  // mass-preserving density probe
  RealField dp(g);
  {
    double c = 0.0;
    RealField phi_field(g);
    for (std::size_t i = 0; i < dp.size(); ++i)
      phi_field[i] = std::cos(2.0 * std::numbers::pi * g->coord_of_site(i, 0) / 9.8);
    detail::CompensatedSum pf;
    for (std::size_t i = 0; i < dp.size(); ++i) pf.add(p[i] * phi_field[i]);
    c = pf.value() * g->cell_volume();
    for (std::size_t i = 0; i < dp.size(); ++i) dp[i] = p[i] * (phi_field[i] - c);
  }
  const double phi0 = phi_of(p, RealField(g));
  auto phi_at = [&](double h) {
    RealField ph = p;
    for (std::size_t i = 0; i < ph.size(); ++i) ph[i] += h * dp[i];
    return phi_of(ph, RealField(g));
  };
  const double d1 = phi_at(0.08) - phi0;
  const double d2 = phi_at(0.04) - phi0;
  CHECK(d1 / d2 == doctest::Approx(4.0).epsilon(0.2)); // quadratic in h

  // phase probe: static delta S enters exactly quadratically
  RealField ds(g);
  for (std::size_t i = 0; i < ds.size(); ++i)
    ds[i] = std::sin(2.0 * std::numbers::pi * g->coord_of_site(i, 0) / 9.8);
  auto phi_s = [&](double h) {
    RealField s(g);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = h * ds[i];
    return phi_of(p, s);
  };
  const double s1 = phi_s(0.08) - phi0;
  const double s2 = phi_s(0.04) - phi0;
  CHECK(s1 / s2 == doctest::Approx(4.0).epsilon(0.01));
}
