#include <doctest.h>

#include <random>

#include "fisherflow/measures.hpp"
#include "fisherflow/states.hpp"
#include "oracles.hpp"

using namespace fisherflow;

namespace {

GridPtr grid_1d(double extent = 9.5, std::size_t n = 256, double mass = 1.0) {
  return make_grid(GridSpec{{{extent, n}}}, Metric{1, 1, {mass}});
}

Metric metric_2d() { return Metric{1, 2, {1.0}}; }

} // namespace

TEST_CASE("Fisher information of Gaussians: closed form and quadrature oracle") {
  auto g = grid_1d();
  auto p = gaussian_density(g, {0.0}, {0.5});
  auto m = MeasureSpec::fisher(g->metric());

  // quadrature oracle for Int p (p'/p)^2 with sigma^2 = 0.5
  const double oracle = oracles::simpson(
      [](double x) {
        const double d1 = oracles::gaussian_d1(x, 0.0, 0.5);
        const double pv = oracles::gaussian(x, 0.0, 0.5);
        return d1 * d1 / pv;
      },
      -4.7, 4.7, 8192);
  CHECK(oracle == doctest::Approx(2.0).epsilon(1e-9)); // closed form 1/sigma^2
  CHECK(std::abs(evaluate(m, p) - 2.0) < 1e-6);

  SUBCASE("constant density has zero information") {
    RealField flat(g);
    for (double& v : flat) v = 1.0 / 9.5;
    CHECK(std::abs(evaluate(m, flat)) < 1e-12);
  }
  SUBCASE("mass enters through the metric") {
    auto gm = grid_1d(9.5, 256, 2.0);
    auto pm = gaussian_density(gm, {0.0}, {0.5});
    CHECK(std::abs(evaluate(MeasureSpec::fisher(gm->metric()), pm) -
                   oracles::gaussian_fisher(0.5, 2.0)) < 1e-6);
  }
}

TEST_CASE("Fisher information is additive over products: 1/s1 + 1/s2") {
  // factor values on their own legal 1D windows: 1.0 and 0.5, summing to 1.5
  auto g1 = grid_1d(12.5);
  auto g2 = grid_1d(17.0);
  const double i1 = evaluate(MeasureSpec::fisher(g1->metric()),
                             gaussian_density(g1, {0.0}, {1.0}));
  const double i2 = evaluate(MeasureSpec::fisher(g2->metric()),
                             gaussian_density(g2, {0.0}, {2.0}));
  CHECK(std::abs(i1 - 1.0) < 1e-6);
  CHECK(std::abs(i2 - 0.5) < 1e-6);
  CHECK(std::abs(i1 + i2 - 1.5) < 2e-6);

  // the additivity itself, on a 2-axis product whose floor is held up by a
  // flat component (a pure 2D Gaussian product cannot satisfy the floor at
  // this accuracy: the corner exponent adds per axis)
  auto g = make_grid(GridSpec{{{12.5, 128}, {17.0, 128}}}, Metric{2, 1, {1.0, 1.0}});
  std::mt19937_64 rng(3);
  MixtureOptions opt;
  opt.uniform_weight = 0.02;
  Metric sub1{1, 1, {1.0}}, sub2{1, 1, {1.0}};
  auto f1 = random_mixture_density(make_grid(GridSpec{{{12.5, 128}}}, sub1), rng, opt);
  auto f2 = random_mixture_density(make_grid(GridSpec{{{17.0, 128}}}, sub2), rng, opt);
  RealField prod(g);
  for (std::size_t i = 0; i < prod.size(); ++i) prod[i] = f1[i / 128] * f2[i % 128];
  const double i12 = evaluate(MeasureSpec::fisher(g->metric()), prod);
  const double j1 = evaluate(MeasureSpec::fisher(sub1), f1);
  const double j2 = evaluate(MeasureSpec::fisher(sub2), f2);
  CHECK(std::abs(i12 - j1 - j2) < 1e-8);
}

TEST_CASE("anisotropic quadratic form weights each axis: tr(G Sigma^-1)") {
  // G = diag(1, 2) on a product density scores G11 I_1 + G22 I_2; with unit
  // Gaussians both factors carry information 1, so the total is 3
  auto g1 = grid_1d(12.5);
  auto p1 = gaussian_density(g1, {0.0}, {1.0});
  const double i1 = evaluate(MeasureSpec::fisher(g1->metric()), p1);
  CHECK(std::abs(i1 - 1.0) < 1e-6);

  auto g = make_grid(GridSpec{{{12.5, 128}, {12.5, 128}}}, metric_2d());
  std::mt19937_64 rng(9);
  MixtureOptions opt;
  opt.uniform_weight = 0.02;
  auto f1 = random_mixture_density(make_grid(GridSpec{{{12.5, 128}}}, Metric{1, 1, {1.0}}), rng,
                                   opt);
  auto f2 = random_mixture_density(make_grid(GridSpec{{{12.5, 128}}}, Metric{1, 1, {1.0}}), rng,
                                   opt);
  RealField prod(g);
  for (std::size_t i = 0; i < prod.size(); ++i) prod[i] = f1[i / 128] * f2[i % 128];
  auto m = MeasureSpec::anisotropic_fisher(SymMatrix::diagonal({1.0, 2.0}));
  const double j1 = evaluate(MeasureSpec::fisher(Metric{1, 1, {1.0}}), f1);
  const double j2 = evaluate(MeasureSpec::fisher(Metric{1, 1, {1.0}}), f2);
  CHECK(std::abs(evaluate(m, prod) - (1.0 * j1 + 2.0 * j2)) < 1e-8);
}

TEST_CASE("higher-derivative measure on a Gaussian: eps len^2 / sigma^4") {
  auto g = grid_1d();
  auto p = gaussian_density(g, {0.0}, {0.5});
  auto m = MeasureSpec::higher_derivative(1e-2, 0.1, g->metric());
  CHECK(evaluate(m, p) == doctest::Approx(1e-2 * 0.01 / 0.25).epsilon(1e-6));

  SUBCASE("weighted sums are linear in their terms") {
    auto ws = MeasureSpec::weighted_sum(
        {{0.7, MeasureSpec::fisher(g->metric())}, {2.0, m}});
    CHECK(evaluate(ws, p) ==
          doctest::Approx(0.7 * evaluate(MeasureSpec::fisher(g->metric()), p) +
                          2.0 * evaluate(m, p))
              .epsilon(1e-13));
  }
}

TEST_CASE("homogeneity: I[s p] = s I[p] on unnormalized densities") {
  auto g = grid_1d(16.0, 128);
  std::mt19937_64 rng(11);
  MixtureOptions opt;
  opt.uniform_weight = 0.02;
  auto p = random_mixture_density(g, rng, opt);
  for (auto m : {MeasureSpec::fisher(g->metric()),
                 MeasureSpec::higher_derivative(0.1, 0.2, g->metric())}) {
    const double i0 = evaluate(m, p);
    for (double s : {0.5, 2.0, 10.0}) {
      RealField sp = p;
      for (double& v : sp) v *= s;
      CHECK(std::abs(evaluate(m, sp) - s * i0) <= 1e-12 * std::abs(s * i0));
    }
  }
}

TEST_CASE("variational derivative of Fisher matches the closed form on a Gaussian") {
  auto g = grid_1d();
  auto p = gaussian_density(g, {0.0}, {0.5});
  auto vd = variational_derivative(MeasureSpec::fisher(g->metric()), p);
  double scale = 0.0, err = 0.0, pmax = 0.0;
  for (double v : p) pmax = std::max(pmax, v);
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] < 1e-6 * pmax) continue; // box images distort the closed form further out
    const double expect = oracles::gaussian_fisher_varder(g->coord_of_site(i, 0), 0.0, 0.5);
    err = std::max(err, std::abs(vd[i] - expect));
    scale = std::max(scale, std::abs(expect));
  }
  CHECK(err / scale < 1e-6);

  SUBCASE("constant density gives a zero field") {
    RealField flat(g);
    for (double& v : flat) v = 0.1;
    auto z = variational_derivative(MeasureSpec::fisher(g->metric()), flat);
    for (std::size_t i = 0; i < z.size(); ++i) CHECK(std::abs(z[i]) < 1e-10);
  }
}

TEST_CASE("fd_check validates every variant's variational derivative") {
  auto g = grid_1d(16.0, 128);
  std::mt19937_64 rng(23);
  MixtureOptions opt;
  opt.uniform_weight = 0.02;
  auto p = random_mixture_density(g, rng, opt);

  auto fisher = MeasureSpec::fisher(g->metric());
  auto hd = MeasureSpec::higher_derivative(0.05, 0.2, g->metric());
  auto ws = MeasureSpec::weighted_sum({{1.0, fisher}, {0.5, hd}});
  CHECK(fd_check(fisher, p, 8).max_rel_error < 1e-6);
  CHECK(fd_check(hd, p, 4).max_rel_error < 1e-5);
  CHECK(fd_check(ws, p, 4).max_rel_error < 1e-5);

  auto g2 = make_grid(GridSpec{{{16.0, 96}, {16.0, 96}}}, metric_2d());
  std::mt19937_64 rng2(29);
  auto p2 = random_mixture_density(g2, rng2, opt);
  auto aniso = MeasureSpec::anisotropic_fisher(SymMatrix::diagonal({1.0, 1.7}));
  CHECK(fd_check(aniso, p2, 4).max_rel_error < 1e-5);

  SUBCASE("a Gaussian Fisher check passes its tight tolerance") {
    auto gg = grid_1d();
    auto pg = gaussian_density(gg, {0.0}, {0.5});
    CHECK(fd_check(MeasureSpec::fisher(gg->metric()), pg, 8).max_rel_error < 1e-6);
  }
  SUBCASE("the zero measure reports zero directional derivatives") {
    auto zero = MeasureSpec::higher_derivative(0.0, 0.1, g->metric());
    CHECK(fd_check(zero, p, 4).max_rel_error < 1e-12);
  }
}

TEST_CASE("structural metadata") {
  auto fisher = MeasureSpec::fisher(Metric{1, 1, {1.0}});
  auto md = structural_metadata(fisher);
  CHECK(md.max_derivative_order == 2);
  CHECK(md.homogeneity_degree == 1);
  CHECK(md.local);

  auto hd = MeasureSpec::higher_derivative(1e-2, 0.1, Metric{1, 1, {1.0}});
  CHECK(structural_metadata(hd).max_derivative_order == 4);

  auto ws = MeasureSpec::weighted_sum({{1.0, fisher}, {1.0, hd}});
  CHECK(structural_metadata(ws).max_derivative_order == 4);

  auto ws0 = MeasureSpec::weighted_sum({{1.0, fisher}, {0.0, hd}});
  CHECK(structural_metadata(ws0).max_derivative_order == 2); // zero-coefficient term dropped
}

TEST_CASE("density floor is enforced") {
  auto g = grid_1d(16.0, 128);
  RealField p(g);
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = 1.0;
  p[40] = 0.0;
  CHECK_THROWS_AS(evaluate(MeasureSpec::fisher(g->metric()), p), error);
  try {
    evaluate(MeasureSpec::fisher(g->metric()), p);
  } catch (const error& e) {
    CHECK(e.code() == errc::node_breach);
    CHECK(std::string(e.what()).find("site 40") != std::string::npos);
  }
}

TEST_CASE("evaluate is stable under grid refinement for band-limited densities") {
  MixtureOptions opt;
  opt.uniform_weight = 0.02;
  auto coarse = grid_1d(16.0, 128);
  auto fine = grid_1d(16.0, 256);
  std::mt19937_64 rng_a(31), rng_b(31);
  auto pc = random_mixture_density(coarse, rng_a, opt);
  auto pf = random_mixture_density(fine, rng_b, opt);
  const double ic = evaluate(MeasureSpec::fisher(coarse->metric()), pc);
  const double iff = evaluate(MeasureSpec::fisher(fine->metric()), pf);
  CHECK(std::abs(ic - iff) < 1e-8);
}

TEST_CASE("restrict_measure rejects cross couplings and keeps diagonal blocks") {
  SymMatrix coupled;
  coupled.dim = 2;
  coupled.v = {1.0, 0.2, 0.2, 1.5};
  auto m = MeasureSpec::anisotropic_fisher(coupled);
  CHECK_THROWS_AS(restrict_measure(m, 0, 1), error);

  auto diag = MeasureSpec::anisotropic_fisher(SymMatrix::diagonal({1.0, 1.5}));
  auto sub = restrict_measure(diag, 1, 2);
  CHECK(sub.matrix.dim == 1);
  CHECK(sub.matrix(0, 0) == 1.5);
}
