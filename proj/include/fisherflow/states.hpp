#pragma once

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "fisherflow/action.hpp"
#include "fisherflow/grid.hpp"

namespace fisherflow {

namespace detail {

// Periodized 1D Gaussian, images summed two periods out.
inline double periodized_gaussian(double x, double center, double sigma_sq, double extent) {
  double sum = 0.0;
  for (int img = -2; img <= 2; ++img) {
    const double d = x - center + img * extent;
    sum += std::exp(-0.5 * d * d / sigma_sq);
  }
  return sum;
}

} // namespace detail

/// Normalized product-of-Gaussians density, periodized per axis.
inline RealField gaussian_density(const GridPtr& grid, const std::vector<double>& center,
                                  const std::vector<double>& sigma_sq) {
  const Grid& g = *grid;
  require(center.size() == g.ndim() && sigma_sq.size() == g.ndim(), errc::validation,
          "gaussian_density: need one center and one variance per axis");
  for (double s : sigma_sq)
    require(s > 0.0, errc::validation, "gaussian_density: variances must be positive");
  RealField p(grid);
  for (std::size_t i = 0; i < p.size(); ++i) {
    double v = 1.0;
    for (std::size_t a = 0; a < g.ndim(); ++a)
      v *= detail::periodized_gaussian(g.coord_of_site(i, a), center[a], sigma_sq[a], g.extent(a));
    p[i] = v;
  }
  const double mass = integrate(p);
  for (double& v : p) v /= mass;
  return p;
}

/// Normalized Gaussian wave packet with carrier momentum hbar*k per axis.
/// k must sit on the reciprocal lattice (integer multiples of 2 pi / extent)
/// for the sampled packet to be exactly periodic. A nonzero uniform_weight
/// mixes a flat component into |psi|^2 (momentum must then vanish): it keeps
/// the density floor safe under nonlinear evolution and removes the sharp
/// crossover in ln p where the packet's periodic images meet.
inline ComplexField gaussian_packet(const GridPtr& grid, const std::vector<double>& center,
                                    const std::vector<double>& sigma_sq,
                                    const std::vector<double>& k, double uniform_weight = 0.0) {
  const Grid& g = *grid;
  require(center.size() == g.ndim() && sigma_sq.size() == g.ndim() && k.size() == g.ndim(),
          errc::validation, "gaussian_packet: need center, variance and momentum per axis");
  ComplexField psi(grid);
  if (uniform_weight > 0.0) {
    for (double kk : k)
      require(kk == 0.0, errc::validation,
              "gaussian_packet: a uniform floor requires zero carrier momentum");
    RealField p = gaussian_density(grid, center, sigma_sq);
    double volume = 1.0;
    for (std::size_t a = 0; a < g.ndim(); ++a) volume *= g.extent(a);
    for (std::size_t i = 0; i < psi.size(); ++i)
      psi[i] = std::sqrt((1.0 - uniform_weight) * p[i] + uniform_weight / volume);
    return psi;
  }
  for (std::size_t i = 0; i < psi.size(); ++i) {
    double amp = 1.0;
    double ph = 0.0;
    for (std::size_t a = 0; a < g.ndim(); ++a) {
      const double x = g.coord_of_site(i, a);
      amp *= detail::periodized_gaussian(x, center[a], 2.0 * sigma_sq[a], g.extent(a));
      ph += k[a] * (x - center[a]);
    }
    // periodized_gaussian was fed 2 sigma^2 so |psi|^2 has density variance sigma^2
    psi[i] = amp * std::exp(std::complex<double>(0.0, ph));
  }
  detail::CompensatedSum nrm;
  for (const auto& v : psi) nrm.add(std::norm(v));
  const double scale = 1.0 / std::sqrt(nrm.value() * g.cell_volume());
  for (auto& v : psi) v *= scale;
  return psi;
}

/// Plane wave with integer winding per axis, |psi|^2 = 1/volume.
inline ComplexField plane_wave(const GridPtr& grid, const std::vector<long>& winding) {
  const Grid& g = *grid;
  require(winding.size() == g.ndim(), errc::validation, "plane_wave: need a winding per axis");
  double volume = 1.0;
  for (std::size_t a = 0; a < g.ndim(); ++a) volume *= g.extent(a);
  ComplexField psi(grid);
  for (std::size_t i = 0; i < psi.size(); ++i) {
    double ph = 0.0;
    for (std::size_t a = 0; a < g.ndim(); ++a)
      ph += 2.0 * std::numbers::pi * winding[a] / g.extent(a) * g.coord_of_site(i, a);
    psi[i] = std::exp(std::complex<double>(0.0, ph)) / std::sqrt(volume);
  }
  return psi;
}

/// 2D Gaussian with principal variances (sigma_major_sq, sigma_minor_sq)
/// whose major axis is tilted by theta; the probe state for orientation
/// scans. An optional flat component keeps the far corners above the density
/// floor (a bare 2D Gaussian cannot: the corner exponent adds per axis).
inline RealField elongated_gaussian_density(const GridPtr& grid, double sigma_major_sq,
                                            double sigma_minor_sq, double theta,
                                            double uniform_weight = 0.0) {
  const Grid& g = *grid;
  require(g.ndim() == 2, errc::validation, "elongated_gaussian_density: needs a 2D grid");
  const double c = std::cos(theta), s = std::sin(theta);
  // inverse covariance of R(theta) diag(major, minor) R(theta)^T
  const double ia = c * c / sigma_major_sq + s * s / sigma_minor_sq;
  const double ib = s * s / sigma_major_sq + c * c / sigma_minor_sq;
  const double ic = c * s * (1.0 / sigma_major_sq - 1.0 / sigma_minor_sq);
  const double flat = uniform_weight / (g.extent(0) * g.extent(1));
  RealField p(grid);
  for (std::size_t i = 0; i < p.size(); ++i) {
    double v = flat;
    for (int ix = -1; ix <= 1; ++ix)
      for (int iy = -1; iy <= 1; ++iy) {
        const double x = g.coord_of_site(i, 0) + ix * g.extent(0);
        const double y = g.coord_of_site(i, 1) + iy * g.extent(1);
        v += std::exp(-0.5 * (ia * x * x + 2.0 * ic * x * y + ib * y * y));
      }
    p[i] = v;
  }
  const double mass = integrate(p);
  for (double& v : p) v /= mass;
  return p;
}

struct MixtureOptions {
  int components = 3;
  double center_radius = 1.5;   // component centers stay within this radius
  double sigma_min = 0.8;
  double sigma_max = 1.3;
  double pedestal_weight = 0.05;   // broad centered component keeping tails above the floor
  double pedestal_fraction = 0.2;  // pedestal sigma as a fraction of the extent
  double uniform_weight = 0.0;     // flat component; invariant under shifts and shears
};

/// Seeded smooth positive test density: a few randomly placed Gaussian bumps
/// on top of a broad centered pedestal component.
inline RealField random_mixture_density(const GridPtr& grid, std::mt19937_64& rng,
                                        const MixtureOptions& opt = {}) {
  const Grid& g = *grid;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  RealField p(grid);
  const double broad_sigma_sq = std::pow(opt.pedestal_fraction * g.extent(0), 2);
  double volume = 1.0;
  for (std::size_t a = 0; a < g.ndim(); ++a) volume *= g.extent(a);
  for (std::size_t i = 0; i < p.size(); ++i) {
    double v = 1.0;
    for (std::size_t a = 0; a < g.ndim(); ++a)
      v *= detail::periodized_gaussian(g.coord_of_site(i, a), 0.0, broad_sigma_sq, g.extent(a));
    p[i] = opt.pedestal_weight * v + opt.uniform_weight / volume;
  }
  for (int comp = 0; comp < opt.components; ++comp) {
    const double w = 0.5 + unit(rng);
    std::vector<double> c(g.ndim()), s2(g.ndim());
    for (std::size_t a = 0; a < g.ndim(); ++a) {
      c[a] = opt.center_radius * (2.0 * unit(rng) - 1.0);
      const double sig = opt.sigma_min + (opt.sigma_max - opt.sigma_min) * unit(rng);
      s2[a] = sig * sig;
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      double v = w;
      for (std::size_t a = 0; a < g.ndim(); ++a)
        v *= detail::periodized_gaussian(g.coord_of_site(i, a), c[a], s2[a], g.extent(a));
      p[i] += v;
    }
  }
  const double mass = integrate(p);
  for (double& v : p) v /= mass;
  return p;
}

/// Closed-form coherent state of a 1D harmonic trap at time t: a rigidly
/// oscillating Gaussian of the ground-state width. Returned as (p, S); the
/// phase's x-linear slope m*v_c(t) rides in s_linear.
inline HydroState coherent_hydro(const GridPtr& grid, double omega, double x0, double t,
                                 double hbar) {
  const Grid& g = *grid;
  require(g.ndim() == 1, errc::validation, "coherent_hydro: needs a 1D grid");
  const double m = g.metric().masses.at(0);
  const double sigma_sq = hbar / (2.0 * m * omega);
  const double xc = x0 * std::cos(omega * t);
  const double vc = -x0 * omega * std::sin(omega * t);
  RealField p = gaussian_density(grid, {xc}, {sigma_sq});
  RealField s(grid);
  const double s_const =
      -m * vc * xc - 0.25 * m * x0 * x0 * omega * std::sin(2.0 * omega * t) - 0.5 * hbar * omega * t;
  for (double& v : s) v = s_const;
  return make_hydro_state(std::move(p), std::move(s), {m * vc});
}

/// Ground state of the 1D harmonic trap: Gaussian with sigma^2 = hbar/(2 m omega).
inline RealField harmonic_ground_density(const GridPtr& grid, double omega, double hbar) {
  const Grid& g = *grid;
  std::vector<double> c(g.ndim(), 0.0), s2(g.ndim());
  for (std::size_t a = 0; a < g.ndim(); ++a)
    s2[a] = hbar / (2.0 * g.metric().mass_of_axis(a) * omega);
  return gaussian_density(grid, c, s2);
}

} // namespace fisherflow
