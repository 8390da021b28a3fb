#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "fisherflow/action.hpp"
#include "fisherflow/dynamics.hpp"
#include "fisherflow/grid.hpp"
#include "fisherflow/states.hpp"

namespace fisherflow {

inline double norm(const ComplexField& psi) { return total_probability(psi); }
inline double norm(const HydroState& st) { return integrate(st.p); }

namespace detail {

inline double moment_of_density(const RealField& p, std::size_t axis, int order) {
  const Grid& g = *p.grid();
  require(axis < g.ndim(), errc::validation, "moment: axis out of range");
  require(order >= 0 && order <= 2, errc::validation, "moment: order must be 0, 1 or 2");
  if (order == 0) return integrate(p);
  CompensatedSum m1;
  for (std::size_t i = 0; i < p.size(); ++i) m1.add(p[i] * g.coord_of_site(i, axis));
  const double mean = m1.value() * g.cell_volume();
  if (order == 1) return mean;
  CompensatedSum m2;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double dx = g.coord_of_site(i, axis) - mean;
    m2.add(p[i] * dx * dx);
  }
  return m2.value() * g.cell_volume();
}

inline void require_normalized(double n, const std::string& who) {
  require(std::abs(n - 1.0) <= 1e-6, errc::validation,
          who + ": state must be normalized (got " + std::to_string(n) + ")");
}

} // namespace detail

/// Raw mass (order 0), mean (order 1) or central variance (order 2) along an axis.
inline double moment(const ComplexField& psi, std::size_t axis, int order) {
  return detail::moment_of_density(density_of(psi), axis, order);
}
inline double moment(const HydroState& st, std::size_t axis, int order) {
  return detail::moment_of_density(st.p, axis, order);
}
inline double variance(const ComplexField& psi, std::size_t axis) {
  return moment(psi, axis, 2);
}
inline double variance(const HydroState& st, std::size_t axis) { return moment(st, axis, 2); }

/// E = Int p [ (1/2) g dS dS + V ] + lambda I[p], evaluated in either picture.
/// In the wave picture the kinetic spectral integral supplies the classical
/// kinetic term plus (hbar^2/8) I_F, so only the measure's excess over that
/// is added separately.
inline double energy(const ComplexField& psi, const ActionConfig& cfg) {
  cfg.validate();
  const Grid& g = *psi.grid();
  detail::require_normalized(norm(psi), "energy");
  std::vector<std::complex<double>> spec(g.size());
  g.fft().forward_nd(psi.values().data(), spec.data());
  detail::CompensatedSum kin;
  for (std::size_t i = 0; i < spec.size(); ++i) {
    double kk = 0.0;
    for (std::size_t a = 0; a < g.ndim(); ++a) {
      const double k = g.wavenumbers(a)[g.axis_index(i, a)];
      kk += g.metric().inv_mass(a) * k * k;
    }
    kin.add(0.5 * cfg.hbar * cfg.hbar * kk * std::norm(spec[i]));
  }
  // Parseval: sum_x |f|^2 = (1/N) sum_k |fhat|^2
  double e = kin.value() * g.cell_volume() / static_cast<double>(g.size());
  const RealField v = cfg.potential.sample(psi.grid());
  detail::CompensatedSum pv;
  for (std::size_t i = 0; i < v.size(); ++i) pv.add(v[i] * std::norm(psi[i]));
  e += pv.value() * g.cell_volume();

  const double lambda = cfg.lambda_value();
  const double lambda_fisher = cfg.hbar * cfg.hbar / 8.0;
  if (cfg.measure.kind == MeasureSpec::Kind::fisher) {
    if (lambda != lambda_fisher)
      e += (lambda - lambda_fisher) * evaluate(cfg.measure, density_of(psi));
  } else {
    const RealField p = density_of(psi);
    e += lambda * evaluate(cfg.measure, p) -
         lambda_fisher * evaluate(MeasureSpec::fisher(g.metric()), p);
  }
  return e;
}

inline double energy(const HydroState& st, const ActionConfig& cfg) {
  cfg.validate();
  const Grid& g = *st.p.grid();
  detail::require_normalized(norm(st), "energy");
  const std::vector<RealField> ds = grad_s(st);
  detail::CompensatedSum kin;
  for (std::size_t i = 0; i < st.p.size(); ++i) {
    double k = 0.0;
    for (std::size_t a = 0; a < g.ndim(); ++a)
      k += 0.5 * g.metric().inv_mass(a) * ds[a][i] * ds[a][i];
    kin.add(st.p[i] * k);
  }
  double e = kin.value() * g.cell_volume();
  const RealField v = cfg.potential.sample(st.p.grid());
  detail::CompensatedSum pv;
  for (std::size_t i = 0; i < v.size(); ++i) pv.add(v[i] * st.p[i]);
  e += pv.value() * g.cell_volume();
  const double lambda = cfg.lambda_value();
  if (lambda != 0.0) e += lambda * evaluate(cfg.measure, st.p);
  return e;
}

inline double l2_distance(const RealField& a, const RealField& b) {
  require(a.grid()->same_shape(*b.grid()), errc::validation, "l2_distance: grids differ");
  detail::CompensatedSum s;
  for (std::size_t i = 0; i < a.size(); ++i) s.add((a[i] - b[i]) * (a[i] - b[i]));
  return std::sqrt(s.value() * a.grid()->cell_volume());
}

inline double l2_distance(const ComplexField& a, const ComplexField& b) {
  require(a.grid()->same_shape(*b.grid()), errc::validation, "l2_distance: grids differ");
  detail::CompensatedSum s;
  for (std::size_t i = 0; i < a.size(); ++i) s.add(std::norm(a[i] - b[i]));
  return std::sqrt(s.value() * a.grid()->cell_volume());
}

enum class SuperposeConvention {
  normalize_then_compare, // evolve the normalized superposition, undo the scale afterwards
  raw                     // evolve the unnormalized superposition directly
};

/// || U(a psi1 + b psi2) - a U psi1 - b U psi2 || / || a U psi1 + b U psi2 ||.
/// Zero exactly when the evolution is linear. For homogeneous measures the
/// two conventions agree; both are provided because a nonlinear evolution
/// makes the choice observable.
inline double superposition_defect(const ComplexField& psi1, const ComplexField& psi2, double a,
                                   double b, const ActionConfig& cfg, const EvolveConfig& ev,
                                   SuperposeConvention convention =
                                       SuperposeConvention::normalize_then_compare) {
  require(psi1.grid()->same_shape(*psi2.grid()), errc::validation,
          "superposition_defect: grids differ");
  ComplexField sup(psi1.grid());
  for (std::size_t i = 0; i < sup.size(); ++i) sup[i] = a * psi1[i] + b * psi2[i];
  detail::CompensatedSum n2;
  for (const auto& v : sup) n2.add(std::norm(v));
  const double scale = std::sqrt(n2.value() * psi1.grid()->cell_volume());
  require(scale > 0.0, errc::validation, "superposition_defect: superposition vanishes");

  const Trajectory t1 = evolve_wave(psi1, cfg, ev);
  const Trajectory t2 = evolve_wave(psi2, cfg, ev);
  ComplexField u12(psi1.grid());
  if (convention == SuperposeConvention::normalize_then_compare) {
    ComplexField sup_n = sup;
    for (auto& v : sup_n) v /= scale;
    const Trajectory ts = evolve_wave(sup_n, cfg, ev);
    for (std::size_t i = 0; i < u12.size(); ++i) u12[i] = scale * ts.wave.back()[i];
  } else {
    const Trajectory ts = detail::evolve_wave_impl(sup, cfg, ev, /*require_normalized=*/false);
    u12 = ts.wave.back();
  }
  ComplexField lin(psi1.grid());
  for (std::size_t i = 0; i < lin.size(); ++i)
    lin[i] = a * t1.wave.back()[i] + b * t2.wave.back()[i];
  double num = l2_distance(u12, lin);
  detail::CompensatedSum d2;
  for (const auto& v : lin) d2.add(std::norm(v));
  return num / std::sqrt(d2.value() * psi1.grid()->cell_volume());
}

struct FitResult {
  std::string model;
  std::vector<double> coefficients;
  double rel_residual = 0.0;
  bool ok = false;
};

struct ScanResult {
  std::string parameter;
  std::string observable;
  std::vector<double> parameter_values;
  std::vector<double> observable_values;
  FitResult fit;
  std::map<std::string, double> extras;
};

namespace detail {

// Least squares against a small basis; returns coefficients and the
// residual relative to the observable's scale. A fit whose relative
// residual exceeds 5% is marked not ok rather than trusted.
inline FitResult least_squares(const std::vector<std::vector<double>>& basis,
                               const std::vector<double>& y, const std::string& model) {
  const std::size_t nb = basis.size(), n = y.size();
  std::vector<double> m(nb * nb, 0.0), rhs(nb, 0.0);
  for (std::size_t r = 0; r < nb; ++r) {
    for (std::size_t c = 0; c < nb; ++c) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += basis[r][i] * basis[c][i];
      m[r * nb + c] = s;
    }
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += basis[r][i] * y[i];
    rhs[r] = s;
  }
  FitResult fit;
  fit.model = model;
  fit.coefficients = solve_dense(std::move(m), std::move(rhs));
  double scale = 0.0, resid = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double pred = 0.0;
    for (std::size_t r = 0; r < nb; ++r) pred += fit.coefficients[r] * basis[r][i];
    resid += (y[i] - pred) * (y[i] - pred);
    scale = std::max(scale, std::abs(y[i]));
  }
  fit.rel_residual = scale > 0.0 ? std::sqrt(resid / static_cast<double>(n)) / scale : 0.0;
  fit.ok = fit.rel_residual <= 0.05;
  return fit;
}

} // namespace detail

/// Fits sigma^2(t) of a free wave trajectory to a quadratic in t. The
/// quadratic coefficient of a free packet is hbar^2/(4 m^2 sigma0^2).
inline ScanResult dispersion_fit(const Trajectory& traj) {
  require(traj.picture == Trajectory::Picture::wave, errc::validation,
          "dispersion_fit: needs a wave trajectory");
  require(traj.config.potential.is_free(), errc::validation,
          "dispersion_fit: trajectory was not a free evolution");
  require(traj.records() >= 4, errc::validation,
          "dispersion_fit: need at least 4 recorded states");
  ScanResult scan;
  scan.parameter = "time";
  scan.observable = "variance_axis0";
  scan.parameter_values = traj.times;
  for (const auto& psi : traj.wave) scan.observable_values.push_back(variance(psi, 0));
  const std::size_t n = scan.parameter_values.size();
  std::vector<std::vector<double>> basis(3, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const double t = scan.parameter_values[i];
    basis[0][i] = 1.0;
    basis[1][i] = t;
    basis[2][i] = t * t;
  }
  scan.fit = detail::least_squares(basis, scan.observable_values, "c0 + c1 t + c2 t^2");
  require(scan.fit.ok, errc::numerical, "dispersion_fit: fit residual above 5%");
  return scan;
}

/// Composite Galilean element (rotation then boost) applied before vs after
/// evolution; returns the L2 mismatch. Rotation requires a square 2D grid.
inline double galilean_commutator_defect(const ComplexField& psi0, const ActionConfig& cfg,
                                         const EvolveConfig& ev,
                                         const std::vector<double>& velocity,
                                         double rotation_angle = 0.0) {
  const double t_final = ev.dt * static_cast<double>(ev.steps);
  auto transform = [&](const ComplexField& psi, double t) {
    ComplexField out = psi;
    if (rotation_angle != 0.0) out = rotate_field(out, rotation_angle);
    bool any = false;
    for (double v : velocity) any = any || v != 0.0;
    if (any) out = apply_boost(out, velocity, t, cfg.hbar);
    return out;
  };
  const Trajectory before = evolve_wave(transform(psi0, 0.0), cfg, ev);
  const Trajectory base = evolve_wave(psi0, cfg, ev);
  const ComplexField after = transform(base.wave.back(), t_final);
  return l2_distance(before.wave.back(), after);
}

/// Largest-singular-value probe of a 2D wave state seen as a matrix across
/// its two axes: the fraction 1 - s1^2 / ||psi||_F^2 of the squared norm
/// outside the dominant Schmidt mode. Zero for exact product states.
inline double schmidt_defect(const ComplexField& psi) {
  const Grid& g = *psi.grid();
  require(g.ndim() == 2, errc::validation, "schmidt_defect: needs a 2D state");
  const std::size_t n0 = g.points(0), n1 = g.points(1);
  double fro = 0.0;
  for (const auto& v : psi) fro += std::norm(v);
  require(fro > 0.0, errc::validation, "schmidt_defect: zero state");
  std::vector<std::complex<double>> u(n0, {1.0, 0.0}), w(n1);
  double s1_sq = 0.0;
  for (int it = 0; it < 60; ++it) {
    // w = A^H u ; u = A w, with A the n0 x n1 value matrix
    for (std::size_t j = 0; j < n1; ++j) {
      std::complex<double> s = 0.0;
      for (std::size_t i = 0; i < n0; ++i) s += std::conj(psi[i * n1 + j]) * u[i];
      w[j] = s;
    }
    for (std::size_t i = 0; i < n0; ++i) {
      std::complex<double> s = 0.0;
      for (std::size_t j = 0; j < n1; ++j) s += psi[i * n1 + j] * w[j];
      u[i] = s;
    }
    double un = 0.0;
    for (const auto& v : u) un += std::norm(v);
    un = std::sqrt(un);
    if (un == 0.0) break;
    for (auto& v : u) v /= un;
    s1_sq = un; // |A A^H u| converges to s1^2 for normalized u
  }
  const double ratio = std::min(1.0, s1_sq / fro);
  return std::max(0.0, 1.0 - ratio);
}

struct SymmetryScanSpec {
  enum class Kind { orientation, coupling, trap_level };
  enum class Family { anisotropic, higher_derivative };

  Kind kind = Kind::orientation;
  std::vector<double> values; // angles, couplings, or levels

  // orientation probe shape
  double sigma_major_sq = 1.0;
  double sigma_minor_sq = 0.5;

  // coupling / trap-level options
  Family family = Family::higher_derivative;
  double hd_length = 0.1;
  std::vector<double> lengths; // optional length scan at values[0] (exponent in extras)
  double gs_tol = 1e-5;
};

/// Symmetry-breaking energy scans.
///  - orientation: E(theta) of an elongated Gaussian; fitted to
///    A + B cos 2theta + C sin 2theta, amplitude in extras.
///  - coupling: ground-level shift dE(coupling) relative to the pure Fisher
///    ground state; linear-through-origin slope, log-log slope in extras.
///  - trap_level: dE_n at the scan couplings; only the node-free n = 0 level
///    admits the higher-derivative density, others are rejected.
inline ScanResult symmetry_shift_scan(const ActionConfig& base, const GridPtr& grid,
                                      const SymmetryScanSpec& spec) {
  base.validate();
  const Grid& g = *grid;
  require(spec.values.size() >= 1, errc::validation, "symmetry_shift_scan: empty scan");
  ScanResult scan;

  auto family_measure = [&](double coupling) {
    if (spec.family == SymmetryScanSpec::Family::anisotropic) {
      SymMatrix m = SymMatrix::from_metric(g.metric());
      m.at(g.ndim() - 1, g.ndim() - 1) *= 1.0 + coupling;
      return MeasureSpec::anisotropic_fisher(std::move(m));
    }
    return MeasureSpec::higher_derivative(coupling, spec.hd_length, g.metric());
  };

  if (spec.kind == SymmetryScanSpec::Kind::orientation) {
    require(g.ndim() == 2, errc::validation, "symmetry_shift_scan: orientation needs a 2D grid");
    require(spec.values.size() >= 4, errc::validation,
            "symmetry_shift_scan: need at least 4 angles");
    scan.parameter = "orientation_angle";
    scan.observable = "energy";
    const double lambda = base.lambda_value();
    const RealField v = base.potential.sample(grid);
    for (double theta : spec.values) {
      const RealField p = elongated_gaussian_density(grid, spec.sigma_major_sq,
                                                     spec.sigma_minor_sq, theta, 1e-6);
      detail::CompensatedSum pv;
      for (std::size_t i = 0; i < p.size(); ++i) pv.add(v[i] * p[i]);
      const double e = pv.value() * g.cell_volume() + lambda * evaluate(base.measure, p);
      scan.parameter_values.push_back(theta);
      scan.observable_values.push_back(e);
    }
    const std::size_t n = scan.parameter_values.size();
    std::vector<std::vector<double>> basis(3, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
      basis[0][i] = 1.0;
      basis[1][i] = std::cos(2.0 * scan.parameter_values[i]);
      basis[2][i] = std::sin(2.0 * scan.parameter_values[i]);
    }
    scan.fit = detail::least_squares(basis, scan.observable_values, "A + B cos2t + C sin2t");
    scan.extras["cos2theta_amplitude"] =
        std::hypot(scan.fit.coefficients[1], scan.fit.coefficients[2]);
    return scan;
  }

  if (spec.kind == SymmetryScanSpec::Kind::trap_level) {
    for (double lvl : spec.values)
      require(lvl == 0.0, errc::node_breach,
              "symmetry_shift_scan: excited trap levels have nodal densities on which the "
              "higher-derivative measure diverges; only level 0 is admissible");
  } else {
    require(spec.values.size() >= 4, errc::validation,
            "symmetry_shift_scan: need at least 4 couplings");
  }

  scan.parameter = spec.kind == SymmetryScanSpec::Kind::coupling ? "coupling" : "trap_level";
  scan.observable = "ground_level_shift";

  ActionConfig fisher_cfg = base;
  fisher_cfg.measure = MeasureSpec::fisher(g.metric());
  RealField init = harmonic_ground_density(
      grid, fisher_cfg.potential.kind == Potential::Kind::harmonic ? fisher_cfg.potential.omega[0]
                                                                   : 1.0,
      fisher_cfg.hbar);
  {
    // approach the flow's tail balance from above: a trace of uniform
    // density keeps the startup transient clear of the floor
    double volume = 1.0;
    for (std::size_t a = 0; a < g.ndim(); ++a) volume *= g.extent(a);
    for (double& x : init) x = 0.999 * x + 1e-3 / volume;
  }
  const double e0 = ground_state(fisher_cfg, init, spec.gs_tol).energy;

  auto shift_at = [&](double coupling) {
    ActionConfig cfg = base;
    cfg.measure = MeasureSpec::weighted_sum(
        {{1.0, MeasureSpec::fisher(g.metric())}, {1.0, family_measure(coupling)}});
    return ground_state(cfg, init, spec.gs_tol).energy - e0;
  };

  const std::vector<double> couplings =
      spec.kind == SymmetryScanSpec::Kind::coupling ? spec.values : spec.lengths;
  if (spec.kind == SymmetryScanSpec::Kind::coupling) {
    for (double c : spec.values) {
      scan.parameter_values.push_back(c);
      scan.observable_values.push_back(shift_at(c));
    }
    // slope through the origin: dE(0) = 0 by construction
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < scan.parameter_values.size(); ++i) {
      num += scan.parameter_values[i] * scan.observable_values[i];
      den += scan.parameter_values[i] * scan.parameter_values[i];
    }
    scan.fit.model = "slope * coupling";
    scan.fit.coefficients = {num / den};
    double resid = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < scan.parameter_values.size(); ++i) {
      const double pred = scan.fit.coefficients[0] * scan.parameter_values[i];
      resid += (scan.observable_values[i] - pred) * (scan.observable_values[i] - pred);
      scale = std::max(scale, std::abs(scan.observable_values[i]));
    }
    scan.fit.rel_residual =
        scale > 0.0 ? std::sqrt(resid / scan.parameter_values.size()) / scale : 0.0;
    scan.fit.ok = scan.fit.rel_residual <= 0.05;
    // log-log slope between consecutive coupling pairs
    if (scan.parameter_values.size() >= 2) {
      const double d0 = scan.observable_values.front(), d1 = scan.observable_values.back();
      const double c0 = scan.parameter_values.front(), c1 = scan.parameter_values.back();
      if (d0 > 0.0 && d1 > 0.0 && c0 > 0.0 && c1 > 0.0 && c0 != c1)
        scan.extras["loglog_slope"] = std::log(d1 / d0) / std::log(c1 / c0);
    }
  } else {
    scan.parameter_values = spec.values;
    scan.observable_values.assign(spec.values.size(), shift_at(base.measure.epsilon));
  }

  if (spec.lengths.size() >= 2 && spec.kind == SymmetryScanSpec::Kind::coupling &&
      spec.family == SymmetryScanSpec::Family::higher_derivative) {
    std::vector<double> logl, logde;
    for (double len : spec.lengths) {
      ActionConfig cfg = base;
      cfg.measure = MeasureSpec::weighted_sum(
          {{1.0, MeasureSpec::fisher(g.metric())},
           {1.0, MeasureSpec::higher_derivative(spec.values[0], len, g.metric())}});
      const double de = ground_state(cfg, init, spec.gs_tol).energy - e0;
      if (de > 0.0) {
        logl.push_back(std::log(len));
        logde.push_back(std::log(de));
      }
    }
    if (logl.size() >= 2) {
      const double slope = (logde.back() - logde.front()) / (logl.back() - logl.front());
      scan.extras["length_exponent"] = slope;
    }
  }
  (void)couplings;
  return scan;
}

} // namespace fisherflow
